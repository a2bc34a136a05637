#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "lytnet/classes.hpp"

namespace lytnet {

struct LossConfig {
    double lambda = 0.4;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(p[truth], 1e-12)). `probabilities` must sum to 1 within 1e-6.
double cross_entropy(std::span<const double> probabilities, int truth_class);

/// Mean of squared differences over all entries.
double mse(std::span<const double> predicted, std::span<const double> truth);

/// lambda * classification + (1 - lambda) * regression; lambda must lie in [0, 1].
double combine_losses(double classification, double regression, const LossConfig& config);

double combined_loss(const ClassProbabilities& probabilities, const Coords& predicted,
                     ClassId truth_class, const Coords& truth, const LossConfig& config = {});

struct DirectionVector {
    double dx = 0.0;
    double dy = 0.0;
};

/// Endpoint minus startpoint.
DirectionVector direction_of(const Coords& coords);

/// Unsigned angle in degrees, [0, 180]. The cosine is clamped to [-1, 1].
/// Throws UndefinedDirectionError if either vector has zero length.
double angle_between_deg(DirectionVector a, DirectionVector b);
double angle_error_deg(const Coords& predicted, const Coords& truth);

struct EndpointErrors {
    double startpoint = 0.0;
    double endpoint = 0.0;
};

EndpointErrors endpoint_errors(const Coords& predicted, const Coords& truth);

/// Countdown classes become "none"; everything else passes through.
ClassId ptlr_remap(ClassId predicted);

struct EvalSample {
    ClassProbabilities probabilities{};
    Coords coords{};

    /// argmax of probabilities, first index on ties.
    ClassId predicted_class() const;
};

struct GroundTruth {
    ClassId cls = ClassId::None;
    Coords coords{};
};

struct ClassMetrics {
    int support = 0;    // ground-truth count
    int predicted = 0;  // predicted-positive count
    std::optional<double> precision;  // undefined when predicted == 0
    std::optional<double> recall;     // undefined when support == 0
    std::optional<double> f1;         // undefined when either is undefined
};

struct EvalOptions {
    bool remap_ptlr = false;
    LossConfig loss{};
};

struct EvalReport {
    std::size_t samples = 0;
    double accuracy = 0.0;
    /// confusion[truth][predicted]
    std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};
    std::array<ClassMetrics, kNumClasses> per_class{};
    /// Means over classes whose value is defined.
    std::optional<double> macro_precision;
    std::optional<double> macro_recall;
    std::optional<double> macro_f1;
    /// Coordinate metrics over samples where both directions are defined.
    std::size_t direction_samples = 0;
    std::optional<double> mean_angle_error_deg;
    std::optional<double> mean_startpoint_error;
    std::optional<double> mean_endpoint_error;
    double mean_loss = 0.0;
    bool ptlr_remapped = false;
};

/// Throws ValidationError on length mismatch or an empty set.
EvalReport eval_report(std::span<const EvalSample> predictions, std::span<const GroundTruth> truths,
                       const EvalOptions& options = {});

/// Pretty-printed JSON document; undefined metrics are null.
std::string to_json(const EvalReport& report);

}  // namespace lytnet
