#include "lytnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "lytnet/error.hpp"

namespace lytnet {

namespace {

std::optional<double> mean_of_defined(const std::array<ClassMetrics, kNumClasses>& metrics,
                                      std::optional<double> ClassMetrics::*field) {
    double sum = 0.0;
    int count = 0;
    for (const auto& m : metrics) {
        if (const auto& v = m.*field) {
            sum += *v;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

double cross_entropy(std::span<const double> probabilities, int truth_class) {
    const ClassId truth = class_from_index(truth_class);
    if (probabilities.size() != kNumClasses) {
        throw ValidationError("cross_entropy needs 5 probabilities, got " +
                              std::to_string(probabilities.size()));
    }
    const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-6 ||
        std::any_of(probabilities.begin(), probabilities.end(), [](double p) { return !(p >= 0.0); })) {
        throw ValidationError("cross_entropy probabilities must be a simplex point");
    }
    return -std::log(std::max(probabilities[static_cast<std::size_t>(index_of(truth))], kProbabilityFloor));
}

double mse(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ConfigurationError("mse needs equal, nonempty lengths");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = truth[i] - predicted[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predicted.size());
}

double combine_losses(double classification, double regression, const LossConfig& config) {
    if (!(config.lambda >= 0.0 && config.lambda <= 1.0)) {
        throw ConfigurationError("loss lambda must lie in [0, 1], got " + std::to_string(config.lambda));
    }
    return config.lambda * classification + (1.0 - config.lambda) * regression;
}

double combined_loss(const ClassProbabilities& probabilities, const Coords& predicted,
                     ClassId truth_class, const Coords& truth, const LossConfig& config) {
    return combine_losses(cross_entropy(probabilities, index_of(truth_class)), mse(predicted, truth),
                          config);
}

DirectionVector direction_of(const Coords& c) { return {c[2] - c[0], c[3] - c[1]}; }

double angle_between_deg(DirectionVector a, DirectionVector b) {
    const double na = std::hypot(a.dx, a.dy);
    const double nb = std::hypot(b.dx, b.dy);
    if (na == 0.0 || nb == 0.0) throw UndefinedDirectionError("direction vector has zero length");
    const double cosine = std::clamp((a.dx * b.dx + a.dy * b.dy) / (na * nb), -1.0, 1.0);
    return std::acos(cosine) * 180.0 / std::numbers::pi;
}

double angle_error_deg(const Coords& predicted, const Coords& truth) {
    return angle_between_deg(direction_of(predicted), direction_of(truth));
}

EndpointErrors endpoint_errors(const Coords& p, const Coords& t) {
    return {std::hypot(p[0] - t[0], p[1] - t[1]), std::hypot(p[2] - t[2], p[3] - t[3])};
}

ClassId ptlr_remap(ClassId predicted) {
    if (predicted == ClassId::CountdownGreen || predicted == ClassId::CountdownBlank) {
        return ClassId::None;
    }
    return predicted;
}

ClassId EvalSample::predicted_class() const {
    return static_cast<ClassId>(std::max_element(probabilities.begin(), probabilities.end()) -
                                probabilities.begin());
}

EvalReport eval_report(std::span<const EvalSample> predictions, std::span<const GroundTruth> truths,
                       const EvalOptions& options) {
    if (predictions.size() != truths.size()) {
        throw ValidationError("eval_report: " + std::to_string(predictions.size()) +
                              " predictions vs " + std::to_string(truths.size()) + " labels");
    }
    if (predictions.empty()) throw ValidationError("eval_report: empty sample set");

    EvalReport report;
    report.samples = predictions.size();
    report.ptlr_remapped = options.remap_ptlr;
    double angle_sum = 0.0;
    double start_sum = 0.0;
    double end_sum = 0.0;
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        ClassId predicted = predictions[i].predicted_class();
        if (options.remap_ptlr) predicted = ptlr_remap(predicted);
        ++report.confusion[static_cast<std::size_t>(index_of(truths[i].cls))]
                          [static_cast<std::size_t>(index_of(predicted))];

        loss_sum += combined_loss(predictions[i].probabilities, predictions[i].coords, truths[i].cls,
                                  truths[i].coords, options.loss);

        const auto p = direction_of(predictions[i].coords);
        const auto t = direction_of(truths[i].coords);
        if ((p.dx == 0.0 && p.dy == 0.0) || (t.dx == 0.0 && t.dy == 0.0)) continue;
        ++report.direction_samples;
        angle_sum += angle_between_deg(p, t);
        const auto errors = endpoint_errors(predictions[i].coords, truths[i].coords);
        start_sum += errors.startpoint;
        end_sum += errors.endpoint;
    }

    int correct = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        ClassMetrics& m = report.per_class[uc];
        const int true_positive = report.confusion[uc][uc];
        correct += true_positive;
        for (int k = 0; k < kNumClasses; ++k) {
            m.support += report.confusion[uc][static_cast<std::size_t>(k)];
            m.predicted += report.confusion[static_cast<std::size_t>(k)][uc];
        }
        if (m.predicted > 0) m.precision = static_cast<double>(true_positive) / m.predicted;
        if (m.support > 0) m.recall = static_cast<double>(true_positive) / m.support;
        if (m.precision && m.recall) {
            const double denom = *m.precision + *m.recall;
            m.f1 = denom > 0.0 ? 2.0 * *m.precision * *m.recall / denom : 0.0;
        }
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.samples);
    report.macro_precision = mean_of_defined(report.per_class, &ClassMetrics::precision);
    report.macro_recall = mean_of_defined(report.per_class, &ClassMetrics::recall);
    report.macro_f1 = mean_of_defined(report.per_class, &ClassMetrics::f1);
    if (report.direction_samples > 0) {
        const double n = static_cast<double>(report.direction_samples);
        report.mean_angle_error_deg = angle_sum / n;
        report.mean_startpoint_error = start_sum / n;
        report.mean_endpoint_error = end_sum / n;
    }
    report.mean_loss = loss_sum / static_cast<double>(report.samples);
    return report;
}

std::string to_json(const EvalReport& report) {
    using json = nlohmann::ordered_json;
    json j;
    j["samples"] = report.samples;
    j["accuracy"] = report.accuracy;
    j["ptlr_remapped"] = report.ptlr_remapped;
    json order = json::array();
    for (ClassId id : kAllClasses) order.push_back(std::string(class_name(id)));
    j["class_order"] = order;
    j["confusion"] = report.confusion;
    json per_class = json::object();
    for (ClassId id : kAllClasses) {
        const ClassMetrics& m = report.per_class[static_cast<std::size_t>(index_of(id))];
        per_class[std::string(class_name(id))] = {{"support", m.support},
                                                  {"predicted", m.predicted},
                                                  {"precision", optional_json(m.precision)},
                                                  {"recall", optional_json(m.recall)},
                                                  {"f1", optional_json(m.f1)}};
    }
    j["per_class"] = per_class;
    j["macro"] = {{"precision", optional_json(report.macro_precision)},
                  {"recall", optional_json(report.macro_recall)},
                  {"f1", optional_json(report.macro_f1)}};
    j["direction_samples"] = report.direction_samples;
    j["mean_angle_error_deg"] = optional_json(report.mean_angle_error_deg);
    j["mean_startpoint_error"] = optional_json(report.mean_startpoint_error);
    j["mean_endpoint_error"] = optional_json(report.mean_endpoint_error);
    j["mean_loss"] = report.mean_loss;
    return j.dump(2);
}

}  // namespace lytnet
