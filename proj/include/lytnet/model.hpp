#pragma once

#include <array>
#include <optional>
#include <variant>
#include <vector>

#include "lytnet/classes.hpp"
#include "lytnet/network_spec.hpp"
#include "lytnet/ops.hpp"
#include "lytnet/tensor.hpp"
#include "lytnet/weights.hpp"

namespace lytnet {

/// Channel gate: x * hard_sigmoid(expand(relu(reduce(avgpool(x))))).
struct SqueezeExcite {
    int channels = 0;
    int reduced = 0;
    std::vector<float> reduce_weights;  // [reduced][channels]
    std::vector<float> reduce_bias;     // [reduced]
    std::vector<float> expand_weights;  // [channels][reduced]
    std::vector<float> expand_bias;     // [channels]
};

/// Per-channel gate values in [0, 1] for `input`.
std::vector<float> squeeze_excite_gates(const Tensor& input, const SqueezeExcite& se);
Tensor squeeze_excite(const Tensor& input, const SqueezeExcite& se);

/// Inverted residual: 1x1 expand (NL) -> kxk depthwise (NL) -> optional SE ->
/// linear 1x1 project, plus the input when stride is 1 and channels match.
struct BottleneckBlock {
    ConvParams expand;
    ConvParams depthwise;
    std::optional<SqueezeExcite> se;
    ConvParams project;
    Activation nonlinearity = Activation::ReLU;
    bool residual = false;

    int in_channels() const noexcept { return expand.in_channels; }
    int out_channels() const noexcept { return project.out_channels; }
};

/// Builds an all-zero block (scales 1) and sets `residual` from the stride rule.
BottleneckBlock make_bottleneck(int in_channels, int kernel, int expansion, int out_channels,
                                bool use_se, Activation nl, int stride, int se_reduction = 4);

Tensor bottleneck_forward(const Tensor& input, const BottleneckBlock& block, int workers = 1);

/// Two-headed network output.
struct Prediction {
    std::array<float, kNumClasses> logits{};
    std::array<float, kNumCoords> coords{};  // [xs, ys, xe, ye], normalized, unclamped

    ClassProbabilities probabilities() const;
    ClassId predicted_class() const;
    Coords coordinates() const;

    bool operator==(const Prediction&) const = default;
};

struct ConvLayer {
    ConvParams conv;
    Activation nonlinearity = Activation::Identity;
};
struct MaxPoolLayer {};
struct AvgPoolLayer {};
struct FullyConnectedLayer {
    std::vector<float> weights;  // [out][in]
    std::vector<float> bias;
};

using Layer = std::variant<ConvLayer, MaxPoolLayer, BottleneckBlock, AvgPoolLayer, FullyConnectedLayer>;

/// Executable LytNetV2: a validated spec bound to an immutable weight set.
/// forward() is const and may be called concurrently.
class Model {
public:
    /// Throws ValidationError carrying WeightReport::describe() if the weights
    /// do not match the spec exactly.
    static Model build(const NetworkSpec& spec, const WeightFile& weights);

    /// `input` is (3, H, W) with pixel values in [0, 1]; the optional input
    /// normalization from the weight header is applied first. If `trace` is
    /// non-null it receives the output shape of every row.
    Prediction forward(const Tensor& input, int workers = 1,
                       std::vector<Shape>* trace = nullptr) const;

    const NetworkSpec& spec() const noexcept { return spec_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const std::optional<InputNormalization>& normalization() const noexcept { return normalization_; }

    /// Applies one row to `x`. Errors are rethrown as LayerError naming the row.
    Tensor apply_layer(std::size_t index, const Tensor& x, int workers = 1) const;

private:
    Model() = default;

    NetworkSpec spec_;
    std::vector<Layer> layers_;
    std::optional<InputNormalization> normalization_;
};

}  // namespace lytnet
