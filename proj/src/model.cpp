#include "lytnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "lytnet/error.hpp"

namespace lytnet {

namespace {

ConvParams conv_from_weights(const WeightFile& weights, const std::string& name, ConvParams params) {
    params.weights = weights.tensors.at(name).data;
    params.scale = weights.tensors.at(name + ".scale").data;
    params.shift = weights.tensors.at(name + ".shift").data;
    if (const auto it = weights.tensors.find(name + ".bias"); it != weights.tensors.end()) {
        params.bias = it->second.data;
    }
    return params;
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::vector<float> squeeze_excite_gates(const Tensor& input, const SqueezeExcite& se) {
    if (input.channels() != se.channels) {
        throw ConfigurationError("squeeze_excite expects " + std::to_string(se.channels) +
                                 " channels, got " + std::to_string(input.channels()));
    }
    const Tensor pooled = global_avgpool(input);
    std::vector<float> hidden = fully_connected(pooled.data(), se.reduce_weights, se.reduce_bias);
    for (float& v : hidden) v = activate(v, Activation::ReLU);
    if (static_cast<int>(hidden.size()) != se.reduced) {
        throw ConfigurationError("squeeze_excite reduce output does not match reduced width");
    }
    std::vector<float> gates = fully_connected(hidden, se.expand_weights, se.expand_bias);
    if (static_cast<int>(gates.size()) != se.channels) {
        throw ConfigurationError("squeeze_excite expand output does not match channel count");
    }
    for (float& g : gates) g = activate(g, Activation::HardSigmoid);
    return gates;
}

Tensor squeeze_excite(const Tensor& input, const SqueezeExcite& se) {
    const std::vector<float> gates = squeeze_excite_gates(input, se);
    Tensor output = input;
    for (int c = 0; c < output.channels(); ++c) {
        for (float& v : output.channel(c)) v *= gates[static_cast<std::size_t>(c)];
    }
    return output;
}

BottleneckBlock make_bottleneck(int in_channels, int kernel, int expansion, int out_channels,
                                bool use_se, Activation nl, int stride, int se_reduction) {
    BottleneckBlock block;
    block.expand = ConvParams::standard(in_channels, expansion, 1, 1);
    block.depthwise = ConvParams::depthwise_conv(expansion, kernel, stride);
    block.project = ConvParams::standard(expansion, out_channels, 1, 1);
    if (use_se) {
        SqueezeExcite se;
        se.channels = expansion;
        se.reduced = expansion / se_reduction;
        se.reduce_weights.assign(static_cast<std::size_t>(se.reduced) * expansion, 0.0f);
        se.reduce_bias.assign(static_cast<std::size_t>(se.reduced), 0.0f);
        se.expand_weights.assign(static_cast<std::size_t>(se.reduced) * expansion, 0.0f);
        se.expand_bias.assign(static_cast<std::size_t>(expansion), 0.0f);
        block.se = std::move(se);
    }
    block.nonlinearity = nl;
    block.residual = stride == 1 && in_channels == out_channels;
    return block;
}

Tensor bottleneck_forward(const Tensor& input, const BottleneckBlock& block, int workers) {
    if (input.channels() != block.in_channels()) {
        throw ConfigurationError("bottleneck expects " + std::to_string(block.in_channels()) +
                                 " input channels, got " + std::to_string(input.channels()));
    }
    Tensor x = conv2d(input, block.expand, workers);
    activate_inplace(x, block.nonlinearity);
    x = depthwise_conv2d(x, block.depthwise, workers);
    activate_inplace(x, block.nonlinearity);
    if (block.se) x = squeeze_excite(x, *block.se);
    x = conv2d(x, block.project, workers);
    if (block.residual) {
        if (x.shape() != input.shape()) {
            throw ConfigurationError("residual bottleneck changes shape " + to_string(input.shape()) +
                                     " -> " + to_string(x.shape()));
        }
        auto out = x.data();
        const auto in = input.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
    }
    return x;
}

ClassProbabilities Prediction::probabilities() const {
    const auto probs = softmax(std::span<const float>(logits));
    ClassProbabilities out{};
    std::copy(probs.begin(), probs.end(), out.begin());
    return out;
}

ClassId Prediction::predicted_class() const {
    // First maximum wins on ties.
    return static_cast<ClassId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

Coords Prediction::coordinates() const {
    Coords out{};
    std::copy(coords.begin(), coords.end(), out.begin());
    return out;
}

Model Model::build(const NetworkSpec& spec, const WeightFile& weights) {
    const WeightReport report = validate_weights(weights, spec);
    if (!report.ok()) throw ValidationError("weights do not match network spec:\n" + report.describe());
    const auto shapes = propagate_shapes(spec);

    Model model;
    model.spec_ = spec;
    model.normalization_ = weights.header.normalization;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& row = spec.layers[i];
        const int in = shapes[i].input.channels;
        const std::string p = "layer" + std::to_string(i + 1) + ".";
        switch (row.kind) {
            case LayerKind::Conv2d:
                model.layers_.emplace_back(ConvLayer{
                    conv_from_weights(weights, p + "conv",
                                      ConvParams::standard(in, row.out_channels, row.kernel, row.stride)),
                    row.nonlinearity});
                break;
            case LayerKind::MaxPool:
                model.layers_.emplace_back(MaxPoolLayer{});
                break;
            case LayerKind::AvgPool:
                model.layers_.emplace_back(AvgPoolLayer{});
                break;
            case LayerKind::Bottleneck: {
                BottleneckBlock block = make_bottleneck(in, row.kernel, row.expansion, row.out_channels,
                                                        row.use_se, row.nonlinearity, row.stride,
                                                        spec.se_reduction);
                block.expand = conv_from_weights(weights, p + "expand", block.expand);
                block.depthwise = conv_from_weights(weights, p + "dw", block.depthwise);
                block.project = conv_from_weights(weights, p + "project", block.project);
                if (block.se) {
                    block.se->reduce_weights = weights.tensors.at(p + "se_reduce").data;
                    block.se->reduce_bias = weights.tensors.at(p + "se_reduce.bias").data;
                    block.se->expand_weights = weights.tensors.at(p + "se_expand").data;
                    block.se->expand_bias = weights.tensors.at(p + "se_expand.bias").data;
                }
                if (block.residual != shapes[i].residual) {
                    throw LayerError(static_cast<int>(i) + 1, "residual flag disagrees with stride rule");
                }
                model.layers_.emplace_back(std::move(block));
                break;
            }
            case LayerKind::FullyConnected:
                model.layers_.emplace_back(FullyConnectedLayer{weights.tensors.at(p + "fc").data,
                                                               weights.tensors.at(p + "fc.bias").data});
                break;
        }
    }
    return model;
}

Tensor Model::apply_layer(std::size_t index, const Tensor& x, int workers) const {
    const int row = static_cast<int>(index) + 1;
    try {
        return std::visit(
            Overloaded{
                [&](const ConvLayer& layer) {
                    Tensor y = conv2d(x, layer.conv, workers);
                    activate_inplace(y, layer.nonlinearity);
                    return y;
                },
                [&](const MaxPoolLayer&) { return maxpool2x2(x); },
                [&](const AvgPoolLayer&) { return global_avgpool(x); },
                [&](const BottleneckBlock& block) { return bottleneck_forward(x, block, workers); },
                [&](const FullyConnectedLayer& layer) {
                    if (x.height() != 1 || x.width() != 1) {
                        throw ConfigurationError("FC input must be (n,1,1), got " + to_string(x.shape()));
                    }
                    return Tensor::vector(fully_connected(x.data(), layer.weights, layer.bias));
                },
            },
            layers_.at(index));
    } catch (const LayerError&) {
        throw;
    } catch (const ConfigurationError& e) {
        throw LayerError(row, std::string(to_string(spec_.layers.at(index).kind)) + ": " + e.what());
    } catch (const ValidationError& e) {
        throw LayerError(row, std::string(to_string(spec_.layers.at(index).kind)) + ": " + e.what());
    }
}

Prediction Model::forward(const Tensor& input, int workers, std::vector<Shape>* trace) const {
    if (input.shape() != spec_.input) {
        throw LayerError(1, "network input must be " + to_string(spec_.input) + ", got " +
                                to_string(input.shape()));
    }
    Tensor x = input;
    if (normalization_) {
        for (int c = 0; c < x.channels(); ++c) {
            const float mean = normalization_->mean[static_cast<std::size_t>(c)];
            const float inv = 1.0f / normalization_->stddev[static_cast<std::size_t>(c)];
            for (float& v : x.channel(c)) v = (v - mean) * inv;
        }
    }
    if (trace) trace->clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = apply_layer(i, x, workers);
        if (trace) trace->push_back(x.shape());
    }
    const int expected = spec_.num_classes + spec_.num_coords;
    if (static_cast<int>(x.size()) != expected) {
        throw LayerError(static_cast<int>(layers_.size()),
                         "head produced " + std::to_string(x.size()) + " values, expected " +
                             std::to_string(expected));
    }
    Prediction prediction;
    const auto out = x.data();
    std::copy_n(out.begin(), kNumClasses, prediction.logits.begin());
    std::copy_n(out.begin() + kNumClasses, kNumCoords, prediction.coords.begin());
    return prediction;
}

}  // namespace lytnet
