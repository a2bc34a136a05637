#include "lytnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lytnet/error.hpp"
#include "lytnet/parallel.hpp"

namespace lytnet {

namespace {

bool all_finite(std::span<const float> values) {
    return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

void check_per_channel(const std::vector<float>& values, int channels, const char* what) {
    if (!values.empty() && static_cast<int>(values.size()) != channels) {
        throw ConfigurationError(std::string("conv ") + what + " has " +
                                 std::to_string(values.size()) + " entries, expected " +
                                 std::to_string(channels));
    }
    if (!all_finite(values)) {
        throw ValidationError(std::string("conv ") + what + " contains non-finite values");
    }
}

float finalize(float acc, const ConvParams& p, int o) noexcept {
    if (!p.bias.empty()) acc += p.bias[static_cast<std::size_t>(o)];
    if (!p.scale.empty()) acc *= p.scale[static_cast<std::size_t>(o)];
    if (!p.shift.empty()) acc += p.shift[static_cast<std::size_t>(o)];
    return acc;
}

// First/last output column whose input column ox*stride - pad + kx is in [0, width).
std::pair<int, int> valid_columns(int out_width, int in_width, int stride, int pad, int kx) {
    const int lo_num = pad - kx;
    int first = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
    const int hi_num = in_width - 1 + pad - kx;
    int last = hi_num < 0 ? -1 : std::min(out_width - 1, hi_num / stride);
    return {first, last};
}

// Accumulates one kernel plane into one output plane. Per output element the
// terms arrive in the caller's (input channel, ky, kx) order.
void accumulate_plane(std::span<float> out, int out_h, int out_w, std::span<const float> in,
                      int in_h, int in_w, std::span<const float> kernel, int k_h, int k_w,
                      int stride, int pad) {
    for (int ky = 0; ky < k_h; ++ky) {
        for (int kx = 0; kx < k_w; ++kx) {
            const float w = kernel[static_cast<std::size_t>(ky * k_w + kx)];
            const auto [x0, x1] = valid_columns(out_w, in_w, stride, pad, kx);
            if (x0 > x1) continue;
            for (int oy = 0; oy < out_h; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= in_h) continue;
                float* dst = out.data() + static_cast<std::size_t>(oy) * out_w;
                const float* row = in.data() + static_cast<std::size_t>(iy) * in_w;
                const int offset = kx - pad;
                if (stride == 1) {
                    for (int ox = x0; ox <= x1; ++ox) dst[ox] += row[ox + offset] * w;
                } else {
                    for (int ox = x0; ox <= x1; ++ox) dst[ox] += row[ox * stride + offset] * w;
                }
            }
        }
    }
}

}  // namespace

ConvParams ConvParams::standard(int in_channels, int out_channels, int kernel, int stride) {
    ConvParams p;
    p.kernel_h = p.kernel_w = kernel;
    p.stride = stride;
    p.padding = kernel / 2;
    p.in_channels = in_channels;
    p.out_channels = out_channels;
    p.weights.assign(p.weight_count(), 0.0f);
    return p;
}

ConvParams ConvParams::depthwise_conv(int channels, int kernel, int stride) {
    ConvParams p;
    p.kernel_h = p.kernel_w = kernel;
    p.stride = stride;
    p.padding = kernel / 2;
    p.in_channels = p.out_channels = channels;
    p.depthwise = true;
    p.weights.assign(p.weight_count(), 0.0f);
    return p;
}

std::size_t ConvParams::weight_count() const noexcept {
    const auto taps = static_cast<std::size_t>(kernel_h) * static_cast<std::size_t>(kernel_w);
    if (depthwise) return static_cast<std::size_t>(out_channels) * taps;
    return static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels) * taps;
}

int ConvParams::output_height(int input_height) const noexcept {
    return (input_height + 2 * padding - kernel_h) / stride + 1;
}

int ConvParams::output_width(int input_width) const noexcept {
    return (input_width + 2 * padding - kernel_w) / stride + 1;
}

void check_conv(const Shape& input, const ConvParams& p) {
    if (p.kernel_h < 1 || p.kernel_w < 1) throw ConfigurationError("conv kernel must be >= 1");
    if (p.stride != 1 && p.stride != 2) {
        throw ConfigurationError("conv stride must be 1 or 2, got " + std::to_string(p.stride));
    }
    if (p.padding < 0) throw ConfigurationError("conv padding must be >= 0");
    if (p.in_channels < 1 || p.out_channels < 1) {
        throw ConfigurationError("conv channel counts must be >= 1");
    }
    if (p.depthwise && p.in_channels != p.out_channels) {
        throw ConfigurationError("depthwise conv needs out_channels == in_channels, got " +
                                 std::to_string(p.in_channels) + " -> " +
                                 std::to_string(p.out_channels));
    }
    if (input.channels != p.in_channels) {
        throw ConfigurationError("conv expects " + std::to_string(p.in_channels) +
                                 " input channels, got " + std::to_string(input.channels));
    }
    if (p.weights.size() != p.weight_count()) {
        throw ConfigurationError("conv weight block has " + std::to_string(p.weights.size()) +
                                 " elements, expected " + std::to_string(p.weight_count()));
    }
    if (p.output_height(input.height) < 1 || p.output_width(input.width) < 1) {
        throw ConfigurationError("conv kernel larger than padded input " + to_string(input));
    }
    if (!all_finite(p.weights)) throw ValidationError("conv weights contain non-finite values");
    check_per_channel(p.bias, p.out_channels, "bias");
    check_per_channel(p.scale, p.out_channels, "scale");
    check_per_channel(p.shift, p.out_channels, "shift");
}

Tensor conv2d(const Tensor& input, const ConvParams& params, int workers) {
    if (params.depthwise) return depthwise_conv2d(input, params, workers);
    check_conv(input.shape(), params);
    const int out_h = params.output_height(input.height());
    const int out_w = params.output_width(input.width());
    Tensor output(Shape{params.out_channels, out_h, out_w});
    const std::size_t taps = static_cast<std::size_t>(params.kernel_h) * params.kernel_w;
    const std::span<const float> weights(params.weights);

    parallel_for(params.out_channels, workers, [&](int o) {
        auto out = output.channel(o);
        for (int i = 0; i < params.in_channels; ++i) {
            const auto kernel =
                weights.subspan((static_cast<std::size_t>(o) * params.in_channels + i) * taps, taps);
            accumulate_plane(out, out_h, out_w, input.channel(i), input.height(), input.width(),
                             kernel, params.kernel_h, params.kernel_w, params.stride,
                             params.padding);
        }
        for (float& v : out) v = finalize(v, params, o);
    });
    return output;
}

Tensor depthwise_conv2d(const Tensor& input, const ConvParams& params, int workers) {
    if (!params.depthwise) {
        throw ConfigurationError("depthwise_conv2d called with standard conv params");
    }
    check_conv(input.shape(), params);
    const int out_h = params.output_height(input.height());
    const int out_w = params.output_width(input.width());
    Tensor output(Shape{params.out_channels, out_h, out_w});
    const std::size_t taps = static_cast<std::size_t>(params.kernel_h) * params.kernel_w;
    const std::span<const float> weights(params.weights);

    parallel_for(params.out_channels, workers, [&](int c) {
        auto out = output.channel(c);
        accumulate_plane(out, out_h, out_w, input.channel(c), input.height(), input.width(),
                         weights.subspan(static_cast<std::size_t>(c) * taps, taps),
                         params.kernel_h, params.kernel_w, params.stride, params.padding);
        for (float& v : out) v = finalize(v, params, c);
    });
    return output;
}

Tensor naive_conv2d(const Tensor& input, const ConvParams& p) {
    check_conv(input.shape(), p);
    const int out_h = p.output_height(input.height());
    const int out_w = p.output_width(input.width());
    Tensor output(Shape{p.out_channels, out_h, out_w});
    for (int o = 0; o < p.out_channels; ++o) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float acc = 0.0f;
                const int first = p.depthwise ? o : 0;
                const int last = p.depthwise ? o + 1 : p.in_channels;
                for (int i = first; i < last; ++i) {
                    for (int ky = 0; ky < p.kernel_h; ++ky) {
                        for (int kx = 0; kx < p.kernel_w; ++kx) {
                            const int iy = oy * p.stride - p.padding + ky;
                            const int ix = ox * p.stride - p.padding + kx;
                            if (iy < 0 || iy >= input.height() || ix < 0 || ix >= input.width()) {
                                continue;
                            }
                            const std::size_t widx =
                                p.depthwise
                                    ? (static_cast<std::size_t>(o) * p.kernel_h + ky) * p.kernel_w + kx
                                    : ((static_cast<std::size_t>(o) * p.in_channels + i) * p.kernel_h +
                                       ky) * p.kernel_w + kx;
                            acc += input.at(i, iy, ix) * p.weights[widx];
                        }
                    }
                }
                output.at(o, oy, ox) = finalize(acc, p, o);
            }
        }
    }
    return output;
}

Tensor maxpool2x2(const Tensor& input) {
    if (input.height() % 2 != 0 || input.width() % 2 != 0) {
        throw ValidationError("maxpool2x2 needs even spatial dims, got " + to_string(input.shape()));
    }
    const int out_h = input.height() / 2;
    const int out_w = input.width() / 2;
    Tensor output(Shape{input.channels(), out_h, out_w});
    for (int c = 0; c < input.channels(); ++c) {
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                output.at(c, y, x) =
                    std::max(std::max(input.at(c, 2 * y, 2 * x), input.at(c, 2 * y, 2 * x + 1)),
                             std::max(input.at(c, 2 * y + 1, 2 * x), input.at(c, 2 * y + 1, 2 * x + 1)));
            }
        }
    }
    return output;
}

Tensor global_avgpool(const Tensor& input) {
    Tensor output(Shape{input.channels(), 1, 1});
    const double count = static_cast<double>(input.shape().plane());
    for (int c = 0; c < input.channels(); ++c) {
        double sum = 0.0;
        for (float v : input.channel(c)) sum += v;
        output.at(c, 0, 0) = static_cast<float>(sum / count);
    }
    return output;
}

std::string_view to_string(Activation activation) {
    switch (activation) {
        case Activation::Identity: return "identity";
        case Activation::ReLU: return "RE";
        case Activation::ReLU6: return "RE6";
        case Activation::HardSwish: return "HS";
        case Activation::HardSigmoid: return "HSIG";
    }
    return "?";
}

float activate(float x, Activation activation) noexcept {
    const auto relu6f = [](float v) { return std::min(std::max(v, 0.0f), 6.0f); };
    switch (activation) {
        case Activation::Identity: return x;
        case Activation::ReLU: return std::max(x, 0.0f);
        case Activation::ReLU6: return relu6f(x);
        case Activation::HardSwish: return x * relu6f(x + 3.0f) / 6.0f;
        case Activation::HardSigmoid: return relu6f(x + 3.0f) / 6.0f;
    }
    return x;
}

void activate_inplace(Tensor& tensor, Activation activation) noexcept {
    if (activation == Activation::Identity) return;
    for (float& v : tensor.data()) v = activate(v, activation);
}

Tensor relu(Tensor input) {
    activate_inplace(input, Activation::ReLU);
    return input;
}

Tensor relu6(Tensor input) {
    activate_inplace(input, Activation::ReLU6);
    return input;
}

Tensor hard_swish(Tensor input) {
    activate_inplace(input, Activation::HardSwish);
    return input;
}

Tensor hard_sigmoid(Tensor input) {
    activate_inplace(input, Activation::HardSigmoid);
    return input;
}

std::vector<float> fully_connected(std::span<const float> input, std::span<const float> weights,
                                   std::span<const float> bias) {
    const std::size_t out = bias.size();
    if (out == 0 || weights.size() != out * input.size()) {
        throw ConfigurationError("fully_connected: weights have " + std::to_string(weights.size()) +
                                 " elements, expected " + std::to_string(out) + "x" +
                                 std::to_string(input.size()));
    }
    std::vector<float> result(out);
    for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        const float* row = weights.data() + o * input.size();
        for (std::size_t i = 0; i < input.size(); ++i) {
            acc += static_cast<double>(row[i]) * static_cast<double>(input[i]);
        }
        result[o] = static_cast<float>(acc + bias[o]);
    }
    return result;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw ValidationError("softmax of an empty vector");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - peak);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return probs;
}

std::vector<double> softmax(std::span<const float> logits) {
    const std::vector<double> wide(logits.begin(), logits.end());
    return softmax(std::span<const double>(wide));
}

}  // namespace lytnet
