#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "lytnet/tensor.hpp"

namespace lytnet {

/// Convolution hyper-parameters plus weights.
///
/// Standard weights are laid out [out][in][kh][kw]; depthwise weights are
/// [channel][kh][kw] with out_channels == in_channels. Each output element is
///
///     y = (sum(x * w) + bias[o]) * scale[o] + shift[o]
///
/// where empty bias/scale/shift vectors mean 0/1/0 (scale and shift carry a
/// batch norm folded at export time).
struct ConvParams {
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;
    int in_channels = 1;
    int out_channels = 1;
    bool depthwise = false;
    std::vector<float> weights;
    std::vector<float> bias;
    std::vector<float> scale;
    std::vector<float> shift;

    /// Zero-weight standard conv with "same" padding (pad = k / 2).
    static ConvParams standard(int in_channels, int out_channels, int kernel, int stride);
    /// Zero-weight depthwise conv with "same" padding.
    static ConvParams depthwise_conv(int channels, int kernel, int stride);

    std::size_t weight_count() const noexcept;
    int output_height(int input_height) const noexcept;
    int output_width(int input_width) const noexcept;
};

/// Throws ConfigurationError/ValidationError if params are inconsistent with
/// an input of `input` shape, or hold non-finite values.
void check_conv(const Shape& input, const ConvParams& params);

Tensor conv2d(const Tensor& input, const ConvParams& params, int workers = 1);
Tensor depthwise_conv2d(const Tensor& input, const ConvParams& params, int workers = 1);

/// Textbook nested-loop convolution (standard or depthwise per params.depthwise).
/// Reference for tests and `inspect`; not used on the inference path.
Tensor naive_conv2d(const Tensor& input, const ConvParams& params);

Tensor maxpool2x2(const Tensor& input);
Tensor global_avgpool(const Tensor& input);

enum class Activation { Identity, ReLU, ReLU6, HardSwish, HardSigmoid };

std::string_view to_string(Activation activation);

float activate(float x, Activation activation) noexcept;
void activate_inplace(Tensor& tensor, Activation activation) noexcept;

Tensor relu(Tensor input);
Tensor relu6(Tensor input);
Tensor hard_swish(Tensor input);
Tensor hard_sigmoid(Tensor input);

/// y = W x + b with W row-major [out][in]. Accumulates in double.
std::vector<float> fully_connected(std::span<const float> input, std::span<const float> weights,
                                   std::span<const float> bias);

/// Numerically stable softmax (max subtracted before exponentiation).
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const float> logits);

}  // namespace lytnet
