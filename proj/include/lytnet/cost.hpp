#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lytnet/network_spec.hpp"

namespace lytnet {

/// h * w * k^2 * d_in * d_out multiply-accumulates for a standard convolution
/// producing an h x w map.
std::uint64_t standard_conv_macs(std::uint64_t h, std::uint64_t w, std::uint64_t k,
                                 std::uint64_t d_in, std::uint64_t d_out);

/// h * w * d_in * (k^2 + d_out): depthwise k x k followed by a 1x1 pointwise.
std::uint64_t separable_conv_macs(std::uint64_t h, std::uint64_t w, std::uint64_t k,
                                  std::uint64_t d_in, std::uint64_t d_out);

/// How many times cheaper separable is than standard: k^2 d_out / (k^2 + d_out).
double separable_cost_ratio(int k, int d_out);

struct LayerCost {
    int row = 0;
    LayerKind kind = LayerKind::Conv2d;
    Shape input;
    Shape output;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    /// Bottleneck rows only: standard / separable MACs for the depthwise+project pair.
    std::optional<double> separable_ratio;
};

/// Parameters count every stored float (conv weights plus folded scale/shift,
/// SE and FC biases); optional conv biases are not counted. MACs count conv,
/// SE and FC multiply-accumulates; pooling, activations and the SE channel
/// rescale are free.
struct CostReport {
    std::vector<LayerCost> layers;
    std::uint64_t total_params = 0;
    std::uint64_t total_macs = 0;
};

CostReport count_params_and_macs(const NetworkSpec& spec);

}  // namespace lytnet
