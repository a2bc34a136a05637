#include "lytnet/cost.hpp"

namespace lytnet {

std::uint64_t standard_conv_macs(std::uint64_t h, std::uint64_t w, std::uint64_t k,
                                 std::uint64_t d_in, std::uint64_t d_out) {
    return h * w * k * k * d_in * d_out;
}

std::uint64_t separable_conv_macs(std::uint64_t h, std::uint64_t w, std::uint64_t k,
                                  std::uint64_t d_in, std::uint64_t d_out) {
    return h * w * d_in * (k * k + d_out);
}

double separable_cost_ratio(int k, int d_out) {
    const double k2 = static_cast<double>(k) * k;
    return k2 * d_out / (k2 + d_out);
}

CostReport count_params_and_macs(const NetworkSpec& spec) {
    const auto shapes = propagate_shapes(spec);
    CostReport report;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        const Shape& in = shapes[i].input;
        const Shape& out = shapes[i].output;
        LayerCost cost{shapes[i].row, layer.kind, in, out, 0, 0, std::nullopt};
        const std::uint64_t d_in = static_cast<std::uint64_t>(in.channels);
        const std::uint64_t d_out = static_cast<std::uint64_t>(layer.out_channels);
        const std::uint64_t k = static_cast<std::uint64_t>(layer.kernel);
        const std::uint64_t out_h = static_cast<std::uint64_t>(out.height);
        const std::uint64_t out_w = static_cast<std::uint64_t>(out.width);

        switch (layer.kind) {
            case LayerKind::Conv2d:
                cost.params = k * k * d_in * d_out + 2 * d_out;
                cost.macs = standard_conv_macs(out_h, out_w, k, d_in, d_out);
                break;
            case LayerKind::Bottleneck: {
                const std::uint64_t e = static_cast<std::uint64_t>(layer.expansion);
                const std::uint64_t in_h = static_cast<std::uint64_t>(in.height);
                const std::uint64_t in_w = static_cast<std::uint64_t>(in.width);
                cost.params = (d_in * e + 2 * e) + (k * k * e + 2 * e) + (e * d_out + 2 * d_out);
                cost.macs = standard_conv_macs(in_h, in_w, 1, d_in, e) +
                            separable_conv_macs(out_h, out_w, k, e, d_out);
                if (layer.use_se) {
                    const std::uint64_t r = e / static_cast<std::uint64_t>(spec.se_reduction);
                    cost.params += (e * r + r) + (r * e + e);
                    cost.macs += 2 * e * r;
                }
                cost.separable_ratio =
                    static_cast<double>(standard_conv_macs(out_h, out_w, k, e, d_out)) /
                    static_cast<double>(separable_conv_macs(out_h, out_w, k, e, d_out));
                break;
            }
            case LayerKind::FullyConnected:
                cost.params = d_in * d_out + d_out;
                cost.macs = d_in * d_out;
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool:
                break;
        }
        report.total_params += cost.params;
        report.total_macs += cost.macs;
        report.layers.push_back(cost);
    }
    return report;
}

}  // namespace lytnet
