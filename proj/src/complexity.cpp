#include "eev/complexity.hpp"

#include "eev/common.hpp"

namespace eev::complexity {

long long layer_params(const LayerDesc& layer) {
    const long long k = layer.spec.kernel;
    return k * k * layer.in_channels * layer.spec.channels + layer.spec.channels;
}

ComplexityReport count_complexity(const ArchitectureDesc& arch, int height, int width) {
    if (height <= 0 || width <= 0)
        throw Error("count_complexity: resolution must be positive");
    ComplexityReport report;
    report.model = arch.name;
    report.height = height;
    report.width = width;
    const double frame_pixels = static_cast<double>(height) * width;

    for (const auto& module : arch.modules) {
        ComplexityReport::Row row;
        row.module = module.name;
        long long h = height / module.input_downsample;
        long long w = width / module.input_downsample;
        for (const auto& layer : module.layers) {
            if (layer.spec.op_kind == OpKind::conv) {
                h /= layer.spec.stride;
                w /= layer.spec.stride;
            } else {
                h *= layer.spec.stride;
                w *= layer.spec.stride;
            }
            if (h <= 0 || w <= 0)
                throw Error("count_complexity: module " + module.name +
                            " shrinks below one pixel");
            const double out_pixels = static_cast<double>(h) * static_cast<double>(w);
            const double k2 = static_cast<double>(layer.spec.kernel) * layer.spec.kernel;
            if (module.count_params) row.params += layer_params(layer);
            row.macs_per_pixel +=
                k2 * layer.in_channels * layer.spec.channels * out_pixels / frame_pixels;
        }
        report.total_params += row.params;
        report.total_macs_per_pixel += row.macs_per_pixel;
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace eev::complexity
