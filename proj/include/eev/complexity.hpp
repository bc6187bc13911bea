#pragma once

// Parameter and MACs-per-pixel accounting over a flat description of the
// model's layers. params = k^2*Cin*Cout + Cout per layer; MACs are counted
// at the layer's output resolution and reported per input pixel.

#include <string>
#include <vector>

#include "eev/layer_spec.hpp"

namespace eev::complexity {

struct LayerDesc {
    LayerSpec spec;
    int in_channels = 0;
};

struct ModuleDesc {
    std::string name;
    std::vector<LayerDesc> layers;
    // spatial scale of the module input relative to the frame: 1 = full
    // resolution, 4 = quarter, ...
    int input_downsample = 1;
    // weight-shared modules execute at several scales but carry one copy of
    // the parameters; only one of their entries counts them
    bool count_params = true;
};

struct ArchitectureDesc {
    std::string name;
    std::vector<ModuleDesc> modules;
};

struct ComplexityReport {
    struct Row {
        std::string module;
        long long params = 0;
        double macs_per_pixel = 0.0;
    };
    std::string model;
    int height = 0;
    int width = 0;
    std::vector<Row> rows;
    long long total_params = 0;
    double total_macs_per_pixel = 0.0;
};

long long layer_params(const LayerDesc& layer);

ComplexityReport count_complexity(const ArchitectureDesc& arch, int height, int width);

} // namespace eev::complexity
