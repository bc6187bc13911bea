#pragma once

#include <string>
#include <vector>

namespace eev {

enum class OpKind { conv, deconv };

// Compact layer notation: "k7c32s1" is a 7x7 convolution with 32 output
// channels and stride 1; a leading 'd' marks a transposed convolution
// ("dk3c64s2").
struct LayerSpec {
    OpKind op_kind = OpKind::conv;
    int kernel = 0;
    int channels = 0;
    int stride = 0;

    bool operator==(const LayerSpec&) const = default;
};

LayerSpec parse_layer_spec(const std::string& text);
std::string format_layer_spec(const LayerSpec& spec);

std::vector<LayerSpec> parse_layer_stack(const std::vector<std::string>& texts);

} // namespace eev
