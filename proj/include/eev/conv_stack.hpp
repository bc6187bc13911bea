#pragma once

#include <string>
#include <utility>
#include <vector>

#include "eev/layer_spec.hpp"
#include "eev/ops.hpp"

namespace eev {

enum class Activation { none, relu, leaky_relu, sigmoid, tanh };

// A sequence of (de)convolutions described by layer-spec strings, with the
// chosen nonlinearity between layers (never after the last one). Networks
// wrapped in a global skip get a zero-initialized final layer so they start
// as exact identities.
struct ConvStack {
    struct Layer {
        LayerSpec spec;
        TensorPtr w;
        TensorPtr b;
    };

    std::vector<Layer> layers;
    Activation act = Activation::leaky_relu;
    float act_slope = 0.1f;

    int out_channels() const { return layers.empty() ? 0 : layers.back().spec.channels; }

    TensorPtr forward(Tape* tape, TensorPtr x) const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const Layer& l = layers[i];
            x = (l.spec.op_kind == OpKind::conv)
                    ? conv2d<float>(tape, x, l.w, l.b, l.spec.stride)
                    : deconv2d<float>(tape, x, l.w, l.b, l.spec.stride);
            if (i + 1 < layers.size()) x = activate(tape, x);
        }
        return x;
    }

    TensorPtr activate(Tape* tape, const TensorPtr& x) const {
        switch (act) {
        case Activation::none: return x;
        case Activation::relu: return relu<float>(tape, x);
        case Activation::leaky_relu: return leaky_relu<float>(tape, x, act_slope);
        case Activation::sigmoid: return sigmoid<float>(tape, x);
        case Activation::tanh: return tanh_op<float>(tape, x);
        }
        return x;
    }

    void params(std::vector<TensorPtr>& out) const {
        for (const auto& l : layers) {
            out.push_back(l.w);
            out.push_back(l.b);
        }
    }

    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.emplace_back(prefix + ".l" + std::to_string(i) + ".w", layers[i].w);
            out.emplace_back(prefix + ".l" + std::to_string(i) + ".b", layers[i].b);
        }
    }

    void set_requires_grad(bool on) const {
        for (const auto& l : layers) {
            l.w->requires_grad = on;
            l.b->requires_grad = on;
        }
    }
};

// Seeded He-normal init; zero_init_last makes the final layer start at zero.
inline ConvStack build_conv_stack(const std::vector<std::string>& spec_texts, int in_channels,
                                  Activation act, bool zero_init_last, Rng& rng) {
    ConvStack stack;
    stack.act = act;
    int cin = in_channels;
    const auto specs = parse_layer_stack(spec_texts);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        ConvStack::Layer layer;
        layer.spec = s;
        const Shape wshape = (s.op_kind == OpKind::conv)
                                 ? Shape(s.channels, cin, s.kernel, s.kernel)
                                 : Shape(cin, s.channels, s.kernel, s.kernel);
        const bool zero = zero_init_last && i + 1 == specs.size();
        if (zero) {
            layer.w = make_tensor<float>(wshape);
        } else {
            const float stddev =
                std::sqrt(2.0f / (static_cast<float>(s.kernel) * s.kernel * cin));
            layer.w = randn_tensor<float>(wshape, rng, stddev);
        }
        layer.b = make_tensor<float>(Shape(1, s.channels, 1, 1));
        stack.layers.push_back(std::move(layer));
        cin = s.channels;
    }
    return stack;
}

} // namespace eev
