#pragma once

// Multi-scale motion estimation: 5-level mean-pool pyramid, coarse-to-fine
// flow recursion, and the per-level warp loss it trains against.

#include "eev/conv_stack.hpp"

namespace eev::motion {

constexpr int kPyramidLevels = 5;

struct Pyramid {
    std::vector<TensorPtr> levels; // [0] full resolution .. [4] coarsest
};

// frame dims must be divisible by 16 so all 5 levels exist
Pyramid build_pyramid(Tape* tape, const TensorPtr& frame);

struct MENetConfig {
    // per-level stack; the first spec is the one the figure names
    std::vector<std::string> level_specs = {"k7c32s1", "k7c64s1", "k7c32s1", "k7c16s1",
                                            "k7c2s1"};
    bool share_level_weights = false;
    int frame_channels = 3;
};

struct MENetWeights {
    MENetConfig config;
    std::vector<ConvStack> stacks; // one per level, or a single shared stack

    const ConvStack& stack_for_level(int level) const {
        return config.share_level_weights ? stacks[0] : stacks[static_cast<std::size_t>(level)];
    }
    void params(std::vector<TensorPtr>& out) const {
        for (const auto& s : stacks) s.params(out);
    }
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const {
        for (std::size_t i = 0; i < stacks.size(); ++i)
            stacks[i].named_params(prefix + ".level" + std::to_string(i), out);
    }
    void set_requires_grad(bool on) const {
        for (const auto& s : stacks) s.set_requires_grad(on);
    }
};

MENetWeights init_menet(const MENetConfig& config, Rng& rng);

// Coarse-to-fine recursion. The flow entering the coarsest level is zero;
// each level warps its reference level by the upsampled coarser flow and
// emits a correction on top of it. Returns one flow per level, full
// resolution first.
std::vector<TensorPtr> estimate_flow_levels(Tape* tape, const Pyramid& ref_pyr,
                                            const Pyramid& cur_pyr, const MENetWeights& weights);

// Full-resolution motion field from reference to current frame.
TensorPtr estimate_flow(Tape* tape, const TensorPtr& ref, const TensorPtr& cur,
                        const MENetWeights& weights);

// Sum over levels of the mean squared warp error.
TensorPtr pyramid_loss(Tape* tape, const Pyramid& ref_pyr, const Pyramid& cur_pyr,
                       const std::vector<TensorPtr>& flows);

struct PretrainResult {
    MENetWeights weights;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> trajectory; // evaluated on the full pair set
};

struct FramePair {
    TensorPtr ref;
    TensorPtr cur;
};

// Toy pretraining loop on synthetic pairs (one pair per step, round-robin).
// stop_ratio > 0 ends early once the full-set loss drops below
// stop_ratio * initial. Throws NumericsError on divergence.
PretrainResult pretrain_menet(const std::vector<FramePair>& pairs, int steps,
                              double learning_rate, const MENetConfig& config, std::uint64_t seed,
                              double stop_ratio = 0.0);

} // namespace eev::motion
