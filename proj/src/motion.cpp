#include "eev/motion.hpp"

#include "eev/train.hpp"

namespace eev::motion {

Pyramid build_pyramid(Tape* tape, const TensorPtr& frame) {
    if (frame->shape.h % 16 != 0 || frame->shape.w % 16 != 0)
        throw ShapeError("build_pyramid: dims " + frame->shape.str() +
                         " must be divisible by 16 for " + std::to_string(kPyramidLevels) +
                         " levels");
    Pyramid pyr;
    pyr.levels.reserve(kPyramidLevels);
    pyr.levels.push_back(frame);
    for (int i = 1; i < kPyramidLevels; ++i)
        pyr.levels.push_back(avg_pool2<float>(tape, pyr.levels.back()));
    return pyr;
}

MENetWeights init_menet(const MENetConfig& config, Rng& rng) {
    if (config.level_specs.empty() || parse_layer_spec(config.level_specs.back()).channels != 2)
        throw ShapeError("init_menet: last level spec must emit 2 channels");
    MENetWeights w;
    w.config = config;
    const int in_ch = 2 * config.frame_channels + 2; // warped ref + current + upsampled flow
    const int stacks = config.share_level_weights ? 1 : kPyramidLevels;
    // the readout layer is He-initialized like the rest: a zero readout would
    // block gradient flow into the earlier convolutions at the start of
    // pretraining
    for (int i = 0; i < stacks; ++i)
        w.stacks.push_back(
            build_conv_stack(config.level_specs, in_ch, Activation::leaky_relu, false, rng));
    return w;
}

std::vector<TensorPtr> estimate_flow_levels(Tape* tape, const Pyramid& ref_pyr,
                                            const Pyramid& cur_pyr, const MENetWeights& weights) {
    if (ref_pyr.levels.size() != kPyramidLevels || cur_pyr.levels.size() != kPyramidLevels)
        throw ShapeError("estimate_flow: pyramids must have 5 levels");
    for (int i = 0; i < kPyramidLevels; ++i)
        if (ref_pyr.levels[i]->shape != cur_pyr.levels[i]->shape)
            throw ShapeError("estimate_flow: level " + std::to_string(i) + " shape mismatch " +
                             ref_pyr.levels[i]->shape.str() + " vs " +
                             cur_pyr.levels[i]->shape.str());

    std::vector<TensorPtr> flows(kPyramidLevels);
    for (int i = kPyramidLevels - 1; i >= 0; --i) {
        const auto& ref = ref_pyr.levels[i];
        const auto& cur = cur_pyr.levels[i];
        TensorPtr incoming = (i == kPyramidLevels - 1)
                                 ? make_tensor<float>(Shape(ref->shape.n, 2, ref->shape.h, ref->shape.w))
                                 : upsample_flow2<float>(tape, flows[i + 1]);
        auto warped = bilinear_warp<float>(tape, ref, incoming);
        auto input = concat_channels<float>(tape, {warped, cur, incoming});
        auto correction = weights.stack_for_level(i).forward(tape, input);
        flows[i] = add<float>(tape, incoming, correction);
    }
    return flows;
}

TensorPtr estimate_flow(Tape* tape, const TensorPtr& ref, const TensorPtr& cur,
                        const MENetWeights& weights) {
    if (ref->shape != cur->shape)
        throw ShapeError("estimate_flow: frame shapes differ " + ref->shape.str() + " vs " +
                         cur->shape.str());
    auto ref_pyr = build_pyramid(tape, ref);
    auto cur_pyr = build_pyramid(tape, cur);
    return estimate_flow_levels(tape, ref_pyr, cur_pyr, weights)[0];
}

TensorPtr pyramid_loss(Tape* tape, const Pyramid& ref_pyr, const Pyramid& cur_pyr,
                       const std::vector<TensorPtr>& flows) {
    if (ref_pyr.levels.size() != flows.size() || cur_pyr.levels.size() != flows.size())
        throw ShapeError("pyramid_loss: expected one flow per level, got " +
                         std::to_string(flows.size()));
    TensorPtr total;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        auto warped = bilinear_warp<float>(tape, ref_pyr.levels[i], flows[i]);
        auto term = mse<float>(tape, warped, cur_pyr.levels[i]);
        total = total ? add<float>(tape, total, term) : term;
    }
    return total;
}

namespace {

double evaluate_pairs(const std::vector<FramePair>& pairs, const MENetWeights& weights) {
    double total = 0.0;
    for (const auto& pair : pairs) {
        Tape tape;
        auto ref_pyr = build_pyramid(&tape, pair.ref);
        auto cur_pyr = build_pyramid(&tape, pair.cur);
        auto flows = estimate_flow_levels(&tape, ref_pyr, cur_pyr, weights);
        total += pyramid_loss(&tape, ref_pyr, cur_pyr, flows)->scalar();
    }
    return total / static_cast<double>(pairs.size());
}

} // namespace

PretrainResult pretrain_menet(const std::vector<FramePair>& pairs, int steps,
                              double learning_rate, const MENetConfig& config, std::uint64_t seed,
                              double stop_ratio) {
    if (pairs.empty()) throw Error("pretrain_menet: no training pairs");
    Rng rng(seed);
    PretrainResult result;
    result.weights = init_menet(config, rng);

    result.initial_loss = evaluate_pairs(pairs, result.weights);
    result.trajectory.push_back(result.initial_loss);
    if (steps <= 0 || learning_rate == 0.0) {
        // evaluate-only runs keep the initialization
        for (int s = 0; s < steps; ++s) result.trajectory.push_back(result.initial_loss);
        result.final_loss = result.initial_loss;
        return result;
    }

    std::vector<TensorPtr> params;
    result.weights.params(params);
    AdamOptimizer opt(params, learning_rate);

    const int eval_every = 25;
    for (int step = 0; step < steps; ++step) {
        const auto& pair = pairs[static_cast<std::size_t>(step) % pairs.size()];
        Tape tape;
        auto ref_pyr = build_pyramid(&tape, pair.ref);
        auto cur_pyr = build_pyramid(&tape, pair.cur);
        auto flows = estimate_flow_levels(&tape, ref_pyr, cur_pyr, result.weights);
        auto loss = pyramid_loss(&tape, ref_pyr, cur_pyr, flows);
        if (!std::isfinite(loss->scalar()))
            throw NumericsError("pretrain_menet: loss diverged at step " + std::to_string(step));
        opt.zero_grad();
        tape.backward(loss);
        opt.step();

        if ((step + 1) % eval_every == 0 || step + 1 == steps) {
            const double full = evaluate_pairs(pairs, result.weights);
            result.trajectory.push_back(full);
            if (stop_ratio > 0.0 && full < stop_ratio * result.initial_loss) break;
        } else {
            result.trajectory.push_back(loss->scalar());
        }
    }
    result.final_loss = evaluate_pairs(pairs, result.weights);
    return result;
}

} // namespace eev::motion
