#include "eev/recurrent.hpp"

#include <cmath>

namespace eev::recurrent {

namespace {

TensorPtr conv_he(Rng& rng, int cout, int cin, int k) {
    const float stddev = std::sqrt(2.0f / (static_cast<float>(k) * k * cin));
    return randn_tensor<float>(Shape(cout, cin, k, k), rng, stddev);
}

} // namespace

ConvLstmWeights init_convlstm(int input_channels, int state_channels, Rng& rng) {
    ConvLstmWeights w;
    w.input_channels = input_channels;
    w.state_channels = state_channels;
    w.w = conv_he(rng, 4 * state_channels, input_channels + state_channels, 3);
    w.b = make_tensor<float>(Shape(1, 4 * state_channels, 1, 1));
    return w;
}

LstmState zero_lstm_state(int n, int channels, int h, int w) {
    return {make_tensor<float>(Shape(n, channels, h, w)),
            make_tensor<float>(Shape(n, channels, h, w))};
}

LstmState convlstm_step(Tape* tape, const ConvLstmWeights& w, const TensorPtr& x,
                        const LstmState& state) {
    if (x->shape.c != w.input_channels)
        throw ShapeError("convlstm_step: input carries " + std::to_string(x->shape.c) +
                         " channels, unit expects " + std::to_string(w.input_channels));
    if (state.h->shape != Shape(x->shape.n, w.state_channels, x->shape.h, x->shape.w) ||
        state.c->shape != state.h->shape)
        throw ShapeError("convlstm_step: state " + state.h->shape.str() +
                         " does not match input " + x->shape.str());

    auto gates = conv2d<float>(tape, concat_channels<float>(tape, {x, state.h}), w.w, w.b, 1);
    const int sc = w.state_channels;
    auto i = sigmoid<float>(tape, slice_channels<float>(tape, gates, 0, sc));
    auto f = sigmoid<float>(tape, slice_channels<float>(tape, gates, sc, sc));
    auto o = sigmoid<float>(tape, slice_channels<float>(tape, gates, 2 * sc, sc));
    auto g = tanh_op<float>(tape, slice_channels<float>(tape, gates, 3 * sc, sc));

    LstmState next;
    next.c = add<float>(tape, mul<float>(tape, f, state.c), mul<float>(tape, i, g));
    next.h = mul<float>(tape, o, tanh_op<float>(tape, next.c));
    return next;
}

void RecurrentWeights::params(std::vector<TensorPtr>& out) const {
    if (!config.identity_transform) {
        extractor.params(out);
        restore_stage1.params(out);
        out.push_back(fuse_w);
        out.push_back(fuse_b);
        restore_stage2.params(out);
    }
    for (const auto& l : lstm) l.params(out);
    out.push_back(mv_head_w);
    out.push_back(mv_head_b);
    mdiff_analysis.params(out);
    mdiff_prior.params(out);
    mdiff_synthesis.params(out);
    mdiff_lstm.params(out);
    out.push_back(mdiff_head_w);
    out.push_back(mdiff_head_b);
    f2_refine.params(out);
}

void RecurrentWeights::named_params(const std::string& prefix, nets::NamedParams& out) const {
    if (!config.identity_transform) {
        extractor.named_params(prefix + ".extractor", out);
        restore_stage1.named_params(prefix + ".restore1", out);
        out.emplace_back(prefix + ".fuse.w", fuse_w);
        out.emplace_back(prefix + ".fuse.b", fuse_b);
        restore_stage2.named_params(prefix + ".restore2", out);
    }
    for (std::size_t i = 0; i < lstm.size(); ++i)
        lstm[i].named_params(prefix + ".lstm" + std::to_string(i), out);
    out.emplace_back(prefix + ".mv_head.w", mv_head_w);
    out.emplace_back(prefix + ".mv_head.b", mv_head_b);
    mdiff_analysis.named_params(prefix + ".mdiff.analysis", out);
    mdiff_prior.named_params(prefix + ".mdiff.prior", out);
    mdiff_synthesis.named_params(prefix + ".mdiff.synthesis", out);
    mdiff_lstm.named_params(prefix + ".mdiff.lstm", out);
    out.emplace_back(prefix + ".mdiff.head.w", mdiff_head_w);
    out.emplace_back(prefix + ".mdiff.head.b", mdiff_head_b);
    f2_refine.named_params(prefix + ".f2_refine", out);
}

void RecurrentWeights::set_requires_grad(bool on) const {
    std::vector<TensorPtr> all;
    params(all);
    for (auto& p : all) p->requires_grad = on;
}

RecurrentWeights init_recurrent(const RecurrentConfig& config, Rng& rng) {
    RecurrentWeights w;
    w.config = config;
    const int m = config.effective_feature_channels();
    const int s1 = config.stage1_channels;

    if (!config.identity_transform) {
        w.extractor = build_conv_stack(
            {"k5c" + std::to_string(s1) + "s2", "k5c" + std::to_string(m) + "s2"}, 3,
            Activation::leaky_relu, false, rng);
        w.restore_stage1 = build_conv_stack({"dk5c" + std::to_string(s1) + "s2"}, m,
                                            Activation::leaky_relu, false, rng);
        w.fuse_w = conv_he(rng, s1, 2 * s1, 3);
        w.fuse_b = make_tensor<float>(Shape(1, s1, 1, 1));
        w.restore_stage2 =
            build_conv_stack({"dk5c3s2"}, s1, Activation::leaky_relu, false, rng);
    }

    for (int l = 0; l < config.lstm_layers; ++l)
        w.lstm.push_back(init_convlstm(m, m, rng));
    w.mv_head_w = make_tensor<float>(Shape(2, m, 3, 3)); // zero: untrained MV prediction is 0
    w.mv_head_b = make_tensor<float>(Shape(1, 2, 1, 1));

    w.mdiff_analysis = build_conv_stack(
        {"k3c" + std::to_string(m) + "s1", "k5c" + std::to_string(config.mdiff_latent_channels) + "s2"},
        3 * m, Activation::leaky_relu, false, rng);
    w.mdiff_prior = entropy::FactorizedPrior::init(config.mdiff_latent_channels);
    w.mdiff_synthesis =
        build_conv_stack({"dk5c" + std::to_string(config.branch_channels) + "s2"},
                         config.mdiff_latent_channels, Activation::leaky_relu, true, rng);
    w.mdiff_lstm = init_convlstm(config.branch_channels, config.branch_channels, rng);
    w.mdiff_head_w = make_tensor<float>(Shape(2, config.branch_channels, 3, 3)); // zero
    w.mdiff_head_b = make_tensor<float>(Shape(1, 2, 1, 1));

    w.f2_refine = build_conv_stack(
        {"k3c" + std::to_string(m) + "s1", "k3c" + std::to_string(m) + "s1"}, m,
        Activation::relu, true, rng);
    return w;
}

FeatureExtractResult feature_extract(Tape* tape, const RecurrentWeights& w,
                                     const TensorPtr& frame) {
    if (frame->shape.h % 4 != 0 || frame->shape.w % 4 != 0)
        throw ShapeError("feature_extract: dims " + frame->shape.str() +
                         " must be divisible by 4");
    FeatureExtractResult r;
    if (w.config.identity_transform) {
        r.skips.push_back(space_to_depth<float>(tape, frame, 2));
        r.features = space_to_depth<float>(tape, frame, 4);
        r.skips.push_back(r.features);
        return r;
    }
    const auto& l0 = w.extractor.layers[0];
    auto s1 = w.extractor.activate(tape, conv2d<float>(tape, frame, l0.w, l0.b, l0.spec.stride));
    const auto& l1 = w.extractor.layers[1];
    auto feat = conv2d<float>(tape, s1, l1.w, l1.b, l1.spec.stride);
    r.skips.push_back(s1);
    r.skips.push_back(feat);
    r.features = feat;
    return r;
}

TensorPtr feature_restore(Tape* tape, const RecurrentWeights& w, const TensorPtr& features,
                          const std::vector<TensorPtr>& skips) {
    if (w.config.identity_transform) return depth_to_space<float>(tape, features, 4);
    if (skips.empty())
        throw ShapeError("feature_restore: the skip pyramid is required in learned mode");
    auto d1 = w.restore_stage1.activate(tape, w.restore_stage1.forward(tape, features));
    auto fused = w.restore_stage1.activate(
        tape, conv2d<float>(tape, concat_channels<float>(tape, {d1, skips[0]}), w.fuse_w,
                            w.fuse_b, 1));
    return w.restore_stage2.forward(tape, fused);
}

MotionPrediction predict_motion(Tape* tape, const RecurrentWeights& w,
                                const std::vector<TensorPtr>& dpb_features,
                                const RecurrentState& state) {
    if (dpb_features.empty())
        throw Error("predict_motion: decoded picture buffer has no reference features");
    const auto& x = dpb_features.back();

    std::vector<LstmState> layer_state = state.layers;
    if (layer_state.empty()) {
        for (std::size_t l = 0; l < w.lstm.size(); ++l)
            layer_state.push_back(zero_lstm_state(x->shape.n, w.lstm[l].state_channels,
                                                  x->shape.h, x->shape.w));
    }
    if (layer_state.size() != w.lstm.size())
        throw ShapeError("predict_motion: state has " + std::to_string(layer_state.size()) +
                         " layers, expected " + std::to_string(w.lstm.size()));

    MotionPrediction out;
    TensorPtr input = x;
    for (std::size_t l = 0; l < w.lstm.size(); ++l) {
        auto next = convlstm_step(tape, w.lstm[l], input, layer_state[l]);
        out.next_layers.push_back(next);
        input = next.h;
    }
    out.mv = conv2d<float>(tape, input, w.mv_head_w, w.mv_head_b, 1);
    out.features = bilinear_warp<float>(tape, x, out.mv);
    return out;
}

namespace {

LstmState branch_state_or_zero(const RecurrentWeights& w, const RecurrentState& state,
                               const Shape& feature_shape) {
    if (state.mdiff.h && state.mdiff.c) return state.mdiff;
    return zero_lstm_state(feature_shape.n, w.config.branch_channels, feature_shape.h,
                           feature_shape.w);
}

struct MdiffSynth {
    TensorPtr mv;
    LstmState next_branch;
};

MdiffSynth mdiff_synthesize(Tape* tape, const RecurrentWeights& w, const TensorPtr& latent,
                            const LstmState& branch) {
    auto u = w.mdiff_synthesis.forward(tape, latent);
    auto next = convlstm_step(tape, w.mdiff_lstm, u, branch);
    MdiffSynth r;
    r.mv = conv2d<float>(tape, next.h, w.mdiff_head_w, w.mdiff_head_b, 1);
    r.next_branch = next;
    return r;
}

Shape mdiff_latent_shape(const RecurrentWeights& w, const Shape& feature_shape) {
    Shape s = feature_shape;
    s.c = 3 * w.config.effective_feature_channels();
    for (const auto& l : w.mdiff_analysis.layers) {
        if (s.h % l.spec.stride != 0 || s.w % l.spec.stride != 0)
            throw ShapeError("mdiff: feature dims " + s.str() + " not divisible by stride");
        s.h /= l.spec.stride;
        s.w /= l.spec.stride;
        s.c = l.spec.channels;
    }
    return s;
}

} // namespace

MdiffEncodeResult motion_difference_encode(const RecurrentWeights& w,
                                           const TensorPtr& ref_features,
                                           const TensorPtr& cur_features, const TensorPtr& f1,
                                           const RecurrentState& state) {
    auto latent =
        w.mdiff_analysis.forward(nullptr, concat_channels<float>(nullptr,
                                                                  {ref_features, cur_features, f1}));
    std::vector<int> symbols(latent->data.size());
    auto latent_hat = make_tensor<float>(latent->shape);
    for (std::size_t i = 0; i < latent->data.size(); ++i) {
        const float r = std::round(latent->data[i]);
        symbols[i] = static_cast<int>(r);
        latent_hat->data[i] = r;
    }

    int lo = symbols.empty() ? 0 : *std::min_element(symbols.begin(), symbols.end()) - 1;
    int hi = symbols.empty() ? 0 : *std::max_element(symbols.begin(), symbols.end()) + 1;
    double bits = 0.0;
    std::vector<entropy::CdfTable> tables;
    const std::size_t plane = static_cast<std::size_t>(latent->shape.h) * latent->shape.w;
    for (int c = 0; c < latent->shape.c; ++c) {
        const double loc = w.mdiff_prior.loc->data[static_cast<std::size_t>(c)];
        const double scale =
            std::exp(static_cast<double>(w.mdiff_prior.log_scale->data[static_cast<std::size_t>(c)]));
        lo = std::min(lo, static_cast<int>(std::floor(loc - 8.0 * scale)));
        hi = std::max(hi, static_cast<int>(std::ceil(loc + 8.0 * scale)));
    }
    for (int c = 0; c < latent->shape.c; ++c) {
        const double loc = w.mdiff_prior.loc->data[static_cast<std::size_t>(c)];
        const double scale =
            std::exp(static_cast<double>(w.mdiff_prior.log_scale->data[static_cast<std::size_t>(c)]));
        tables.push_back(entropy::build_cdf_logistic(loc, scale, lo, hi));
    }
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const int c = static_cast<int>((i / plane) % static_cast<std::size_t>(latent->shape.c));
        bits -= std::log2(std::max(w.mdiff_prior.cdf(symbols[i] + 0.5, c) -
                                       w.mdiff_prior.cdf(symbols[i] - 0.5, c),
                                   1e-9));
    }
    auto body = entropy::range_encode(symbols, [&](std::size_t i) -> const entropy::CdfTable& {
        return tables[(i / plane) % static_cast<std::size_t>(latent->shape.c)];
    });

    bitstream::ByteWriter out;
    out.i32(lo);
    out.i32(hi);
    out.u32(static_cast<std::uint32_t>(body.size()));
    out.bytes(body);

    auto branch = branch_state_or_zero(w, state, ref_features->shape);
    auto synth = mdiff_synthesize(nullptr, w, latent_hat, branch);

    MdiffEncodeResult r;
    r.mv = synth.mv;
    r.bits_estimate = bits;
    r.payload = out.take();
    r.next_branch = synth.next_branch;
    return r;
}

MdiffDecodeResult motion_difference_decode(const RecurrentWeights& w,
                                           const std::vector<std::uint8_t>& payload,
                                           const Shape& feature_shape,
                                           const RecurrentState& state) {
    const Shape latent_shape = mdiff_latent_shape(w, feature_shape);
    bitstream::ByteReader r(payload);
    const int lo = r.i32("mdiff bounds");
    const int hi = r.i32("mdiff bounds");
    const std::uint32_t len = r.u32("mdiff length");
    auto body = r.bytes(len, "mdiff payload");
    if (!r.done()) throw FormatError("mdiff payload: trailing bytes");
    if (hi < lo) throw FormatError("mdiff payload: inverted bounds");

    std::vector<entropy::CdfTable> tables;
    for (int c = 0; c < latent_shape.c; ++c) {
        const double loc = w.mdiff_prior.loc->data[static_cast<std::size_t>(c)];
        const double scale =
            std::exp(static_cast<double>(w.mdiff_prior.log_scale->data[static_cast<std::size_t>(c)]));
        tables.push_back(entropy::build_cdf_logistic(loc, scale, lo, hi));
    }
    const std::size_t plane = static_cast<std::size_t>(latent_shape.h) * latent_shape.w;
    auto symbols = entropy::range_decode(body, latent_shape.size(),
                                         [&](std::size_t i) -> const entropy::CdfTable& {
                                             return tables[(i / plane) %
                                                           static_cast<std::size_t>(latent_shape.c)];
                                         });
    auto latent_hat = make_tensor<float>(latent_shape);
    for (std::size_t i = 0; i < symbols.size(); ++i)
        latent_hat->data[i] = static_cast<float>(symbols[i]);

    auto branch = branch_state_or_zero(w, state, feature_shape);
    auto synth = mdiff_synthesize(nullptr, w, latent_hat, branch);
    return {synth.mv, synth.next_branch};
}

MdiffTrainResult motion_difference_train(Tape& tape, const RecurrentWeights& w,
                                         const TensorPtr& ref_features,
                                         const TensorPtr& cur_features, const TensorPtr& f1,
                                         const RecurrentState& state, Rng& noise) {
    auto latent = w.mdiff_analysis.forward(
        &tape, concat_channels<float>(&tape, {ref_features, cur_features, f1}));
    auto latent_t = entropy::quantize(&tape, latent, entropy::QuantizeMode::train, &noise);
    auto lik = w.mdiff_prior.likelihood(&tape, latent_t);
    auto branch = branch_state_or_zero(w, state, ref_features->shape);
    auto synth = mdiff_synthesize(&tape, w, latent_t, branch);
    MdiffTrainResult r;
    r.mv = synth.mv;
    r.bits = entropy::estimate_bits(&tape, lik);
    r.next_branch = synth.next_branch;
    return r;
}

ProgressiveResult progressive_predict(Tape* tape, const RecurrentWeights& w, const TensorPtr& f1,
                                      const TensorPtr& mdiff, const std::vector<TensorPtr>& skips) {
    auto warped = bilinear_warp<float>(tape, f1, mdiff);
    auto refined = add<float>(tape, warped, w.f2_refine.forward(tape, warped));
    ProgressiveResult r;
    r.features = refined;
    r.frame = feature_restore(tape, w, refined, skips);
    return r;
}

} // namespace eev::recurrent
