#include "eev/nets.hpp"

#include <algorithm>
#include <cmath>

namespace eev::nets {

namespace {

std::vector<std::string> conv_specs(int kernel, int mid, int last, int depth) {
    std::vector<std::string> specs;
    for (int i = 0; i < depth - 1; ++i)
        specs.push_back("k" + std::to_string(kernel) + "c" + std::to_string(mid) + "s2");
    specs.push_back("k" + std::to_string(kernel) + "c" + std::to_string(last) + "s2");
    return specs;
}

std::vector<std::string> deconv_specs(int kernel, int mid, int last, int depth) {
    std::vector<std::string> specs;
    for (int i = 0; i < depth - 1; ++i)
        specs.push_back("dk" + std::to_string(kernel) + "c" + std::to_string(mid) + "s2");
    specs.push_back("dk" + std::to_string(kernel) + "c" + std::to_string(last) + "s2");
    return specs;
}

// Integer latents as a float tensor plus the flat symbol list.
struct Symbolized {
    TensorPtr values;
    std::vector<int> symbols;
};

Symbolized round_to_symbols(const TensorPtr& x) {
    Symbolized s;
    s.values = make_tensor<float>(x->shape);
    s.symbols.resize(x->data.size());
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        const float r = std::round(x->data[i]);
        if (std::abs(r) > 1e7f)
            throw NumericsError("latent symbol magnitude " + std::to_string(r) +
                                " is out of any sane coding range");
        s.values->data[i] = r;
        s.symbols[i] = static_cast<int>(r);
    }
    return s;
}

struct MeanScale {
    TensorPtr mean;
    TensorPtr scale;
};

MeanScale split_mean_scale(Tape* tape, const TensorPtr& hyper_out, int latent_channels) {
    MeanScale ms;
    ms.mean = slice_channels<float>(tape, hyper_out, 0, latent_channels);
    auto raw = slice_channels<float>(tape, hyper_out, latent_channels, latent_channels);
    ms.scale = add_scalar<float>(tape, softplus<float>(tape, raw), 1e-4f);
    return ms;
}

void bounds_from(const std::vector<int>& symbols, int& lo, int& hi) {
    lo = symbols.empty() ? 0 : *std::min_element(symbols.begin(), symbols.end());
    hi = symbols.empty() ? 0 : *std::max_element(symbols.begin(), symbols.end());
    lo -= 1;
    hi += 1;
}

} // namespace

void CodecWeights::params(std::vector<TensorPtr>& out) const {
    analysis.params(out);
    synthesis.params(out);
    hyper_analysis.params(out);
    hyper_synthesis.params(out);
    z_prior.params(out);
}

void CodecWeights::named_params(const std::string& prefix, NamedParams& out) const {
    analysis.named_params(prefix + ".analysis", out);
    synthesis.named_params(prefix + ".synthesis", out);
    hyper_analysis.named_params(prefix + ".hyper_analysis", out);
    hyper_synthesis.named_params(prefix + ".hyper_synthesis", out);
    z_prior.named_params(prefix + ".z_prior", out);
}

void CodecWeights::set_requires_grad(bool on) const {
    analysis.set_requires_grad(on);
    synthesis.set_requires_grad(on);
    hyper_analysis.set_requires_grad(on);
    hyper_synthesis.set_requires_grad(on);
    z_prior.set_requires_grad(on);
}

CodecWeights init_codec(const CodecConfig& config, Rng& rng) {
    CodecWeights w;
    w.config = config;
    w.analysis = build_conv_stack(
        conv_specs(config.kernel, config.mid_channels, config.latent_channels,
                   config.analysis_depth),
        config.in_channels, Activation::leaky_relu, false, rng);
    w.synthesis = build_conv_stack(
        deconv_specs(config.kernel, config.mid_channels, config.out_channels,
                     config.analysis_depth),
        config.latent_channels, Activation::leaky_relu, true, rng);
    w.hyper_analysis =
        build_conv_stack({"k5c" + std::to_string(config.hyper_channels) + "s2",
                          "k5c" + std::to_string(config.hyper_channels) + "s2"},
                         config.latent_channels, Activation::leaky_relu, false, rng);
    w.hyper_synthesis =
        build_conv_stack({"dk5c" + std::to_string(config.hyper_channels) + "s2",
                          "dk5c" + std::to_string(2 * config.latent_channels) + "s2"},
                         config.hyper_channels, Activation::leaky_relu, true, rng);
    w.z_prior = entropy::FactorizedPrior::init(config.hyper_channels);
    return w;
}

int codec_downsample_factor(const CodecWeights& w) {
    int f = 1;
    for (const auto& l : w.analysis.layers) f *= l.spec.stride;
    return f;
}

namespace {

Shape stack_output_shape(const ConvStack& stack, const Shape& in) {
    Shape s = in;
    for (const auto& l : stack.layers) {
        if (l.spec.op_kind == OpKind::conv) {
            if (s.h % l.spec.stride != 0 || s.w % l.spec.stride != 0)
                throw ShapeError("codec: dims " + s.str() + " not divisible by stride " +
                                 std::to_string(l.spec.stride));
            s.h /= l.spec.stride;
            s.w /= l.spec.stride;
        } else {
            s.h *= l.spec.stride;
            s.w *= l.spec.stride;
        }
        s.c = l.spec.channels;
    }
    return s;
}

// Per-channel logistic tables over shared bounds that keep at least 99% of
// every channel's mass.
std::vector<entropy::CdfTable> z_tables(const CodecWeights& w, int lo, int hi) {
    std::vector<entropy::CdfTable> tables;
    const int channels = w.config.hyper_channels;
    tables.reserve(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        const double loc = w.z_prior.loc->data[static_cast<std::size_t>(c)];
        const double scale =
            std::exp(static_cast<double>(w.z_prior.log_scale->data[static_cast<std::size_t>(c)]));
        tables.push_back(entropy::build_cdf_logistic(loc, scale, lo, hi));
    }
    return tables;
}

void widen_for_prior(const CodecWeights& w, int& lo, int& hi) {
    for (int c = 0; c < w.config.hyper_channels; ++c) {
        const double loc = w.z_prior.loc->data[static_cast<std::size_t>(c)];
        const double scale =
            std::exp(static_cast<double>(w.z_prior.log_scale->data[static_cast<std::size_t>(c)]));
        // logistic tails: +-8 scale keeps 99.93% of the mass
        lo = std::min(lo, static_cast<int>(std::floor(loc - 8.0 * scale)));
        hi = std::max(hi, static_cast<int>(std::ceil(loc + 8.0 * scale)));
    }
}

void widen_for_gaussians(const TensorPtr& mean, const TensorPtr& scale, int& lo, int& hi) {
    float mlo = 0.0f, mhi = 0.0f;
    for (std::size_t i = 0; i < mean->data.size(); ++i) {
        mlo = std::min(mlo, mean->data[i] - 4.0f * scale->data[i]);
        mhi = std::max(mhi, mean->data[i] + 4.0f * scale->data[i]);
    }
    lo = std::min(lo, static_cast<int>(std::floor(mlo)));
    hi = std::max(hi, static_cast<int>(std::ceil(mhi)));
}

double symbol_bits_gaussian(const std::vector<int>& symbols, const TensorPtr& mean,
                            const TensorPtr& scale) {
    double bits = 0.0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const double mu = mean->data[i];
        const double sg = scale->data[i];
        const double p = std::max(0.5 * std::erfc(-((symbols[i] + 0.5 - mu) / sg) * 0.7071067811865475) -
                                      0.5 * std::erfc(-((symbols[i] - 0.5 - mu) / sg) * 0.7071067811865475),
                                  1e-9);
        bits -= std::log2(p);
    }
    return bits;
}

double symbol_bits_prior(const CodecWeights& w, const std::vector<int>& symbols, int channels,
                         std::size_t plane) {
    double bits = 0.0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const int c = static_cast<int>((i / plane) % static_cast<std::size_t>(channels));
        const double p = std::max(w.z_prior.cdf(symbols[i] + 0.5, c) -
                                      w.z_prior.cdf(symbols[i] - 0.5, c),
                                  1e-9);
        bits -= std::log2(p);
    }
    return bits;
}

} // namespace

CodecEncodeResult codec_encode(const CodecWeights& w, const TensorPtr& x) {
    if (x->shape.c != w.config.in_channels)
        throw ShapeError("codec_encode: input " + x->shape.str() + " does not carry " +
                         std::to_string(w.config.in_channels) + " channels");

    auto y = w.analysis.forward(nullptr, x);
    auto z = w.hyper_analysis.forward(nullptr, y);

    auto zq = round_to_symbols(z);
    int zlo, zhi;
    bounds_from(zq.symbols, zlo, zhi);
    widen_for_prior(w, zlo, zhi);
    const auto ztables = z_tables(w, zlo, zhi);
    const std::size_t zplane = static_cast<std::size_t>(z->shape.h) * z->shape.w;
    const int zch = z->shape.c;
    auto zbytes = entropy::range_encode(zq.symbols, [&](std::size_t i) -> const entropy::CdfTable& {
        return ztables[(i / zplane) % static_cast<std::size_t>(zch)];
    });

    auto hyper_out = w.hyper_synthesis.forward(nullptr, zq.values);
    auto ms = split_mean_scale(nullptr, hyper_out, w.config.latent_channels);

    auto yq = round_to_symbols(y);
    int ylo, yhi;
    bounds_from(yq.symbols, ylo, yhi);
    widen_for_gaussians(ms.mean, ms.scale, ylo, yhi);

    entropy::RangeEncoder enc;
    for (std::size_t i = 0; i < yq.symbols.size(); ++i) {
        const auto table = entropy::build_cdf_gaussian(ms.mean->data[i], ms.scale->data[i], ylo, yhi);
        enc.encode_symbol(table, yq.symbols[i]);
    }
    auto ybytes = enc.finish();

    CodecEncodeResult result;
    result.bits_estimate = symbol_bits_prior(w, zq.symbols, zch, zplane) +
                           symbol_bits_gaussian(yq.symbols, ms.mean, ms.scale);
    result.recon = w.synthesis.forward(nullptr, yq.values);

    bitstream::ByteWriter out;
    out.i32(zlo);
    out.i32(zhi);
    out.u32(static_cast<std::uint32_t>(zbytes.size()));
    out.bytes(zbytes);
    out.i32(ylo);
    out.i32(yhi);
    out.u32(static_cast<std::uint32_t>(ybytes.size()));
    out.bytes(ybytes);
    result.payload = out.take();
    return result;
}

TensorPtr codec_decode(const CodecWeights& w, const std::vector<std::uint8_t>& payload,
                       const Shape& input_shape) {
    const Shape y_shape = stack_output_shape(w.analysis, Shape(input_shape.n, w.config.in_channels,
                                                               input_shape.h, input_shape.w));
    const Shape z_shape = stack_output_shape(w.hyper_analysis, y_shape);

    bitstream::ByteReader r(payload);
    const int zlo = r.i32("z bounds");
    const int zhi = r.i32("z bounds");
    const std::uint32_t zlen = r.u32("z length");
    auto zbytes = r.bytes(zlen, "z payload");
    if (zhi < zlo) throw FormatError("codec payload: inverted z bounds");

    const auto ztables = z_tables(w, zlo, zhi);
    const std::size_t zplane = static_cast<std::size_t>(z_shape.h) * z_shape.w;
    auto zsymbols = entropy::range_decode(zbytes, z_shape.size(),
                                          [&](std::size_t i) -> const entropy::CdfTable& {
                                              return ztables[(i / zplane) %
                                                             static_cast<std::size_t>(z_shape.c)];
                                          });
    auto zvals = make_tensor<float>(z_shape);
    for (std::size_t i = 0; i < zsymbols.size(); ++i)
        zvals->data[i] = static_cast<float>(zsymbols[i]);

    auto hyper_out = w.hyper_synthesis.forward(nullptr, zvals);
    auto ms = split_mean_scale(nullptr, hyper_out, w.config.latent_channels);

    const int ylo = r.i32("y bounds");
    const int yhi = r.i32("y bounds");
    const std::uint32_t ylen = r.u32("y length");
    auto ybytes = r.bytes(ylen, "y payload");
    if (yhi < ylo) throw FormatError("codec payload: inverted y bounds");
    if (!r.done()) throw FormatError("codec payload: trailing bytes");

    entropy::RangeDecoder dec(ybytes.data(), ybytes.size());
    auto yvals = make_tensor<float>(y_shape);
    for (std::size_t i = 0; i < y_shape.size(); ++i) {
        const auto table = entropy::build_cdf_gaussian(ms.mean->data[i], ms.scale->data[i], ylo, yhi);
        yvals->data[i] = static_cast<float>(dec.decode_symbol(table));
    }
    return w.synthesis.forward(nullptr, yvals);
}

CodecTrainResult codec_train_forward(Tape& tape, const CodecWeights& w, const TensorPtr& x,
                                     Rng& noise) {
    auto y = w.analysis.forward(&tape, x);
    auto z = w.hyper_analysis.forward(&tape, y);
    auto zt = entropy::quantize(&tape, z, entropy::QuantizeMode::train, &noise);
    auto hyper_out = w.hyper_synthesis.forward(&tape, zt);
    auto ms = split_mean_scale(&tape, hyper_out, w.config.latent_channels);
    auto yt = entropy::quantize(&tape, y, entropy::QuantizeMode::train, &noise);

    auto y_lik = entropy::gaussian_likelihood(&tape, yt, ms.mean, ms.scale);
    auto z_lik = w.z_prior.likelihood(&tape, zt);

    CodecTrainResult result;
    result.bits = add<float>(&tape, entropy::estimate_bits(&tape, y_lik),
                             entropy::estimate_bits(&tape, z_lik));
    result.recon = w.synthesis.forward(&tape, yt);
    return result;
}

CodecEncodeResult codec_identity(const TensorPtr& x) {
    CodecEncodeResult result;
    result.recon = make_tensor<float>(x->shape, x->data);
    result.bits_estimate = 0.0;
    return result;
}

// ---- residual attention blocks ----------------------------------------------------

namespace {

TensorPtr conv_he(Rng& rng, int cout, int cin, int k) {
    const float stddev = std::sqrt(2.0f / (static_cast<float>(k) * k * cin));
    return randn_tensor<float>(Shape(cout, cin, k, k), rng, stddev);
}

} // namespace

RefineNetWeights init_refine_net(const RefineNetConfig& config, Rng& rng) {
    RefineNetWeights w;
    w.config = config;
    const int c = config.width;
    const int squeeze = std::max(1, c / config.attention_ratio);
    w.head_w = conv_he(rng, c, config.io_channels, 3);
    w.head_b = make_tensor<float>(Shape(1, c, 1, 1));
    for (int i = 0; i < config.rab_count; ++i) {
        RabWeights rab;
        rab.conv1_w = conv_he(rng, c, c, 3);
        rab.conv1_b = make_tensor<float>(Shape(1, c, 1, 1));
        rab.conv2_w = conv_he(rng, c, c, 3);
        rab.conv2_b = make_tensor<float>(Shape(1, c, 1, 1));
        rab.squeeze_w = conv_he(rng, squeeze, c, 1);
        rab.squeeze_b = make_tensor<float>(Shape(1, squeeze, 1, 1));
        rab.excite_w = conv_he(rng, c, squeeze, 1);
        rab.excite_b = make_tensor<float>(Shape(1, c, 1, 1));
        w.rabs.push_back(std::move(rab));
    }
    w.tail_w = make_tensor<float>(Shape(config.io_channels, c, 3, 3)); // zero: net starts as identity
    w.tail_b = make_tensor<float>(Shape(1, config.io_channels, 1, 1));
    return w;
}

TensorPtr rab_gate(Tape* tape, const RabWeights& w, const TensorPtr& u) {
    auto pooled = global_avg_pool<float>(tape, u);
    auto squeezed = relu<float>(tape, conv2d<float>(tape, pooled, w.squeeze_w, w.squeeze_b, 1));
    return sigmoid<float>(tape, conv2d<float>(tape, squeezed, w.excite_w, w.excite_b, 1));
}

TensorPtr rab_forward(Tape* tape, const RabWeights& w, const TensorPtr& x) {
    auto u = conv2d<float>(tape, relu<float>(tape, conv2d<float>(tape, x, w.conv1_w, w.conv1_b, 1)),
                           w.conv2_w, w.conv2_b, 1);
    auto gate = rab_gate(tape, w, u);
    return add<float>(tape, x, mul<float>(tape, u, gate));
}

TensorPtr refine_forward(Tape* tape, const RefineNetWeights& w, const TensorPtr& x) {
    auto f = conv2d<float>(tape, x, w.head_w, w.head_b, 1);
    for (const auto& rab : w.rabs) f = rab_forward(tape, rab, f);
    auto correction = conv2d<float>(tape, f, w.tail_w, w.tail_b, 1);
    return add<float>(tape, x, correction);
}

void RefineNetWeights::params(std::vector<TensorPtr>& out) const {
    out.push_back(head_w);
    out.push_back(head_b);
    for (const auto& r : rabs) {
        out.push_back(r.conv1_w);
        out.push_back(r.conv1_b);
        out.push_back(r.conv2_w);
        out.push_back(r.conv2_b);
        out.push_back(r.squeeze_w);
        out.push_back(r.squeeze_b);
        out.push_back(r.excite_w);
        out.push_back(r.excite_b);
    }
    out.push_back(tail_w);
    out.push_back(tail_b);
}

void RefineNetWeights::named_params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".head.w", head_w);
    out.emplace_back(prefix + ".head.b", head_b);
    for (std::size_t i = 0; i < rabs.size(); ++i) {
        const std::string p = prefix + ".rab" + std::to_string(i);
        out.emplace_back(p + ".conv1.w", rabs[i].conv1_w);
        out.emplace_back(p + ".conv1.b", rabs[i].conv1_b);
        out.emplace_back(p + ".conv2.w", rabs[i].conv2_w);
        out.emplace_back(p + ".conv2.b", rabs[i].conv2_b);
        out.emplace_back(p + ".squeeze.w", rabs[i].squeeze_w);
        out.emplace_back(p + ".squeeze.b", rabs[i].squeeze_b);
        out.emplace_back(p + ".excite.w", rabs[i].excite_w);
        out.emplace_back(p + ".excite.b", rabs[i].excite_b);
    }
    out.emplace_back(prefix + ".tail.w", tail_w);
    out.emplace_back(prefix + ".tail.b", tail_b);
}

void RefineNetWeights::set_requires_grad(bool on) const {
    std::vector<TensorPtr> all;
    params(all);
    for (auto& p : all) p->requires_grad = on;
}

IlrWeights init_ilr(const IlrConfig& config, Rng& rng) {
    if (parse_layer_spec(config.specs.back()).channels != config.io_channels)
        throw ShapeError("init_ilr: last spec must restore " + std::to_string(config.io_channels) +
                         " channels");
    IlrWeights w;
    w.config = config;
    w.stack = build_conv_stack(config.specs, config.io_channels, Activation::relu, true, rng);
    return w;
}

TensorPtr ilr_forward(Tape* tape, const IlrWeights& w, const TensorPtr& x) {
    return add<float>(tape, x, w.stack.forward(tape, x));
}

} // namespace eev::nets
