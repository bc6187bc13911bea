#include "eev/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "eev/png_io.hpp"
#include "eev/train.hpp"

namespace eev::pipeline {

const char* version_name(EevVersion v) {
    switch (v) {
    case EevVersion::v0_1: return "eev-0.1";
    case EevVersion::v0_2: return "eev-0.2";
    case EevVersion::v0_3: return "eev-0.3";
    case EevVersion::v0_4: return "eev-0.4";
    }
    return "?";
}

EevVersion version_from_name(const std::string& name) {
    if (name == "eev-0.1" || name == "0.1") return EevVersion::v0_1;
    if (name == "eev-0.2" || name == "0.2") return EevVersion::v0_2;
    if (name == "eev-0.3" || name == "0.3") return EevVersion::v0_3;
    if (name == "eev-0.4" || name == "0.4") return EevVersion::v0_4;
    throw ParseError("unknown model \"" + name + "\" (expected eev-0.1 .. eev-0.4)");
}

ToolFlags tools_for_version(EevVersion v) {
    ToolFlags t;
    t.me_net = t.mc_net = t.rc_module = true;
    if (v >= EevVersion::v0_2) t.mcp_refine = true;
    if (v >= EevVersion::v0_3) t.ilr_network = true;
    if (v == EevVersion::v0_4) t.motion_decouple = true;
    return t;
}

ModelConfig ModelConfig::for_version(EevVersion v) {
    ModelConfig c;
    c.version = v;
    c.tools = tools_for_version(v);
    return c;
}

ModelConfig ModelConfig::toy(EevVersion v) {
    ModelConfig c = for_version(v);
    c.arch.menet_specs = {"k7c8s1", "k3c8s1", "k3c2s1"};
    c.arch.ae_mid_channels = 12;
    c.arch.ae_latent_channels = 8;
    c.arch.ae_hyper_channels = 6;
    c.arch.mcnet_specs = {"k3c8s1", "k3c3s1"};
    c.arch.rab_width = 8;
    c.arch.rab_count = 2;
    c.arch.attention_ratio = 4;
    c.arch.ilr_specs = {"k5c8s1", "k3c8s1", "k5c3s1"};
    c.arch.recurrent.feature_channels = 16;
    c.arch.recurrent.stage1_channels = 8;
    c.arch.recurrent.mdiff_latent_channels = 8;
    c.arch.recurrent.branch_channels = 8;
    return c;
}

void ModelConfig::validate() const {
    const ToolFlags expect = tools_for_version(version);
    const auto mismatch = [&](bool a, bool b, const char* name) {
        if (a != b)
            throw Error(std::string("config: tool flag ") + name + " contradicts " +
                        version_name(version) + "'s tool set");
    };
    mismatch(tools.me_net, expect.me_net, "me_net");
    mismatch(tools.mc_net, expect.mc_net, "mc_net");
    mismatch(tools.rc_module, expect.rc_module, "rc_module");
    mismatch(tools.mcp_refine, expect.mcp_refine, "mcp_refine");
    mismatch(tools.ilr_network, expect.ilr_network, "ilr_network");
    mismatch(tools.motion_decouple, expect.motion_decouple, "motion_decouple");
    if (gop_size <= 0 || intra_period <= 0)
        throw Error("config: gop_size and intra_period must be positive");
}

void ModelWeights::params(std::vector<TensorPtr>& out) const {
    const ToolFlags& t = config.tools;
    if (t.motion_decouple) {
        rec.params(out);
        st_refine.params(out);
        residual_codec.params(out);
        ilr.params(out);
        return;
    }
    menet.params(out);
    mv_codec.params(out);
    mcnet.params(out);
    if (t.mcp_refine) mcp.params(out);
    residual_codec.params(out);
    if (config.c2f_enabled()) residual_codec2.params(out);
    if (t.ilr_network) ilr.params(out);
}

nets::NamedParams ModelWeights::named_params() const {
    nets::NamedParams out;
    const ToolFlags& t = config.tools;
    if (t.motion_decouple) {
        rec.named_params("rec", out);
        st_refine.named_params("st_refine", out);
        residual_codec.named_params("residual", out);
        ilr.named_params("ilr", out);
        return out;
    }
    menet.named_params("menet", out);
    mv_codec.named_params("mv", out);
    mcnet.named_params("mcnet", out);
    if (t.mcp_refine) mcp.named_params("mcp", out);
    residual_codec.named_params("residual", out);
    if (config.c2f_enabled()) residual_codec2.named_params("residual2", out);
    if (t.ilr_network) ilr.named_params("ilr", out);
    return out;
}

void ModelWeights::set_requires_grad(bool on) const {
    std::vector<TensorPtr> all;
    params(all);
    for (auto& p : all) p->requires_grad = on;
}

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ModelWeights w;
    w.config = config;

    motion::MENetConfig mc;
    mc.level_specs = config.arch.menet_specs;
    mc.share_level_weights = config.arch.menet_share_weights;
    w.menet = motion::init_menet(mc, rng);

    nets::CodecConfig mvc;
    mvc.in_channels = 2;
    mvc.out_channels = 2;
    mvc.mid_channels = config.arch.ae_mid_channels;
    mvc.latent_channels = config.arch.ae_latent_channels;
    mvc.hyper_channels = config.arch.ae_hyper_channels;
    w.mv_codec = nets::init_codec(mvc, rng);

    w.mcnet = build_conv_stack(config.arch.mcnet_specs, 8, Activation::leaky_relu, true, rng);

    nets::RefineNetConfig rc;
    rc.io_channels = 3;
    rc.width = config.arch.rab_width;
    rc.rab_count = config.arch.rab_count;
    rc.attention_ratio = config.arch.attention_ratio;
    w.mcp = nets::init_refine_net(rc, rng);

    nets::CodecConfig resc = mvc;
    resc.in_channels = 3;
    resc.out_channels = 3;
    w.residual_codec = nets::init_codec(resc, rng);
    w.residual_codec2 = nets::init_codec(resc, rng);

    nets::IlrConfig ilrc;
    ilrc.specs = config.arch.ilr_specs;
    w.ilr = nets::init_ilr(ilrc, rng);

    w.st_refine = nets::init_refine_net(rc, rng);
    w.rec = recurrent::init_recurrent(config.arch.recurrent, rng);
    return w;
}

void DecodedPictureBuffer::reset() {
    frames.clear();
    features.clear();
    state.reset();
}

void DecodedPictureBuffer::push(const TensorPtr& frame) {
    frames.push_back(frame);
    while (static_cast<int>(frames.size()) > frame_capacity) frames.pop_front();
}

// ---- shared P-frame synthesis (runs identically on both sides) -----------------

namespace {

struct Prediction {
    TensorPtr x_bar;
    TensorPtr x_barbar;
};

Prediction predict_classic(const TensorPtr& ref, const TensorPtr& flow_hat,
                           const ModelConfig& config, const ModelWeights& weights,
                           OpCounters* counters) {
    Prediction p;
    p.x_bar = bilinear_warp<float>(nullptr, ref, flow_hat);
    if (config.tools.mc_net) {
        if (counters) counters->bump("mc_net");
        auto mc_in = concat_channels<float>(nullptr, {p.x_bar, ref, flow_hat});
        p.x_bar = add<float>(nullptr, p.x_bar, weights.mcnet.forward(nullptr, mc_in));
    }
    if (config.tools.mcp_refine) {
        if (counters) counters->bump("mcp_refine");
        p.x_barbar = nets::refine_forward(nullptr, weights.mcp, p.x_bar);
    } else {
        p.x_barbar = p.x_bar;
    }
    return p;
}

struct Reconstruction {
    TensorPtr x_tilde;
    TensorPtr x_hat;
};

Reconstruction reconstruct_classic(const TensorPtr& x_barbar, const TensorPtr& r_hat,
                                   const TensorPtr& r2_hat, const ModelConfig& config,
                                   const ModelWeights& weights, OpCounters* counters) {
    Reconstruction r;
    r.x_tilde = add<float>(nullptr, x_barbar, r_hat);
    if (r2_hat) r.x_tilde = add<float>(nullptr, r.x_tilde, r2_hat);
    if (config.tools.ilr_network) {
        if (counters) counters->bump("ilr");
        r.x_hat = nets::ilr_forward(nullptr, weights.ilr, r.x_tilde);
    } else {
        r.x_hat = r.x_tilde;
    }
    return r;
}

struct RecurrentPrediction {
    TensorPtr x_bar;
    TensorPtr x_dot;
    recurrent::MotionPrediction motion;
    TensorPtr mdiff_mv;
    recurrent::LstmState next_branch;
};

void push_v4(DecodedPictureBuffer& dpb, const ModelWeights& weights, const TensorPtr& recon) {
    dpb.push(recon);
    dpb.features.push_back(recurrent::feature_extract(nullptr, weights.rec, recon));
    while (static_cast<int>(dpb.features.size()) > 4) dpb.features.pop_front();
}

std::vector<TensorPtr> dpb_feature_list(const DecodedPictureBuffer& dpb) {
    std::vector<TensorPtr> list;
    for (const auto& f : dpb.features) list.push_back(f.features);
    return list;
}

} // namespace

void dpb_push_decoded(DecodedPictureBuffer& dpb, const ModelConfig& config,
                      const ModelWeights& weights, const TensorPtr& frame) {
    if (config.tools.motion_decouple) {
        push_v4(dpb, weights, frame);
    } else {
        dpb.push(frame);
    }
}

EncodeFrameResult encode_frame_p(const TensorPtr& frame, DecodedPictureBuffer& dpb,
                                 const ModelConfig& config, const ModelWeights& weights,
                                 OpCounters* counters) {
    config.validate();
    if (dpb.empty()) throw Error("encode_frame_p: decoded picture buffer is empty");
    const TensorPtr ref = dpb.frames.back();
    if (ref->shape != frame->shape)
        throw ShapeError("encode_frame_p: frame " + frame->shape.str() +
                         " does not match reference " + ref->shape.str());

    EncodeFrameResult out;
    out.chunk.type = bitstream::FrameType::predicted;
    const double pixels = static_cast<double>(frame->shape.h) * frame->shape.w;

    if (config.tools.motion_decouple) {
        if (counters) counters->bump("recurrent");
        const auto& ref_fe = dpb.features.back();
        auto pred = recurrent::predict_motion(nullptr, weights.rec, dpb_feature_list(dpb),
                                              dpb.state);
        auto cur_fe = recurrent::feature_extract(nullptr, weights.rec, frame);
        auto mdiff = recurrent::motion_difference_encode(weights.rec, ref_fe.features,
                                                         cur_fe.features, pred.features,
                                                         dpb.state);
        auto prog = recurrent::progressive_predict(nullptr, weights.rec, pred.features, mdiff.mv,
                                                   ref_fe.skips);
        auto x_dot = nets::refine_forward(nullptr, weights.st_refine, prog.frame);

        auto residual = sub<float>(nullptr, frame, x_dot);
        auto res = config.debug_lossless ? nets::codec_identity(residual)
                                         : nets::codec_encode(weights.residual_codec, residual);
        if (counters) counters->bump("residual");
        Reconstruction rec = reconstruct_classic(x_dot, res.recon, nullptr, config, weights,
                                                 counters);

        if (!config.debug_lossless) {
            out.chunk.payloads.push_back({bitstream::PayloadKind::motion, mdiff.payload});
            out.chunk.payloads.push_back({bitstream::PayloadKind::residual, res.payload});
        }
        out.recon = rec.x_hat;
        out.debug = {prog.frame, x_dot, res.recon, nullptr, rec.x_tilde, rec.x_hat};
        out.stats.type = bitstream::FrameType::predicted;
        out.stats.mv_bits = 8 * mdiff.payload.size();
        out.stats.residual_bits = 8 * res.payload.size();
        out.stats.mse = mse<float>(nullptr, frame, rec.x_hat)->scalar();
        out.stats.rd_loss = rd_loss(out.stats.mse,
                                    static_cast<double>(out.stats.total_bits()) / pixels,
                                    config.lambda_value);

        dpb.state.layers = pred.next_layers;
        dpb.state.mdiff = mdiff.next_branch;
        dpb.state.initialized = true;
        push_v4(dpb, weights, rec.x_hat);
        return out;
    }

    if (counters) counters->bump("me_net");
    auto flow = motion::estimate_flow(nullptr, ref, frame, weights.menet);
    auto mv = config.debug_lossless ? nets::codec_identity(flow)
                                    : nets::codec_encode(weights.mv_codec, flow);
    if (counters) counters->bump("mv_codec");

    auto pred = predict_classic(ref, mv.recon, config, weights, counters);

    auto residual = sub<float>(nullptr, frame, pred.x_barbar);
    auto res = config.debug_lossless ? nets::codec_identity(residual)
                                     : nets::codec_encode(weights.residual_codec, residual);
    if (counters) counters->bump("residual");

    nets::CodecEncodeResult res2;
    TensorPtr r2_hat;
    if (config.c2f_enabled()) {
        if (counters) counters->bump("c2f");
        auto stage1 = add<float>(nullptr, pred.x_barbar, res.recon);
        auto residual2 = sub<float>(nullptr, frame, stage1);
        res2 = config.debug_lossless ? nets::codec_identity(residual2)
                                     : nets::codec_encode(weights.residual_codec2, residual2);
        r2_hat = res2.recon;
    }

    Reconstruction rec = reconstruct_classic(pred.x_barbar, res.recon, r2_hat, config, weights,
                                             counters);

    if (!config.debug_lossless) {
        out.chunk.payloads.push_back({bitstream::PayloadKind::motion, mv.payload});
        out.chunk.payloads.push_back({bitstream::PayloadKind::residual, res.payload});
        if (config.c2f_enabled())
            out.chunk.payloads.push_back({bitstream::PayloadKind::residual_c2f, res2.payload});
    }
    out.recon = rec.x_hat;
    out.debug = {pred.x_bar, pred.x_barbar, res.recon, r2_hat, rec.x_tilde, rec.x_hat};
    out.stats.type = bitstream::FrameType::predicted;
    out.stats.mv_bits = 8 * mv.payload.size();
    out.stats.residual_bits = 8 * res.payload.size();
    out.stats.c2f_bits = 8 * res2.payload.size();
    out.stats.mse = mse<float>(nullptr, frame, rec.x_hat)->scalar();
    out.stats.rd_loss =
        rd_loss(out.stats.mse, static_cast<double>(out.stats.total_bits()) / pixels,
                config.lambda_value);

    dpb.push(rec.x_hat);
    return out;
}

namespace {

const bitstream::Payload& find_payload(const bitstream::FrameChunk& chunk,
                                       bitstream::PayloadKind kind, const char* what) {
    for (const auto& p : chunk.payloads)
        if (p.kind == kind) return p;
    throw FormatError(std::string("frame chunk is missing its ") + what + " payload");
}

} // namespace

TensorPtr decode_frame_p(const bitstream::FrameChunk& chunk, DecodedPictureBuffer& dpb,
                         const ModelConfig& config, const ModelWeights& weights,
                         OpCounters* counters) {
    config.validate();
    if (config.debug_lossless)
        throw Error("decode_frame_p: debug-lossless mode never reads bitstreams");
    if (dpb.empty()) throw Error("decode_frame_p: decoded picture buffer is empty");
    if (chunk.type != bitstream::FrameType::predicted)
        throw FormatError("decode_frame_p: chunk is not a P frame");
    const TensorPtr ref = dpb.frames.back();

    if (config.tools.motion_decouple) {
        if (counters) counters->bump("recurrent");
        const auto& ref_fe = dpb.features.back();
        auto pred = recurrent::predict_motion(nullptr, weights.rec, dpb_feature_list(dpb),
                                              dpb.state);
        const auto& mdiff_payload = find_payload(chunk, bitstream::PayloadKind::motion, "motion");
        auto mdiff = recurrent::motion_difference_decode(weights.rec, mdiff_payload.bytes,
                                                         ref_fe.features->shape, dpb.state);
        auto prog = recurrent::progressive_predict(nullptr, weights.rec, pred.features, mdiff.mv,
                                                   ref_fe.skips);
        auto x_dot = nets::refine_forward(nullptr, weights.st_refine, prog.frame);

        const auto& res_payload = find_payload(chunk, bitstream::PayloadKind::residual, "residual");
        auto r_hat = nets::codec_decode(weights.residual_codec, res_payload.bytes,
                                        Shape(ref->shape.n, 3, ref->shape.h, ref->shape.w));
        if (counters) counters->bump("residual");
        Reconstruction rec = reconstruct_classic(x_dot, r_hat, nullptr, config, weights, counters);

        dpb.state.layers = pred.next_layers;
        dpb.state.mdiff = mdiff.next_branch;
        dpb.state.initialized = true;
        push_v4(dpb, weights, rec.x_hat);
        return rec.x_hat;
    }

    const auto& mv_payload = find_payload(chunk, bitstream::PayloadKind::motion, "motion");
    auto flow_hat = nets::codec_decode(weights.mv_codec, mv_payload.bytes,
                                       Shape(ref->shape.n, 2, ref->shape.h, ref->shape.w));
    if (counters) counters->bump("mv_codec");

    auto pred = predict_classic(ref, flow_hat, config, weights, counters);

    const auto& res_payload = find_payload(chunk, bitstream::PayloadKind::residual, "residual");
    auto r_hat = nets::codec_decode(weights.residual_codec, res_payload.bytes,
                                    Shape(ref->shape.n, 3, ref->shape.h, ref->shape.w));
    if (counters) counters->bump("residual");

    TensorPtr r2_hat;
    if (config.c2f_enabled()) {
        if (counters) counters->bump("c2f");
        const auto& c2f_payload =
            find_payload(chunk, bitstream::PayloadKind::residual_c2f, "C2F residual");
        r2_hat = nets::codec_decode(weights.residual_codec2, c2f_payload.bytes,
                                    Shape(ref->shape.n, 3, ref->shape.h, ref->shape.w));
    }

    Reconstruction rec = reconstruct_classic(pred.x_barbar, r_hat, r2_hat, config, weights,
                                             counters);
    dpb.push(rec.x_hat);
    return rec.x_hat;
}

// ---- intra backends ------------------------------------------------------------

Image8 tensor_to_image(const TensorPtr& frame) {
    if (frame->shape.n != 1 || frame->shape.c != 3)
        throw ShapeError("tensor_to_image: expected (1,3,H,W), got " + frame->shape.str());
    Image8 img;
    img.width = frame->shape.w;
    img.height = frame->shape.h;
    img.rgb.resize(img.pixel_count() * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::round(std::clamp(frame->at(0, c, y, x), 0.0f, 1.0f) * 255.0f);
                img.at(x, y, c) = static_cast<std::uint8_t>(v);
            }
    return img;
}

TensorPtr image_to_tensor(const Image8& image) {
    auto t = make_tensor<float>(Shape(1, 3, image.height, image.width));
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c)
                t->at(0, c, y, x) = static_cast<float>(image.at(x, y, c)) / 255.0f;
    return t;
}

IntraResult VerbatimIntra::code(const TensorPtr& frame) {
    const Image8 img = tensor_to_image(frame);
    IntraResult r;
    r.payload = img.rgb;
    r.bits = 8 * img.rgb.size(); // 24 bits per pixel
    r.recon = image_to_tensor(img);
    return r;
}

TensorPtr VerbatimIntra::decode(const std::vector<std::uint8_t>& payload, int height, int width) {
    if (payload.size() != static_cast<std::size_t>(height) * width * 3)
        throw FormatError("verbatim intra payload of " + std::to_string(payload.size()) +
                          " bytes does not match " + std::to_string(height) + "x" +
                          std::to_string(width));
    Image8 img;
    img.width = width;
    img.height = height;
    img.rgb = payload;
    return image_to_tensor(img);
}

ExternalIntra::ExternalIntra(std::string command_template, std::string work_dir)
    : command_template_(std::move(command_template)), work_dir_(std::move(work_dir)) {
    std::filesystem::create_directories(work_dir_);
}

namespace {

std::string substitute(std::string text, const std::string& key, const std::string& value) {
    for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key))
        text.replace(pos, key.size(), value);
    return text;
}

} // namespace

IntraResult ExternalIntra::code(const TensorPtr& frame) {
    const std::string base = work_dir_ + "/intra_" + std::to_string(counter_++);
    const std::string input_png = base + "_in.png";
    const std::string output_bin = base + "_out.bin";
    const std::string recon_png = base + "_recon.png";

    png::write_png_file(input_png, tensor_to_image(frame));
    std::string cmd = command_template_;
    cmd = substitute(cmd, "{input.png}", input_png);
    cmd = substitute(cmd, "{output.bin}", output_bin);
    cmd = substitute(cmd, "{recon.png}", recon_png);
    const int status = std::system(cmd.c_str());
    if (status != 0)
        throw Error("external intra backend failed: command \"" + cmd + "\" exited with status " +
                    std::to_string(status));

    std::ifstream bin(output_bin, std::ios::binary);
    if (!bin)
        throw Error("external intra backend produced no output file " + output_bin);
    std::vector<std::uint8_t> payload((std::istreambuf_iterator<char>(bin)),
                                      std::istreambuf_iterator<char>());

    IntraResult r;
    r.payload = std::move(payload);
    r.bits = 8 * r.payload.size();
    r.recon = image_to_tensor(png::read_png_file(recon_png));
    return r;
}

TensorPtr ExternalIntra::decode(const std::vector<std::uint8_t>&, int, int) {
    throw Error("external intra backend cannot decode without its companion tool; decode the "
                "stored reconstruction with the same backend that encoded it");
}

// ---- whole-video coding -----------------------------------------------------------

double rd_loss(double distortion, double bits_per_pixel, double lambda) {
    return lambda * distortion + bits_per_pixel;
}

EncodeVideoResult encode_video(const std::vector<TensorPtr>& frames, const ModelConfig& config,
                               const ModelWeights& weights, IntraBackend& intra,
                               OpCounters* counters, const QualityFn* quality_override) {
    config.validate();
    if (config.debug_lossless)
        throw Error("encode_video: debug-lossless mode never writes bitstreams");
    if (frames.empty()) throw Error("encode_video: no frames");
    const Shape dims = frames[0]->shape;

    EncodeVideoResult out;
    DecodedPictureBuffer dpb;
    dpb.frame_capacity = 1;

    std::vector<bitstream::FrameChunk> chunks;
    const double pixels = static_cast<double>(dims.h) * dims.w;

    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t]->shape != dims)
            throw ShapeError("encode_video: frame " + std::to_string(t) + " shape " +
                             frames[t]->shape.str() + " differs from " + dims.str());
        FrameStats stats;
        stats.index = static_cast<int>(t);
        if (t % static_cast<std::size_t>(config.intra_period) == 0) {
            auto res = intra.code(frames[t]);
            bitstream::FrameChunk chunk;
            chunk.type = bitstream::FrameType::intra;
            chunk.payloads.push_back({bitstream::PayloadKind::intra, res.payload});
            chunks.push_back(std::move(chunk));

            stats.type = bitstream::FrameType::intra;
            stats.intra_bits = res.bits;
            stats.mse = mse<float>(nullptr, frames[t], res.recon)->scalar();
            stats.rd_loss = rd_loss(stats.mse, static_cast<double>(res.bits) / pixels,
                                    config.lambda_value);
            dpb.reset();
            if (config.tools.motion_decouple) {
                push_v4(dpb, weights, res.recon);
            } else {
                dpb.push(res.recon);
            }
            out.recons.push_back(res.recon);
        } else {
            auto res = encode_frame_p(frames[t], dpb, config, weights, counters);
            res.stats.index = static_cast<int>(t);
            stats = res.stats;
            chunks.push_back(std::move(res.chunk));
            out.recons.push_back(res.recon);
        }
        out.stats.push_back(stats);
    }

    bitstream::ContainerHeader header;
    header.width = static_cast<std::uint32_t>(dims.w);
    header.height = static_cast<std::uint32_t>(dims.h);
    header.frame_count = static_cast<std::uint32_t>(frames.size());
    header.gop_size = static_cast<std::uint16_t>(config.gop_size);
    header.intra_period = static_cast<std::uint16_t>(config.intra_period);
    header.model_id = static_cast<std::uint8_t>(config.version);
    header.metric = static_cast<std::uint8_t>(config.metric);
    header.lambda_value = config.lambda_value;
    header.weights_crc = nets::weights_crc(weights.named_params());
    out.container = bitstream::write_container(header, chunks);

    const double total_bits = 8.0 * static_cast<double>(out.container.size());
    out.rd.bpp = total_bits / (static_cast<double>(frames.size()) * pixels);
    double quality = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (quality_override) {
            quality += (*quality_override)(frames[t], out.recons[t]);
        } else {
            const double m = out.stats[t].mse;
            quality += m > 0.0 ? std::min(10.0 * std::log10(1.0 / m), 100.0) : 100.0;
        }
    }
    out.rd.quality = quality / static_cast<double>(frames.size());
    return out;
}

namespace {

std::vector<TensorPtr> decode_chunks(const bitstream::Container& container,
                                     const ModelConfig& config, const ModelWeights& weights,
                                     IntraBackend& intra, OpCounters* counters,
                                     std::size_t first_chunk) {
    const int height = static_cast<int>(container.header.height);
    const int width = static_cast<int>(container.header.width);

    DecodedPictureBuffer dpb;
    dpb.frame_capacity = 1;
    std::vector<TensorPtr> recons;
    for (std::size_t t = first_chunk; t < container.chunks.size(); ++t) {
        const auto& chunk = container.chunks[t];
        if (chunk.type == bitstream::FrameType::intra) {
            const auto& payload = find_payload(chunk, bitstream::PayloadKind::intra, "intra");
            auto recon = intra.decode(payload.bytes, height, width);
            dpb.reset();
            if (config.tools.motion_decouple) {
                push_v4(dpb, weights, recon);
            } else {
                dpb.push(recon);
            }
            recons.push_back(recon);
        } else {
            if (dpb.empty())
                throw FormatError("bitstream starts with a P frame at chunk " + std::to_string(t));
            recons.push_back(decode_frame_p(chunk, dpb, config, weights, counters));
        }
    }
    return recons;
}

bitstream::Container open_container(const std::vector<std::uint8_t>& bytes,
                                    const ModelConfig& config, const ModelWeights& weights) {
    auto container = bitstream::read_container(bytes);
    if (container.header.model_id != static_cast<std::uint8_t>(config.version))
        throw FormatError(std::string("version mismatch: bitstream was produced by ") +
                          version_name(static_cast<EevVersion>(container.header.model_id)) +
                          " but the decoder is configured for " + version_name(config.version));
    const std::uint32_t crc = nets::weights_crc(weights.named_params());
    if (container.header.weights_crc != crc)
        throw FormatError("weights mismatch: bitstream expects weight CRC " +
                          std::to_string(container.header.weights_crc) + ", loaded weights have " +
                          std::to_string(crc));
    return container;
}

} // namespace

std::vector<TensorPtr> decode_video(const std::vector<std::uint8_t>& container_bytes,
                                    const ModelConfig& config, const ModelWeights& weights,
                                    IntraBackend& intra, OpCounters* counters) {
    config.validate();
    auto container = open_container(container_bytes, config, weights);
    return decode_chunks(container, config, weights, intra, counters, 0);
}

std::vector<TensorPtr> decode_video_from_gop(const std::vector<std::uint8_t>& container_bytes,
                                             const ModelConfig& config,
                                             const ModelWeights& weights, IntraBackend& intra,
                                             int gop_index) {
    config.validate();
    auto container = open_container(container_bytes, config, weights);
    const std::size_t first = static_cast<std::size_t>(gop_index) *
                              static_cast<std::size_t>(container.header.intra_period);
    if (first >= container.chunks.size())
        throw Error("decode_video_from_gop: GOP " + std::to_string(gop_index) +
                    " is beyond the stream");
    if (container.chunks[first].type != bitstream::FrameType::intra)
        throw FormatError("decode_video_from_gop: chunk " + std::to_string(first) +
                          " is not an intra frame");
    return decode_chunks(container, config, weights, intra, nullptr, first);
}

// ---- differentiable MS-SSIM (training objective for the msssim target) -------------

namespace {

TensorPtr gaussian_window_tensor() {
    // 11x11, sigma 1.5, normalized
    auto w = make_tensor<float>(Shape(1, 1, 11, 11));
    double total = 0.0;
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
            const double dy = y - 5, dx = x - 5;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            w->at(0, 0, y, x) = static_cast<float>(v);
            total += v;
        }
    for (auto& v : w->data) v = static_cast<float>(v / total);
    return w;
}

TensorPtr blur_per_channel(Tape* tape, const TensorPtr& x, const TensorPtr& window) {
    std::vector<TensorPtr> blurred;
    for (int c = 0; c < x->shape.c; ++c)
        blurred.push_back(
            conv2d<float>(tape, slice_channels<float>(tape, x, c, 1), window, nullptr, 1));
    return concat_channels<float>(tape, blurred);
}

struct SsimParts {
    TensorPtr luminance; // mean over the l map
    TensorPtr contrast;  // mean over the cs map
};

SsimParts ssim_scale(Tape* tape, const TensorPtr& a, const TensorPtr& b,
                     const TensorPtr& window) {
    constexpr float c1 = 0.01f * 0.01f; // signals in [0,1]
    constexpr float c2 = 0.03f * 0.03f;
    auto mu_a = blur_per_channel(tape, a, window);
    auto mu_b = blur_per_channel(tape, b, window);
    auto aa = blur_per_channel(tape, mul<float>(tape, a, a), window);
    auto bb = blur_per_channel(tape, mul<float>(tape, b, b), window);
    auto ab = blur_per_channel(tape, mul<float>(tape, a, b), window);
    auto var_a = sub<float>(tape, aa, mul<float>(tape, mu_a, mu_a));
    auto var_b = sub<float>(tape, bb, mul<float>(tape, mu_b, mu_b));
    auto cov = sub<float>(tape, ab, mul<float>(tape, mu_a, mu_b));

    auto l_num = add_scalar<float>(tape, mul_scalar<float>(tape, mul<float>(tape, mu_a, mu_b), 2.0f), c1);
    auto l_den = add_scalar<float>(tape, add<float>(tape, mul<float>(tape, mu_a, mu_a),
                                                    mul<float>(tape, mu_b, mu_b)), c1);
    auto cs_num = add_scalar<float>(tape, mul_scalar<float>(tape, cov, 2.0f), c2);
    auto cs_den = add_scalar<float>(tape, add<float>(tape, var_a, var_b), c2);

    SsimParts parts;
    parts.luminance = mean<float>(tape, div<float>(tape, l_num, l_den));
    parts.contrast = mean<float>(tape, div<float>(tape, cs_num, cs_den));
    return parts;
}

} // namespace

// exposed through train_toy; also used by tests via the msssim metric target
TensorPtr ms_ssim_tensor(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    static const TensorPtr window = gaussian_window_tensor();
    static const double weights5[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

    int scales = 1;
    for (int s = 1; s < 5; ++s) {
        const int dim = std::min(a->shape.h, a->shape.w) >> s;
        if (dim >= 11 && (a->shape.h >> (s - 1)) % 2 == 0 && (a->shape.w >> (s - 1)) % 2 == 0)
            scales = s + 1;
        else
            break;
    }
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += weights5[s];

    TensorPtr result;
    TensorPtr xa = a, xb = b;
    for (int s = 0; s < scales; ++s) {
        auto parts = ssim_scale(tape, xa, xb, window);
        const float expo = static_cast<float>(weights5[s] / wsum);
        TensorPtr factor;
        if (s + 1 == scales) {
            auto ssim = mul<float>(tape, parts.luminance, parts.contrast);
            factor = pow_const<float>(tape, clamp_min<float>(tape, ssim, 1e-6f), expo);
        } else {
            factor = pow_const<float>(tape, clamp_min<float>(tape, parts.contrast, 1e-6f), expo);
            xa = avg_pool2<float>(tape, xa);
            xb = avg_pool2<float>(tape, xb);
        }
        result = result ? mul<float>(tape, result, factor) : factor;
    }
    return result;
}

// ---- toy training -------------------------------------------------------------------

TrainToyResult train_toy(const std::vector<TensorPtr>& frames, const ModelConfig& config,
                         ModelWeights& weights, int steps, double learning_rate,
                         std::uint64_t seed) {
    config.validate();
    if (frames.empty()) throw Error("train_toy: no frames");
    if (frames.size() > 8) throw Error("train_toy: toy scale means at most 8 frames");
    for (const auto& f : frames)
        if (f->shape.h > 128 || f->shape.w > 128)
            throw Error("train_toy: toy scale means frames at most 128x128");

    weights.set_requires_grad(true);
    std::vector<TensorPtr> params;
    weights.params(params);
    AdamOptimizer opt(params, learning_rate);
    Rng noise(seed);

    VerbatimIntra intra;
    const TensorPtr intra_recon = intra.code(frames[0]).recon;
    const double pixels = static_cast<double>(frames[0]->shape.h) * frames[0]->shape.w;
    const float lambda = static_cast<float>(config.lambda_value);

    TrainToyResult result;
    const int evals = std::max(steps, 0) + 1;

    for (int step = 0; step < evals; ++step) {
        const bool update = step > 0 && learning_rate != 0.0;
        opt.zero_grad();

        double step_loss = 0.0;
        TensorPtr ref = intra_recon;
        recurrent::RecurrentState state;
        recurrent::FeatureExtractResult ref_fe;
        if (config.tools.motion_decouple)
            ref_fe = recurrent::feature_extract(nullptr, weights.rec, ref);

        for (std::size_t t = 1; t < frames.size(); ++t) {
            Tape tape;
            const auto& x = frames[t];
            TensorPtr loss;
            TensorPtr recon;

            if (config.tools.motion_decouple) {
                auto pred = recurrent::predict_motion(&tape, weights.rec, {ref_fe.features}, state);
                auto cur_fe = recurrent::feature_extract(&tape, weights.rec, x);
                auto md = recurrent::motion_difference_train(tape, weights.rec, ref_fe.features,
                                                             cur_fe.features, pred.features,
                                                             state, noise);
                auto prog = recurrent::progressive_predict(&tape, weights.rec, pred.features,
                                                           md.mv, ref_fe.skips);
                auto x_dot = nets::refine_forward(&tape, weights.st_refine, prog.frame);
                auto res = nets::codec_train_forward(tape, weights.residual_codec,
                                                     sub<float>(&tape, x, x_dot), noise);
                auto x_tilde = add<float>(&tape, x_dot, res.recon);
                recon = config.tools.ilr_network
                            ? nets::ilr_forward(&tape, weights.ilr, x_tilde)
                            : x_tilde;

                auto distortion = config.metric == MetricTarget::msssim
                                      ? sub<float>(&tape, scalar_tensor<float>(1.0f),
                                                   ms_ssim_tensor(&tape, x, recon))
                                      : mse<float>(&tape, x, recon);
                auto bpp = mul_scalar<float>(&tape, add<float>(&tape, md.bits, res.bits),
                                             static_cast<float>(1.0 / pixels));
                auto l_pred = mse<float>(&tape, x, x_dot);
                loss = add<float>(&tape, add<float>(&tape, mul_scalar<float>(&tape, distortion, lambda), bpp),
                                  mul_scalar<float>(&tape, l_pred, 0.1f));

                state.layers.clear();
                for (auto& l : pred.next_layers)
                    state.layers.push_back({detach<float>(l.h), detach<float>(l.c)});
                state.mdiff = {detach<float>(md.next_branch.h), detach<float>(md.next_branch.c)};
                state.initialized = true;
            } else {
                auto ref_pyr = motion::build_pyramid(&tape, ref);
                auto cur_pyr = motion::build_pyramid(&tape, x);
                auto flows = motion::estimate_flow_levels(&tape, ref_pyr, cur_pyr, weights.menet);
                auto mv = nets::codec_train_forward(tape, weights.mv_codec, flows[0], noise);

                auto x_bar = bilinear_warp<float>(&tape, ref, mv.recon);
                if (config.tools.mc_net) {
                    auto mc_in = concat_channels<float>(&tape, {x_bar, ref, mv.recon});
                    x_bar = add<float>(&tape, x_bar, weights.mcnet.forward(&tape, mc_in));
                }
                auto x_barbar = config.tools.mcp_refine
                                    ? nets::refine_forward(&tape, weights.mcp, x_bar)
                                    : x_bar;

                auto res = nets::codec_train_forward(tape, weights.residual_codec,
                                                     sub<float>(&tape, x, x_barbar), noise);
                auto x_tilde = add<float>(&tape, x_barbar, res.recon);
                auto bits = add<float>(&tape, mv.bits, res.bits);
                if (config.c2f_enabled()) {
                    auto res2 = nets::codec_train_forward(
                        tape, weights.residual_codec2, sub<float>(&tape, x, x_tilde), noise);
                    x_tilde = add<float>(&tape, x_tilde, res2.recon);
                    bits = add<float>(&tape, bits, res2.bits);
                }
                recon = config.tools.ilr_network ? nets::ilr_forward(&tape, weights.ilr, x_tilde)
                                                 : x_tilde;

                auto distortion = config.metric == MetricTarget::msssim
                                      ? sub<float>(&tape, scalar_tensor<float>(1.0f),
                                                   ms_ssim_tensor(&tape, x, recon))
                                      : mse<float>(&tape, x, recon);
                auto bpp = mul_scalar<float>(&tape, bits, static_cast<float>(1.0 / pixels));
                loss = add<float>(&tape, mul_scalar<float>(&tape, distortion, lambda), bpp);
                if (config.tools.mcp_refine)
                    loss = add<float>(&tape,
                                      loss, mul_scalar<float>(&tape, mse<float>(&tape, x, x_barbar), 0.1f));
                loss = add<float>(&tape,
                                  loss, mul_scalar<float>(&tape,
                                                          motion::pyramid_loss(&tape, ref_pyr,
                                                                               cur_pyr, flows),
                                                          0.1f));
            }

            const double value = loss->scalar();
            if (!std::isfinite(value)) {
                result.diverged = true;
                result.divergence_note = "non-finite loss at step " + std::to_string(step) +
                                         ", frame " + std::to_string(t);
                return result;
            }
            step_loss += value;
            if (update) tape.backward(loss);

            ref = detach<float>(recon);
            if (config.tools.motion_decouple)
                ref_fe = recurrent::feature_extract(nullptr, weights.rec, ref);
        }
        if (update) opt.step();
        result.trajectory.push_back(step_loss / static_cast<double>(frames.size() - 1));
    }
    return result;
}

// ---- complexity description ----------------------------------------------------------

namespace {

complexity::ModuleDesc stack_module(const std::string& name, const ConvStack& stack,
                                    int in_channels, int input_downsample) {
    complexity::ModuleDesc mod;
    mod.name = name;
    mod.input_downsample = input_downsample;
    int cin = in_channels;
    for (const auto& layer : stack.layers) {
        mod.layers.push_back({layer.spec, cin});
        cin = layer.spec.channels;
    }
    return mod;
}

complexity::ModuleDesc refine_module(const std::string& name,
                                     const nets::RefineNetConfig& cfg) {
    complexity::ModuleDesc mod;
    mod.name = name;
    const int c = cfg.width;
    const int squeeze = std::max(1, c / cfg.attention_ratio);
    mod.layers.push_back({parse_layer_spec("k3c" + std::to_string(c) + "s1"), cfg.io_channels});
    for (int i = 0; i < cfg.rab_count; ++i) {
        mod.layers.push_back({parse_layer_spec("k3c" + std::to_string(c) + "s1"), c});
        mod.layers.push_back({parse_layer_spec("k3c" + std::to_string(c) + "s1"), c});
        mod.layers.push_back({parse_layer_spec("k1c" + std::to_string(squeeze) + "s1"), c});
        mod.layers.push_back({parse_layer_spec("k1c" + std::to_string(c) + "s1"), squeeze});
    }
    mod.layers.push_back({parse_layer_spec("k3c" + std::to_string(cfg.io_channels) + "s1"), c});
    return mod;
}

void codec_modules(const std::string& name, const nets::CodecWeights& codec,
                   complexity::ArchitectureDesc& arch) {
    arch.modules.push_back(stack_module(name + ".analysis", codec.analysis,
                                        codec.config.in_channels, 1));
    const int down = nets::codec_downsample_factor(codec);
    arch.modules.push_back(stack_module(name + ".synthesis", codec.synthesis,
                                        codec.config.latent_channels, down));
    arch.modules.push_back(stack_module(name + ".hyper_analysis", codec.hyper_analysis,
                                        codec.config.latent_channels, down));
    int hyper_down = down;
    for (const auto& l : codec.hyper_analysis.layers) hyper_down *= l.spec.stride;
    arch.modules.push_back(stack_module(name + ".hyper_synthesis", codec.hyper_synthesis,
                                        codec.config.hyper_channels, hyper_down));
}

complexity::ModuleDesc lstm_module(const std::string& name, const recurrent::ConvLstmWeights& w,
                                   int downsample) {
    complexity::ModuleDesc mod;
    mod.name = name;
    mod.input_downsample = downsample;
    mod.layers.push_back({parse_layer_spec("k3c" + std::to_string(4 * w.state_channels) + "s1"),
                          w.input_channels + w.state_channels});
    return mod;
}

} // namespace

complexity::ArchitectureDesc describe_architecture(const ModelConfig& config) {
    config.validate();
    auto weights = init_weights(config, 1); // values irrelevant, shapes only

    complexity::ArchitectureDesc arch;
    arch.name = version_name(config.version);

    if (config.tools.motion_decouple) {
        const auto& rc = weights.rec.config;
        const int m = rc.effective_feature_channels();
        if (!rc.identity_transform) {
            arch.modules.push_back(stack_module("feature_extract", weights.rec.extractor, 3, 1));
            arch.modules.push_back(
                stack_module("feature_restore.stage1", weights.rec.restore_stage1, m, 4));
            complexity::ModuleDesc fuse;
            fuse.name = "feature_restore.fuse";
            fuse.input_downsample = 2;
            fuse.layers.push_back({parse_layer_spec("k3c" + std::to_string(rc.stage1_channels) + "s1"),
                                   2 * rc.stage1_channels});
            arch.modules.push_back(fuse);
            arch.modules.push_back(
                stack_module("feature_restore.stage2", weights.rec.restore_stage2,
                             rc.stage1_channels, 2));
        }
        for (std::size_t i = 0; i < weights.rec.lstm.size(); ++i)
            arch.modules.push_back(
                lstm_module("convlstm" + std::to_string(i), weights.rec.lstm[i], 4));
        complexity::ModuleDesc mv_head;
        mv_head.name = "mv_head";
        mv_head.input_downsample = 4;
        mv_head.layers.push_back({parse_layer_spec("k3c2s1"), m});
        arch.modules.push_back(mv_head);
        arch.modules.push_back(
            stack_module("mdiff.analysis", weights.rec.mdiff_analysis, 3 * m, 4));
        arch.modules.push_back(stack_module("mdiff.synthesis", weights.rec.mdiff_synthesis,
                                            rc.mdiff_latent_channels, 8));
        arch.modules.push_back(lstm_module("mdiff.convlstm", weights.rec.mdiff_lstm, 4));
        complexity::ModuleDesc mdiff_head;
        mdiff_head.name = "mdiff.head";
        mdiff_head.input_downsample = 4;
        mdiff_head.layers.push_back({parse_layer_spec("k3c2s1"), rc.branch_channels});
        arch.modules.push_back(mdiff_head);
        arch.modules.push_back(stack_module("f2_refine", weights.rec.f2_refine, m, 4));
        arch.modules.push_back(refine_module("st_refine", weights.st_refine.config));
        codec_modules("residual", weights.residual_codec, arch);
        arch.modules.push_back(stack_module("ilr", weights.ilr.stack, 3, 1));
        return arch;
    }

    const int menet_in = 2 * 3 + 2;
    for (int level = 0; level < motion::kPyramidLevels; ++level) {
        auto mod = stack_module("me_net.level" + std::to_string(level),
                                weights.menet.stack_for_level(level), menet_in, 1 << level);
        if (config.arch.menet_share_weights) mod.count_params = level == 0;
        arch.modules.push_back(std::move(mod));
    }
    codec_modules("mv", weights.mv_codec, arch);
    if (config.tools.mc_net)
        arch.modules.push_back(stack_module("mc_net", weights.mcnet, 8, 1));
    if (config.tools.mcp_refine)
        arch.modules.push_back(refine_module("mcp_refine", weights.mcp.config));
    codec_modules("residual", weights.residual_codec, arch);
    if (config.c2f_enabled()) codec_modules("residual_c2f", weights.residual_codec2, arch);
    if (config.tools.ilr_network)
        arch.modules.push_back(stack_module("ilr", weights.ilr.stack, 3, 1));
    return arch;
}

} // namespace eev::pipeline
