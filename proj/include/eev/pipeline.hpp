#pragma once

// The coding loop: version-gated tool wiring, GOP structure, DPB management,
// closed-loop P-frame encode/decode, pluggable intra coding, the R-D
// objective, and the toy end-to-end training loop.

#include <deque>
#include <map>
#include <memory>
#include <optional>

#include "eev/bitstream.hpp"
#include "eev/complexity.hpp"
#include "eev/image.hpp"
#include "eev/motion.hpp"
#include "eev/nets.hpp"
#include "eev/recurrent.hpp"

namespace eev::pipeline {

enum class EevVersion : std::uint8_t { v0_1 = 0, v0_2 = 1, v0_3 = 2, v0_4 = 3 };
enum class MetricTarget : std::uint8_t { psnr = 0, msssim = 1 };

const char* version_name(EevVersion v);
EevVersion version_from_name(const std::string& name); // "eev-0.1" .. "eev-0.4"

struct ToolFlags {
    bool me_net = false;
    bool mc_net = false;
    bool rc_module = false;
    bool mcp_refine = false;
    bool ilr_network = false;
    bool motion_decouple = false;
};

// the coding-tool matrix: each version enables a fixed tool set
ToolFlags tools_for_version(EevVersion v);

struct ArchParams {
    std::vector<std::string> menet_specs = {"k7c32s1", "k7c64s1", "k7c32s1", "k7c16s1", "k7c2s1"};
    bool menet_share_weights = false;

    int ae_mid_channels = 128;
    int ae_latent_channels = 128;
    int ae_hyper_channels = 64;

    std::vector<std::string> mcnet_specs = {"k3c64s1", "k3c32s1", "k3c3s1"};

    int rab_width = 64;
    int rab_count = 5;
    int attention_ratio = 16;

    std::vector<std::string> ilr_specs = {"k5c32s1", "k3c32s1", "k3c32s1", "k3c32s1", "k5c3s1"};

    recurrent::RecurrentConfig recurrent;
};

struct ModelConfig {
    EevVersion version = EevVersion::v0_1;
    ToolFlags tools = tools_for_version(EevVersion::v0_1);
    std::uint32_t lambda_value = 256;
    MetricTarget metric = MetricTarget::psnr;
    int gop_size = 16;
    int intra_period = 16;
    ArchParams arch;
    // algebraic-identity debug path: codecs become exact pass-throughs and no
    // bitstream may be written
    bool debug_lossless = false;

    static ModelConfig for_version(EevVersion v);
    // reduced widths; same wiring, far cheaper on a laptop CPU
    static ModelConfig toy(EevVersion v);

    bool c2f_enabled() const { return version == EevVersion::v0_3; }
    void validate() const;
};

struct ModelWeights {
    ModelConfig config;
    motion::MENetWeights menet;
    nets::CodecWeights mv_codec;
    ConvStack mcnet; // correction on top of the warped frame
    nets::RefineNetWeights mcp;
    nets::CodecWeights residual_codec;
    nets::CodecWeights residual_codec2; // second C2F stage
    nets::IlrWeights ilr;
    nets::RefineNetWeights st_refine; // EEV-0.4 spatiotemporal refinement
    recurrent::RecurrentWeights rec;

    void params(std::vector<TensorPtr>& out) const;
    nets::NamedParams named_params() const;
    void set_requires_grad(bool on) const;
};

ModelWeights init_weights(const ModelConfig& config, std::uint64_t seed);

// per-session instrumentation: how often each tool ran
struct OpCounters {
    std::map<std::string, int> counts;
    void bump(const std::string& key) { ++counts[key]; }
    int at(const std::string& key) const {
        auto it = counts.find(key);
        return it == counts.end() ? 0 : it->second;
    }
};

struct DecodedPictureBuffer {
    int frame_capacity = 1;
    std::deque<TensorPtr> frames; // decoded frames only, newest last
    std::deque<recurrent::FeatureExtractResult> features; // EEV-0.4
    recurrent::RecurrentState state;                      // EEV-0.4

    void reset();
    void push(const TensorPtr& frame);
    bool empty() const { return frames.empty(); }
};

// Appends a decoded frame, also caching its feature pyramid when the version
// keeps feature-space temporal context.
void dpb_push_decoded(DecodedPictureBuffer& dpb, const ModelConfig& config,
                      const ModelWeights& weights, const TensorPtr& frame);

struct FrameStats {
    int index = 0;
    bitstream::FrameType type = bitstream::FrameType::intra;
    std::uint64_t mv_bits = 0;
    std::uint64_t residual_bits = 0;
    std::uint64_t c2f_bits = 0;
    std::uint64_t intra_bits = 0;
    double mse = 0.0;
    double ms_ssim = 0.0; // filled by the harness when the metric needs it
    double rd_loss = 0.0;

    std::uint64_t total_bits() const { return mv_bits + residual_bits + c2f_bits + intra_bits; }
};

// intermediate tensors exposed for the algebraic identity checks
struct FrameDebug {
    TensorPtr prediction;         // x_bar
    TensorPtr refined_prediction; // x_barbar (or x_dot for EEV-0.4)
    TensorPtr residual_hat;
    TensorPtr residual2_hat; // C2F stage, may be null
    TensorPtr pre_ilr;       // x_tilde
    TensorPtr recon;         // x_hat
};

struct EncodeFrameResult {
    bitstream::FrameChunk chunk;
    TensorPtr recon;
    FrameStats stats;
    FrameDebug debug;
};

EncodeFrameResult encode_frame_p(const TensorPtr& frame, DecodedPictureBuffer& dpb,
                                 const ModelConfig& config, const ModelWeights& weights,
                                 OpCounters* counters = nullptr);

TensorPtr decode_frame_p(const bitstream::FrameChunk& chunk, DecodedPictureBuffer& dpb,
                         const ModelConfig& config, const ModelWeights& weights,
                         OpCounters* counters = nullptr);

// ---- intra coding ------------------------------------------------------------

struct IntraResult {
    std::vector<std::uint8_t> payload;
    TensorPtr recon;
    std::uint64_t bits = 0;
};

class IntraBackend {
public:
    virtual ~IntraBackend() = default;
    virtual IntraResult code(const TensorPtr& frame) = 0;
    virtual TensorPtr decode(const std::vector<std::uint8_t>& payload, int height, int width) = 0;
};

// stores the 8-bit RGB frame exactly: 24 bits per pixel
class VerbatimIntra : public IntraBackend {
public:
    IntraResult code(const TensorPtr& frame) override;
    TensorPtr decode(const std::vector<std::uint8_t>& payload, int height, int width) override;
};

// shells out to a command with {input.png} {output.bin} {recon.png}
// placeholders; bits are the output file size
class ExternalIntra : public IntraBackend {
public:
    ExternalIntra(std::string command_template, std::string work_dir);
    IntraResult code(const TensorPtr& frame) override;
    TensorPtr decode(const std::vector<std::uint8_t>& payload, int height, int width) override;

private:
    std::string command_template_;
    std::string work_dir_;
    int counter_ = 0;
};

// ---- whole-video coding --------------------------------------------------------

struct RDPoint {
    double bpp = 0.0;
    double quality = 0.0; // dB for psnr target, score for msssim
};

// optional hook so the harness can supply MS-SSIM without a dependency cycle
using QualityFn = std::function<double(const TensorPtr& original, const TensorPtr& recon)>;

struct EncodeVideoResult {
    std::vector<std::uint8_t> container;
    std::vector<FrameStats> stats;
    std::vector<TensorPtr> recons;
    RDPoint rd;
};

EncodeVideoResult encode_video(const std::vector<TensorPtr>& frames, const ModelConfig& config,
                               const ModelWeights& weights, IntraBackend& intra,
                               OpCounters* counters = nullptr,
                               const QualityFn* quality_override = nullptr);

std::vector<TensorPtr> decode_video(const std::vector<std::uint8_t>& container_bytes,
                                    const ModelConfig& config, const ModelWeights& weights,
                                    IntraBackend& intra, OpCounters* counters = nullptr);

// random access: decode starting from the intra frame opening the given GOP
std::vector<TensorPtr> decode_video_from_gop(const std::vector<std::uint8_t>& container_bytes,
                                             const ModelConfig& config,
                                             const ModelWeights& weights, IntraBackend& intra,
                                             int gop_index);

// lambda * distortion + rate (rate in bits per pixel)
double rd_loss(double distortion, double bits_per_pixel, double lambda);

// differentiable MS-SSIM used as the training distortion for the msssim
// target (scales shrink automatically on small frames)
TensorPtr ms_ssim_tensor(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// ---- toy training ----------------------------------------------------------------

struct TrainToyResult {
    std::vector<double> trajectory; // per step, averaged over P frames
    bool diverged = false;
    std::string divergence_note;
};

// End-to-end gradient descent on the R-D objective (plus the auxiliary
// pyramid and prediction losses at weight 0.1), restricted to toy scale:
// frames at most 128x128 and at most 8 of them.
TrainToyResult train_toy(const std::vector<TensorPtr>& frames, const ModelConfig& config,
                         ModelWeights& weights, int steps, double learning_rate,
                         std::uint64_t seed);

// layer-by-layer description of every enabled tool, for complexity accounting
complexity::ArchitectureDesc describe_architecture(const ModelConfig& config);

// ---- frame <-> image conversion ----------------------------------------------------

Image8 tensor_to_image(const TensorPtr& frame);
TensorPtr image_to_tensor(const Image8& image);

} // namespace eev::pipeline
