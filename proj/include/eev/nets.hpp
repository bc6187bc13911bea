#pragma once

// Learnable sub-networks: the MV/residual autoencoder with its hyperprior,
// the residual-attention refinement nets, the in-loop restoration filter, and
// the persisted weight store.

#include "eev/bitstream.hpp"
#include "eev/conv_stack.hpp"
#include "eev/entropy.hpp"

namespace eev::nets {

// ---- autoencoder codec -------------------------------------------------------

struct CodecConfig {
    int in_channels = 3;
    int out_channels = 3;
    int mid_channels = 128;
    int latent_channels = 128;
    int hyper_channels = 64;
    int analysis_depth = 4; // stride-2 stages; hyperprior adds 2 more
    int kernel = 5;
};

struct CodecWeights {
    CodecConfig config;
    ConvStack analysis;        // convs, stride 2
    ConvStack synthesis;       // deconvs, stride 2, zero-init last
    ConvStack hyper_analysis;  // convs, stride 2
    ConvStack hyper_synthesis; // deconvs, emits mean and raw scale
    entropy::FactorizedPrior z_prior;

    void params(std::vector<TensorPtr>& out) const;
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const;
    void set_requires_grad(bool on) const;
};

CodecWeights init_codec(const CodecConfig& config, Rng& rng);

// total downsampling factor of the analysis transform (and the upsampling
// factor of its synthesis mirror)
int codec_downsample_factor(const CodecWeights& w);

struct CodecEncodeResult {
    TensorPtr recon;               // synthesis of the quantized latent
    double bits_estimate = 0.0;    // model cross-entropy of the coded symbols
    std::vector<std::uint8_t> payload;
};

// Closed loop: the encoder reconstructs from exactly the integers the decoder
// will read, so both sides are bit-identical.
CodecEncodeResult codec_encode(const CodecWeights& w, const TensorPtr& x);
TensorPtr codec_decode(const CodecWeights& w, const std::vector<std::uint8_t>& payload,
                       const Shape& input_shape);

struct CodecTrainResult {
    TensorPtr recon;
    TensorPtr bits; // scalar, differentiable
};

// Noise-quantized differentiable pass for training.
CodecTrainResult codec_train_forward(Tape& tape, const CodecWeights& w, const TensorPtr& x,
                                     Rng& noise);

// Debug path: reconstruction is the input itself, zero bits, no payload.
// Exists so the algebraic reconstruction identities can be tested exactly;
// never produces a bitstream.
CodecEncodeResult codec_identity(const TensorPtr& x);

// ---- residual attention blocks -------------------------------------------------

struct RabWeights {
    TensorPtr conv1_w, conv1_b;
    TensorPtr conv2_w, conv2_b;
    TensorPtr squeeze_w, squeeze_b; // 1x1, C -> C/ratio
    TensorPtr excite_w, excite_b;   // 1x1, C/ratio -> C
};

struct RefineNetConfig {
    int io_channels = 3;
    int width = 64;   // RAB channel count
    int rab_count = 5;
    int attention_ratio = 16;
};

// Head conv, a chain of RABs with channel attention, tail conv, plus the
// global input skip. Zero-initialized tail makes the untrained net an exact
// identity.
struct RefineNetWeights {
    RefineNetConfig config;
    TensorPtr head_w, head_b;
    TensorPtr tail_w, tail_b;
    std::vector<RabWeights> rabs;

    void params(std::vector<TensorPtr>& out) const;
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const;
    void set_requires_grad(bool on) const;
};

RefineNetWeights init_refine_net(const RefineNetConfig& config, Rng& rng);

TensorPtr rab_forward(Tape* tape, const RabWeights& w, const TensorPtr& x);
// channel-attention gate of a RAB, exposed for the (0,1) range property
TensorPtr rab_gate(Tape* tape, const RabWeights& w, const TensorPtr& u);
TensorPtr refine_forward(Tape* tape, const RefineNetWeights& w, const TensorPtr& x);

// ---- in-loop restoration ---------------------------------------------------------

struct IlrConfig {
    std::vector<std::string> specs = {"k5c32s1", "k3c32s1", "k3c32s1", "k3c32s1", "k5c3s1"};
    int io_channels = 3;
};

struct IlrWeights {
    IlrConfig config;
    ConvStack stack; // zero-init last, global skip applied in forward

    void params(std::vector<TensorPtr>& out) const { stack.params(out); }
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const {
        stack.named_params(prefix, out);
    }
    void set_requires_grad(bool on) const { stack.set_requires_grad(on); }
};

IlrWeights init_ilr(const IlrConfig& config, Rng& rng);
TensorPtr ilr_forward(Tape* tape, const IlrWeights& w, const TensorPtr& x);

// ---- weight store -----------------------------------------------------------------

extern const char kWeightMagic[4]; // "EEVW"

class WeightStore {
public:
    void add(const std::string& name, const Shape& shape, std::vector<float> values);
    bool contains(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }

    std::vector<std::uint8_t> serialize() const;
    static WeightStore deserialize(const std::vector<std::uint8_t>& bytes);

    struct Entry {
        std::string name;
        Shape shape;
        std::vector<float> values;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    const Entry& get(const std::string& name) const;

private:
    std::vector<Entry> entries_;
};

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

std::vector<std::uint8_t> save_weights(const NamedParams& params);
// Copies stored values into the architecture's tensors. Throws FormatError
// listing every missing name, and ShapeError on any shape disagreement.
void load_weights(const std::vector<std::uint8_t>& bytes, const NamedParams& params);

std::uint32_t weights_crc(const NamedParams& params);

} // namespace eev::nets
