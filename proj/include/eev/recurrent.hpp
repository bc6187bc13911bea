#pragma once

// EEV-0.4 motion decoupling: frame-to-feature transforms, stacked ConvLSTM
// temporal state, the free MV prediction, the signaled MV difference, and
// progressive prediction back to the pixel domain. Every decoder-side input
// is either signaled or derived from decoded data, so state evolution is
// reproducible on both sides.

#include "eev/nets.hpp"

namespace eev::recurrent {

struct RecurrentConfig {
    // identity mode replaces the learned transforms with space-to-depth /
    // depth-to-space, which forces 48 feature channels and makes the whole
    // transform losslessly invertible
    bool identity_transform = false;
    int feature_channels = 64; // M
    int stage1_channels = 32;
    int lstm_layers = 2;
    int mdiff_latent_channels = 32;
    int branch_channels = 32;

    int effective_feature_channels() const { return identity_transform ? 48 : feature_channels; }
};

struct ConvLstmWeights {
    int input_channels = 0;
    int state_channels = 0;
    TensorPtr w; // (4*state, input+state, 3, 3)
    TensorPtr b; // (1, 4*state, 1, 1)

    void params(std::vector<TensorPtr>& out) const {
        out.push_back(w);
        out.push_back(b);
    }
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

ConvLstmWeights init_convlstm(int input_channels, int state_channels, Rng& rng);

struct LstmState {
    TensorPtr h;
    TensorPtr c;
};

LstmState zero_lstm_state(int n, int channels, int h, int w);

// gates i,f,o = sigmoid, g = tanh; c' = f.c + i.g; h' = o.tanh(c')
LstmState convlstm_step(Tape* tape, const ConvLstmWeights& w, const TensorPtr& x,
                        const LstmState& state);

struct RecurrentState {
    std::vector<LstmState> layers; // prediction stack
    LstmState mdiff;               // MV-difference branch
    bool initialized = false;

    void reset() {
        layers.clear();
        mdiff = {};
        initialized = false;
    }
};

struct FeatureExtractResult {
    TensorPtr features;            // (N, M, H/4, W/4)
    std::vector<TensorPtr> skips;  // one per downsampling stage: /2 then /4
};

struct RecurrentWeights {
    RecurrentConfig config;

    ConvStack extractor;      // learned mode: k5 s2 x2
    ConvStack restore_stage1; // deconv M -> stage1 at /2
    TensorPtr fuse_w, fuse_b; // k3 over cat(stage1, skip) -> stage1
    ConvStack restore_stage2; // deconv stage1 -> 3 at full res

    std::vector<ConvLstmWeights> lstm;
    TensorPtr mv_head_w, mv_head_b; // zero-init: untrained prediction is zero MV

    ConvStack mdiff_analysis; // cat(ref feat, cur feat, f1) -> latent
    entropy::FactorizedPrior mdiff_prior;
    ConvStack mdiff_synthesis; // latent -> branch channels at /4
    ConvLstmWeights mdiff_lstm;
    TensorPtr mdiff_head_w, mdiff_head_b; // zero-init

    ConvStack f2_refine; // residual block on the warped feature, zero-init last

    void params(std::vector<TensorPtr>& out) const;
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const;
    void set_requires_grad(bool on) const;
};

RecurrentWeights init_recurrent(const RecurrentConfig& config, Rng& rng);

FeatureExtractResult feature_extract(Tape* tape, const RecurrentWeights& w,
                                     const TensorPtr& frame);
TensorPtr feature_restore(Tape* tape, const RecurrentWeights& w, const TensorPtr& features,
                          const std::vector<TensorPtr>& skips);

struct MotionPrediction {
    TensorPtr mv;       // m_t^i at feature resolution, costs no bits
    TensorPtr features; // f_t^1
    std::vector<LstmState> next_layers;
};

// Advances the prediction stack over the newest reference features. The
// state must hold config.lstm_layers entries (or be empty for a fresh GOP).
MotionPrediction predict_motion(Tape* tape, const RecurrentWeights& w,
                                const std::vector<TensorPtr>& dpb_features,
                                const RecurrentState& state);

struct MdiffEncodeResult {
    TensorPtr mv;              // m_t^c
    double bits_estimate = 0.0;
    std::vector<std::uint8_t> payload;
    LstmState next_branch;
};

MdiffEncodeResult motion_difference_encode(const RecurrentWeights& w,
                                           const TensorPtr& ref_features,
                                           const TensorPtr& cur_features, const TensorPtr& f1,
                                           const RecurrentState& state);

struct MdiffDecodeResult {
    TensorPtr mv;
    LstmState next_branch;
};

MdiffDecodeResult motion_difference_decode(const RecurrentWeights& w,
                                           const std::vector<std::uint8_t>& payload,
                                           const Shape& feature_shape,
                                           const RecurrentState& state);

// Differentiable variant used by toy training (noise quantization).
struct MdiffTrainResult {
    TensorPtr mv;
    TensorPtr bits;
    LstmState next_branch;
};
MdiffTrainResult motion_difference_train(Tape& tape, const RecurrentWeights& w,
                                         const TensorPtr& ref_features,
                                         const TensorPtr& cur_features, const TensorPtr& f1,
                                         const RecurrentState& state, Rng& noise);

struct ProgressiveResult {
    TensorPtr features; // f_t^2
    TensorPtr frame;    // x_bar_t
};

ProgressiveResult progressive_predict(Tape* tape, const RecurrentWeights& w, const TensorPtr& f1,
                                      const TensorPtr& mdiff, const std::vector<TensorPtr>& skips);

} // namespace eev::recurrent
