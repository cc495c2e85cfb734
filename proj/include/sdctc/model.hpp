#pragma once

#include <functional>
#include <random>
#include <set>
#include <string>

#include "sdctc/core.hpp"
#include "sdctc/sdctc.hpp"
#include "sdctc/sot.hpp"
#include "sdctc/synth.hpp"

namespace sdctc {

struct ModelConfig {
    int context_window = 1;  // symmetric frames of input context
    int encoder_layers = 2;
    int hidden_dim = 32;
    int embed_dim = 16;
    int feature_dim = 16;
    int vocab_size = 12;
    int num_speakers = 2;
    uint64_t seed = 1;

    Vocabulary vocabulary() const { return Vocabulary(vocab_size); }
    SpeakerInventory inventory() const { return SpeakerInventory(num_speakers); }
    int window_input_dim() const { return (2 * context_window + 1) * feature_dim; }
};

// All trainable weights. Biases are stored as 1 x n matrices so every
// group flows through the same enumeration, optimizer, and checkpoint
// code. Group order is fixed; conformance depends on it.
struct Parameters {
    ModelConfig config;
    std::vector<Matrix> enc_w, enc_b;  // layer 0: d x (2w+1)D, rest d x d
    Matrix tok_w, tok_b;               // (|V|+1) x d
    Matrix spk_w, spk_b;               // M x d
    Matrix embed;                      // decoder vocab x e
    Matrix att_q;                      // d x d attention query projection
    Matrix dec_h0;                     // 1 x d learned initial decoder state
    Matrix dec_w, dec_b;               // d x (e + 2d)
    Matrix out_w, out_b;               // decoder vocab x d

    static Parameters init(const ModelConfig& config);
    static Parameters zeros_like(const Parameters& other);

    void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;
};

struct TrainConfig {
    int stage = 1;
    double ctc_weight = 0.3;  // lambda
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int warmup_steps = 100;
    int batch_size = 8;
    int epochs = 3;
    uint64_t seed = 0;  // batch shuffling
};

struct EncoderForward {
    Matrix windowed;            // T x (2w+1)D
    std::vector<Matrix> acts;   // per-layer tanh outputs, T x dim
    Matrix H;                   // encoder output, T x d
    Matrix token_logits;        // T x (|V|+1)
    Matrix speaker_logits;      // T x M
    TokenPosteriorGrid pv;
    SpeakerPosteriorGrid ps;    // degenerate in stage 1
};

// Stage 1 replaces the speaker posterior with P_s(s_1) = 1 at every frame.
EncoderForward encoder_forward(const Parameters& params, const FeatureSequence& features,
                               int stage);

// Fixed sinusoidal term added to frame t's attention key (dimension j of d).
// The windowed encoder is position-blind, so content-only keys cannot
// support the decoder's monotonic frame stepping.
double positional_key(int t, int j, int d);

struct DecoderForward {
    double loss = 0.0;              // mean token cross-entropy
    Matrix attention;               // steps x T, rows sum to 1
    // caches for backprop
    std::vector<int> inputs;        // sos, y_0, ..., y_{N-2}
    std::vector<int> targets;       // y_0, ..., y_{N-1} (ends with <eos>)
    std::vector<std::vector<double>> states;    // h_0..h_N
    std::vector<std::vector<double>> contexts;  // c_i per step
    std::vector<std::vector<double>> queries;   // q_i per step
    std::vector<std::vector<double>> probs;     // softmax(logits_i)
};

DecoderForward decoder_forward(const Parameters& params, const Matrix& H,
                               const SotSequence& target);

struct SampleLoss {
    double sot = 0.0;
    double sdctc = 0.0;  // unweighted
    double total = 0.0;  // sot + lambda * sdctc
    bool sdctc_skipped = false;
};

// Forward + analytic backward for one sample; gradients are accumulated
// into `grads` (scaled by `scale`, the 1/batch factor).
SampleLoss backward_sample(const Parameters& params, const MixtureSample& sample,
                           const TrainConfig& tc, Parameters& grads, double scale);

struct AdamState {
    Parameters m, v;
    int64_t step = 0;

    explicit AdamState(const Parameters& params)
        : m(Parameters::zeros_like(params)), v(Parameters::zeros_like(params)) {}
};

// Groups excluded from updates for a stage: speaker head in stage 1,
// token head in stage 2 (gradients still flow through it).
std::set<std::string> frozen_groups(int stage);

void adam_update(Parameters& params, const Parameters& grads, AdamState& state,
                 const TrainConfig& tc);

struct StepMetrics {
    double sot = 0.0;
    double sdctc = 0.0;
    double total = 0.0;
    int sdctc_skipped = 0;
};

StepMetrics train_step(Parameters& params, const std::vector<MixtureSample>& batch,
                       const TrainConfig& tc, AdamState& state);

struct EpochMetrics {
    int epoch = 0;
    int stage = 0;
    double sot = 0.0;
    double sdctc = 0.0;
    double total = 0.0;
    double val_cpwer = 0.0;
};

struct TrainResult {
    Parameters params;
    std::vector<EpochMetrics> metrics;
};

// One stage of training over an in-memory dataset. Validation cpWER uses
// greedy CTC decoding on `val` after each epoch.
TrainResult run_stage(Parameters params, const std::vector<MixtureSample>& train,
                      const std::vector<MixtureSample>& val, const TrainConfig& tc);

// Full schedule: stage 1 then stage 2. Throws on out-of-order stages.
TrainResult run_training(const Parameters& init,
                         const std::vector<TrainConfig>& schedule,
                         const std::vector<const std::vector<MixtureSample>*>& train_sets,
                         const std::vector<const std::vector<MixtureSample>*>& val_sets);

// Versioned JSON checkpoint with config echo and stage tag.
void save_checkpoint(const std::string& path, const Parameters& params, int stage);
Parameters load_checkpoint(const std::string& path, int* stage_out = nullptr);

}  // namespace sdctc
