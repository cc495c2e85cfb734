#pragma once

#include "sdctc/model.hpp"
#include "sdctc/sdctc.hpp"

namespace sdctc {

struct DecodeConfig {
    int beam_width = 16;
    double rescore_weight = 0.3;
    int max_output_length = 64;
    bool rescoring = false;
};

struct Hypothesis {
    std::vector<int> tokens;  // SOT-style, ends with <eos> unless truncated
    double decoder_logprob = 0.0;
    double sdctc_logprob = 0.0;  // only meaningful after rescore()
    double combined_score = 0.0;
};

// Frame-wise argmax over both grids: the argmax token lands in the argmax
// speaker's stream, every other stream gets blank at that frame.
std::vector<Transcript> ctc_greedy(const SpeakerPosteriorGrid& ps,
                                   const TokenPosteriorGrid& pv);

// One teacher-free decoder step; used by both beam search and the
// full-sequence forward pass.
struct DecoderStep {
    std::vector<double> state;      // h after the step
    std::vector<double> log_probs;  // log-softmax over the decoder vocab
    std::vector<double> attention;  // T weights, sum to 1
    std::vector<double> context;
    std::vector<double> query;
    std::vector<double> probs;
};

DecoderStep decoder_step(const Parameters& params, const Matrix& H, int prev_token,
                         const std::vector<double>& state);

// Length-synchronous decoder-only beam search. Hypotheses end at <eos> or
// the length cap; sorted by decoder log-probability, no normalization.
std::vector<Hypothesis> beam_search(const Parameters& params, const Matrix& H,
                                    const DecodeConfig& config);

// Add w * SD-CTC log-likelihood to each decoder score and re-sort.
// Ties keep the original decoder rank.
std::vector<Hypothesis> rescore(std::vector<Hypothesis> hypotheses,
                                const SpeakerPosteriorGrid& ps,
                                const TokenPosteriorGrid& pv, const Vocabulary& vocab,
                                const SpeakerInventory& inventory,
                                const DecodeConfig& config);

}  // namespace sdctc
