#pragma once

#include "sdctc/core.hpp"
#include "sdctc/ctc.hpp"
#include "sdctc/sot.hpp"

namespace sdctc {

// Per-speaker emission distribution over V plus the speaker-specific
// blank <-,s> in the last column, ready for the standard CTC recursion.
struct SpeakerTokenGrid {
    int speaker = 0;  // index into the inventory
    Matrix probs;     // T x (|V|+1)
};

// Build the speaker-specific grid from the two posteriors:
//   non-blank rho:  P_s(sigma) * P_v(rho)
//   blank column:   P_s(sigma) * P_v(<b>) + (1 - P_s(sigma))
SpeakerTokenGrid speaker_token_grid(const SpeakerPosteriorGrid& ps,
                                    const TokenPosteriorGrid& pv, int speaker);

// Per-speaker CTC losses over the speaker-specific grids plus their sum.
// Transcript i is assigned speaker s_{i+1} (onset order); speakers beyond
// the transcript list train against the empty transcript.
LossBreakdown sd_ctc_loss(const SpeakerPosteriorGrid& ps, const TokenPosteriorGrid& pv,
                          const std::vector<Transcript>& transcripts,
                          const SpeakerInventory& inventory);

struct SdCtcGrad {
    Matrix speaker_logits;  // T x M
    Matrix token_logits;    // T x (|V|+1)
    Matrix speaker_probs;   // d(loss)/d P_s, before the softmax chain rule
    Matrix token_probs;     // d(loss)/d P_v
};

// Gradients of the total SD-CTC loss through the grid construction and
// both softmaxes. Throws std::domain_error when the loss is infinite.
SdCtcGrad sd_ctc_grad(const SpeakerPosteriorGrid& ps, const TokenPosteriorGrid& pv,
                      const std::vector<Transcript>& transcripts,
                      const SpeakerInventory& inventory);

// SD-CTC log-likelihood of an SOT hypothesis: -total loss of its
// deserialized segments, or -inf when the hypothesis overflows M or
// contains tokens outside V.
double sd_ctc_score(const SpeakerPosteriorGrid& ps, const TokenPosteriorGrid& pv,
                    const std::vector<int>& hypothesis, const Vocabulary& vocab,
                    const SpeakerInventory& inventory);

}  // namespace sdctc
