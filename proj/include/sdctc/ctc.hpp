#pragma once

#include "sdctc/core.hpp"

namespace sdctc {

// Target interleaved with blanks: blank, y1, blank, y2, ..., blank.
struct ExtendedTarget {
    std::vector<int> sequence;  // length 2L+1

    static ExtendedTarget build(const Transcript& target, int blank_id);
};

struct Lattice {
    Matrix alpha;  // T x (2L+1), log domain, includes emission at t
    Matrix beta;   // T x (2L+1), log domain, includes emission at t
    double log_likelihood = kNegInf;
};

struct CtcResult {
    double loss = kPosInf;  // -log P(target | emissions), +inf if infeasible
    Lattice lattice;
};

// Forward-backward over log-domain emissions (T x (|V|+1), blank = last
// column). Infeasible targets (T too short) yield loss = +inf.
CtcResult ctc_loss(const Matrix& log_emissions, const Transcript& target);

// Gradient of the loss w.r.t. the emission log-probabilities. Requires a
// finite loss; throws std::domain_error otherwise.
Matrix ctc_grad(const Matrix& log_emissions, const Transcript& target,
                const CtcResult& result);

// Chain rule from a d(loss)/d(log p) grid to logits feeding a row softmax.
// `probs` are the softmax outputs for the same logits.
Matrix logprob_grad_to_logit_grad(const Matrix& grad_logp, const Matrix& probs);

// Exhaustive path enumeration over probability-domain emissions. Test
// oracle for the DP; throws if (|V|+1)^T exceeds the enumerable bound.
double ctc_bruteforce(const Matrix& emissions, const Transcript& target);

// Merge adjacent duplicates, then drop blanks.
Transcript collapse(const std::vector<int>& path, int blank_id);

// Minimum frame count for which ctc_loss is finite.
int min_alignment_length(const Transcript& target);

}  // namespace sdctc
