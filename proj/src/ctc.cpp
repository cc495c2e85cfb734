#include "sdctc/ctc.hpp"

#include <stdexcept>

namespace sdctc {

ExtendedTarget ExtendedTarget::build(const Transcript& target, int blank_id) {
    ExtendedTarget ext;
    ext.sequence.reserve(2 * target.size() + 1);
    ext.sequence.push_back(blank_id);
    for (int tok : target) {
        ext.sequence.push_back(tok);
        ext.sequence.push_back(blank_id);
    }
    return ext;
}

int min_alignment_length(const Transcript& target) {
    int repeats = 0;
    for (size_t i = 1; i < target.size(); ++i)
        if (target[i] == target[i - 1]) ++repeats;
    return static_cast<int>(target.size()) + repeats;
}

namespace {

void check_target(const Transcript& target, int blank_id) {
    for (int tok : target)
        if (tok < 0 || tok >= blank_id)
            throw std::out_of_range("target token " + std::to_string(tok) +
                                    " outside vocabulary of size " + std::to_string(blank_id));
}

// Skip transition u-2 -> u is allowed when u holds a non-blank label that
// differs from the label two positions back.
bool skip_allowed(const std::vector<int>& ext, int u, int blank_id) {
    return u >= 2 && ext[u] != blank_id && ext[u] != ext[u - 2];
}

}  // namespace

CtcResult ctc_loss(const Matrix& log_emissions, const Transcript& target) {
    const int T = log_emissions.rows;
    const int blank_id = log_emissions.cols - 1;
    check_target(target, blank_id);

    const ExtendedTarget ext = ExtendedTarget::build(target, blank_id);
    const std::vector<int>& seq = ext.sequence;
    const int U = static_cast<int>(seq.size());

    CtcResult res;
    res.lattice.alpha = Matrix(T, U, kNegInf);
    res.lattice.beta = Matrix(T, U, kNegInf);
    Matrix& alpha = res.lattice.alpha;
    Matrix& beta = res.lattice.beta;

    if (T < min_alignment_length(target)) {
        res.loss = kPosInf;
        return res;
    }

    alpha(0, 0) = log_emissions(0, seq[0]);
    if (U > 1) alpha(0, 1) = log_emissions(0, seq[1]);
    for (int t = 1; t < T; ++t) {
        for (int u = 0; u < U; ++u) {
            double acc = alpha(t - 1, u);
            if (u >= 1) acc = log_sum_exp(acc, alpha(t - 1, u - 1));
            if (skip_allowed(seq, u, blank_id)) acc = log_sum_exp(acc, alpha(t - 1, u - 2));
            if (acc != kNegInf) alpha(t, u) = acc + log_emissions(t, seq[u]);
        }
    }

    double logp = alpha(T - 1, U - 1);
    if (U > 1) logp = log_sum_exp(logp, alpha(T - 1, U - 2));
    res.lattice.log_likelihood = logp;
    res.loss = (logp == kNegInf) ? kPosInf : -logp;

    beta(T - 1, U - 1) = log_emissions(T - 1, seq[U - 1]);
    if (U > 1) beta(T - 1, U - 2) = log_emissions(T - 1, seq[U - 2]);
    for (int t = T - 2; t >= 0; --t) {
        for (int u = U - 1; u >= 0; --u) {
            double acc = beta(t + 1, u);
            if (u + 1 < U) acc = log_sum_exp(acc, beta(t + 1, u + 1));
            if (u + 2 < U && skip_allowed(seq, u + 2, blank_id))
                acc = log_sum_exp(acc, beta(t + 1, u + 2));
            if (acc != kNegInf) beta(t, u) = acc + log_emissions(t, seq[u]);
        }
    }
    return res;
}

Matrix ctc_grad(const Matrix& log_emissions, const Transcript& target,
                const CtcResult& result) {
    if (!std::isfinite(result.loss))
        throw std::domain_error("ctc_grad: loss is not finite, no gradient defined");

    const int T = log_emissions.rows;
    const int blank_id = log_emissions.cols - 1;
    const ExtendedTarget ext = ExtendedTarget::build(target, blank_id);
    const std::vector<int>& seq = ext.sequence;
    const int U = static_cast<int>(seq.size());
    const double logp = result.lattice.log_likelihood;

    Matrix grad(T, log_emissions.cols, 0.0);
    for (int t = 0; t < T; ++t) {
        for (int u = 0; u < U; ++u) {
            double a = result.lattice.alpha(t, u);
            double b = result.lattice.beta(t, u);
            if (a == kNegInf || b == kNegInf) continue;
            // alpha and beta both include the emission at t, so subtract it
            // once to get the log-mass of paths through (t, u).
            double occupancy = a + b - log_emissions(t, seq[u]) - logp;
            grad(t, seq[u]) -= std::exp(occupancy);
        }
    }
    return grad;
}

Matrix logprob_grad_to_logit_grad(const Matrix& grad_logp, const Matrix& probs) {
    Matrix grad(grad_logp.rows, grad_logp.cols);
    for (int r = 0; r < grad_logp.rows; ++r) {
        double row_sum = 0.0;
        for (int c = 0; c < grad_logp.cols; ++c) row_sum += grad_logp(r, c);
        for (int c = 0; c < grad_logp.cols; ++c)
            grad(r, c) = grad_logp(r, c) - probs(r, c) * row_sum;
    }
    return grad;
}

Transcript collapse(const std::vector<int>& path, int blank_id) {
    Transcript out;
    int prev = blank_id;
    for (int label : path) {
        if (label != prev && label != blank_id) out.push_back(label);
        prev = label;
    }
    return out;
}

double ctc_bruteforce(const Matrix& emissions, const Transcript& target) {
    const int T = emissions.rows;
    const int C = emissions.cols;
    const int blank_id = C - 1;
    check_target(target, blank_id);

    double n_paths = std::pow(static_cast<double>(C), T);
    if (n_paths > 1e7)
        throw std::invalid_argument("ctc_bruteforce: instance too large for enumeration");

    std::vector<int> path(T, 0);
    double total = 0.0;
    while (true) {
        if (collapse(path, blank_id) == target) {
            double p = 1.0;
            for (int t = 0; t < T; ++t) p *= emissions(t, path[t]);
            total += p;
        }
        int t = T - 1;
        while (t >= 0 && path[t] == C - 1) path[t--] = 0;
        if (t < 0) break;
        ++path[t];
    }
    return total;
}

}  // namespace sdctc
