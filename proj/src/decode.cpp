#include "sdctc/decode.hpp"

#include <algorithm>
#include <stdexcept>

namespace sdctc {

namespace {

using Vec = std::vector<double>;

Vec matvec(const Matrix& w, const Vec& x) {
    Vec y(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = w.row(r);
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

}  // namespace

std::vector<Transcript> ctc_greedy(const SpeakerPosteriorGrid& ps,
                                   const TokenPosteriorGrid& pv) {
    const int T = pv.probs.rows;
    if (ps.probs.rows != T) throw std::invalid_argument("ctc_greedy: frame-count mismatch");
    const int M = ps.probs.cols;
    const int blank = pv.probs.cols - 1;

    std::vector<std::vector<int>> streams(M, std::vector<int>(T, blank));
    for (int t = 0; t < T; ++t) {
        int best_s = 0;
        for (int m = 1; m < M; ++m)
            if (ps.probs(t, m) > ps.probs(t, best_s)) best_s = m;
        int best_tok = 0;
        for (int c = 1; c <= blank; ++c)
            if (pv.probs(t, c) > pv.probs(t, best_tok)) best_tok = c;
        streams[best_s][t] = best_tok;
    }
    std::vector<Transcript> out;
    out.reserve(M);
    for (int m = 0; m < M; ++m) out.push_back(collapse(streams[m], blank));
    return out;
}

DecoderStep decoder_step(const Parameters& params, const Matrix& H, int prev_token,
                         const std::vector<double>& state) {
    const ModelConfig& cfg = params.config;
    const int T = H.rows;
    const int d = cfg.hidden_dim;
    const int e = cfg.embed_dim;

    DecoderStep step;
    step.query = matvec(params.att_q, state);
    Vec scores(T);
    double max_score = kNegInf;
    for (int t = 0; t < T; ++t) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j)
            acc += (H(t, j) + positional_key(t, j, d)) * step.query[j];
        scores[t] = acc;
        max_score = std::max(max_score, acc);
    }
    step.attention.resize(T);
    double z = 0.0;
    for (int t = 0; t < T; ++t) {
        step.attention[t] = std::exp(scores[t] - max_score);
        z += step.attention[t];
    }
    step.context.assign(d, 0.0);
    for (int t = 0; t < T; ++t) {
        step.attention[t] /= z;
        for (int j = 0; j < d; ++j) step.context[j] += step.attention[t] * H(t, j);
    }

    Vec u(e + 2 * d);
    for (int j = 0; j < e; ++j) u[j] = params.embed(prev_token, j);
    for (int j = 0; j < d; ++j) u[e + j] = step.context[j];
    for (int j = 0; j < d; ++j) u[e + d + j] = state[j];

    Vec pre = matvec(params.dec_w, u);
    step.state.resize(d);
    for (int j = 0; j < d; ++j) step.state[j] = std::tanh(pre[j] + params.dec_b(0, j));

    Vec logits = matvec(params.out_w, step.state);
    for (size_t j = 0; j < logits.size(); ++j) logits[j] += params.out_b(0, j);
    double lse = log_sum_exp(logits.data(), static_cast<int>(logits.size()));
    step.log_probs.resize(logits.size());
    step.probs.resize(logits.size());
    for (size_t j = 0; j < logits.size(); ++j) {
        step.log_probs[j] = logits[j] - lse;
        step.probs[j] = std::exp(step.log_probs[j]);
    }
    return step;
}

namespace {

struct Beam {
    std::vector<int> tokens;
    double logprob = 0.0;
    std::vector<double> state;
};

}  // namespace

std::vector<Hypothesis> beam_search(const Parameters& params, const Matrix& H,
                                    const DecodeConfig& config) {
    if (config.beam_width < 1) throw std::invalid_argument("beam_search: beam_width < 1");
    const Vocabulary vocab = params.config.vocabulary();
    const int eos = vocab.eos_id();
    const int K = config.beam_width;

    std::vector<Beam> alive;
    alive.push_back(
        {{}, 0.0, std::vector<double>(params.dec_h0.data.begin(), params.dec_h0.data.end())});
    std::vector<Hypothesis> finished;

    for (int len = 0; len < config.max_output_length && !alive.empty(); ++len) {
        struct Candidate {
            double logprob;
            size_t beam;
            int token;
        };
        std::vector<Candidate> candidates;
        std::vector<DecoderStep> steps;
        steps.reserve(alive.size());
        for (size_t b = 0; b < alive.size(); ++b) {
            int prev = alive[b].tokens.empty() ? vocab.sos_id() : alive[b].tokens.back();
            steps.push_back(decoder_step(params, H, prev, alive[b].state));
            for (size_t tok = 0; tok < steps[b].log_probs.size(); ++tok)
                candidates.push_back(
                    {alive[b].logprob + steps[b].log_probs[tok], b, static_cast<int>(tok)});
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.logprob != b.logprob) return a.logprob > b.logprob;
            if (a.beam != b.beam) return a.beam < b.beam;
            return a.token < b.token;
        });

        std::vector<Beam> next;
        for (const Candidate& c : candidates) {
            if (static_cast<int>(next.size()) >= K) break;
            Beam nb;
            nb.tokens = alive[c.beam].tokens;
            nb.tokens.push_back(c.token);
            nb.logprob = c.logprob;
            if (c.token == eos) {
                Hypothesis h;
                h.tokens = std::move(nb.tokens);
                h.decoder_logprob = nb.logprob;
                h.combined_score = nb.logprob;
                finished.push_back(std::move(h));
            } else {
                nb.state = steps[c.beam].state;
                next.push_back(std::move(nb));
            }
        }
        alive = std::move(next);
        if (static_cast<int>(finished.size()) >= K) break;
    }
    // beams hitting the length cap are returned unterminated
    for (Beam& b : alive) {
        Hypothesis h;
        h.tokens = std::move(b.tokens);
        h.decoder_logprob = b.logprob;
        h.combined_score = b.logprob;
        finished.push_back(std::move(h));
    }

    std::stable_sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
        return a.decoder_logprob > b.decoder_logprob;
    });
    if (static_cast<int>(finished.size()) > K) finished.resize(K);
    return finished;
}

std::vector<Hypothesis> rescore(std::vector<Hypothesis> hypotheses,
                                const SpeakerPosteriorGrid& ps,
                                const TokenPosteriorGrid& pv, const Vocabulary& vocab,
                                const SpeakerInventory& inventory,
                                const DecodeConfig& config) {
    for (Hypothesis& h : hypotheses) {
        h.sdctc_logprob = sd_ctc_score(ps, pv, h.tokens, vocab, inventory);
        h.combined_score = h.decoder_logprob + config.rescore_weight * h.sdctc_logprob;
        if (config.rescore_weight == 0.0) h.combined_score = h.decoder_logprob;
    }
    // stable: ties keep the incoming (decoder) rank
    std::stable_sort(hypotheses.begin(), hypotheses.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                         return a.combined_score > b.combined_score;
                     });
    return hypotheses;
}

}  // namespace sdctc
