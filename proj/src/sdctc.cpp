#include "sdctc/sdctc.hpp"

#include <stdexcept>

namespace sdctc {

SpeakerTokenGrid speaker_token_grid(const SpeakerPosteriorGrid& ps,
                                    const TokenPosteriorGrid& pv, int speaker) {
    const int T = pv.probs.rows;
    const int cols = pv.probs.cols;
    const int blank = cols - 1;
    if (ps.probs.rows != T)
        throw std::invalid_argument("speaker_token_grid: frame-count mismatch");
    if (speaker < 0 || speaker >= ps.probs.cols)
        throw std::invalid_argument("speaker_token_grid: unknown speaker index");

    SpeakerTokenGrid grid;
    grid.speaker = speaker;
    grid.probs = Matrix(T, cols);
    for (int t = 0; t < T; ++t) {
        double s = ps.probs(t, speaker);
        for (int c = 0; c < blank; ++c) grid.probs(t, c) = s * pv.probs(t, c);
        grid.probs(t, blank) = s * pv.probs(t, blank) + (1.0 - s);
    }
    return grid;
}

LossBreakdown sd_ctc_loss(const SpeakerPosteriorGrid& ps, const TokenPosteriorGrid& pv,
                          const std::vector<Transcript>& transcripts,
                          const SpeakerInventory& inventory) {
    const int M = inventory.M();
    if (static_cast<int>(transcripts.size()) > M)
        throw std::invalid_argument("sd_ctc_loss: more transcripts than speakers");

    LossBreakdown breakdown;
    static const Transcript kEmpty;
    for (int m = 0; m < M; ++m) {
        const Transcript& target =
            m < static_cast<int>(transcripts.size()) ? transcripts[m] : kEmpty;
        SpeakerTokenGrid grid = speaker_token_grid(ps, pv, m);
        CtcResult res = ctc_loss(to_log_domain(grid.probs), target);
        breakdown.per_speaker[inventory.labels[m]] = res.loss;
        breakdown.total += res.loss;
    }
    return breakdown;
}

SdCtcGrad sd_ctc_grad(const SpeakerPosteriorGrid& ps, const TokenPosteriorGrid& pv,
                      const std::vector<Transcript>& transcripts,
                      const SpeakerInventory& inventory) {
    const int T = pv.probs.rows;
    const int cols = pv.probs.cols;
    const int blank = cols - 1;
    const int M = inventory.M();
    if (static_cast<int>(transcripts.size()) > M)
        throw std::invalid_argument("sd_ctc_grad: more transcripts than speakers");

    SdCtcGrad out;
    out.speaker_probs = Matrix(T, M, 0.0);
    out.token_probs = Matrix(T, cols, 0.0);

    static const Transcript kEmpty;
    for (int m = 0; m < M; ++m) {
        const Transcript& target =
            m < static_cast<int>(transcripts.size()) ? transcripts[m] : kEmpty;
        SpeakerTokenGrid grid = speaker_token_grid(ps, pv, m);
        Matrix log_grid = to_log_domain(grid.probs);
        CtcResult res = ctc_loss(log_grid, target);
        if (!std::isfinite(res.loss))
            throw std::domain_error("sd_ctc_grad: infinite loss for speaker " +
                                    inventory.labels[m]);
        Matrix g_logp = ctc_grad(log_grid, target, res);

        // d(loss)/dP = d(loss)/d(log P) / P, then through the Eq-style
        // product/affine construction of the grid.
        for (int t = 0; t < T; ++t) {
            double s = ps.probs(t, m);
            for (int c = 0; c < cols; ++c) {
                double gl = g_logp(t, c);
                if (gl == 0.0) continue;
                double gp = gl / std::max(grid.probs(t, c), kProbFloor);
                if (c == blank) {
                    out.speaker_probs(t, m) += gp * (pv.probs(t, blank) - 1.0);
                    out.token_probs(t, blank) += gp * s;
                } else {
                    out.speaker_probs(t, m) += gp * pv.probs(t, c);
                    out.token_probs(t, c) += gp * s;
                }
            }
        }
    }

    // Softmax chain rule: dz_k = p_k * (g_k - sum_j p_j g_j).
    auto through_softmax = [](const Matrix& g, const Matrix& p) {
        Matrix out(g.rows, g.cols);
        for (int r = 0; r < g.rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < g.cols; ++c) dot += p(r, c) * g(r, c);
            for (int c = 0; c < g.cols; ++c) out(r, c) = p(r, c) * (g(r, c) - dot);
        }
        return out;
    };
    out.speaker_logits = through_softmax(out.speaker_probs, ps.probs);
    out.token_logits = through_softmax(out.token_probs, pv.probs);
    return out;
}

double sd_ctc_score(const SpeakerPosteriorGrid& ps, const TokenPosteriorGrid& pv,
                    const std::vector<int>& hypothesis, const Vocabulary& vocab,
                    const SpeakerInventory& inventory) {
    std::vector<Transcript> segments = deserialize(hypothesis, vocab);
    if (static_cast<int>(segments.size()) > inventory.M()) return kNegInf;
    for (const Transcript& seg : segments)
        for (int tok : seg)
            if (!vocab.in_vocab(tok)) return kNegInf;
    LossBreakdown breakdown = sd_ctc_loss(ps, pv, segments, inventory);
    return -breakdown.total;
}

}  // namespace sdctc
