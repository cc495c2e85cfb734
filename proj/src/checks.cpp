#include "sdctc/checks.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sdctc/ctc.hpp"
#include "sdctc/sdctc.hpp"

namespace sdctc {

namespace {

Matrix random_grid(int rows, int cols, std::mt19937_64& rng, double spread = 1.5) {
    std::normal_distribution<double> dist(0.0, spread);
    Matrix logits(rows, cols);
    for (double& v : logits.data) v = dist(rng);
    return softmax_rows(logits);
}

Transcript random_transcript(int max_len, int vocab, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len_dist(0, max_len);
    std::uniform_int_distribution<int> tok_dist(0, vocab - 1);
    Transcript t(len_dist(rng));
    for (int& tok : t) tok = tok_dist(rng);
    return t;
}

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    int rows = static_cast<int>(j.size());
    int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

}  // namespace

void write_conformance_vectors(const std::string& dir) {
    {
        std::mt19937_64 rng(0xc7c0ffee);
        nlohmann::json cases = nlohmann::json::array();
        while (cases.size() < 50) {
            int T = 1 + static_cast<int>(rng() % 6);
            int V = 1 + static_cast<int>(rng() % 3);
            Matrix em = random_grid(T, V + 1, rng);
            Transcript target = random_transcript(3, V, rng);
            double p = ctc_bruteforce(em, target);
            if (p == 0.0) continue;
            nlohmann::json c;
            c["emissions"] = matrix_to_json(em);
            c["target"] = target;
            c["loss"] = -std::log(p);
            cases.push_back(std::move(c));
        }
        nlohmann::json j{{"version", 1}, {"cases", std::move(cases)}};
        std::ofstream f(dir + "/ctc_vectors.json");
        f << j.dump(2) << '\n';
    }
    {
        std::mt19937_64 rng(0x5dc7cbeef);
        SpeakerInventory inv(2);
        nlohmann::json cases = nlohmann::json::array();
        while (cases.size() < 30) {
            int T = 2 + static_cast<int>(rng() % 4);
            int V = 1 + static_cast<int>(rng() % 2);
            Matrix pv = random_grid(T, V + 1, rng);
            Matrix ps = random_grid(T, 2, rng);
            std::vector<Transcript> transcripts{random_transcript(2, V, rng),
                                                random_transcript(2, V, rng)};
            double total = 0.0;
            bool ok = true;
            for (int m = 0; m < 2 && ok; ++m) {
                SpeakerTokenGrid grid =
                    speaker_token_grid(SpeakerPosteriorGrid{ps}, TokenPosteriorGrid{pv}, m);
                double p = ctc_bruteforce(grid.probs, transcripts[m]);
                if (p == 0.0)
                    ok = false;
                else
                    total += -std::log(p);
            }
            if (!ok) continue;
            nlohmann::json c;
            c["ps"] = matrix_to_json(ps);
            c["pv"] = matrix_to_json(pv);
            c["transcripts"] = transcripts;
            c["total"] = total;
            cases.push_back(std::move(c));
        }
        nlohmann::json j{{"version", 1}, {"cases", std::move(cases)}};
        std::ofstream f(dir + "/sdctc_vectors.json");
        f << j.dump(2) << '\n';
    }
}

std::vector<CheckResult> check_ctc_oracle(const std::string& vectors_path) {
    std::vector<CheckResult> results;
    {
        CheckResult r{"ctc-conformance-vectors", true, ""};
        std::ifstream f(vectors_path);
        if (!f) {
            r.pass = false;
            r.detail = "cannot open " + vectors_path;
        } else {
            nlohmann::json j = nlohmann::json::parse(f);
            int idx = 0;
            for (const auto& c : j.at("cases")) {
                Matrix em = matrix_from_json(c.at("emissions"));
                Transcript target = c.at("target").get<Transcript>();
                double expected = c.at("loss").get<double>();
                double loss = ctc_loss(to_log_domain(em), target).loss;
                if (std::abs(std::exp(-loss) - std::exp(-expected)) > 1e-10) {
                    r.pass = false;
                    r.detail = "case " + std::to_string(idx) + " mismatch";
                    break;
                }
                ++idx;
            }
            if (r.pass) r.detail = std::to_string(idx) + " cases";
        }
        results.push_back(std::move(r));
    }
    {
        CheckResult r{"ctc-dp-vs-enumeration", true, ""};
        std::mt19937_64 rng(101);
        int checked = 0;
        for (int i = 0; i < 200; ++i) {
            int T = 1 + static_cast<int>(rng() % 6);
            int V = 1 + static_cast<int>(rng() % 3);
            Matrix em = random_grid(T, V + 1, rng);
            Transcript target = random_transcript(3, V, rng);
            double brute = ctc_bruteforce(em, target);
            double loss = ctc_loss(to_log_domain(em), target).loss;
            double dp = std::isfinite(loss) ? std::exp(-loss) : 0.0;
            if (std::abs(dp - brute) > 1e-10) {
                r.pass = false;
                r.detail = "instance " + std::to_string(i);
                break;
            }
            ++checked;
        }
        if (r.pass) r.detail = std::to_string(checked) + " instances";
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<CheckResult> check_sdctc_oracle(const std::string& vectors_path) {
    std::vector<CheckResult> results;
    SpeakerInventory inv(2);
    {
        CheckResult r{"sdctc-conformance-vectors", true, ""};
        std::ifstream f(vectors_path);
        if (!f) {
            r.pass = false;
            r.detail = "cannot open " + vectors_path;
        } else {
            nlohmann::json j = nlohmann::json::parse(f);
            int idx = 0;
            for (const auto& c : j.at("cases")) {
                SpeakerPosteriorGrid ps{matrix_from_json(c.at("ps"))};
                TokenPosteriorGrid pv{matrix_from_json(c.at("pv"))};
                auto transcripts = c.at("transcripts").get<std::vector<Transcript>>();
                double expected = c.at("total").get<double>();
                double total = sd_ctc_loss(ps, pv, transcripts, inv).total;
                if (std::abs(total - expected) > 1e-9) {
                    r.pass = false;
                    r.detail = "case " + std::to_string(idx) + " mismatch";
                    break;
                }
                ++idx;
            }
            if (r.pass) r.detail = std::to_string(idx) + " cases";
        }
        results.push_back(std::move(r));
    }
    {
        CheckResult r{"sdctc-dp-vs-enumeration", true, ""};
        std::mt19937_64 rng(103);
        int checked = 0;
        for (int i = 0; i < 100; ++i) {
            int T = 2 + static_cast<int>(rng() % 4);
            int V = 1 + static_cast<int>(rng() % 2);
            SpeakerPosteriorGrid ps{random_grid(T, 2, rng)};
            TokenPosteriorGrid pv{random_grid(T, V + 1, rng)};
            std::vector<Transcript> transcripts{random_transcript(2, V, rng),
                                                random_transcript(2, V, rng)};
            double brute_total = 0.0;
            bool feasible = true;
            for (int m = 0; m < 2; ++m) {
                double p = ctc_bruteforce(speaker_token_grid(ps, pv, m).probs, transcripts[m]);
                if (p == 0.0)
                    feasible = false;
                else
                    brute_total += -std::log(p);
            }
            double total = sd_ctc_loss(ps, pv, transcripts, inv).total;
            bool match = feasible ? std::abs(std::exp(-total) - std::exp(-brute_total)) < 1e-10
                                  : !std::isfinite(total);
            if (!match) {
                r.pass = false;
                r.detail = "instance " + std::to_string(i);
                break;
            }
            ++checked;
        }
        if (r.pass) r.detail = std::to_string(checked) + " instances";
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<CheckResult> check_grad() {
    std::vector<CheckResult> results;
    const double step = 1e-5;
    {
        CheckResult r{"ctc-logit-gradients", true, ""};
        std::mt19937_64 rng(201);
        std::normal_distribution<double> dist(0.0, 1.0);
        int checked = 0;
        for (int i = 0; i < 50 && r.pass; ++i) {
            int T = 2 + static_cast<int>(rng() % 7);
            int V = 1 + static_cast<int>(rng() % 5);
            Matrix logits(T, V + 1);
            for (double& v : logits.data) v = dist(rng);
            Transcript target = random_transcript(2, V, rng);
            if (min_alignment_length(target) > T) continue;
            auto loss_of = [&](const Matrix& z) {
                return ctc_loss(log_softmax_rows(z), target).loss;
            };
            Matrix log_em = log_softmax_rows(logits);
            CtcResult res = ctc_loss(log_em, target);
            Matrix g = logprob_grad_to_logit_grad(ctc_grad(log_em, target, res),
                                                  softmax_rows(logits));
            for (size_t k = 0; k < logits.data.size() && r.pass; ++k) {
                if (std::abs(g.data[k]) <= 1e-8) continue;
                Matrix zp = logits, zm = logits;
                zp.data[k] += step;
                zm.data[k] -= step;
                double fd = (loss_of(zp) - loss_of(zm)) / (2 * step);
                if (std::abs(fd - g.data[k]) / std::abs(g.data[k]) >= 1e-4) {
                    r.pass = false;
                    r.detail = "instance " + std::to_string(i);
                }
            }
            ++checked;
        }
        if (r.pass) r.detail = std::to_string(checked) + " instances";
        results.push_back(std::move(r));
    }
    {
        CheckResult r{"sdctc-logit-gradients", true, ""};
        std::mt19937_64 rng(202);
        std::normal_distribution<double> dist(0.0, 1.0);
        SpeakerInventory inv(2);
        int checked = 0;
        while (checked < 50 && r.pass) {
            int T = 3 + static_cast<int>(rng() % 4);
            int V = 2 + static_cast<int>(rng() % 2);
            Matrix zs(T, 2), zv(T, V + 1);
            for (double& v : zs.data) v = dist(rng);
            for (double& v : zv.data) v = dist(rng);
            std::vector<Transcript> transcripts{random_transcript(2, V, rng),
                                                random_transcript(2, V, rng)};
            auto loss_of = [&]() {
                return sd_ctc_loss(SpeakerPosteriorGrid{softmax_rows(zs)},
                                   TokenPosteriorGrid{softmax_rows(zv)}, transcripts, inv)
                    .total;
            };
            if (!std::isfinite(loss_of())) continue;
            SdCtcGrad g = sd_ctc_grad(SpeakerPosteriorGrid{softmax_rows(zs)},
                                      TokenPosteriorGrid{softmax_rows(zv)}, transcripts, inv);
            auto block = [&](Matrix& z, const Matrix& analytic) {
                for (size_t k = 0; k < z.data.size() && r.pass; ++k) {
                    if (std::abs(analytic.data[k]) <= 1e-8) continue;
                    double keep = z.data[k];
                    z.data[k] = keep + step;
                    double lp = loss_of();
                    z.data[k] = keep - step;
                    double lm = loss_of();
                    z.data[k] = keep;
                    double fd = (lp - lm) / (2 * step);
                    if (std::abs(fd - analytic.data[k]) / std::abs(analytic.data[k]) >= 1e-4) {
                        r.pass = false;
                        r.detail = "instance " + std::to_string(checked);
                    }
                }
            };
            block(zs, g.speaker_logits);
            block(zv, g.token_logits);
            ++checked;
        }
        if (r.pass) r.detail = std::to_string(checked) + " instances";
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<CheckResult> check_invariants() {
    std::vector<CheckResult> results;
    std::mt19937_64 rng(301);
    {
        CheckResult r{"row-stochastic-and-marginal", true, ""};
        for (int i = 0; i < 500 && r.pass; ++i) {
            int T = 1 + static_cast<int>(rng() % 5);
            int V = 1 + static_cast<int>(rng() % 4);
            int M = 1 + static_cast<int>(rng() % 3);
            SpeakerPosteriorGrid ps{random_grid(T, M, rng)};
            TokenPosteriorGrid pv{random_grid(T, V + 1, rng)};
            for (int m = 0; m < M; ++m)
                if (!validate_grid(speaker_token_grid(ps, pv, m).probs).ok) r.pass = false;
            for (int t = 0; t < T && r.pass; ++t)
                for (int c = 0; c < V; ++c) {
                    double marginal = 0.0;
                    for (int m = 0; m < M; ++m)
                        marginal += speaker_token_grid(ps, pv, m).probs(t, c);
                    if (std::abs(marginal - pv.probs(t, c)) > 1e-9) r.pass = false;
                }
        }
        results.push_back(std::move(r));
    }
    {
        CheckResult r{"blank-probability-identity", true, ""};
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 100000; ++i) {
            double s = u(rng), b = u(rng);
            if (std::abs((b + (1 - s) * (1 - b)) - (s * b + (1 - s))) > 1e-12) {
                r.pass = false;
                break;
            }
        }
        results.push_back(std::move(r));
    }
    {
        CheckResult r{"single-speaker-reduction", true, ""};
        SpeakerInventory inv(1);
        for (int i = 0; i < 100 && r.pass; ++i) {
            int T = 2 + static_cast<int>(rng() % 5);
            int V = 1 + static_cast<int>(rng() % 3);
            TokenPosteriorGrid pv{random_grid(T, V + 1, rng)};
            SpeakerPosteriorGrid ps;
            ps.probs = Matrix(T, 1, 1.0);
            Transcript y = random_transcript(2, V, rng);
            if (min_alignment_length(y) > T) continue;
            double standard = ctc_loss(to_log_domain(pv.probs), y).loss;
            double sd = sd_ctc_loss(ps, pv, {y}, inv).total;
            if (std::abs(sd - standard) > 1e-12) r.pass = false;
        }
        results.push_back(std::move(r));
    }
    {
        CheckResult r{"speaker-permutation-symmetry", true, ""};
        SpeakerInventory inv(2);
        for (int i = 0; i < 100 && r.pass; ++i) {
            int T = 3 + static_cast<int>(rng() % 4);
            TokenPosteriorGrid pv{random_grid(T, 4, rng)};
            SpeakerPosteriorGrid ps{random_grid(T, 2, rng)};
            Transcript y1 = random_transcript(2, 3, rng);
            Transcript y2 = random_transcript(2, 3, rng);
            SpeakerPosteriorGrid swapped;
            swapped.probs = Matrix(T, 2);
            for (int t = 0; t < T; ++t) {
                swapped.probs(t, 0) = ps.probs(t, 1);
                swapped.probs(t, 1) = ps.probs(t, 0);
            }
            double a = sd_ctc_loss(ps, pv, {y1, y2}, inv).total;
            double b = sd_ctc_loss(swapped, pv, {y2, y1}, inv).total;
            if (std::isfinite(a) && std::abs(a - b) > 1e-9) r.pass = false;
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace sdctc
