#include "sdctc/model.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sdctc/decode.hpp"
#include "sdctc/eval.hpp"

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

Vec mat_t_vec(const Matrix& w, const Vec& y) {
    Vec x(w.cols, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = w.row(r);
        for (int c = 0; c < w.cols; ++c) x[c] += row[c] * y[r];
    }
    return x;
}

void add_outer(Matrix& g, const Vec& y, const Vec& x) {
    for (int r = 0; r < g.rows; ++r) {
        double* row = g.row(r);
        for (int c = 0; c < g.cols; ++c) row[c] += y[r] * x[c];
    }
}

void add_row(Matrix& g, const Vec& y) {
    for (int c = 0; c < g.cols; ++c) g(0, c) += y[c];
}

Vec bias_vec(const Matrix& b) { return Vec(b.data.begin(), b.data.end()); }

Vec softmax_vec(const Vec& z) {
    double m = kNegInf;
    for (double v : z) m = std::max(m, v);
    Vec p(z.size());
    double s = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (double& v : p) v /= s;
    return p;
}

Matrix init_matrix(int rows, int cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

}  // namespace

Parameters Parameters::init(const ModelConfig& config) {
    std::mt19937_64 rng(config.seed);
    const int d = config.hidden_dim;
    const int e = config.embed_dim;
    const int in0 = config.window_input_dim();
    const int dec_vocab = config.vocabulary().decoder_vocab_size();

    Parameters p;
    p.config = config;
    for (int l = 0; l < config.encoder_layers; ++l) {
        int in = (l == 0) ? in0 : d;
        p.enc_w.push_back(init_matrix(d, in, 1.0 / std::sqrt(in), rng));
        p.enc_b.emplace_back(1, d, 0.0);
    }
    p.tok_w = init_matrix(config.vocab_size + 1, d, 1.0 / std::sqrt(d), rng);
    p.tok_b = Matrix(1, config.vocab_size + 1, 0.0);
    p.spk_w = init_matrix(config.num_speakers, d, 1.0 / std::sqrt(d), rng);
    p.spk_b = Matrix(1, config.num_speakers, 0.0);
    p.embed = init_matrix(dec_vocab, e, 1.0 / std::sqrt(e), rng);
    p.att_q = init_matrix(d, d, 1.0 / std::sqrt(d), rng);
    p.dec_h0 = init_matrix(1, d, 1.0 / std::sqrt(d), rng);
    p.dec_w = init_matrix(d, e + 2 * d, 1.0 / std::sqrt(e + 2 * d), rng);
    p.dec_b = Matrix(1, d, 0.0);
    p.out_w = init_matrix(dec_vocab, d, 1.0 / std::sqrt(d), rng);
    p.out_b = Matrix(1, dec_vocab, 0.0);
    return p;
}

Parameters Parameters::zeros_like(const Parameters& other) {
    Parameters p = other;
    p.for_each([](const std::string&, Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });
    return p;
}

void Parameters::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
    for (size_t l = 0; l < enc_w.size(); ++l) {
        fn("enc_w" + std::to_string(l), enc_w[l]);
        fn("enc_b" + std::to_string(l), enc_b[l]);
    }
    fn("tok_w", tok_w);
    fn("tok_b", tok_b);
    fn("spk_w", spk_w);
    fn("spk_b", spk_b);
    fn("embed", embed);
    fn("att_q", att_q);
    fn("dec_h0", dec_h0);
    fn("dec_w", dec_w);
    fn("dec_b", dec_b);
    fn("out_w", out_w);
    fn("out_b", out_b);
}

void Parameters::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<Parameters*>(this)->for_each(
        [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

double positional_key(int t, int j, int d) {
    double rate = std::pow(10000.0, -static_cast<double>(j / 2 * 2) / d);
    return (j % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
}

EncoderForward encoder_forward(const Parameters& params, const FeatureSequence& features,
                               int stage) {
    const ModelConfig& cfg = params.config;
    if (features.D() != cfg.feature_dim)
        throw std::invalid_argument("encoder_forward: feature dim mismatch");
    const int T = features.T();
    const int w = cfg.context_window;
    const int D = cfg.feature_dim;
    const int d = cfg.hidden_dim;

    EncoderForward fwd;
    fwd.windowed = Matrix(T, (2 * w + 1) * D, 0.0);
    for (int t = 0; t < T; ++t) {
        for (int k = -w; k <= w; ++k) {
            int src = t + k;
            if (src < 0 || src >= T) continue;  // zero padding at the edges
            for (int j = 0; j < D; ++j)
                fwd.windowed(t, (k + w) * D + j) = features.frames(src, j);
        }
    }

    const Matrix* input = &fwd.windowed;
    for (size_t l = 0; l < params.enc_w.size(); ++l) {
        Matrix act(T, d);
        for (int t = 0; t < T; ++t) {
            Vec x(input->row(t), input->row(t) + input->cols);
            Vec z = matvec(params.enc_w[l], x);
            for (int j = 0; j < d; ++j) act(t, j) = std::tanh(z[j] + params.enc_b[l](0, j));
        }
        fwd.acts.push_back(std::move(act));
        input = &fwd.acts.back();
    }
    fwd.H = fwd.acts.back();

    fwd.token_logits = Matrix(T, cfg.vocab_size + 1);
    fwd.speaker_logits = Matrix(T, cfg.num_speakers);
    for (int t = 0; t < T; ++t) {
        Vec h(fwd.H.row(t), fwd.H.row(t) + d);
        Vec zv = matvec(params.tok_w, h);
        for (int c = 0; c <= cfg.vocab_size; ++c)
            fwd.token_logits(t, c) = zv[c] + params.tok_b(0, c);
        Vec zs = matvec(params.spk_w, h);
        for (int c = 0; c < cfg.num_speakers; ++c)
            fwd.speaker_logits(t, c) = zs[c] + params.spk_b(0, c);
    }
    fwd.pv.probs = softmax_rows(fwd.token_logits);
    if (stage == 1) {
        fwd.ps.probs = Matrix(T, cfg.num_speakers, 0.0);
        for (int t = 0; t < T; ++t) fwd.ps.probs(t, 0) = 1.0;
    } else {
        fwd.ps.probs = softmax_rows(fwd.speaker_logits);
    }
    return fwd;
}

DecoderForward decoder_forward(const Parameters& params, const Matrix& H,
                               const SotSequence& target) {
    const ModelConfig& cfg = params.config;
    const Vocabulary vocab = cfg.vocabulary();
    if (target.tokens.empty() || target.tokens.back() != vocab.eos_id())
        throw std::invalid_argument("decoder_forward: target must end with <eos>");
    for (int tok : target.tokens)
        if (tok < 0 || tok >= vocab.decoder_vocab_size())
            throw std::out_of_range("decoder_forward: token outside decoder vocabulary");

    const int T = H.rows;
    const int d = cfg.hidden_dim;
    const int N = static_cast<int>(target.tokens.size());

    DecoderForward fwd;
    fwd.targets = target.tokens;
    fwd.inputs.push_back(vocab.sos_id());
    for (int i = 0; i + 1 < N; ++i) fwd.inputs.push_back(target.tokens[i]);

    fwd.attention = Matrix(N, T);
    fwd.states.emplace_back(params.dec_h0.data.begin(), params.dec_h0.data.end());  // h_0
    double loss = 0.0;
    for (int i = 0; i < N; ++i) {
        DecoderStep step = decoder_step(params, H, fwd.inputs[i], fwd.states.back());
        for (int t = 0; t < T; ++t) fwd.attention(i, t) = step.attention[t];
        loss -= std::log(std::max(step.probs[target.tokens[i]], kProbFloor));
        fwd.queries.push_back(std::move(step.query));
        fwd.contexts.push_back(std::move(step.context));
        fwd.states.push_back(std::move(step.state));
        fwd.probs.push_back(std::move(step.probs));
    }
    fwd.loss = loss / N;
    return fwd;
}

namespace {

// Backprop of the teacher-forced decoder; accumulates parameter gradients
// (scaled) and the gradient w.r.t. the encoder output into dH.
void decoder_backward(const Parameters& params, const Matrix& H, const DecoderForward& fwd,
                      double scale, Parameters& grads, Matrix& dH) {
    const ModelConfig& cfg = params.config;
    const int T = H.rows;
    const int d = cfg.hidden_dim;
    const int e = cfg.embed_dim;
    const int N = static_cast<int>(fwd.targets.size());

    Vec dh(d, 0.0);  // gradient w.r.t. h_{i+1}, carried backwards
    for (int i = N - 1; i >= 0; --i) {
        const Vec& h_next = fwd.states[i + 1];
        const Vec& h = fwd.states[i];
        const Vec& p = fwd.probs[i];

        Vec g_logit(p.size());
        for (size_t j = 0; j < p.size(); ++j) g_logit[j] = p[j] * scale / N;
        g_logit[fwd.targets[i]] -= scale / N;

        add_outer(grads.out_w, g_logit, h_next);
        add_row(grads.out_b, g_logit);
        Vec dh_next = mat_t_vec(params.out_w, g_logit);
        for (int j = 0; j < d; ++j) dh_next[j] += dh[j];

        Vec dpre(d);
        for (int j = 0; j < d; ++j) dpre[j] = dh_next[j] * (1.0 - h_next[j] * h_next[j]);

        Vec u(e + 2 * d);
        const int prev = fwd.inputs[i];
        for (int j = 0; j < e; ++j) u[j] = params.embed(prev, j);
        for (int j = 0; j < d; ++j) u[e + j] = fwd.contexts[i][j];
        for (int j = 0; j < d; ++j) u[e + d + j] = h[j];
        add_outer(grads.dec_w, dpre, u);
        add_row(grads.dec_b, dpre);

        Vec du = mat_t_vec(params.dec_w, dpre);
        for (int j = 0; j < e; ++j) grads.embed(prev, j) += du[j];
        Vec dc(du.begin() + e, du.begin() + e + d);
        Vec dh_prev(du.begin() + e + d, du.end());

        // context c = sum_t a_t H_t with a = softmax(H q)
        Vec da(T, 0.0);
        for (int t = 0; t < T; ++t) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += dc[j] * H(t, j);
            da[t] = acc;
            for (int j = 0; j < d; ++j) dH(t, j) += fwd.attention(i, t) * dc[j];
        }
        double dot = 0.0;
        for (int t = 0; t < T; ++t) dot += fwd.attention(i, t) * da[t];
        Vec dq(d, 0.0);
        for (int t = 0; t < T; ++t) {
            double ds = fwd.attention(i, t) * (da[t] - dot);
            for (int j = 0; j < d; ++j) {
                dq[j] += ds * (H(t, j) + positional_key(t, j, d));
                dH(t, j) += ds * fwd.queries[i][j];
            }
        }
        add_outer(grads.att_q, dq, h);
        Vec dh_from_q = mat_t_vec(params.att_q, dq);
        for (int j = 0; j < d; ++j) dh_prev[j] += dh_from_q[j];

        dh = std::move(dh_prev);
    }
    for (int j = 0; j < d; ++j) grads.dec_h0(0, j) += dh[j];
}

void encoder_backward(const Parameters& params, const EncoderForward& fwd, const Matrix& dH,
                      Parameters& grads) {
    const int T = fwd.H.rows;
    const int layers = static_cast<int>(params.enc_w.size());
    for (int t = 0; t < T; ++t) {
        Vec dh(dH.row(t), dH.row(t) + dH.cols);
        for (int l = layers - 1; l >= 0; --l) {
            const Matrix& out = fwd.acts[l];
            Vec dpre(out.cols);
            for (int j = 0; j < out.cols; ++j)
                dpre[j] = dh[j] * (1.0 - out(t, j) * out(t, j));
            const Matrix& in = (l == 0) ? fwd.windowed : fwd.acts[l - 1];
            Vec x(in.row(t), in.row(t) + in.cols);
            add_outer(grads.enc_w[l], dpre, x);
            add_row(grads.enc_b[l], dpre);
            if (l > 0) dh = mat_t_vec(params.enc_w[l], dpre);
        }
    }
}

}  // namespace

SampleLoss backward_sample(const Parameters& params, const MixtureSample& sample,
                           const TrainConfig& tc, Parameters& grads, double scale) {
    const ModelConfig& cfg = params.config;
    const Vocabulary vocab = cfg.vocabulary();
    const SpeakerInventory inventory = cfg.inventory();
    const double lambda = tc.ctc_weight;

    EncoderForward enc = encoder_forward(params, sample.features, tc.stage);
    SotSequence target = serialize(sample.transcripts, vocab);
    DecoderForward dec = decoder_forward(params, enc.H, target);

    SampleLoss loss;
    loss.sot = dec.loss;

    Matrix dH(enc.H.rows, enc.H.cols, 0.0);
    decoder_backward(params, enc.H, dec, scale, grads, dH);

    if (lambda > 0.0) {
        LossBreakdown breakdown = sd_ctc_loss(enc.ps, enc.pv, sample.transcripts, inventory);
        if (!std::isfinite(breakdown.total)) {
            loss.sdctc_skipped = true;
        } else {
            loss.sdctc = breakdown.total;
            SdCtcGrad g = sd_ctc_grad(enc.ps, enc.pv, sample.transcripts, inventory);
            const int T = enc.H.rows;
            const int d = cfg.hidden_dim;
            for (int t = 0; t < T; ++t) {
                Vec h(enc.H.row(t), enc.H.row(t) + d);
                Vec dzv(g.token_logits.row(t), g.token_logits.row(t) + g.token_logits.cols);
                for (double& v : dzv) v *= lambda * scale;
                add_outer(grads.tok_w, dzv, h);
                add_row(grads.tok_b, dzv);
                Vec back_v = mat_t_vec(params.tok_w, dzv);
                for (int j = 0; j < d; ++j) dH(t, j) += back_v[j];

                // The stage-1 speaker posterior is pinned, not a softmax
                // output, so no speaker-logit gradient exists there.
                if (tc.stage != 1) {
                    Vec dzs(g.speaker_logits.row(t),
                            g.speaker_logits.row(t) + g.speaker_logits.cols);
                    for (double& v : dzs) v *= lambda * scale;
                    add_outer(grads.spk_w, dzs, h);
                    add_row(grads.spk_b, dzs);
                    Vec back_s = mat_t_vec(params.spk_w, dzs);
                    for (int j = 0; j < d; ++j) dH(t, j) += back_s[j];
                }
            }
        }
    }
    loss.total = loss.sot + lambda * loss.sdctc;

    encoder_backward(params, enc, dH, grads);
    return loss;
}

std::set<std::string> frozen_groups(int stage) {
    if (stage == 1) return {"spk_w", "spk_b"};
    if (stage == 2) return {"tok_w", "tok_b"};
    throw std::invalid_argument("stage must be 1 or 2");
}

void adam_update(Parameters& params, const Parameters& grads, AdamState& state,
                 const TrainConfig& tc) {
    const std::set<std::string> frozen = frozen_groups(tc.stage);
    state.step += 1;
    double lr = tc.learning_rate;
    if (tc.warmup_steps > 0 && state.step < tc.warmup_steps)
        lr *= static_cast<double>(state.step) / tc.warmup_steps;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(state.step));

    // Group enumeration order is identical across all four structures.
    std::vector<std::pair<std::string, Matrix*>> ps, ms, vs;
    std::vector<const Matrix*> gs;
    params.for_each([&](const std::string& n, Matrix& m) { ps.emplace_back(n, &m); });
    state.m.for_each([&](const std::string& n, Matrix& m) { ms.emplace_back(n, &m); });
    state.v.for_each([&](const std::string& n, Matrix& m) { vs.emplace_back(n, &m); });
    grads.for_each([&](const std::string&, const Matrix& m) { gs.push_back(&m); });

    for (size_t k = 0; k < ps.size(); ++k) {
        if (frozen.count(ps[k].first)) continue;
        Matrix& p = *ps[k].second;
        Matrix& m = *ms[k].second;
        Matrix& v = *vs[k].second;
        const Matrix& g = *gs[k];
        for (size_t i = 0; i < p.data.size(); ++i) {
            double gi = g.data[i];
            m.data[i] = tc.beta1 * m.data[i] + (1.0 - tc.beta1) * gi;
            v.data[i] = tc.beta2 * v.data[i] + (1.0 - tc.beta2) * gi * gi;
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
        }
    }
}

StepMetrics train_step(Parameters& params, const std::vector<MixtureSample>& batch,
                       const TrainConfig& tc, AdamState& state) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    Parameters grads = Parameters::zeros_like(params);
    const double scale = 1.0 / batch.size();
    StepMetrics metrics;
    for (const MixtureSample& sample : batch) {
        SampleLoss l = backward_sample(params, sample, tc, grads, scale);
        metrics.sot += l.sot * scale;
        metrics.sdctc += l.sdctc * scale;
        metrics.total += l.total * scale;
        if (l.sdctc_skipped) metrics.sdctc_skipped += 1;
    }
    adam_update(params, grads, state, tc);
    return metrics;
}

namespace {

double validation_cpwer(const Parameters& params, const std::vector<MixtureSample>& val,
                        int stage) {
    if (val.empty()) return 0.0;
    long long edits = 0;
    long long ref_len = 0;
    for (const MixtureSample& sample : val) {
        EncoderForward enc = encoder_forward(params, sample.features, stage);
        std::vector<Transcript> hyps = ctc_greedy(enc.ps, enc.pv);
        CpwerResult r = cpwer(sample.transcripts, hyps);
        edits += r.edits;
        ref_len += r.ref_len;
    }
    return ref_len > 0 ? static_cast<double>(edits) / ref_len : 0.0;
}

}  // namespace

TrainResult run_stage(Parameters params, const std::vector<MixtureSample>& train,
                      const std::vector<MixtureSample>& val, const TrainConfig& tc) {
    if (tc.stage != 1 && tc.stage != 2) throw std::invalid_argument("stage must be 1 or 2");
    AdamState state(params);
    TrainResult result;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::mt19937_64 rng(tc.seed ^ (0x5deece66dULL * (epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);

        EpochMetrics em;
        em.epoch = epoch;
        em.stage = tc.stage;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += tc.batch_size) {
            std::vector<MixtureSample> batch;
            for (size_t i = start; i < order.size() && i < start + tc.batch_size; ++i)
                batch.push_back(train[order[i]]);
            StepMetrics sm = train_step(params, batch, tc, state);
            em.sot += sm.sot;
            em.sdctc += sm.sdctc;
            em.total += sm.total;
            ++batches;
        }
        if (batches > 0) {
            em.sot /= batches;
            em.sdctc /= batches;
            em.total /= batches;
        }
        em.val_cpwer = validation_cpwer(params, val, tc.stage);
        result.metrics.push_back(em);
    }
    result.params = std::move(params);
    return result;
}

TrainResult run_training(const Parameters& init,
                         const std::vector<TrainConfig>& schedule,
                         const std::vector<const std::vector<MixtureSample>*>& train_sets,
                         const std::vector<const std::vector<MixtureSample>*>& val_sets) {
    if (schedule.size() != train_sets.size() || schedule.size() != val_sets.size())
        throw std::invalid_argument("run_training: schedule/dataset mismatch");
    int prev_stage = 0;
    for (const TrainConfig& tc : schedule) {
        if (tc.stage <= prev_stage)
            throw std::invalid_argument("run_training: stages must run in order 1 then 2");
        prev_stage = tc.stage;
    }
    TrainResult result;
    result.params = init;
    for (size_t i = 0; i < schedule.size(); ++i) {
        TrainResult stage_result =
            run_stage(std::move(result.params), *train_sets[i], *val_sets[i], schedule[i]);
        result.params = std::move(stage_result.params);
        for (const EpochMetrics& em : stage_result.metrics) result.metrics.push_back(em);
    }
    return result;
}

void save_checkpoint(const std::string& path, const Parameters& params, int stage) {
    nlohmann::json j;
    j["version"] = 1;
    j["stage"] = stage;
    const ModelConfig& c = params.config;
    j["config"] = {{"context_window", c.context_window}, {"encoder_layers", c.encoder_layers},
                   {"hidden_dim", c.hidden_dim},         {"embed_dim", c.embed_dim},
                   {"feature_dim", c.feature_dim},       {"vocab_size", c.vocab_size},
                   {"num_speakers", c.num_speakers},     {"seed", c.seed}};
    nlohmann::json shapes = nlohmann::json::object();
    nlohmann::json groups = nlohmann::json::object();
    params.for_each([&](const std::string& name, const Matrix& m) {
        shapes[name] = {m.rows, m.cols};
        groups[name] = m.data;
    });
    j["shapes"] = std::move(shapes);
    j["params"] = std::move(groups);
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
        f << j.dump() << '\n';
    }
    std::rename(tmp.c_str(), path.c_str());
}

Parameters load_checkpoint(const std::string& path, int* stage_out) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: malformed JSON in " + path + ": " + e.what());
    }
    if (j.at("version").get<int>() != 1)
        throw std::runtime_error("checkpoint: unknown version");
    ModelConfig c;
    const auto& jc = j.at("config");
    c.context_window = jc.at("context_window").get<int>();
    c.encoder_layers = jc.at("encoder_layers").get<int>();
    c.hidden_dim = jc.at("hidden_dim").get<int>();
    c.embed_dim = jc.at("embed_dim").get<int>();
    c.feature_dim = jc.at("feature_dim").get<int>();
    c.vocab_size = jc.at("vocab_size").get<int>();
    c.num_speakers = jc.at("num_speakers").get<int>();
    c.seed = jc.at("seed").get<uint64_t>();

    Parameters p = Parameters::init(c);
    p.for_each([&](const std::string& name, Matrix& m) {
        const auto& shape = j.at("shapes").at(name);
        if (shape[0].get<int>() != m.rows || shape[1].get<int>() != m.cols)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        std::vector<double> vals = j.at("params").at(name).get<std::vector<double>>();
        if (vals.size() != m.data.size())
            throw std::runtime_error("checkpoint: size mismatch for " + name);
        m.data = std::move(vals);
    });
    if (stage_out) *stage_out = j.at("stage").get<int>();
    return p;
}

}  // namespace sdctc
