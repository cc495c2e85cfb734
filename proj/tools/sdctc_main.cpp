#include <cstdio>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdctc/checks.hpp"
#include "sdctc/decode.hpp"
#include "sdctc/eval.hpp"
#include "sdctc/model.hpp"
#include "sdctc/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdctc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDataMismatch = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fnv1a_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checksum: cannot open " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!f) break;
    }
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void atomic_write(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << content;
    }
    fs::rename(tmp, path);
}

void write_manifest(const std::string& primary_out, const std::string& command,
                    const std::string& config_path, uint64_t seed,
                    const std::vector<std::string>& outputs,
                    const json& effective_config = json::object()) {
    json m;
    m["version"] = 1;
    m["command"] = command;
    m["config"] = config_path;
    m["effective_config"] = effective_config;
    m["seed"] = seed;
    m["output_dir"] = fs::absolute(fs::path(primary_out)).parent_path().string();
    json checksums = json::object();
    for (const std::string& out : outputs)
        checksums[fs::path(out).filename().string()] = fnv1a_file(out);
    m["checksums"] = std::move(checksums);
    atomic_write(primary_out + ".manifest.json", m.dump(2) + "\n");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<MixtureSample> load_samples(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open dataset: " + path);
    return read_dataset(f);
}

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config: " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw UsageError("invalid config " + path + ": " + e.what());
    }
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.context_window = j.value("context_window", c.context_window);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.num_speakers = j.value("num_speakers", c.num_speakers);
    c.seed = j.value("seed", c.seed);
    return c;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.ctc_weight = j.value("ctc_weight", c.ctc_weight);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    return c;
}

Parameters load_checkpoint_cli(const std::string& path, int* stage_out) {
    try {
        return load_checkpoint(path, stage_out);
    } catch (const std::runtime_error& e) {
        std::string what = e.what();
        if (what.find("cannot open") != std::string::npos) throw UsageError(what);
        throw DataError(what);
    }
}

std::string sample_id(size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%05zu", index);
    return buf;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
    std::ostringstream os;
    os << "epoch,stage,l_sot,l_sdctc,total,val_cpwer\n";
    for (const EpochMetrics& m : metrics)
        os << m.epoch << ',' << m.stage << ',' << fmt_double(m.sot) << ','
           << fmt_double(m.sdctc) << ',' << fmt_double(m.total) << ','
           << fmt_double(m.val_cpwer) << '\n';
    atomic_write(path, os.str());
}

int cmd_synth(const std::string& config_path, const std::string& out, int n, double p_two,
              int64_t seed_override) {
    SynthConfig config = synth_config_from_json_file(config_path);
    if (seed_override >= 0) {
        config.seed = static_cast<uint64_t>(seed_override);
        config.materialize();
    }
    std::vector<MixtureSample> samples;
    samples.reserve(n);
    for (int i = 0; i < n; ++i) samples.push_back(make_sample(config, p_two, 0, i));
    std::ostringstream os;
    write_dataset(os, samples);
    atomic_write(out, os.str());
    json eff{{"vocab_size", config.vocab_size},   {"feature_dim", config.feature_dim},
             {"len_min", config.len_min},         {"len_max", config.len_max},
             {"frames_min", config.frames_min},   {"frames_max", config.frames_max},
             {"offset_pool", config.offset_pool}, {"offset_scale", config.offset_scale},
             {"noise_sigma", config.noise_sigma}, {"delay_min", config.delay_min},
             {"delay_max", config.delay_max},     {"max_speakers", config.max_speakers},
             {"seed", config.seed},               {"n", n},
             {"p_two", p_two}};
    write_manifest(out, "synth", config_path, config.seed, {out}, eff);
    return kExitOk;
}

int cmd_train(int stage, const std::string& data_path, const std::string& init_path,
              const std::string& config_path, const std::string& out) {
    json cfg = load_json(config_path);
    ModelConfig model_cfg = model_config_from_json(cfg.value("model", json::object()));
    TrainConfig tc = train_config_from_json(cfg.value("train", json::object()));
    tc.stage = stage;

    Parameters params = Parameters::init(model_cfg);
    if (stage == 2) {
        if (init_path.empty())
            throw UsageError("stage 2 requires --init with a stage-1 checkpoint");
        int init_stage = 0;
        Parameters loaded = load_checkpoint_cli(init_path, &init_stage);
        if (init_stage != 1) throw UsageError("stage 2 init must come from a stage-1 checkpoint");
        if (loaded.config.hidden_dim != model_cfg.hidden_dim ||
            loaded.config.vocab_size != model_cfg.vocab_size ||
            loaded.config.feature_dim != model_cfg.feature_dim ||
            loaded.config.num_speakers != model_cfg.num_speakers)
            throw DataError("checkpoint/config shape mismatch");
        params = std::move(loaded);
    } else if (!init_path.empty()) {
        int init_stage = 0;
        params = load_checkpoint_cli(init_path, &init_stage);
    }

    std::vector<MixtureSample> samples = load_samples(data_path);
    size_t val_count = samples.size() / 10;
    std::vector<MixtureSample> train(samples.begin(), samples.end() - val_count);
    std::vector<MixtureSample> val(samples.end() - val_count, samples.end());

    TrainResult result = run_stage(std::move(params), train, val, tc);
    save_checkpoint(out, result.params, stage);
    write_metrics_csv(out + ".metrics.csv", result.metrics);
    json eff{{"model",
              {{"context_window", model_cfg.context_window},
               {"encoder_layers", model_cfg.encoder_layers},
               {"hidden_dim", model_cfg.hidden_dim},
               {"embed_dim", model_cfg.embed_dim},
               {"feature_dim", model_cfg.feature_dim},
               {"vocab_size", model_cfg.vocab_size},
               {"num_speakers", model_cfg.num_speakers},
               {"seed", model_cfg.seed}}},
             {"train",
              {{"stage", tc.stage},
               {"ctc_weight", tc.ctc_weight},
               {"learning_rate", tc.learning_rate},
               {"warmup_steps", tc.warmup_steps},
               {"batch_size", tc.batch_size},
               {"epochs", tc.epochs},
               {"seed", tc.seed}}}};
    write_manifest(out, "train", config_path, tc.seed, {out, out + ".metrics.csv"}, eff);
    return kExitOk;
}

int cmd_decode(const std::string& ckpt_path, const std::string& data_path, int beam,
               double rescore_weight, const std::string& mode, const std::string& out) {
    int stage = 0;
    Parameters params = load_checkpoint_cli(ckpt_path, &stage);
    std::vector<MixtureSample> samples = load_samples(data_path);
    const Vocabulary vocab = params.config.vocabulary();
    const SpeakerInventory inventory = params.config.inventory();

    DecodeConfig dc;
    dc.beam_width = beam;
    dc.rescore_weight = rescore_weight;
    dc.rescoring = (mode == "aed+sdctc");
    dc.max_output_length = 64;

    json out_json;
    out_json["version"] = 1;
    out_json["mode"] = mode;
    out_json["beam"] = beam;
    out_json["rescore_weight"] = rescore_weight;
    json jsamples = json::array();
    for (size_t i = 0; i < samples.size(); ++i) {
        EncoderForward enc = encoder_forward(params, samples[i].features, stage);
        json js;
        js["id"] = sample_id(i);
        if (mode == "ctc") {
            js["transcripts"] = ctc_greedy(enc.ps, enc.pv);
        } else {
            std::vector<Hypothesis> hyps = beam_search(params, enc.H, dc);
            if (dc.rescoring)
                hyps = rescore(std::move(hyps), enc.ps, enc.pv, vocab, inventory, dc);
            json jhyps = json::array();
            for (const Hypothesis& h : hyps) {
                json jh;
                std::vector<std::string> names;
                for (int tok : h.tokens) names.push_back(vocab.name(tok));
                jh["tokens"] = std::move(names);
                jh["decoder_logprob"] = h.decoder_logprob;
                if (dc.rescoring) jh["sdctc_logprob"] = h.sdctc_logprob;
                jh["combined_score"] = h.combined_score;
                jhyps.push_back(std::move(jh));
            }
            js["hypotheses"] = std::move(jhyps);
            js["transcripts"] =
                hyps.empty() ? std::vector<Transcript>{} : deserialize(hyps[0].tokens, vocab);
        }
        jsamples.push_back(std::move(js));
    }
    out_json["samples"] = std::move(jsamples);
    atomic_write(out, out_json.dump() + "\n");
    json eff{{"mode", mode},
             {"beam", beam},
             {"rescore_weight", rescore_weight},
             {"max_output_length", dc.max_output_length}};
    write_manifest(out, "decode", ckpt_path, params.config.seed, {out}, eff);
    return kExitOk;
}

int cmd_score(const std::string& refs_path, const std::string& hyps_path,
              const std::string& out) {
    std::vector<MixtureSample> refs = load_samples(refs_path);
    std::ifstream hf(hyps_path);
    if (!hf) throw UsageError("cannot open hypotheses: " + hyps_path);
    json hyps_json;
    try {
        hyps_json = json::parse(hf);
    } catch (const json::exception& e) {
        throw DataError("malformed hypotheses file " + hyps_path + ": " + e.what());
    }
    const auto& jsamples = hyps_json.at("samples");
    if (jsamples.size() != refs.size())
        throw DataError("reference/hypothesis sample id mismatch");

    ScoreReport report;
    for (size_t i = 0; i < refs.size(); ++i) {
        if (jsamples[i].at("id").get<std::string>() != sample_id(i))
            throw DataError("reference/hypothesis sample id mismatch");
        auto hyp_transcripts = jsamples[i].at("transcripts").get<std::vector<Transcript>>();
        CpwerResult r = cpwer(refs[i].transcripts, hyp_transcripts);
        SampleScore s;
        s.sample_id = sample_id(i);
        s.edits = r.edits;
        s.ref_len = r.ref_len;
        s.permutation = r.permutation;
        report.add(std::move(s));
    }

    std::ostringstream csv;
    csv << "sample_id,edits,ref_len,permutation\n";
    for (const SampleScore& s : report.per_sample) {
        csv << s.sample_id << ',' << s.edits << ',' << s.ref_len << ',';
        for (size_t k = 0; k < s.permutation.size(); ++k) {
            if (k > 0) csv << '|';
            csv << s.permutation[k];
        }
        csv << '\n';
    }
    atomic_write(out + ".per_sample.csv", csv.str());

    json agg;
    agg["version"] = 1;
    agg["total_edits"] = report.total_edits;
    agg["total_ref_len"] = report.total_ref_len;
    agg["cpwer"] = report.aggregate_cpwer();
    atomic_write(out, agg.dump(2) + "\n");
    write_manifest(out, "score", hyps_path, 0, {out, out + ".per_sample.csv"});
    std::cout << "cpwer " << fmt_double(report.aggregate_cpwer()) << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& ckpt_path, const std::string& data_path,
                const std::string& out_dir) {
    int stage = 0;
    Parameters params = load_checkpoint_cli(ckpt_path, &stage);
    std::vector<MixtureSample> samples = load_samples(data_path);
    fs::create_directories(out_dir);
    const Vocabulary vocab = params.config.vocabulary();

    std::vector<std::string> outputs;
    std::vector<std::vector<double>> pooled;
    std::vector<int> labels;
    for (size_t i = 0; i < samples.size(); ++i) {
        EncoderForward enc = encoder_forward(params, samples[i].features, stage);
        SotSequence target = serialize(samples[i].transcripts, vocab);
        DecoderForward dec = decoder_forward(params, enc.H, target);
        std::string att_path = out_dir + "/attention_" + sample_id(i) + ".csv";
        std::ostringstream os;
        attention_dump(os, dec.attention);
        atomic_write(att_path, os.str());
        outputs.push_back(att_path);

        for (int t = 0; t < enc.H.rows; ++t) {
            const auto& active = samples[i].frame_speakers[t];
            int label;
            if (active.size() >= 2)
                label = 2;  // overlap region, the <sc>-adjacent class
            else if (!active.empty() && active[0] == 2)
                label = 1;
            else
                label = 0;
            labels.push_back(label);
            pooled.emplace_back(enc.H.row(t), enc.H.row(t) + enc.H.cols);
        }
    }

    Matrix frames(static_cast<int>(pooled.size()), params.config.hidden_dim);
    for (size_t r = 0; r < pooled.size(); ++r)
        for (int c = 0; c < frames.cols; ++c) frames(static_cast<int>(r), c) = pooled[r][c];
    try {
        Matrix coords = lda_projection(frames, labels);
        std::ostringstream os;
        os << "label,x,y\n";
        for (int r = 0; r < coords.rows; ++r)
            os << labels[r] << ',' << fmt_double(coords(r, 0)) << ','
               << fmt_double(coords(r, 1)) << '\n';
        std::string lda_path = out_dir + "/lda.csv";
        atomic_write(lda_path, os.str());
        outputs.push_back(lda_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "lda skipped: " << e.what() << "\n";
    }
    write_manifest(out_dir + "/inspect", "inspect", ckpt_path, params.config.seed, outputs);
    return kExitOk;
}

int cmd_check(const std::string& suite, const std::string& vectors_dir) {
    std::vector<CheckResult> results;
    if (suite == "ctc-oracle")
        results = check_ctc_oracle(vectors_dir + "/ctc_vectors.json");
    else if (suite == "sdctc-oracle")
        results = check_sdctc_oracle(vectors_dir + "/sdctc_vectors.json");
    else if (suite == "grad")
        results = check_grad();
    else if (suite == "invariants")
        results = check_invariants();
    else
        throw UsageError("unknown suite: " + suite);

    bool all_pass = true;
    for (const CheckResult& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
        std::cout << "\n";
        all_pass &= r.pass;
    }
    return all_pass ? kExitOk : kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speaker-distinguishable CTC toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_config, synth_out;
    int synth_n = 100;
    double synth_p_two = 0.5;
    int64_t synth_seed = -1;
    synth->add_option("--config", synth_config)->required();
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--n", synth_n)->check(CLI::NonNegativeNumber);
    synth->add_option("--p-two", synth_p_two)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--seed", synth_seed);

    auto* train = app.add_subcommand("train", "train one stage");
    int train_stage = 1;
    std::string train_data, train_init, train_config, train_out;
    train->add_option("--stage", train_stage)->required()->check(CLI::Range(1, 2));
    train->add_option("--data", train_data)->required();
    train->add_option("--init", train_init);
    train->add_option("--config", train_config)->required();
    train->add_option("--out", train_out)->required();

    auto* decode = app.add_subcommand("decode", "decode a dataset");
    std::string dec_ckpt, dec_data, dec_mode = "aed", dec_out;
    int dec_beam = 16;
    double dec_weight = 0.3;
    decode->add_option("--checkpoint", dec_ckpt)->required();
    decode->add_option("--data", dec_data)->required();
    decode->add_option("--beam", dec_beam)->check(CLI::PositiveNumber);
    decode->add_option("--rescore-weight", dec_weight)->check(CLI::NonNegativeNumber);
    decode->add_option("--mode", dec_mode)->check(CLI::IsMember({"aed", "aed+sdctc", "ctc"}));
    decode->add_option("--out", dec_out)->required();

    auto* score = app.add_subcommand("score", "cpWER scoring");
    std::string score_refs, score_hyps, score_out;
    score->add_option("--refs", score_refs)->required();
    score->add_option("--hyps", score_hyps)->required();
    score->add_option("--out", score_out)->required();

    auto* inspect = app.add_subcommand("inspect", "diagnostic dumps");
    std::string ins_ckpt, ins_data, ins_out;
    inspect->add_option("--checkpoint", ins_ckpt)->required();
    inspect->add_option("--data", ins_data)->required();
    inspect->add_option("--out", ins_out)->required();

    auto* check = app.add_subcommand("check", "property suites");
    std::string check_suite, check_vectors = "data";
    check->add_option("--suite", check_suite)->required();
    check->add_option("--vectors", check_vectors);

    auto* genvec = app.add_subcommand("gen-vectors", "regenerate conformance vectors");
    std::string genvec_out = "data";
    genvec->add_option("--out-dir", genvec_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth->parsed())
            return cmd_synth(synth_config, synth_out, synth_n, synth_p_two, synth_seed);
        if (train->parsed())
            return cmd_train(train_stage, train_data, train_init, train_config, train_out);
        if (decode->parsed())
            return cmd_decode(dec_ckpt, dec_data, dec_beam, dec_weight, dec_mode, dec_out);
        if (score->parsed()) return cmd_score(score_refs, score_hyps, score_out);
        if (inspect->parsed()) return cmd_inspect(ins_ckpt, ins_data, ins_out);
        if (check->parsed()) return cmd_check(check_suite, check_vectors);
        if (genvec->parsed()) {
            fs::create_directories(genvec_out);
            write_conformance_vectors(genvec_out);
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataMismatch;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
