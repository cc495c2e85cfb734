#include "sdctc/synth.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace sdctc {

void SynthConfig::validate() const {
    if (vocab_size < 1 || feature_dim < 1) throw std::invalid_argument("synth: bad dims");
    if (len_min < 1 || len_max < len_min) throw std::invalid_argument("synth: bad length range");
    if (frames_min < 1 || frames_max < frames_min)
        throw std::invalid_argument("synth: bad frames-per-token range");
    if (offset_pool < 1) throw std::invalid_argument("synth: offset pool empty");
    if (noise_sigma < 0.0) throw std::invalid_argument("synth: negative noise_sigma");
    if (delay_min < 0.0 || delay_max > 1.0 || delay_max < delay_min)
        throw std::invalid_argument("synth: delay range outside [0,1]");
    if (max_speakers < 1) throw std::invalid_argument("synth: max_speakers < 1");
}

void SynthConfig::materialize() {
    validate();
    std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    prototypes = Matrix(vocab_size, feature_dim);
    for (double& v : prototypes.data) v = normal(rng);
    voice_offsets = Matrix(offset_pool, feature_dim);
    for (double& v : voice_offsets.data) v = offset_scale * normal(rng);
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 sample_rng(uint64_t seed, uint64_t epoch, uint64_t index) {
    uint64_t s = splitmix64(seed ^ splitmix64(epoch ^ splitmix64(index)));
    return std::mt19937_64(s);
}

MixtureSample gen_single(const SynthConfig& config, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len_dist(config.len_min, config.len_max);
    std::uniform_int_distribution<int> tok_dist(0, config.vocab_size - 1);
    std::uniform_int_distribution<int> rep_dist(config.frames_min, config.frames_max);
    std::uniform_int_distribution<int> off_dist(0, config.offset_pool - 1);
    std::normal_distribution<double> noise(0.0, 1.0);

    const int L = len_dist(rng);
    const int offset = off_dist(rng);

    MixtureSample sample;
    Transcript transcript;
    std::vector<std::pair<int, int>> emissions;  // (token, frame count)
    int T = 0;
    for (int i = 0; i < L; ++i) {
        // No adjacent repeats: repeated tokens produce runs of identically
        // distributed frames that no frame classifier can segment.
        int tok = tok_dist(rng);
        while (!transcript.empty() && tok == transcript.back()) tok = tok_dist(rng);
        int reps = rep_dist(rng);
        transcript.push_back(tok);
        emissions.emplace_back(tok, reps);
        T += reps;
    }

    sample.features.frames = Matrix(T, config.feature_dim);
    int t = 0;
    for (auto [tok, reps] : emissions) {
        for (int r = 0; r < reps; ++r, ++t) {
            for (int d = 0; d < config.feature_dim; ++d) {
                double v = config.prototypes(tok, d) + config.voice_offsets(offset, d);
                if (config.noise_sigma > 0.0) v += config.noise_sigma * noise(rng);
                sample.features.frames(t, d) = v;
            }
        }
    }
    sample.transcripts.push_back(std::move(transcript));
    sample.onsets.push_back(0);
    sample.frame_speakers.assign(T, {1});
    return sample;
}

MixtureSample mix(const MixtureSample& a, const MixtureSample& b, int delay_frames) {
    if (a.transcripts.size() != 1 || b.transcripts.size() != 1)
        throw std::invalid_argument("mix: inputs must be single-speaker");
    if (delay_frames < 0) throw std::invalid_argument("mix: negative delay");

    const int Ta = a.features.T();
    const int Tb = b.features.T();
    const int D = a.features.D();
    const int T = std::max(Ta, delay_frames + Tb);

    MixtureSample out;
    out.features.frames = Matrix(T, D, 0.0);
    for (int t = 0; t < Ta; ++t)
        for (int d = 0; d < D; ++d) out.features.frames(t, d) += a.features.frames(t, d);
    for (int t = 0; t < Tb; ++t)
        for (int d = 0; d < D; ++d)
            out.features.frames(delay_frames + t, d) += b.features.frames(t, d);

    out.transcripts = {a.transcripts[0], b.transcripts[0]};
    out.onsets = {0, delay_frames};
    out.frame_speakers.assign(T, {});
    for (int t = 0; t < Ta; ++t) out.frame_speakers[t].push_back(1);
    for (int t = 0; t < Tb; ++t) out.frame_speakers[delay_frames + t].push_back(2);
    return out;
}

MixtureSample make_sample(const SynthConfig& config, double p_two_speaker,
                          uint64_t epoch, uint64_t index) {
    if (p_two_speaker < 0.0 || p_two_speaker > 1.0)
        throw std::invalid_argument("make_sample: p_two_speaker outside [0,1]");
    std::mt19937_64 rng = sample_rng(config.seed, epoch, index);
    std::bernoulli_distribution two(p_two_speaker);
    bool mixed = config.max_speakers >= 2 && two(rng);
    MixtureSample a = gen_single(config, rng);
    if (!mixed) return a;
    MixtureSample b = gen_single(config, rng);
    std::uniform_real_distribution<double> frac(config.delay_min, config.delay_max);
    int delay = static_cast<int>(std::lround(frac(rng) * a.features.T()));
    return mix(a, b, delay);
}

void write_dataset(std::ostream& os, const std::vector<MixtureSample>& samples) {
    for (const MixtureSample& s : samples) {
        nlohmann::json j;
        j["version"] = 1;
        nlohmann::json feats = nlohmann::json::array();
        for (int t = 0; t < s.features.T(); ++t) {
            nlohmann::json row = nlohmann::json::array();
            for (int d = 0; d < s.features.D(); ++d) row.push_back(s.features.frames(t, d));
            feats.push_back(std::move(row));
        }
        j["features"] = std::move(feats);
        j["transcripts"] = s.transcripts;
        j["onsets"] = s.onsets;
        j["frame_speakers"] = s.frame_speakers;
        os << j.dump() << '\n';
    }
}

std::vector<MixtureSample> read_dataset(std::istream& is) {
    std::vector<MixtureSample> samples;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.at("version").get<int>() != 1)
            throw std::runtime_error("dataset: unknown schema version");
        MixtureSample s;
        const auto& feats = j.at("features");
        int T = static_cast<int>(feats.size());
        int D = T > 0 ? static_cast<int>(feats[0].size()) : 0;
        s.features.frames = Matrix(T, D);
        for (int t = 0; t < T; ++t)
            for (int d = 0; d < D; ++d) s.features.frames(t, d) = feats[t][d].get<double>();
        s.transcripts = j.at("transcripts").get<std::vector<Transcript>>();
        s.onsets = j.at("onsets").get<std::vector<int>>();
        s.frame_speakers = j.at("frame_speakers").get<std::vector<std::vector<int>>>();
        samples.push_back(std::move(s));
    }
    return samples;
}

SynthConfig synth_config_from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open synth config: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    SynthConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.len_min = j.value("len_min", c.len_min);
    c.len_max = j.value("len_max", c.len_max);
    c.frames_min = j.value("frames_min", c.frames_min);
    c.frames_max = j.value("frames_max", c.frames_max);
    c.offset_pool = j.value("offset_pool", c.offset_pool);
    c.offset_scale = j.value("offset_scale", c.offset_scale);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.delay_min = j.value("delay_min", c.delay_min);
    c.delay_max = j.value("delay_max", c.delay_max);
    c.max_speakers = j.value("max_speakers", c.max_speakers);
    c.seed = j.value("seed", c.seed);
    c.materialize();
    return c;
}

}  // namespace sdctc
