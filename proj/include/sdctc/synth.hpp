#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

#include "sdctc/core.hpp"

namespace sdctc {

struct SynthConfig {
    int vocab_size = 12;
    int feature_dim = 16;
    int len_min = 3;         // transcript length range
    int len_max = 6;
    int frames_min = 2;      // frames emitted per token
    int frames_max = 3;
    int offset_pool = 4;     // number of distinct speaker voice offsets
    double offset_scale = 1.0;
    double noise_sigma = 0.1;
    double delay_min = 0.2;  // fraction of the first utterance's length
    double delay_max = 0.8;
    int max_speakers = 2;
    uint64_t seed = 0;

    Matrix prototypes;     // |V| x D, derived from seed
    Matrix voice_offsets;  // offset_pool x D, derived from seed

    void validate() const;
    // Fills prototypes/voice_offsets deterministically from the seed.
    void materialize();
};

struct MixtureSample {
    FeatureSequence features;
    std::vector<Transcript> transcripts;           // onset order
    std::vector<int> onsets;                       // start frame per speaker
    std::vector<std::vector<int>> frame_speakers;  // active 1-based speakers per frame
};

// Deterministic per-sample RNG stream, salted by (seed, epoch, index).
std::mt19937_64 sample_rng(uint64_t seed, uint64_t epoch, uint64_t index);

MixtureSample gen_single(const SynthConfig& config, std::mt19937_64& rng);

// Additive mix of two single-speaker samples, b delayed by delay_frames.
MixtureSample mix(const MixtureSample& a, const MixtureSample& b, int delay_frames);

// The sample at (epoch, index): two-speaker with probability p_two_speaker.
MixtureSample make_sample(const SynthConfig& config, double p_two_speaker,
                          uint64_t epoch, uint64_t index);

// JSON Lines dataset, schema version 1.
void write_dataset(std::ostream& os, const std::vector<MixtureSample>& samples);
std::vector<MixtureSample> read_dataset(std::istream& is);

SynthConfig synth_config_from_json_file(const std::string& path);

}  // namespace sdctc
