#pragma once

#include <random>

#include "sdctc/core.hpp"

namespace sdctc::testutil {

// Random row-stochastic grid via softmax of N(0, spread) logits.
inline Matrix random_grid(int rows, int cols, std::mt19937_64& rng, double spread = 1.5) {
    std::normal_distribution<double> dist(0.0, spread);
    Matrix logits(rows, cols);
    for (double& v : logits.data) v = dist(rng);
    return softmax_rows(logits);
}

inline Transcript random_transcript(int max_len, int vocab, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len_dist(0, max_len);
    std::uniform_int_distribution<int> tok_dist(0, vocab - 1);
    Transcript t(len_dist(rng));
    for (int& tok : t) tok = tok_dist(rng);
    return t;
}

}  // namespace sdctc::testutil
