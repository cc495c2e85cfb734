#pragma once

#include <string>
#include <vector>

#include "sdctc/core.hpp"

namespace sdctc {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Writes ctc_vectors.json and sdctc_vectors.json into `dir`, each case
// carrying the brute-force oracle's expected value.
void write_conformance_vectors(const std::string& dir);

// Regression against the shipped vectors plus fresh DP-vs-enumeration
// instances (tolerance 1e-10).
std::vector<CheckResult> check_ctc_oracle(const std::string& vectors_path);
std::vector<CheckResult> check_sdctc_oracle(const std::string& vectors_path);

// Finite-difference gradient suites (CTC and SD-CTC logit gradients).
std::vector<CheckResult> check_grad();

// Row-stochasticity, marginal recovery, blank-probability identity,
// single-speaker reduction, permutation symmetry.
std::vector<CheckResult> check_invariants();

}  // namespace sdctc
