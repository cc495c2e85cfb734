#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace sdctc {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();
constexpr double kProbFloor = 1e-30;

// Dense row-major matrix of doubles. The only shapes used in this project
// are small (T x vocab, T x d, d x d), so no fancy storage.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

double log_sum_exp(double a, double b);
double log_sum_exp(const double* vals, int n);

// Token id layout: vocabulary tokens occupy 0..size-1, blank is `size`,
// then <sc>, <eos>, <sos>. The decoder-side table covers all of them;
// CTC emission grids cover only V plus blank.
struct Vocabulary {
    std::vector<std::string> tokens;  // the set V

    explicit Vocabulary(int n);
    explicit Vocabulary(std::vector<std::string> names);

    int size() const { return static_cast<int>(tokens.size()); }
    int blank_id() const { return size(); }
    int sc_id() const { return size() + 1; }
    int eos_id() const { return size() + 2; }
    int sos_id() const { return size() + 3; }
    int decoder_vocab_size() const { return size() + 4; }
    int ctc_vocab_size() const { return size() + 1; }

    bool in_vocab(int id) const { return id >= 0 && id < size(); }
    std::string name(int id) const;
};

struct FeatureSequence {
    Matrix frames;  // T x D

    int T() const { return frames.rows; }
    int D() const { return frames.cols; }
};

struct SpeakerInventory {
    std::vector<std::string> labels;  // s_1..s_M, order of first appearance

    explicit SpeakerInventory(int m);
    int M() const { return static_cast<int>(labels.size()); }
};

// T x (|V|+1) row-stochastic grid, last column is blank.
struct TokenPosteriorGrid {
    Matrix probs;
};

// T x M row-stochastic grid over the speaker inventory.
struct SpeakerPosteriorGrid {
    Matrix probs;
};

// A CTC target: members of V only, possibly empty.
using Transcript = std::vector<int>;

struct LossBreakdown {
    std::map<std::string, double> per_speaker;  // L_CTC(sigma)
    double total = 0.0;                         // L_SD-CTC
};

struct RowViolation {
    int row;
    double sum;
    double min_entry;
};

struct GridValidation {
    bool ok = true;
    std::vector<RowViolation> violations;
};

// Report-only check: each row sums to 1 within tol and has no negative entry.
GridValidation validate_grid(const Matrix& probs, double tol = 1e-9);

// Elementwise ln(max(p, floor)). Throws std::invalid_argument on floor <= 0.
Matrix to_log_domain(const Matrix& probs, double floor = kProbFloor);

// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace sdctc
