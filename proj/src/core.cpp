#include "sdctc/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace sdctc {

double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(const double* vals, int n) {
    double m = kNegInf;
    for (int i = 0; i < n; ++i) m = std::max(m, vals[i]);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(vals[i] - m);
    return m + std::log(s);
}

Vocabulary::Vocabulary(int n) {
    if (n < 1) throw std::invalid_argument("vocabulary must have at least one token");
    tokens.reserve(n);
    for (int i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
}

Vocabulary::Vocabulary(std::vector<std::string> names) : tokens(std::move(names)) {
    if (tokens.empty()) throw std::invalid_argument("vocabulary must have at least one token");
}

std::string Vocabulary::name(int id) const {
    if (in_vocab(id)) return tokens[id];
    if (id == blank_id()) return "<b>";
    if (id == sc_id()) return "<sc>";
    if (id == eos_id()) return "<eos>";
    if (id == sos_id()) return "<sos>";
    throw std::out_of_range("token id " + std::to_string(id));
}

SpeakerInventory::SpeakerInventory(int m) {
    if (m < 1) throw std::invalid_argument("speaker inventory must have M >= 1");
    labels.reserve(m);
    for (int i = 1; i <= m; ++i) labels.push_back("s" + std::to_string(i));
}

GridValidation validate_grid(const Matrix& probs, double tol) {
    GridValidation report;
    for (int r = 0; r < probs.rows; ++r) {
        double sum = 0.0;
        double min_entry = kPosInf;
        for (int c = 0; c < probs.cols; ++c) {
            double p = probs(r, c);
            sum += p;
            min_entry = std::min(min_entry, p);
        }
        if (std::abs(sum - 1.0) > tol || min_entry < 0.0 || !std::isfinite(sum)) {
            report.ok = false;
            report.violations.push_back({r, sum, min_entry});
        }
    }
    return report;
}

Matrix to_log_domain(const Matrix& probs, double floor) {
    if (!(floor > 0.0)) throw std::invalid_argument("log-domain floor must be positive");
    Matrix out(probs.rows, probs.cols);
    for (size_t i = 0; i < probs.data.size(); ++i)
        out.data[i] = std::log(std::max(probs.data[i], floor));
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        const double* z = logits.row(r);
        double m = kNegInf;
        for (int c = 0; c < logits.cols; ++c) m = std::max(m, z[c]);
        double s = 0.0;
        for (int c = 0; c < logits.cols; ++c) {
            out(r, c) = std::exp(z[c] - m);
            s += out(r, c);
        }
        for (int c = 0; c < logits.cols; ++c) out(r, c) /= s;
    }
    return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        const double* z = logits.row(r);
        double lse = log_sum_exp(z, logits.cols);
        for (int c = 0; c < logits.cols; ++c) out(r, c) = z[c] - lse;
    }
    return out;
}

}  // namespace sdctc
