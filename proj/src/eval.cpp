#include "sdctc/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sdctc {

WerCounts wer(const Transcript& reference, const Transcript& hypothesis) {
    const size_t m = reference.size();
    const size_t n = hypothesis.size();
    std::vector<long long> prev(n + 1), cur(n + 1);
    for (size_t j = 0; j <= n; ++j) prev[j] = static_cast<long long>(j);
    for (size_t i = 1; i <= m; ++i) {
        cur[0] = static_cast<long long>(i);
        for (size_t j = 1; j <= n; ++j) {
            long long sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return {prev[n], static_cast<long long>(m)};
}

CpwerResult cpwer(const std::vector<Transcript>& references,
                  const std::vector<Transcript>& hypotheses) {
    std::vector<Transcript> refs = references;
    std::vector<Transcript> hyps = hypotheses;
    const size_t n = std::max(refs.size(), hyps.size());
    if (n > 8) throw std::invalid_argument("cpwer: more than 8 streams");
    refs.resize(n);
    hyps.resize(n);

    std::vector<std::vector<long long>> cost(n, std::vector<long long>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) cost[i][j] = wer(refs[i], hyps[j]).edits;

    CpwerResult best;
    best.edits = -1;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        long long total = 0;
        for (size_t i = 0; i < n; ++i) total += cost[i][perm[i]];
        if (best.edits < 0 || total < best.edits) {
            best.edits = total;
            best.permutation = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    for (const Transcript& r : refs) best.ref_len += static_cast<long long>(r.size());
    if (n == 0) best.edits = 0;
    return best;
}

void ScoreReport::add(SampleScore score) {
    total_edits += score.edits;
    total_ref_len += score.ref_len;
    per_sample.push_back(std::move(score));
}

namespace {

// Lower-triangular Cholesky factor; throws on non-positive pivots.
Matrix cholesky(const Matrix& a) {
    const int n = a.rows;
    Matrix l(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0)
                    throw std::runtime_error("lda: singular within-class scatter");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

std::vector<double> forward_solve(const Matrix& l, const std::vector<double>& b) {
    const int n = l.rows;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l(i, k) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

std::vector<double> backward_solve_t(const Matrix& l, const std::vector<double>& b) {
    const int n = l.rows;
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

// Cyclic Jacobi for a symmetric matrix; returns eigenvalues and fills
// columns of V with eigenvectors.
std::vector<double> jacobi_eigen(Matrix a, Matrix& v) {
    const int n = a.rows;
    v = Matrix(n, n, 0.0);
    for (int i = 0; i < n; ++i) v(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-30) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a(i, i);
    return eig;
}

}  // namespace

Matrix lda_projection(const Matrix& frames, const std::vector<int>& labels) {
    const int n = frames.rows;
    const int d = frames.cols;
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("lda: label count mismatch");
    if (n < d + 1) throw std::invalid_argument("lda: need at least d+1 frames");

    std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2) throw std::invalid_argument("lda: need at least two classes");

    std::vector<double> mean(d, 0.0);
    std::map<int, std::vector<double>> class_mean;
    std::map<int, int> class_count;
    for (int i = 0; i < n; ++i) {
        auto& cm = class_mean.try_emplace(labels[i], d, 0.0).first->second;
        class_count[labels[i]] += 1;
        for (int j = 0; j < d; ++j) {
            cm[j] += frames(i, j);
            mean[j] += frames(i, j);
        }
    }
    for (int j = 0; j < d; ++j) mean[j] /= n;
    for (auto& [c, cm] : class_mean)
        for (int j = 0; j < d; ++j) cm[j] /= class_count[c];

    Matrix sw(d, d, 0.0), sb(d, d, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& cm = class_mean[labels[i]];
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                sw(a, b) += (frames(i, a) - cm[a]) * (frames(i, b) - cm[b]);
    }
    for (const auto& [c, cm] : class_mean) {
        double nc = class_count[c];
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) sb(a, b) += nc * (cm[a] - mean[a]) * (cm[b] - mean[b]);
    }

    double trace = 0.0;
    for (int j = 0; j < d; ++j) trace += sw(j, j);
    double eps = 1e-6 * trace / d;
    if (eps <= 0.0) eps = 1e-12;
    for (int j = 0; j < d; ++j) sw(j, j) += eps;

    // generalized eigenproblem Sb w = lambda Sw w via Sw = L L^T
    Matrix l = cholesky(sw);
    Matrix a(d, d, 0.0);  // L^-1 Sb L^-T
    for (int col = 0; col < d; ++col) {
        std::vector<double> e(d, 0.0);
        e[col] = 1.0;
        std::vector<double> li = backward_solve_t(l, e);  // column of L^-T
        std::vector<double> sbli(d, 0.0);
        for (int r = 0; r < d; ++r)
            for (int k = 0; k < d; ++k) sbli[r] += sb(r, k) * li[k];
        std::vector<double> acol = forward_solve(l, sbli);
        for (int r = 0; r < d; ++r) a(r, col) = acol[r];
    }
    // symmetrize against roundoff
    for (int r = 0; r < d; ++r)
        for (int c = r + 1; c < d; ++c) {
            double v = 0.5 * (a(r, c) + a(c, r));
            a(r, c) = a(c, r) = v;
        }

    Matrix vecs;
    std::vector<double> eig = jacobi_eigen(a, vecs);
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return eig[x] > eig[y]; });

    Matrix dirs(d, 2, 0.0);
    for (int k = 0; k < 2 && k < d; ++k) {
        std::vector<double> u(d);
        for (int j = 0; j < d; ++j) u[j] = vecs(j, order[k]);
        std::vector<double> w = backward_solve_t(l, u);
        for (int j = 0; j < d; ++j) dirs(j, k) = w[j];
    }

    Matrix coords(n, 2, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += frames(i, j) * dirs(j, k);
            coords(i, k) = acc;
        }
    return coords;
}

void write_csv_matrix(std::ostream& os, const Matrix& m) {
    char buf[40];
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
            if (c > 0) os << ',';
            os << buf;
        }
        os << '\n';
    }
}

void attention_dump(std::ostream& os, const Matrix& attention) {
    write_csv_matrix(os, attention);
}

Matrix read_csv_matrix(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows; ++r) {
        if (static_cast<int>(rows[r].size()) != m.cols)
            throw std::runtime_error("csv: ragged rows");
        for (int c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

std::vector<RunComparison> compare_runs(const std::vector<ScoreReport>& reports,
                                        const std::vector<std::string>& labels) {
    if (reports.empty() || reports.size() != labels.size())
        throw std::invalid_argument("compare_runs: reports/labels mismatch");
    std::set<std::string> base_ids;
    for (const SampleScore& s : reports[0].per_sample) base_ids.insert(s.sample_id);
    for (const ScoreReport& r : reports) {
        std::set<std::string> ids;
        for (const SampleScore& s : r.per_sample) ids.insert(s.sample_id);
        if (ids != base_ids)
            throw std::invalid_argument("compare_runs: mismatched sample id sets");
    }
    double base = reports[0].aggregate_cpwer();
    std::vector<RunComparison> out;
    for (size_t i = 0; i < reports.size(); ++i) {
        RunComparison c;
        c.label = labels[i];
        c.cpwer = reports[i].aggregate_cpwer();
        c.relative_reduction = base > 0.0 ? (base - c.cpwer) / base : 0.0;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace sdctc
