#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "sdctc/eval.hpp"
#include "test_util.hpp"

using namespace sdctc;

namespace {

// Independent exhaustive permutation search used as a reference for cpwer.
long long cpwer_reference(std::vector<Transcript> refs, std::vector<Transcript> hyps) {
    size_t n = std::max(refs.size(), hyps.size());
    refs.resize(n);
    hyps.resize(n);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    long long best = -1;
    do {
        long long total = 0;
        for (size_t i = 0; i < n; ++i) {
            // plain Levenshtein, coded independently (full matrix)
            const Transcript& a = refs[i];
            const Transcript& b = hyps[perm[i]];
            std::vector<std::vector<long long>> dp(a.size() + 1,
                                                   std::vector<long long>(b.size() + 1));
            for (size_t r = 0; r <= a.size(); ++r) dp[r][0] = static_cast<long long>(r);
            for (size_t c = 0; c <= b.size(); ++c) dp[0][c] = static_cast<long long>(c);
            for (size_t r = 1; r <= a.size(); ++r)
                for (size_t c = 1; c <= b.size(); ++c)
                    dp[r][c] = std::min({dp[r - 1][c] + 1, dp[r][c - 1] + 1,
                                         dp[r - 1][c - 1] + (a[r - 1] == b[c - 1] ? 0 : 1)});
            total += dp[a.size()][b.size()];
        }
        if (best < 0 || total < best) best = total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best < 0 ? 0 : best;
}

}  // namespace

TEST_CASE("wer basics") {
    CHECK(wer({0, 1, 2}, {0, 1, 2}).edits == 0);
    CHECK(wer({0, 1}, {}).edits == 2);
    WerCounts w = wer({0, 1, 2, 3}, {0, 9, 2});
    CHECK(w.edits == 2);  // one substitution, one deletion
    CHECK(w.ref_len == 4);
}

TEST_CASE("wer is symmetric as a raw edit count") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        Transcript a = testutil::random_transcript(6, 4, rng);
        Transcript b = testutil::random_transcript(6, 4, rng);
        CHECK(wer(a, b).edits == wer(b, a).edits);
    }
}

TEST_CASE("cpwer finds the permutation identity") {
    std::vector<Transcript> refs{{0, 1, 2}, {3, 4}};
    std::vector<Transcript> hyps{{3, 4}, {0, 1, 2}};
    CpwerResult r = cpwer(refs, hyps);
    CHECK(r.edits == 0);
    CHECK(r.permutation == std::vector<int>{1, 0});
    CHECK(r.ref_len == 5);
}

TEST_CASE("cpwer single substitution") {
    std::vector<Transcript> refs{{0, 1}, {2, 3}};
    std::vector<Transcript> hyps{{0, 1}, {2, 9}};
    CpwerResult r = cpwer(refs, hyps);
    CHECK(r.edits == 1);
    CHECK(r.ref_len == 4);
}

TEST_CASE("cpwer pads the shorter list") {
    std::vector<Transcript> refs{{0}};
    std::vector<Transcript> hyps{{0}, {1}};
    CpwerResult r = cpwer(refs, hyps);
    CHECK(r.edits == 1);  // extra hypothesis aligned to the empty padding
    CHECK(r.ref_len == 1);
}

TEST_CASE("cpwer is zero on any reordering of identical streams") {
    std::vector<Transcript> xs{{0, 1}, {2}, {3, 3}};
    std::vector<Transcript> permuted{{2}, {3, 3}, {0, 1}};
    CHECK(cpwer(xs, xs).edits == 0);
    CHECK(cpwer(xs, permuted).edits == 0);
}

TEST_CASE("cpwer never beats nor exceeds the identity assignment") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        int n = 1 + static_cast<int>(rng() % 3);
        std::vector<Transcript> refs, hyps;
        for (int k = 0; k < n; ++k) {
            refs.push_back(testutil::random_transcript(4, 3, rng));
            hyps.push_back(testutil::random_transcript(4, 3, rng));
        }
        long long identity = 0;
        for (int k = 0; k < n; ++k) identity += wer(refs[k], hyps[k]).edits;
        CpwerResult r = cpwer(refs, hyps);
        CHECK(r.edits <= identity);
        CHECK(r.edits == cpwer_reference(refs, hyps));
    }
}

TEST_CASE("cpwer rejects too many streams") {
    std::vector<Transcript> nine(9, Transcript{0});
    CHECK_THROWS_AS(cpwer(nine, nine), std::invalid_argument);
}

TEST_CASE("lda separates well-separated blobs") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.1);
    const int d = 8;
    const int per_class = 50;
    Matrix frames(2 * per_class, d);
    std::vector<int> labels;
    for (int i = 0; i < 2 * per_class; ++i) {
        int cls = i < per_class ? 0 : 1;
        labels.push_back(cls);
        for (int j = 0; j < d; ++j)
            frames(i, j) = (cls == 0 ? 1.0 : -1.0) * (j == 0 ? 3.0 : 0.0) + noise(rng);
    }
    Matrix coords = lda_projection(frames, labels);
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < per_class; ++i) m0 += coords(i, 0);
    for (int i = per_class; i < 2 * per_class; ++i) m1 += coords(i, 0);
    m0 /= per_class;
    m1 /= per_class;
    double var = 0.0;
    for (int i = 0; i < per_class; ++i) var += (coords(i, 0) - m0) * (coords(i, 0) - m0);
    var /= per_class - 1;
    CHECK(std::abs(m0 - m1) > 5.0 * std::sqrt(var));
}

TEST_CASE("lda with identical class means is defined and degenerate") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int d = 4;
    Matrix frames(40, d);
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        labels.push_back(i % 2);
        for (int j = 0; j < d; ++j) frames(i, j) = noise(rng);
    }
    Matrix coords = lda_projection(frames, labels);
    CHECK(coords.rows == 40);
    CHECK(coords.cols == 2);
}

TEST_CASE("lda requires two classes") {
    Matrix frames(10, 2, 0.5);
    std::vector<int> labels(10, 0);
    CHECK_THROWS_AS(lda_projection(frames, labels), std::invalid_argument);
}

TEST_CASE("attention dump rows sum to one and round-trip bit-identically") {
    std::mt19937_64 rng(7);
    Matrix att = testutil::random_grid(5, 9, rng);
    std::stringstream ss;
    attention_dump(ss, att);
    Matrix back = read_csv_matrix(ss);
    REQUIRE(back.same_shape(att));
    CHECK(back.data == att.data);
    for (int r = 0; r < back.rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < back.cols; ++c) sum += back(r, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("compare_runs relative reduction") {
    auto report = [](double edits, double total, const std::string& id) {
        ScoreReport r;
        SampleScore s;
        s.sample_id = id;
        s.edits = static_cast<long long>(edits);
        s.ref_len = static_cast<long long>(total);
        r.add(s);
        return r;
    };
    // baseline 4.7%, system 3.5% -> about 25.5% relative reduction
    std::vector<ScoreReport> reports{report(47, 1000, "x"), report(35, 1000, "x")};
    auto cmp = compare_runs(reports, {"baseline", "system"});
    CHECK(cmp[0].relative_reduction == doctest::Approx(0.0));
    CHECK(cmp[1].relative_reduction == doctest::Approx((4.7 - 3.5) / 4.7).epsilon(1e-9));

    std::vector<ScoreReport> same{report(10, 100, "x"), report(10, 100, "x")};
    CHECK(compare_runs(same, {"a", "b"})[1].relative_reduction == doctest::Approx(0.0));
    std::vector<ScoreReport> half{report(10, 100, "x"), report(5, 100, "x")};
    CHECK(compare_runs(half, {"a", "b"})[1].relative_reduction == doctest::Approx(0.5));
}

TEST_CASE("compare_runs rejects mismatched sample ids") {
    ScoreReport a, b;
    SampleScore s1{"one", 0, 1, {}};
    SampleScore s2{"two", 0, 1, {}};
    a.add(s1);
    b.add(s2);
    CHECK_THROWS_AS(compare_runs({a, b}, {"a", "b"}), std::invalid_argument);
}
