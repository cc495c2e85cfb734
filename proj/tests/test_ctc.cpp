#include <doctest.h>

#include <stdexcept>

#include <random>

#include "sdctc/ctc.hpp"
#include "test_util.hpp"

using namespace sdctc;

namespace {

double loss_of_logits(const Matrix& logits, const Transcript& target) {
    return ctc_loss(log_softmax_rows(logits), target).loss;
}

}  // namespace

TEST_CASE("collapse definition") {
    const int blank = 9;
    CHECK(collapse({0, 0, blank, 0}, blank) == Transcript{0, 0});
    CHECK(collapse({blank, blank}, blank) == Transcript{});
    CHECK(collapse({0, blank, 1, 1}, blank) == Transcript{0, 1});
}

TEST_CASE("two-frame coin-flip instance") {
    // V={a}, P(a)=P(blank)=0.5 on both frames, target "a": 3 of the 4
    // paths collapse to "a", so the probability is 0.75.
    Matrix em(2, 2, 0.5);
    CHECK(ctc_bruteforce(em, {0}) == doctest::Approx(0.75).epsilon(1e-12));
    CtcResult r = ctc_loss(to_log_domain(em), {0});
    CHECK(r.loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("empty target keeps only the all-blank path") {
    std::mt19937_64 rng(3);
    Matrix em = testutil::random_grid(4, 3, rng);
    CtcResult r = ctc_loss(to_log_domain(em), {});
    double expected = 0.0;
    for (int t = 0; t < 4; ++t) expected -= std::log(em(t, 2));
    CHECK(r.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("repeated token needs an extra frame") {
    Matrix em(2, 2, 0.5);
    CHECK(ctc_loss(to_log_domain(em), {0, 0}).loss == kPosInf);
    Matrix em3(3, 2, 0.5);
    CHECK(std::isfinite(ctc_loss(to_log_domain(em3), {0, 0}).loss));
}

TEST_CASE("bruteforce single frame") {
    Matrix em(1, 2);
    em(0, 0) = 0.3;
    em(0, 1) = 0.7;
    CHECK(ctc_bruteforce(em, {0}) == doctest::Approx(0.3));
}

TEST_CASE("bruteforce rejects huge instances") {
    Matrix em(30, 10, 0.1);
    CHECK_THROWS_AS(ctc_bruteforce(em, {0}), std::invalid_argument);
}

TEST_CASE("uniform T=3 grid cross-check") {
    Matrix em(3, 3, 1.0 / 3.0);
    Transcript target{0, 1};
    double brute = ctc_bruteforce(em, target);
    CtcResult r = ctc_loss(to_log_domain(em), target);
    CHECK(std::exp(-r.loss) == doctest::Approx(brute).epsilon(1e-10));
}

TEST_CASE("DP equals path enumeration on random instances") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> t_dist(1, 6);
    std::uniform_int_distribution<int> v_dist(1, 3);
    for (int i = 0; i < 100; ++i) {
        int T = t_dist(rng);
        int V = v_dist(rng);
        Matrix em = testutil::random_grid(T, V + 1, rng);
        Transcript target = testutil::random_transcript(3, V, rng);
        double brute = ctc_bruteforce(em, target);
        CtcResult r = ctc_loss(to_log_domain(em), target);
        if (brute == 0.0) {
            CHECK(r.loss == kPosInf);
        } else {
            CHECK(std::abs(std::exp(-r.loss) - brute) < 1e-10);
        }
    }
}

TEST_CASE("feasibility boundary") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 50; ++i) {
        Transcript target = testutil::random_transcript(4, 2, rng);
        int need = min_alignment_length(target);
        for (int T = std::max(1, need - 1); T <= need + 1; ++T) {
            Matrix em = testutil::random_grid(T, 3, rng);
            CtcResult r = ctc_loss(to_log_domain(em), target);
            CHECK(std::isfinite(r.loss) == (T >= need));
        }
    }
}

TEST_CASE("lattice alpha/beta identity holds at every t") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 20; ++i) {
        int T = 5 + static_cast<int>(rng() % 4);
        Matrix em = testutil::random_grid(T, 4, rng);
        Transcript target = testutil::random_transcript(3, 3, rng);
        Matrix log_em = to_log_domain(em);
        CtcResult r = ctc_loss(log_em, target);
        if (!std::isfinite(r.loss)) continue;
        ExtendedTarget ext = ExtendedTarget::build(target, 3);
        int U = static_cast<int>(ext.sequence.size());
        for (int t = 0; t < T; ++t) {
            std::vector<double> terms;
            for (int u = 0; u < U; ++u) {
                double a = r.lattice.alpha(t, u);
                double b = r.lattice.beta(t, u);
                if (a == kNegInf || b == kNegInf) continue;
                terms.push_back(a + b - log_em(t, ext.sequence[u]));
            }
            double total = log_sum_exp(terms.data(), static_cast<int>(terms.size()));
            CHECK(total == doctest::Approx(r.lattice.log_likelihood).epsilon(1e-6));
        }
    }
}

TEST_CASE("single frame certain emission gradient") {
    Matrix em(1, 2);
    em(0, 0) = 1.0;
    em(0, 1) = 0.0;
    Matrix log_em = to_log_domain(em);
    CtcResult r = ctc_loss(log_em, {0});
    Matrix g = ctc_grad(log_em, {0}, r);
    CHECK(g(0, 0) == doctest::Approx(-1.0));
    CHECK(g(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("empty target gradient is -1 on blank cells") {
    Matrix em(3, 3, 1.0 / 3.0);
    Matrix log_em = to_log_domain(em);
    CtcResult r = ctc_loss(log_em, {});
    Matrix g = ctc_grad(log_em, {}, r);
    for (int t = 0; t < 3; ++t) {
        CHECK(g(t, 2) == doctest::Approx(-1.0));
        CHECK(g(t, 0) == doctest::Approx(0.0));
        CHECK(g(t, 1) == doctest::Approx(0.0));
    }
}

TEST_CASE("ctc_grad refuses infinite loss") {
    Matrix em(1, 2, 0.5);
    CtcResult r = ctc_loss(to_log_domain(em), {0, 0});
    CHECK_THROWS_AS(ctc_grad(to_log_domain(em), {0, 0}, r), std::domain_error);
}

TEST_CASE("logit gradients match central finite differences") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> dist(0.0, 1.0);
    const double step = 1e-5;
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        int T = 2 + static_cast<int>(rng() % 7);
        int V = 1 + static_cast<int>(rng() % 5);
        Matrix logits(T, V + 1);
        for (double& v : logits.data) v = dist(rng);
        Transcript target = testutil::random_transcript(2, V, rng);
        if (min_alignment_length(target) > T) continue;

        Matrix log_em = log_softmax_rows(logits);
        CtcResult r = ctc_loss(log_em, target);
        Matrix g_logp = ctc_grad(log_em, target, r);
        Matrix g = logprob_grad_to_logit_grad(g_logp, softmax_rows(logits));

        for (size_t k = 0; k < logits.data.size(); ++k) {
            Matrix lp = logits, lm = logits;
            lp.data[k] += step;
            lm.data[k] -= step;
            double fd = (loss_of_logits(lp, target) - loss_of_logits(lm, target)) / (2 * step);
            if (std::abs(g.data[k]) > 1e-8) {
                CHECK(std::abs(fd - g.data[k]) / std::abs(g.data[k]) < 1e-4);
                ++checked;
            }
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("target token out of range") {
    Matrix em(2, 3, 1.0 / 3.0);
    CHECK_THROWS_AS(ctc_loss(to_log_domain(em), {5}), std::out_of_range);
    CHECK_THROWS_AS(ctc_loss(to_log_domain(em), {-1}), std::out_of_range);
}
