#include <doctest.h>

#include <stdexcept>

#include "sdctc/core.hpp"
#include "test_util.hpp"

using namespace sdctc;

TEST_CASE("validate_grid passes a uniform grid") {
    Matrix g(3, 3, 1.0 / 3.0);
    CHECK(validate_grid(g).ok);
}

TEST_CASE("validate_grid reports a bad row sum") {
    Matrix g(1, 2);
    g(0, 0) = 0.5;
    g(0, 1) = 0.6;
    GridValidation r = validate_grid(g);
    CHECK_FALSE(r.ok);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].row == 0);
    CHECK(r.violations[0].sum == doctest::Approx(1.1));
}

TEST_CASE("validate_grid reports negativity") {
    Matrix g(1, 2);
    g(0, 0) = 1.1;
    g(0, 1) = -0.1;
    GridValidation r = validate_grid(g);
    CHECK_FALSE(r.ok);
    CHECK(r.violations[0].min_entry < 0.0);
}

TEST_CASE("to_log_domain basics") {
    Matrix g(1, 3);
    g(0, 0) = 1.0;
    g(0, 1) = 0.0;
    g(0, 2) = 0.5;
    Matrix l = to_log_domain(g, 1e-30);
    CHECK(l(0, 0) == doctest::Approx(0.0));
    CHECK(l(0, 1) == doctest::Approx(std::log(1e-30)));
    CHECK(l(0, 2) == doctest::Approx(-0.6931471805599453));
    CHECK_THROWS_AS(to_log_domain(g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(to_log_domain(g, -1.0), std::invalid_argument);
}

TEST_CASE("softmax grids are row-stochastic and log round-trips") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        Matrix g = testutil::random_grid(5, 4, rng);
        CHECK(validate_grid(g).ok);
        Matrix l = to_log_domain(g);
        for (size_t k = 0; k < g.data.size(); ++k)
            CHECK(std::exp(l.data[k]) == doctest::Approx(g.data[k]).epsilon(1e-12));
    }
}

TEST_CASE("vocabulary id layout and names") {
    Vocabulary v(3);
    CHECK(v.blank_id() == 3);
    CHECK(v.sc_id() == 4);
    CHECK(v.eos_id() == 5);
    CHECK(v.sos_id() == 6);
    CHECK(v.name(v.blank_id()) == "<b>");
    CHECK(v.name(v.sc_id()) == "<sc>");
    CHECK(v.in_vocab(2));
    CHECK_FALSE(v.in_vocab(3));
    CHECK_THROWS_AS(Vocabulary(0), std::invalid_argument);
}

TEST_CASE("log_sum_exp handles -inf") {
    CHECK(log_sum_exp(kNegInf, kNegInf) == kNegInf);
    CHECK(log_sum_exp(kNegInf, 0.0) == doctest::Approx(0.0));
    CHECK(log_sum_exp(std::log(0.25), std::log(0.75)) == doctest::Approx(0.0));
}
