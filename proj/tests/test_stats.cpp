#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mi/stats.hpp"

using namespace mi;

// Reference values below were produced by scipy.stats (ttest_ind with
// equal_var=False, linregress) on the same numbers.

TEST_CASE("Welch test on identical samples") {
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    const auto r = welch_t_test(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Welch test textbook examples") {
    const std::vector<double> a1{19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0};
    const std::vector<double> b1{28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7,
                                 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3, 20.4, 23.9, 13.3};
    const auto r1 = welch_t_test(a1, b1);
    CHECK(std::abs(r1.t - -2.225512039969852) < 1e-6);
    CHECK(std::abs(r1.df - 24.524634944257343) < 1e-6);
    CHECK(std::abs(r1.p - 0.035484530830010325) < 1e-6);

    const std::vector<double> a2{27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1,
                                 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4};
    const std::vector<double> b2{27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0,
                                 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4};
    const auto r2 = welch_t_test(a2, b2);
    CHECK(std::abs(r2.t - -2.455356398286006) < 1e-6);
    CHECK(std::abs(r2.p - 0.021378001462866985) < 1e-6);
}

TEST_CASE("Welch test separates jittered constants") {
    const auto r = welch_t_test({0.0, 0.001, -0.001, 0.0005}, {1.0, 1.001, 0.999, 1.0005});
    CHECK(r.p < 0.001);
    CHECK(r.t < 0);
}

TEST_CASE("Welch test is antisymmetric") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> a(5 + rep % 4), b(6 + rep % 3);
        for (auto& x : a) x = d(rng);
        for (auto& x : b) x = d(rng) + 0.5;
        const auto ab = welch_t_test(a, b), ba = welch_t_test(b, a);
        CHECK(ab.t == doctest::Approx(-ba.t));
        CHECK(ab.p == doctest::Approx(ba.p));
        CHECK(ab.p >= 0);
        CHECK(ab.p <= 1);
    }
}

TEST_CASE("Welch test rejects degenerate samples") {
    CHECK_THROWS_AS(welch_t_test({1.0}, {1.0, 2.0}), StatsError);
    CHECK_THROWS_AS(welch_t_test({1.0, 1.0}, {2.0, 2.0}), StatsError);
}

TEST_CASE("regression on an exact line") {
    const auto r = linear_regression({1, 2, 3, 4, 5}, {3, 5, 7, 9, 11});
    CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.p < 1e-12);
    CHECK(r.r2 == doctest::Approx(1.0));
}

TEST_CASE("regression with constant y") {
    const auto r = linear_regression({1, 2, 3, 4}, {5, 5, 5, 5});
    CHECK(r.slope == 0.0);
    CHECK(r.p == doctest::Approx(1.0));
}

TEST_CASE("regression textbook values") {
    const auto r1 = linear_regression({1, 2, 3, 4, 5, 6, 7, 8}, {2.1, 3.9, 6.2, 7.8, 10.1, 12.2, 13.8, 16.1});
    CHECK(std::abs(r1.slope - 1.9976190476190478) < 1e-9);
    CHECK(std::abs(r1.intercept - 0.0357142857142847) < 1e-9);
    CHECK(std::abs(r1.p - 4.888933612552949e-10) < 1e-12);
    const auto r2 = linear_regression({0.8, 1.1, 1.3, 1.6, 1.9, 2.0}, {5, 3, 4, 1, 2, 0});
    CHECK(std::abs(r2.slope - -3.515981735159817) < 1e-9);
    CHECK(std::abs(r2.intercept - 7.598173515981736) < 1e-9);
    CHECK(std::abs(r2.p - 0.02090635428599048) < 1e-6);
}

TEST_CASE("regression errors") {
    CHECK_THROWS_AS(linear_regression({1, 1, 1}, {1, 2, 3}), StatsError);
    CHECK_THROWS_AS(linear_regression({1, 2}, {1, 2}), StatsError);
    CHECK_THROWS_AS(linear_regression({1, 2, 3}, {1, 2}), StatsError);
}

TEST_CASE("summary helpers") {
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(mean({1, 2, 3, 6}) == 3);
    CHECK(sample_variance({1, 2, 3, 4}) == doctest::Approx(5.0 / 3));
    CHECK(entropy_bits({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0));
    CHECK(entropy_bits({1, 0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(median({}), StatsError);
}

TEST_CASE("Student t tail") {
    CHECK(student_t_two_sided(0, 5) == doctest::Approx(1.0));
    // t = 2.571 is the 97.5% quantile at 5 degrees of freedom.
    CHECK(student_t_two_sided(2.570581835636314, 5) == doctest::Approx(0.05).epsilon(1e-9));
}
