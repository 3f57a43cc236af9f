#include <catch_amalgamated.hpp>

#include <random>

#include "jointpred/eval.hpp"
#include "oracles.hpp"

using namespace jointpred;
using namespace jointpred::eval;
using Catch::Approx;

TEST_CASE("smape worked examples") {
    CHECK(smape(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(smape(std::vector<double>{0}, std::vector<double>{5}) == Approx(200.0));
    CHECK(smape(std::vector<double>{0}, std::vector<double>{0}) == 0.0);
    CHECK(smape(std::vector<double>{110}, std::vector<double>{100}) == Approx(100.0 * 10.0 / 105.0));
    CHECK(smape(std::vector<double>{1, 3}, std::vector<double>{3, 1}) == Approx(100.0));
    CHECK_THROWS_AS(smape(std::vector<double>{}, std::vector<double>{}), EmptyInput);
    CHECK_THROWS_AS(smape(std::vector<double>{1}, std::vector<double>{1, 2}), LengthMismatch);
    CHECK_THROWS_AS(smape(std::vector<double>{INFINITY}, std::vector<double>{1}), NonFiniteValue);
}

TEST_CASE("a near-zero baseline against sparse counts approaches the upper bound") {
    // Mostly-zero targets with a small positive baseline: every zero target
    // contributes the full 200.
    std::vector<double> actual(50, 0.0);
    actual[0] = 40;
    std::vector<double> base(50, 0.8);
    double s = smape(base, actual);
    CHECK(s > 190.0);
    CHECK(s <= 200.0);
}

TEST_CASE("kendall tau worked examples") {
    CHECK(*kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK(*kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == -1.0);
    CHECK(*kendall_tau(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) == Approx(4.0 / 6.0));
    // Ties: x = (1,1,2), y = (1,2,3): n0=3, n1=1, n2=0, C=2, D=0.
    CHECK(*kendall_tau(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 3}) == Approx(2.0 / std::sqrt(2.0 * 3.0)));
    CHECK_FALSE(kendall_tau(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}).has_value());
    CHECK_THROWS_AS(kendall_tau(std::vector<double>{1}, std::vector<double>{1}), EmptyInput);
}

TEST_CASE("kendall tau matches pair enumeration on tied data") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng() % 120;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = double(rng() % 7);
            y[i] = double(rng() % 5);
        }
        auto fast = kendall_tau(x, y);
        auto slow = oracle::kendall_tau_b(x, y);
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) CHECK(*fast == *slow);
    }
}

TEST_CASE("gemm of a single predictor equals its tau") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N;
    Eigen::MatrixXd x(60, 1);
    std::vector<double> y(60);
    for (int i = 0; i < 60; ++i) {
        x(i, 0) = N(rng);
        y[static_cast<std::size_t>(i)] = x(i, 0) + N(rng);
    }
    std::vector<double> col(x.data(), x.data() + 60);
    CHECK(*gemm_tau(x, y) == *kendall_tau(col, y));
}

TEST_CASE("gemm finds a composite at least as good as each predictor") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    Eigen::MatrixXd x(100, 3);
    std::vector<double> y(100);
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = N(rng);
        y[static_cast<std::size_t>(i)] = x(i, 0) - 2.0 * x(i, 1) + 0.3 * N(rng);
    }
    auto fit = gemm_fit(x, y, {10, 100, 1});
    REQUIRE(fit.tau);
    for (int j = 0; j < 3; ++j) {
        std::vector<double> col(x.col(j).data(), x.col(j).data() + 100);
        CHECK(*fit.tau >= std::abs(*kendall_tau(col, y)) - 1e-12);
    }
    CHECK(*kendall_tau(fit.composite(x), y) == Approx(*fit.tau));
    CHECK(gemm_fit(x, y, {10, 100, 1}).weights == fit.weights);
}

TEST_CASE("expected-value baseline and delta tau") {
    auto b = expected_value_baseline(std::vector<double>{1, 2, 6});
    CHECK(b.predict(2) == std::vector<double>{3, 3});
    CHECK_THROWS_AS(expected_value_baseline(std::vector<double>{}), EmptyInput);
    auto d = delta_tau(std::vector<double>{0.3, 0.2, 0.1}, std::vector<double>{0.1, 0.25, 0.0});
    CHECK(d.mean == Approx((0.2 - 0.05 + 0.1) / 3));
    CHECK(d.fraction_positive == Approx(2.0 / 3.0));
    CHECK(d.mode_sign == 1);
    CHECK_THROWS_AS(delta_tau(std::vector<double>{1}, std::vector<double>{}), LengthMismatch);
}

TEST_CASE("discriminant matrix puts predictions above and truth below the diagonal") {
    ConstructColumns pred, truth;
    std::vector<std::optional<double>> a{1, 2, 3, 4, 5}, b{5, 4, 3, 2, 1}, c{1, 2, 3, 4, std::nullopt};
    pred[ConstructId::IRB] = a;
    pred[ConstructId::ITP] = b;
    truth[ConstructId::IRB] = a;
    truth[ConstructId::ITP] = c;
    auto m = discriminant_matrix(pred, truth);
    CHECK(*m.at(ConstructId::IRB, ConstructId::ITP).r == Approx(-1.0));
    CHECK(*m.at(ConstructId::ITP, ConstructId::IRB).r == Approx(1.0));
    CHECK(m.at(ConstructId::ITP, ConstructId::IRB).n == 4);
    CHECK_FALSE(m.at(ConstructId::IRB, ConstructId::IRB).r.has_value());
    CHECK_FALSE(m.at(ConstructId::IRB, ConstructId::Sleep).r.has_value());
}

TEST_CASE("reliability summary and bootstrap interval") {
    std::vector<std::optional<double>> taus{0.1, 0.3, std::nullopt, 0.2};
    auto r = reliability_report(taus, 500, 1);
    REQUIRE(r);
    CHECK(r->samples == 3);
    CHECK(r->min == 0.1);
    CHECK(r->max == 0.3);
    CHECK(r->mean == Approx(0.2));
    CHECK(r->ci_lo <= r->mean);
    CHECK(r->ci_hi >= r->mean);
    CHECK(r->ci_lo >= 0.1);
    CHECK(r->ci_hi <= 0.3);
    std::vector<std::optional<double>> none{std::nullopt};
    CHECK_FALSE(reliability_report(none).has_value());
}

TEST_CASE("correlation significance") {
    CHECK(stats::correlation_p_value(0.0, 100) == Approx(1.0));
    double rc = stats::critical_correlation(0.01, 100);
    CHECK(stats::correlation_p_value(rc, 100) == Approx(0.01).epsilon(1e-6));
    CHECK(rc == Approx(0.2565).margin(5e-4));
}
