#include "doctest.h"

#include <cmath>
#include <vector>

#include "respicast/delay.hpp"
#include "respicast/rng.hpp"

using namespace respicast;

namespace {

double gamma_pdf(double shape, double rate, double x) {
    if (x <= 0.0) return 0.0;
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
                    std::lgamma(shape));
}

// Independent quadrature route: composite Simpson over each unit bin.
std::vector<double> discretize_by_quadrature(const DelaySpec& spec) {
    double shape = (spec.mean / spec.sd) * (spec.mean / spec.sd);
    double rate = spec.mean / (spec.sd * spec.sd);
    std::vector<double> probs;
    for (int s = spec.min_lag; s <= spec.max_lag; ++s) {
        double lo = std::max(0.0, s - 0.5), hi = s + 0.5;
        const int steps = 4000;
        double h = (hi - lo) / steps;
        double acc = gamma_pdf(shape, rate, lo) + gamma_pdf(shape, rate, hi);
        for (int i = 1; i < steps; ++i)
            acc += gamma_pdf(shape, rate, lo + i * h) * (i % 2 ? 4.0 : 2.0);
        probs.push_back(acc * h / 3.0);
    }
    double sum = 0.0;
    for (double p : probs) sum += p;
    for (double& p : probs) p /= sum;
    return probs;
}

} // namespace

TEST_CASE("generation interval pmf has full support and unit mass") {
    auto pmf = discretize_gamma({3.3, 3.5, 15, 1});
    CHECK(pmf.size() == 15);
    CHECK(pmf.min_lag() == 1);
    CHECK(pmf.max_lag() == 15);
    double sum = 0.0;
    for (double p : pmf.probs()) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("near-degenerate gamma concentrates at its mean") {
    auto pmf = discretize_gamma({5.0, 0.01, 25, 0});
    CHECK(pmf.at_lag(5) >= 0.999);
}

TEST_CASE("discretised gamma matches the quadrature oracle per bin") {
    for (DelaySpec spec : {DelaySpec{3.6, 2.1, 25, 0}, DelaySpec{6.9, 2.7, 25, 0},
                           DelaySpec{3.3, 3.5, 15, 1}}) {
        auto pmf = discretize_gamma(spec);
        auto oracle = discretize_by_quadrature(spec);
        REQUIRE(pmf.size() == oracle.size());
        for (std::size_t i = 0; i < oracle.size(); ++i)
            CHECK(pmf.probs()[i] == doctest::Approx(oracle[i]).epsilon(0).scale(0).epsilon(1e-6));
    }
}

TEST_CASE("discretize rejects invalid specs") {
    CHECK_THROWS_AS(discretize_gamma({-1.0, 2.0, 25, 0}), ParameterError);
    CHECK_THROWS_AS(discretize_gamma({1.0, 0.0, 25, 0}), ParameterError);
    CHECK_THROWS_AS(discretize_gamma({1.0, 1.0, 25, 2}), ParameterError);
    // all mass far beyond the truncation point
    CHECK_THROWS_AS(discretize_gamma({1e6, 1.0, 10, 0}), ParameterError);
}

TEST_CASE("convolve_delays adds means and variances") {
    auto [m1, s1] = convolve_delays({3.0, 2.0}, {0.0, 0.0});
    CHECK(m1 == 3.0);
    CHECK(s1 == 2.0);
    auto [m2, s2] = convolve_delays({2.0, 1.0}, {4.0, 2.0});
    CHECK(m2 == 6.0);
    CHECK(s2 == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK_THROWS_AS(convolve_delays({-1.0, 1.0}, {1.0, 1.0}), ParameterError);
}

TEST_CASE("convolve_delays matches Monte Carlo sums of independent gammas") {
    const int n = 400000;
    RngStream rng(314);
    auto draw = [&](double mean, double sd) {
        double shape = (mean / sd) * (mean / sd);
        return rng.gamma(shape, mean / shape);
    };
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = draw(3.1, 2.2) + draw(3.2, 2.1);
        s += x;
        s2 += x * x;
    }
    double mc_mean = s / n;
    double mc_sd = std::sqrt(s2 / n - mc_mean * mc_mean);
    auto [mean, sd] = convolve_delays({3.1, 2.2}, {3.2, 2.1});
    double se_mean = sd / std::sqrt(double(n));
    double se_sd = sd / std::sqrt(2.0 * double(n));
    CHECK(std::abs(mc_mean - mean) < 3.0 * se_mean);
    CHECK(std::abs(mc_sd - sd) < 3.0 * se_sd);
}

TEST_CASE("pmf_mean basics") {
    DiscretePMF point(4, {1.0});
    CHECK(pmf_mean(point) == 4.0);
    CHECK(point.mean_lag_rounded() == 4);

    DiscretePMF uni(1, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(pmf_mean(uni) == doctest::Approx(2.0).epsilon(1e-15));

    auto pmf = discretize_gamma({6.3, 3.1, 25, 0});
    CHECK(std::abs(pmf_mean(pmf) - 6.3) < 0.3);
    CHECK(pmf.mean_lag_rounded() == 6);
}

TEST_CASE("pmf sums to one for random specs") {
    RngStream rng(55);
    for (int i = 0; i < 50; ++i) {
        DelaySpec spec;
        spec.mean = 0.5 + rng.uniform() * 10.0;
        spec.sd = 0.2 + rng.uniform() * 5.0;
        spec.min_lag = rng.uniform() < 0.5 ? 0 : 1;
        spec.max_lag = spec.min_lag + 5 + int(rng.uniform() * 40);
        auto pmf = discretize_gamma(spec);
        double sum = 0.0;
        for (double p : pmf.probs()) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("truncation error in the mean halves as max_lag doubles") {
    DelaySpec base{8.0, 2.0, 14, 0};
    DelaySpec wide{8.0, 2.0, 28, 0};
    double err_base = std::abs(pmf_mean(discretize_gamma(base)) - 8.0);
    double err_wide = std::abs(pmf_mean(discretize_gamma(wide)) - 8.0);
    CHECK(err_wide <= 0.5 * err_base);
}

TEST_CASE("pmf mean is monotone in spec mean at fixed sd") {
    double prev = -1.0;
    for (double mean = 2.0; mean <= 10.0; mean += 0.5) {
        double m = pmf_mean(discretize_gamma({mean, 2.0, 25, 0}));
        CHECK(m >= prev);
        prev = m;
    }
}
