#include "doctest.h"

#include <cmath>
#include <vector>

#include "respicast/pspline.hpp"
#include "respicast/rng.hpp"
#include "respicast/series.hpp"
#include "respicast/spline_basis.hpp"
#include "respicast/stats.hpp"

using namespace respicast;

namespace {

CountSeries make_series(Date start, std::vector<long long> counts) {
    return CountSeries(Pathogen::SarsCov2, DataStream::Cases, start, std::move(counts));
}

PosteriorSamples fit(const CountSeries& series, bool dow, std::uint64_t seed,
                     int max_attempts = 3) {
    SplineBasis basis = SplineBasis::build(series.start_date(), series.origin_date());
    TrendPriors priors;
    SamplerSettings settings;
    settings.seed = seed;
    settings.threads = 4;
    settings.max_attempts = max_attempts;
    return fit_pspline(series, basis, priors, settings, dow);
}

} // namespace

TEST_CASE("flat truth: growth interval straddles zero almost everywhere") {
    Date start = Date::parse("2025-05-05").value();
    RngStream rng(2001);
    std::vector<long long> counts(120);
    for (auto& c : counts) c = rng.poisson(20.0);
    CountSeries series = make_series(start, counts);

    PosteriorSamples samples = fit(series, false, 11);
    CHECK(samples.diagnostics().converged);
    CHECK(samples.diagnostics().max_rhat < 1.05);
    CHECK(samples.diagnostics().min_ess > 200.0);
    CHECK(samples.n_draws() >= 1000);

    auto rates = growth_rate(samples);
    const std::vector<double> qs{0.025, 0.975};
    int covered = 0;
    for (const auto& day : rates) {
        auto q = quantiles(day, qs);
        if (q[0] < 0.0 && q[1] > 0.0) ++covered;
    }
    CHECK(double(covered) >= 0.9 * double(rates.size()));
}

TEST_CASE("exponential truth: median growth recovers the simulated rate") {
    Date start = Date::parse("2025-05-05").value();
    RngStream rng(2002);
    std::vector<long long> counts(120);
    for (std::size_t t = 0; t < counts.size(); ++t)
        counts[t] = rng.negbin(10.0 * std::exp(0.05 * double(t)), 25.0);
    CountSeries series = make_series(start, counts);

    PosteriorSamples samples = fit(series, false, 12);
    auto rates = growth_rate(samples);
    const std::vector<double> med{0.5};
    for (std::size_t t = 30; t < 90; ++t) {
        double m = quantiles(rates[t], med)[0];
        CHECK(m > 0.035);
        CHECK(m < 0.065);
    }
}

TEST_CASE("weekday multiplier is recovered when modelled") {
    Date start = Date::parse("2025-06-02").value(); // a Monday
    RngStream rng(2003);
    std::vector<long long> counts(140);
    for (std::size_t t = 0; t < counts.size(); ++t) {
        double mult = (t % 7 == 0) ? 1.75 : 0.875;
        counts[t] = rng.poisson(40.0 * mult);
    }
    CountSeries series = make_series(start, counts);

    PosteriorSamples samples = fit(series, true, 13);
    REQUIRE(samples.has_dow());
    double omega_mon = 0.0;
    for (int i = 0; i < samples.n_draws(); ++i)
        omega_mon += std::exp((*samples.draw(i).log_omega)[0]);
    omega_mon /= double(samples.n_draws());
    CHECK(omega_mon > 1.5);
    CHECK(omega_mon < 2.0);
}

TEST_CASE("fits are equivariant under shifting the whole series by a week") {
    Date start = Date::parse("2025-05-05").value();
    RngStream rng(2004);
    std::vector<long long> counts(90);
    for (std::size_t t = 0; t < counts.size(); ++t)
        counts[t] = rng.poisson(15.0 + 10.0 * std::sin(double(t) / 20.0));

    CountSeries a = make_series(start, counts);
    CountSeries b = make_series(start + 7, counts);
    PosteriorSamples sa = fit(a, false, 14);
    PosteriorSamples sb = fit(b, false, 14);

    TrendSummary ta = summarise_trend(sa);
    TrendSummary tb = summarise_trend(sb);
    REQUIRE(ta.n_days == tb.n_days);
    for (int t = 0; t < ta.n_days; ++t) {
        double ma = ta.expected[std::size_t(t)][2];
        double mb = tb.expected[std::size_t(t)][2];
        CHECK(std::abs(ma - mb) < 1e-9 * std::max(1.0, std::abs(ma)));
    }
}

TEST_CASE("the all-zero series either fits as rare or reports non-convergence") {
    Date start = Date::parse("2025-05-05").value();
    CountSeries series = make_series(start, std::vector<long long>(60, 0));
    try {
        PosteriorSamples samples = fit(series, false, 15, 1);
        TrendSummary summary = summarise_trend(samples);
        for (int t = 0; t < summary.n_days; ++t)
            CHECK(summary.expected[std::size_t(t)][2] < 1.0);
    } catch (const ConvergenceError& e) {
        CHECK(!e.diagnostics.empty());
    }
}
