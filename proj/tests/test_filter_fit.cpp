#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "respicast/delay.hpp"
#include "respicast/filter.hpp"
#include "respicast/scenario.hpp"
#include "respicast/series.hpp"

using namespace respicast;

namespace {

DiscretePMF sc2_gen() { return discretize_gamma({3.3, 3.5, 15, 1}); }
DiscretePMF sc2_report() { return discretize_gamma({6.3, 3.1, 25, 0}); }

ForecastConfig case_only_config(int particles) {
    ForecastConfig cfg;
    cfg.gen_pmf = sc2_gen();
    cfg.report_pmf = sc2_report();
    cfg.n_particles = particles;
    cfg.use_dow = false;
    cfg.horizon = 14;
    return cfg;
}

CountSeries head_days(const CountSeries& s, int days) {
    std::vector<long long> c(s.counts().begin(), s.counts().begin() + days);
    return CountSeries(s.pathogen(), s.stream(), s.start_date(), std::move(c));
}

std::vector<double> ma7(const CountSeries& s) {
    std::vector<double> out(s.size());
    for (int t = 0; t < int(s.size()); ++t) {
        int lo = std::max(0, t - 3), hi = std::min(int(s.size()) - 1, t + 3);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += double(s.count(std::size_t(j)));
        out[std::size_t(t)] = acc / double(hi - lo + 1);
    }
    return out;
}

} // namespace

TEST_CASE("piecewise reproduction number is recovered with interval coverage") {
    ScenarioSpec sc;
    sc.length = 80;
    sc.rt.assign(80, 1.3);
    for (int t = 40; t < 80; ++t) sc.rt[std::size_t(t)] = 0.8;
    sc.seed_infections = 50.0;
    sc.gen_pmf = sc2_gen();
    sc.report_pmf = sc2_report();
    sc.seed = 11;
    auto truth = simulate(sc);

    ForecastConfig cfg = case_only_config(10000);
    cfg.seed = 5;
    auto ens = initialize(&*truth.cases, nullptr, cfg, truth.cases->origin_date());
    run_filter(ens);

    auto days = rt_day_summaries(ens);
    int covered = 0, total = 0;
    for (const auto& d : days) {
        int t = int(d.date - ens.sim_start);
        if (t < 14) continue;
        double r_true = sc.rt[std::size_t(t)];
        ++total;
        if (d.q[1] <= r_true && r_true <= d.q[5]) ++covered;
    }
    REQUIRE(total >= 50);
    // 90% central interval should cover the switching truth most days
    CHECK(double(covered) >= 0.80 * double(total));
}

TEST_CASE("truncated-lag resampling matches full-history resampling at the origin") {
    ScenarioSpec sc;
    sc.length = 60;
    sc.rt.assign(60, 1.15);
    for (int t = 30; t < 60; ++t) sc.rt[std::size_t(t)] = 0.95;
    sc.seed_infections = 120.0;
    sc.gen_pmf = sc2_gen();
    sc.report_pmf = sc2_report();
    sc.seed = 3;
    auto truth = simulate(sc);

    auto origin_mean = [&](int lag, std::uint64_t seed) {
        ForecastConfig cfg = case_only_config(10000);
        cfg.lag = lag;
        cfg.seed = seed;
        auto ens = initialize(&*truth.cases, nullptr, cfg, truth.cases->origin_date());
        run_filter(ens);
        return forecast(ens, 0).rt_origin.mean;
    };

    const int reps = 6;
    double sum_a = 0, sum_b = 0, ss_a = 0, ss_b = 0;
    for (int i = 0; i < reps; ++i) {
        double a = origin_mean(42, 100 + std::uint64_t(i));
        double b = origin_mean(60, 200 + std::uint64_t(i));
        sum_a += a; ss_a += a * a;
        sum_b += b; ss_b += b * b;
    }
    double mean_a = sum_a / reps, mean_b = sum_b / reps;
    double var_a = (ss_a - sum_a * sum_a / reps) / (reps - 1);
    double var_b = (ss_b - sum_b * sum_b / reps) / (reps - 1);
    double se = std::sqrt(var_a / reps + var_b / reps);
    CHECK(std::abs(mean_a - mean_b) < 3.0 * se);
}

TEST_CASE("point-mass report delay conserves the observed case level") {
    ScenarioSpec sc;
    sc.length = 70;
    sc.rt.assign(70, 1.0);
    sc.seed_infections = 150.0;
    sc.gen_pmf = sc2_gen();
    sc.report_pmf = DiscretePMF(0, {1.0});
    sc.k_c = std::numeric_limits<double>::infinity();
    sc.seed = 29;
    auto truth = simulate(sc);

    ForecastConfig cfg = case_only_config(10000);
    cfg.report_pmf = DiscretePMF(0, {1.0});
    cfg.k_c = std::numeric_limits<double>::infinity();
    cfg.seed = 9;
    auto ens = initialize(&*truth.cases, nullptr, cfg, truth.cases->origin_date());
    run_filter(ens);

    // with the identity report convolution, fitted E[Z_t] is the particle
    // mean of I_t; it should track the smoothed observed series
    auto smooth = ma7(*truth.cases);
    double rel_sum = 0.0;
    int n_days = 0;
    for (int t = ens.t_init; t < ens.span - 3; ++t) {
        double mean_i = 0.0;
        for (int p = 0; p < ens.n(); ++p) mean_i += ens.infections_of(p)[std::size_t(t)];
        mean_i /= double(ens.n());
        double rel = std::abs(mean_i - smooth[std::size_t(t)]) / smooth[std::size_t(t)];
        CHECK(rel < 0.25);
        rel_sum += rel;
        ++n_days;
    }
    REQUIRE(n_days >= 40);
    CHECK(rel_sum / n_days < 0.08);
}

TEST_CASE("stable epidemic forecasts stay flat at the recent level") {
    ScenarioSpec sc;
    sc.length = 80;
    sc.rt.assign(80, 1.0);
    sc.seed_infections = 2000.0;
    sc.gen_pmf = sc2_gen();
    sc.report_pmf = sc2_report();
    sc.k_c = std::numeric_limits<double>::infinity();
    sc.seed = 13;
    auto truth = simulate(sc);

    ForecastConfig cfg = case_only_config(5000);
    cfg.k_c = std::numeric_limits<double>::infinity();
    cfg.seed = 2;
    auto ens = initialize(&*truth.cases, nullptr, cfg, truth.cases->origin_date());
    run_filter(ens);
    auto fc = forecast(ens, 14);

    double level = 0.0;
    for (int t = 73; t < 80; ++t) level += double(truth.cases->count(std::size_t(t)));
    level /= 7.0;
    for (int d = 0; d < 14; ++d) {
        double median = fc.case_quantiles[std::size_t(d)][3];
        CHECK(std::abs(median - level) < 0.2 * level);
    }
}

TEST_CASE("ninety percent forecast intervals cover held-out data at the nominal rate") {
    const int reps = 50, fit_days = 80, hold = 7;
    int covered = 0;
    for (int rep = 0; rep < reps; ++rep) {
        GPKernel kernel;
        auto rt = gp_rt_trajectory(fit_days + hold, kernel, 120, 7000 + std::uint64_t(rep));

        ScenarioSpec sc;
        sc.length = fit_days + hold;
        sc.rt = rt;
        sc.seed_infections = 100.0;
        sc.gen_pmf = sc2_gen();
        sc.report_pmf = sc2_report();
        sc.seed = 5000 + std::uint64_t(rep);
        auto truth = simulate(sc);

        ForecastConfig cfg = case_only_config(10000);
        cfg.horizon = hold;
        cfg.seed = 300 + std::uint64_t(rep);
        auto fit_series = head_days(*truth.cases, fit_days);
        auto ens = initialize(&fit_series, nullptr, cfg, fit_series.origin_date());
        run_filter(ens);
        auto fc = forecast(ens, hold);

        long long obs = truth.cases->count(std::size_t(fit_days + hold - 1));
        const auto& q = fc.case_quantiles[std::size_t(hold - 1)];
        if (double(obs) >= q[1] && double(obs) <= q[5]) ++covered;
    }
    CHECK(covered >= 40); // 0.80 * 50
    CHECK(covered <= 48); // 0.97 * 50
}
