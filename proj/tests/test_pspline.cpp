#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "respicast/csv.hpp"
#include "respicast/pspline.hpp"
#include "respicast/rng.hpp"
#include "respicast/series.hpp"
#include "respicast/spline_basis.hpp"

using namespace respicast;

namespace {

// independent recursive Cox-de Boor evaluation
double cdb(const std::vector<double>& kn, std::size_t i, int p, double t) {
    if (p == 0) return (t >= kn[i] && t < kn[i + 1]) ? 1.0 : 0.0;
    double a = 0.0, b = 0.0;
    double d1 = kn[i + std::size_t(p)] - kn[i];
    if (d1 > 0.0) a = (t - kn[i]) / d1 * cdb(kn, i, p - 1, t);
    double d2 = kn[i + std::size_t(p) + 1] - kn[i + 1];
    if (d2 > 0.0) b = (kn[i + std::size_t(p) + 1] - t) / d2 * cdb(kn, i + 1, p - 1, t);
    return a + b;
}

double oracle_lnorm(double x, double mu, double sd) {
    double z = (x - mu) / sd;
    return -0.5 * std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * z * z;
}

// term-by-term reimplementation of the joint density
double oracle_lp(const TrendState& st, const CountSeries& series, const SplineBasis& basis,
                 const TrendPriors& priors) {
    const auto& kn = basis.knots();
    double lp = 0.0;
    for (std::size_t i = 2; i < st.coef.size(); ++i)
        lp += oracle_lnorm(st.coef[i] - 2.0 * st.coef[i - 1] + st.coef[i - 2], 0.0, st.tau);
    for (std::size_t t = 0; t < series.size(); ++t) {
        double s = 0.0;
        for (std::size_t i = 0; i < st.coef.size(); ++i)
            s += st.coef[i] * cdb(kn, i, 3, double(t));
        if (st.log_omega)
            s += (*st.log_omega)[std::size_t((series.start_date() + std::int64_t(t)).weekday())];
        double m = std::exp(s);
        double c = double(series.count(t));
        double k = st.k;
        lp += std::lgamma(c + k) - std::lgamma(k) - std::lgamma(c + 1.0) +
              k * std::log(k / (k + m)) + c * std::log(m / (k + m));
    }
    if (priors.tau) lp += oracle_lnorm(st.tau, priors.tau->mean, priors.tau->sd);
    if (priors.k) lp += oracle_lnorm(st.k, priors.k->mean, priors.k->sd);
    if (st.log_omega)
        for (int j = 0; j < 6; ++j) lp += oracle_lnorm((*st.log_omega)[std::size_t(j)], 0.0, 1.0);
    return lp;
}

CountSeries make_series(Date start, std::vector<long long> counts) {
    return CountSeries(Pathogen::SarsCov2, DataStream::Cases, start, std::move(counts));
}

// draws whose trend slope is exactly `slope` per day
PosteriorSamples constant_slope_samples(int n_draws, double slope, int days) {
    Date start = Date::parse("2025-06-02").value();
    SplineBasis basis = SplineBasis::build(start, start + (days - 1));
    std::vector<TrendState> draws;
    RngStream rng(77);
    for (int d = 0; d < n_draws; ++d) {
        TrendState st;
        st.tau = 0.1 + 0.05 * rng.uniform();
        st.k = 10.0 + 5.0 * rng.uniform();
        st.coef.resize(std::size_t(basis.n_basis()));
        double offset = rng.normal();
        for (std::size_t i = 0; i < st.coef.size(); ++i)
            st.coef[i] = offset + slope * basis.knot_spacing() * double(i);
        draws.push_back(std::move(st));
    }
    FitDiagnostics diag;
    diag.converged = true;
    return PosteriorSamples(basis, start, 4, std::move(draws), diag);
}

} // namespace

TEST_CASE("joint density matches a term-by-term oracle") {
    Date start = Date::parse("2025-04-07").value();
    RngStream rng(4021);
    for (int rep = 0; rep < 12; ++rep) {
        int days = 20 + int(rng.uniform() * 20.0);
        std::vector<long long> counts(std::size_t(days), 0);
        for (auto& c : counts) c = rng.poisson(8.0 + 20.0 * rng.uniform());
        CountSeries series = make_series(start, counts);
        SplineBasis basis = SplineBasis::build(start, series.origin_date());

        TrendState st;
        st.coef.resize(std::size_t(basis.n_basis()));
        for (auto& b : st.coef) b = 2.0 + 0.5 * rng.normal();
        st.tau = 0.05 + 0.4 * rng.uniform();
        st.k = 5.0 + 40.0 * rng.uniform();

        TrendPriors priors;
        if (rep % 3 == 1) {
            priors.tau = NormalPrior{0.2, 0.1};
            priors.k = NormalPrior{20.0, 8.0};
        }
        if (rep % 2 == 1) {
            std::array<double, 7> lw{};
            double s = 0.0;
            for (int j = 0; j < 6; ++j) {
                lw[std::size_t(j)] = 0.2 * rng.normal();
                s += lw[std::size_t(j)];
            }
            lw[6] = -s;
            st.log_omega = lw;
        }

        double got = log_posterior(st, series, basis, priors);
        double want = oracle_lp(st, series, basis, priors);
        CHECK(std::abs(got - want) < 1e-9);
    }
}

TEST_CASE("linear coefficients maximise the random-walk term") {
    std::vector<double> lin(12);
    for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = 1.3 + 0.7 * double(i);
    double tau = 0.17;
    double maximal = double(lin.size() - 2) * oracle_lnorm(0.0, 0.0, tau);
    CHECK(rw2_log_prior(lin, tau) == doctest::Approx(maximal).epsilon(1e-12));

    // any perturbation strictly decreases it
    std::vector<double> bent = lin;
    bent[5] += 0.3;
    CHECK(rw2_log_prior(bent, tau) < maximal);
}

TEST_CASE("random-walk term ignores a constant shift, the data term does not") {
    Date start = Date::parse("2025-05-05").value();
    std::vector<long long> counts(25, 12);
    CountSeries series = make_series(start, counts);
    SplineBasis basis = SplineBasis::build(start, series.origin_date());
    RngStream rng(99);
    TrendState st;
    st.coef.resize(std::size_t(basis.n_basis()));
    for (auto& b : st.coef) b = 2.0 + 0.3 * rng.normal();
    st.tau = 0.2;
    st.k = 15.0;

    std::vector<double> shifted = st.coef;
    for (auto& b : shifted) b += 0.8;
    CHECK(rw2_log_prior(st.coef, st.tau) == doctest::Approx(rw2_log_prior(shifted, st.tau)).epsilon(1e-14));

    TrendPriors priors;
    TrendState st2 = st;
    st2.coef = shifted;
    CHECK(log_posterior(st, series, basis, priors) != log_posterior(st2, series, basis, priors));
}

TEST_CASE("data term approaches the Poisson limit for large dispersion") {
    Date start = Date::parse("2025-05-05").value();
    std::vector<long long> counts(11, 3);
    CountSeries series = make_series(start, counts);
    SplineBasis basis = SplineBasis::build(start, series.origin_date());

    TrendState st;
    st.coef.assign(std::size_t(basis.n_basis()), std::log(3.0)); // s(t) = ln 3 by unity
    st.tau = 0.1;
    st.k = 1e8;
    TrendPriors priors;
    priors.k_upper = 1e12;

    double data_term = log_posterior(st, series, basis, priors) - rw2_log_prior(st.coef, st.tau);
    double poisson = 3.0 * std::log(3.0) - 3.0 - std::lgamma(4.0);
    CHECK(std::abs(data_term - double(counts.size()) * poisson) < 1e-5);
}

TEST_CASE("non-positive tau or k gives an impossible state") {
    Date start = Date::parse("2025-05-05").value();
    CountSeries series = make_series(start, std::vector<long long>(15, 5));
    SplineBasis basis = SplineBasis::build(start, series.origin_date());
    TrendState st;
    st.coef.assign(std::size_t(basis.n_basis()), 1.0);
    st.tau = -0.1;
    st.k = 10.0;
    TrendPriors priors;
    CHECK(log_posterior(st, series, basis, priors) == -std::numeric_limits<double>::infinity());
    st.tau = 0.1;
    st.k = 0.0;
    CHECK(log_posterior(st, series, basis, priors) == -std::numeric_limits<double>::infinity());

    st.k = 10.0;
    st.coef.pop_back();
    CHECK_THROWS_AS((void)log_posterior(st, series, basis, priors), ParameterError);
    st.coef.push_back(1.0);
    st.log_omega = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}; // does not sum to zero
    CHECK_THROWS_AS((void)log_posterior(st, series, basis, priors), ParameterError);
}

TEST_CASE("analytic gradient matches central finite differences") {
    Date start = Date::parse("2025-04-07").value();
    RngStream rng(5150);
    std::vector<long long> counts(30);
    for (auto& c : counts) c = rng.poisson(15.0);
    CountSeries series = make_series(start, counts);
    SplineBasis basis = SplineBasis::build(start, series.origin_date());

    for (bool ncp : {false, true}) {
        for (bool dow : {false, true}) {
            TrendPriors priors;
            priors.tau = NormalPrior{0.2, 0.1};
            int dim = basis.n_basis() + 2 + (dow ? 6 : 0);
            std::vector<double> x(std::size_t(dim), 0.0);
            if (ncp) {
                x[0] = 2.5 + 0.3 * rng.normal();
                x[1] = x[0] + 0.1 * rng.normal();
                for (int i = 2; i < basis.n_basis(); ++i) x[std::size_t(i)] = rng.normal();
            } else {
                for (int i = 0; i < basis.n_basis(); ++i)
                    x[std::size_t(i)] = 2.5 + 0.3 * rng.normal();
            }
            x[std::size_t(basis.n_basis())] = std::log(0.15 / (priors.tau_upper - 0.15));
            x[std::size_t(basis.n_basis()) + 1] = std::log(12.0 / (priors.k_upper - 12.0));
            for (int j = 0; j < (dow ? 6 : 0); ++j)
                x[std::size_t(basis.n_basis() + 2 + j)] = 0.1 * rng.normal();

            std::vector<double> grad;
            double lp = log_posterior_unconstrained(x, series, basis, priors, dow, &grad, ncp);
            CHECK(std::isfinite(lp));
            REQUIRE(int(grad.size()) == dim);
            double h = 1e-6;
            for (int i = 0; i < dim; ++i) {
                std::vector<double> xp = x, xm = x;
                xp[std::size_t(i)] += h;
                xm[std::size_t(i)] -= h;
                double fd =
                    (log_posterior_unconstrained(xp, series, basis, priors, dow, nullptr, ncp) -
                     log_posterior_unconstrained(xm, series, basis, priors, dow, nullptr, ncp)) /
                    (2.0 * h);
                CHECK(std::abs(fd - grad[std::size_t(i)]) <
                      1e-4 * std::max(1.0, std::abs(grad[std::size_t(i)])));
            }
        }
    }
}

TEST_CASE("unconstrained density is the natural one plus the log jacobian") {
    Date start = Date::parse("2025-04-07").value();
    RngStream rng(61);
    std::vector<long long> counts(24);
    for (auto& c : counts) c = rng.poisson(9.0);
    CountSeries series = make_series(start, counts);
    SplineBasis basis = SplineBasis::build(start, series.origin_date());
    TrendPriors priors;

    TrendState st;
    st.coef.resize(std::size_t(basis.n_basis()));
    for (auto& b : st.coef) b = 2.0 + 0.2 * rng.normal();
    st.tau = 0.23;
    st.k = 17.0;

    std::vector<double> x(st.coef);
    x.push_back(std::log(st.tau / (priors.tau_upper - st.tau)));
    x.push_back(std::log(st.k / (priors.k_upper - st.k)));
    double nat = log_posterior(st, series, basis, priors);
    double unc = log_posterior_unconstrained(x, series, basis, priors, false);
    // logit change of variable: ln |d theta/d xi| = ln(theta (1 - theta/upper))
    double jac = std::log(st.tau * (1.0 - st.tau / priors.tau_upper)) +
                 std::log(st.k * (1.0 - st.k / priors.k_upper));
    CHECK(unc == doctest::Approx(nat + jac).epsilon(1e-12));
}

TEST_CASE("growth rate is zero for equal coefficients and constant for linear ones") {
    auto flat = constant_slope_samples(8, 0.0, 40);
    // equal coefficients within each draw: rebuild with zero slope but shared offset
    auto rates = growth_rate(flat);
    for (const auto& day : rates)
        for (double r : day) CHECK(std::abs(r) < 1e-10);

    auto rising = constant_slope_samples(8, 0.02, 40);
    auto rr = growth_rate(rising);
    const SplineBasis& basis = rising.basis();
    for (std::size_t t = 0; t < rr.size(); ++t) {
        for (std::size_t i = 0; i < rr[t].size(); ++i) {
            CHECK(rr[t][i] == doctest::Approx(0.02).epsilon(1e-9));
            // finite differences of the evaluated curve agree
            double tt = std::clamp(double(t), 0.01, basis.range_days() - 0.01);
            double h = 0.01;
            const auto& coef = rising.draw(int(i)).coef;
            double fd = (basis.value(coef, tt + h) - basis.value(coef, tt - h)) / (2.0 * h);
            CHECK(std::abs(fd - 0.02) < 1e-6);
        }
        if (t > 4) break; // a few days suffice for the finite-difference cross-check
    }
}

TEST_CASE("growth rate matches finite differences for arbitrary draws") {
    Date start = Date::parse("2025-06-02").value();
    SplineBasis basis = SplineBasis::build(start, start + 59);
    RngStream rng(303);
    std::vector<TrendState> draws;
    for (int d = 0; d < 4; ++d) {
        TrendState st;
        st.coef.resize(std::size_t(basis.n_basis()));
        for (auto& b : st.coef) b = rng.normal();
        st.tau = 0.1;
        st.k = 10.0;
        draws.push_back(std::move(st));
    }
    FitDiagnostics diag;
    PosteriorSamples samples(basis, start, 4, std::move(draws), diag);
    auto rates = growth_rate(samples);
    double h = 0.01;
    for (int t = 1; t < 59; ++t) {
        for (int i = 0; i < samples.n_draws(); ++i) {
            const auto& coef = samples.draw(i).coef;
            double fd = (basis.value(coef, double(t) + h) - basis.value(coef, double(t) - h)) /
                        (2.0 * h);
            CHECK(std::abs(rates[std::size_t(t)][std::size_t(i)] - fd) < 1e-4);
        }
    }
}

TEST_CASE("trend summary: growth probability, doubling time, quantile oracle") {
    // slope ln2/10 per day in every draw: doubling time exactly 10 days
    auto samples = constant_slope_samples(400, std::numbers::ln2 / 10.0, 30);
    TrendSummary summary = summarise_trend(samples);
    REQUIRE(summary.n_days == 30);
    for (int t = 0; t < summary.n_days; ++t) {
        CHECK(summary.p_growth[std::size_t(t)] == 1.0);
        CHECK(summary.doubling_time[std::size_t(t)] == doctest::Approx(10.0).epsilon(1e-9));
        CHECK(!summary.stable[std::size_t(t)]);
        const auto& e = summary.expected[std::size_t(t)];
        for (int q = 1; q < 5; ++q) CHECK(e[std::size_t(q - 1)] <= e[std::size_t(q)]);
    }

    // independent sort-based quantile check on day 7
    int t = 7;
    std::vector<double> vals;
    for (int i = 0; i < samples.n_draws(); ++i)
        vals.push_back(std::exp(samples.basis().value(samples.draw(i).coef, double(t))));
    std::sort(vals.begin(), vals.end());
    const double ps[5] = {0.025, 0.25, 0.5, 0.75, 0.975};
    for (int q = 0; q < 5; ++q) {
        double h = double(vals.size() - 1) * ps[q];
        std::size_t lo = std::size_t(h);
        double frac = h - double(lo);
        double want = vals[lo] + frac * (vals[std::min(lo + 1, vals.size() - 1)] - vals[lo]);
        CHECK(std::abs(summary.expected[std::size_t(t)][std::size_t(q)] - want) < 1e-12);
    }

    // halving direction carries a negative sign
    auto falling = constant_slope_samples(400, -std::numbers::ln2 / 14.0, 30);
    TrendSummary fs = summarise_trend(falling);
    CHECK(fs.doubling_time[5] == doctest::Approx(-14.0).epsilon(1e-9));
    CHECK(fs.p_growth[5] == 0.0);

    CHECK_THROWS_AS((void)summarise_trend(constant_slope_samples(396, 0.01, 30)), ParameterError);
}

TEST_CASE("informative priors are the posterior moments") {
    Date start = Date::parse("2025-06-02").value();
    SplineBasis basis = SplineBasis::build(start, start + 19);
    auto mk = [&](std::vector<double> taus, std::vector<double> ks) {
        std::vector<TrendState> draws;
        for (std::size_t i = 0; i < taus.size(); ++i) {
            TrendState st;
            st.coef.assign(std::size_t(basis.n_basis()), 1.0);
            st.tau = taus[i];
            st.k = ks[i];
            draws.push_back(std::move(st));
        }
        FitDiagnostics diag;
        return PosteriorSamples(basis, start, 1, std::move(draws), diag);
    };

    auto good = mk({0.1, 0.2, 0.3}, {10.0, 12.0, 17.0});
    TrendPriors priors = derive_informative_priors(good);
    REQUIRE(priors.tau.has_value());
    REQUIRE(priors.k.has_value());
    CHECK(priors.tau->mean == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(priors.tau->sd == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(priors.k->mean == doctest::Approx(13.0).epsilon(1e-12));
    double ksd = std::sqrt(((10.0 - 13.0) * (10.0 - 13.0) + (12.0 - 13.0) * (12.0 - 13.0) +
                            (17.0 - 13.0) * (17.0 - 13.0)) /
                           2.0);
    CHECK(priors.k->sd == doctest::Approx(ksd).epsilon(1e-12));

    auto degenerate = mk({0.1, 0.1, 0.1, 0.1}, {10.0, 11.0, 12.0, 13.0});
    CHECK_THROWS_AS((void)derive_informative_priors(degenerate), DataError);
}

TEST_CASE("posterior export round-trips through the moment reader") {
    Date start = Date::parse("2025-06-02").value();
    SplineBasis basis = SplineBasis::build(start, start + 19);
    RngStream rng(404);
    std::vector<TrendState> draws;
    for (int i = 0; i < 12; ++i) {
        TrendState st;
        st.coef.resize(std::size_t(basis.n_basis()));
        for (auto& b : st.coef) b = rng.normal();
        st.tau = 0.1 + 0.2 * rng.uniform();
        st.k = 8.0 + 10.0 * rng.uniform();
        st.log_omega = {0.1, -0.1, 0.05, -0.05, 0.02, -0.02, 0.0};
        draws.push_back(std::move(st));
    }
    FitDiagnostics diag;
    PosteriorSamples samples(basis, start, 4, std::move(draws), diag);

    auto path = std::filesystem::temp_directory_path() / "posterior_roundtrip.csv";
    write_posterior_csv(path.string(), samples);
    TrendPriors want = derive_informative_priors(samples);
    TrendPriors got = priors_from_posterior_csv(path.string());
    CHECK(got.tau->mean == doctest::Approx(want.tau->mean).epsilon(1e-12));
    CHECK(got.tau->sd == doctest::Approx(want.tau->sd).epsilon(1e-12));
    CHECK(got.k->mean == doctest::Approx(want.k->mean).epsilon(1e-12));
    CHECK(got.k->sd == doctest::Approx(want.k->sd).epsilon(1e-12));

    CsvTable table = read_csv(path.string());
    CHECK(table.header == std::vector<std::string>{"draw", "chain", "parameter", "value"});
    // 12 draws x (n_basis + tau + k + 7 dow rows)
    CHECK(table.rows.size() == 12u * (std::size_t(basis.n_basis()) + 2u + 7u));
    std::filesystem::remove(path);
}

TEST_CASE("trend summary export lists every quantity") {
    auto samples = constant_slope_samples(400, 0.01, 30);
    TrendSummary summary = summarise_trend(samples);
    auto path = std::filesystem::temp_directory_path() / "trend_export.csv";
    write_trend_csv(path.string(), summary);
    CsvTable table = read_csv(path.string());
    CHECK(table.header == std::vector<std::string>{"date", "quantity", "quantile", "value"});
    // per day: 5 expected + 5 growth + 3 scalar rows
    CHECK(table.rows.size() == 30u * 13u);
    bool saw_p_growth = false;
    for (const auto& row : table.rows)
        if (row[1] == "p_growth") {
            saw_p_growth = true;
            double v = parse_double(row[3]);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    CHECK(saw_p_growth);
    std::filesystem::remove(path);
}
