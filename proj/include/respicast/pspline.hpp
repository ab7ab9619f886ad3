#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "respicast/series.hpp"
#include "respicast/spline_basis.hpp"

namespace respicast {

struct NormalPrior {
    double mean = 0.0;
    double sd = 1.0;
};

// Priors on the random-walk scale tau and the dispersion k. By default both
// are flat on a bounded interval; an informative normal prior (derived from a
// previously fitted posterior) may replace either.
struct TrendPriors {
    std::optional<NormalPrior> tau;
    std::optional<NormalPrior> k;
    double tau_upper = 1e3;
    double k_upper = 1e4;

    void validate() const;
};

struct TrendState {
    std::vector<double> coef; // spline coefficients b
    double tau = 0.1;
    double k = 10.0;
    // log day-of-week effects, Monday first, constrained to sum to zero;
    // absent when the model runs without a weekday component
    std::optional<std::array<double, 7>> log_omega;
};

// Joint log posterior density (natural parameter space, up to a constant
// that does not depend on the parameters).
double log_posterior(const TrendState& state, const CountSeries& series,
                     const SplineBasis& basis, const TrendPriors& priors);

// The random-walk prior term of log_posterior in isolation:
// sum over i >= 2 of logNormal(b_i - 2 b_{i-1} + b_{i-2} | 0, tau^2).
double rw2_log_prior(std::span<const double> coef, double tau);

// Density in unconstrained space: parameters are
//   [b_0..b_{N-1}, logit(tau/tau_upper), logit(k/k_upper)]
// plus, with day-of-week effects, six free log effects (the seventh is their
// negated sum). With non_centered set, positions 2..N-1 hold the standardised
// random-walk innovations u_i instead, b_i = 2b_{i-1} - b_{i-2} + tau*u_i.
// The logit keeps both prior bounds smooth instead of leaving a hard wall at
// the upper end. Includes the change-of-variable terms. The analytic gradient
// lands in *grad when given; usable by any gradient-based sampler.
double log_posterior_unconstrained(std::span<const double> x, const CountSeries& series,
                                   const SplineBasis& basis, const TrendPriors& priors,
                                   bool day_of_week, std::vector<double>* grad = nullptr,
                                   bool non_centered = false);

struct SamplerSettings {
    int chains = 4;
    int warmup = 500;
    int draws_per_chain = 2000;
    std::uint64_t seed = 1;
    int max_leapfrog = 96;
    double target_accept = 0.8;
    int threads = 4;
    int max_attempts = 3; // re-runs with a doubled budget before giving up
    double rhat_max = 1.05;
    double ess_min = 200.0;
};

struct FitDiagnostics {
    double max_rhat = 0.0;
    double min_ess = 0.0;
    std::string max_rhat_param;
    std::string min_ess_param;
    double accept_rate = 0.0;
    bool converged = false;
    int attempts = 0;
    std::string summary() const;
};

class PosteriorSamples {
  public:
    PosteriorSamples(const SplineBasis& basis, Date start, int n_chains,
                     std::vector<TrendState> draws, FitDiagnostics diag);

    const SplineBasis& basis() const { return basis_; }
    Date start_date() const { return start_; }
    int n_chains() const { return n_chains_; }
    int n_draws() const { return int(draws_.size()); }
    int draws_per_chain() const { return int(draws_.size()) / n_chains_; }
    bool has_dow() const;
    const TrendState& draw(int i) const { return draws_[std::size_t(i)]; }
    int chain_of(int i) const { return i / draws_per_chain(); }
    const FitDiagnostics& diagnostics() const { return diag_; }

    std::vector<double> tau_draws() const;
    std::vector<double> k_draws() const;

  private:
    SplineBasis basis_;
    Date start_;
    int n_chains_;
    std::vector<TrendState> draws_; // chain-major
    FitDiagnostics diag_;
};

// Fits the penalised-spline trend model by adaptive HMC. The basis range
// must coincide with the series range. Throws ConvergenceError when the
// chains fail the convergence contract after the configured attempts.
PosteriorSamples fit_pspline(const CountSeries& series, const SplineBasis& basis,
                             const TrendPriors& priors, const SamplerSettings& settings,
                             bool day_of_week);

// Daily growth rate r(t) = s'(t) per posterior draw; result is [day][draw].
std::vector<std::vector<double>> growth_rate(const PosteriorSamples& samples);

inline constexpr std::array<double, 5> kSummaryQuantiles = {0.025, 0.25, 0.5, 0.75, 0.975};

struct TrendSummary {
    Date start;
    int n_days = 0;
    // per-day quantiles at kSummaryQuantiles
    std::vector<std::array<double, 5>> expected;     // exp(s), weekday effect removed
    std::vector<std::array<double, 5>> expected_dow; // exp(s)*omega; empty without dow
    std::vector<std::array<double, 5>> growth;
    std::vector<double> p_growth;      // P(r > 0)
    std::vector<double> doubling_time; // ln2/median r, signed by direction
    std::vector<char> stable;          // 1 when the 95% interval of r spans zero
};

// When the fit carried no weekday component, an externally estimated effect
// can be supplied to fill expected_dow.
TrendSummary summarise_trend(const PosteriorSamples& samples,
                             const std::optional<DayOfWeekEffects>& external_dow = std::nullopt);

// Normal approximations to the tau and k marginals, for transfer to a
// related series. Throws DataError when a marginal is degenerate.
TrendPriors derive_informative_priors(const PosteriorSamples& samples);

void write_posterior_csv(const std::string& path, const PosteriorSamples& samples);
TrendPriors priors_from_posterior_csv(const std::string& path);

void write_trend_csv(const std::string& path, const TrendSummary& summary);

} // namespace respicast
