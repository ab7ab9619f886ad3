#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "respicast/date.hpp"
#include "respicast/delay.hpp"
#include "respicast/gp.hpp"
#include "respicast/rng.hpp"
#include "respicast/series.hpp"

namespace respicast {

inline constexpr std::array<double, 7> kForecastQuantileLevels = {0.025, 0.05, 0.25, 0.5,
                                                                  0.75,  0.95, 0.975};

// Particle-filter forecaster settings. gen_pmf and admit_pmf are always
// required; report_pmf only when a case series is fitted (then the
// case-hospitalisation ratio walk is active too).
struct ForecastConfig {
    std::optional<DiscretePMF> gen_pmf;
    std::optional<DiscretePMF> report_pmf;
    std::optional<DiscretePMF> admit_pmf;
    GPKernel kernel;
    double p_c = 1.0;    // reported fraction of infections; non-identifiable, fixed
    double k_c = 25.0;   // case dispersion, infinity selects Poisson
    double k_h = 25.0;   // admission dispersion
    double sigma_p = 0.01; // daily sd of the log case-hospitalisation ratio walk
    double p_cv = 0.025;   // coefficient of variation of the initial ratio draw
    int n_particles = 100000;
    int lag = 42;          // resampling rewrites only this many trailing days
    int horizon = 28;
    int gp_window = 120;   // conditioning window for the reproduction number process
    bool gp_init_includes_signal = false;
    bool use_dow = true;   // weekday reporting effects in likelihood and samples
    int threads = 0;       // 0 picks the hardware count
    std::uint64_t seed = 1;

    void validate(bool with_cases, bool with_admissions) const;
};

struct RtDaySummary {
    Date date;
    double mean = 0.0;
    std::array<double, 7> q{}; // kForecastQuantileLevels order
};

// N simulated trajectories aligned to a daily grid from sim_start. Fitted
// days run to origin (span of them); the trailing config.horizon days are
// reserved for forward simulation. Trajectories are stored particle-major
// with stride alloc_span.
struct ParticleEnsemble {
    ParticleEnsemble(ForecastConfig cfg, Date sim_start, Date origin, bool with_chr);

    ForecastConfig config;
    GpConditioner gp;
    Date sim_start;
    Date origin;
    int t_init = 0; // seeded prefix length; propagation starts here
    int span = 0;   // fitted days, sim_start..origin inclusive
    int alloc_span = 0;
    bool has_cases = false; // which observable streams this fit carries
    bool has_adm = false;
    bool has_chr = false;   // ratio walk, active only with both streams
    std::array<double, 7> omega_c{1, 1, 1, 1, 1, 1, 1}; // Monday first
    std::array<double, 7> omega_h{1, 1, 1, 1, 1, 1, 1};

    // observations on the fitted grid, -1 where absent
    std::vector<long long> obs_cases;
    std::vector<long long> obs_adm;

    std::vector<double> ln_r;
    std::vector<double> infections; // integer-valued, double for convolution math
    std::vector<double> ln_p;       // empty without the ratio walk

    std::vector<double> ess; // per fitted day, NaN where no weighting happened
    int t_cur = 0;           // last simulated day index

    // Filtering posteriors of the reproduction number, one per day from
    // t_init - 1, each recorded on its own day before later resampling can
    // collapse the ensemble's history of it.
    std::vector<RtDaySummary> rt_marginals;

    int n() const { return config.n_particles; }
    Date date_of(int t) const { return sim_start + t; }
    std::span<const double> ln_r_of(int p) const;
    std::span<const double> infections_of(int p) const;
    std::span<const double> ln_p_of(int p) const;
};

struct ForecastResult {
    Date origin;
    int horizon = 0;
    std::vector<Date> dates; // origin + 1 .. origin + horizon
    // [day][particle]; a stream without data stays empty
    std::vector<std::vector<long long>> case_samples;
    std::vector<std::vector<long long>> adm_samples;
    std::vector<std::array<double, 7>> case_quantiles;
    std::vector<std::array<double, 7>> adm_quantiles;
    RtDaySummary rt_origin;
};

// Seeds the ensemble: infections over the prefix follow the 7-day centred
// moving average of the anchoring series (cases when present, otherwise
// admissions) shifted by the rounded mean delay; the reproduction number
// starts from the stationary draw and the case-hospitalisation ratio from a
// Gamma around the first-21-day admission/case ratio.
ParticleEnsemble initialize(const CountSeries* cases, const CountSeries* admissions,
                            const ForecastConfig& config, Date origin_date);

// Filtering pass to the origin: per day propagate, weight against the
// observations, systematic-resample the trailing config.lag days. Resumes
// from the day after t_cur, so a second call is a no-op.
void run_filter(ParticleEnsemble& ens);

// Forward simulation without resampling, drawing observable counts per
// particle per day. horizon 0 gives an empty result.
ForecastResult forecast(ParticleEnsemble& ens, int horizon);

// The recorded per-day filtering posteriors of the reproduction number.
// Each day's interval reflects the data available up to that day; final
// trajectories are not re-summarised because within-lag resampling coalesces
// the ensemble's distant past down to a handful of ancestor paths.
std::vector<RtDaySummary> rt_day_summaries(const ParticleEnsemble& ens);

// Building blocks, shared with the scenario simulator.

// I_t ~ Poisson(r * sum_s g_s I_{t-s}); history runs to day t-1, missing
// lags count as zero.
long long renewal_step(std::span<const double> infections_to_yesterday, double r,
                       const DiscretePMF& gen_pmf, RngStream& rng);

// sum_s pmf_s * I_{t-s}; history runs to day t itself.
double convolve_observed(std::span<const double> infections_to_today, const DiscretePMF& pmf);

double chr_step(double ln_p, double sigma_p, RngStream& rng);

// Joint log likelihood of the present observations given the convolved
// means: cases against p_c * omega_c * z with dispersion k_c, admissions
// against p_c * omega_h * p * h with dispersion k_h.
double observation_loglik(double z, double h, double p, double omega_c, double omega_h,
                          std::optional<long long> obs_c, std::optional<long long> obs_a,
                          const ForecastConfig& config);

// Systematic resampling: ancestor indices for weights (any non-negative
// scale) at grid offset u in [0, 1). Exactly uniform weights map every
// particle to itself.
std::vector<std::uint32_t> systematic_ancestors(std::span<const double> weights, double u);

} // namespace respicast
