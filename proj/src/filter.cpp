#include "respicast/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "respicast/errors.hpp"
#include "respicast/log.hpp"
#include "respicast/parallel.hpp"
#include "respicast/special.hpp"
#include "respicast/stats.hpp"

namespace respicast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// substream roles under one run seed
constexpr std::uint64_t kParticleTag = 0x9a1u;
constexpr std::uint64_t kResampleTag = 0x9a2u;

// Count means saturate here so a runaway trajectory cannot overflow the
// sampled integers.
constexpr double kMeanCap = 1e12;

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Per-day constants of the count log-pmf hoisted out of the particle loop;
// only the mean varies across particles.
struct ObsTerm {
    long long c = 0;
    double k = 0.0;
    double base = 0.0;
    bool poisson = false;

    double operator()(double mean) const {
        if (!(mean > 0.0)) return c == 0 ? 0.0 : kNegInf;
        if (poisson) return double(c) * std::log(mean) - mean + base;
        return base + double(c) * std::log(mean) - (double(c) + k) * std::log(k + mean);
    }
};

ObsTerm make_obs_term(long long c, double k) {
    ObsTerm t;
    t.c = c;
    t.k = k;
    t.poisson = std::isinf(k);
    t.base = t.poisson ? -std::lgamma(double(c) + 1.0)
                       : std::lgamma(double(c) + k) - std::lgamma(k) -
                             std::lgamma(double(c) + 1.0) + k * std::log(k);
    return t;
}

RtDaySummary summarize_r(const ParticleEnsemble& ens, int t) {
    std::size_t stride = std::size_t(ens.alloc_span);
    std::vector<double> r(std::size_t(ens.n()), 0.0);
    for (std::size_t p = 0; p < r.size(); ++p)
        r[p] = std::exp(ens.ln_r[p * stride + std::size_t(t)]);
    RtDaySummary out;
    out.date = ens.date_of(t);
    out.mean = mean_of(r);
    std::sort(r.begin(), r.end());
    for (std::size_t i = 0; i < kForecastQuantileLevels.size(); ++i)
        out.q[i] = quantile_sorted(r, kForecastQuantileLevels[i]);
    return out;
}

// 7-day centred moving average; the window shrinks at the edges.
std::vector<double> centred_ma7(const std::vector<long long>& counts) {
    int n = int(counts.size());
    std::vector<double> out(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - 3), hi = std::min(n - 1, i + 3);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += double(counts[std::size_t(j)]);
        out[std::size_t(i)] = acc / double(hi - lo + 1);
    }
    return out;
}

} // namespace

void ForecastConfig::validate(bool with_cases, bool with_admissions) const {
    if (!gen_pmf) throw ParameterError("forecast config: generation interval pmf is required");
    if (gen_pmf->min_lag() != 1)
        throw ParameterError("forecast config: generation interval must start at lag 1");
    if (with_cases && !report_pmf)
        throw ParameterError("forecast config: report delay pmf is required to fit cases");
    if (with_admissions && !admit_pmf)
        throw ParameterError("forecast config: admission delay pmf is required to fit admissions");
    kernel.validate();
    if (!(p_c > 0.0) || p_c > 1.0)
        throw ParameterError("forecast config: p_c must be in (0, 1]");
    if (!(k_c > 0.0) || !(k_h > 0.0))
        throw ParameterError("forecast config: dispersions must be > 0 (infinity for Poisson)");
    if (!(sigma_p >= 0.0)) throw ParameterError("forecast config: sigma_p must be >= 0");
    if (!(p_cv > 0.0)) throw ParameterError("forecast config: p_cv must be > 0");
    if (n_particles < 1000) throw ParameterError("forecast config: needs at least 1000 particles");
    if (lag < 1) throw ParameterError("forecast config: lag must be >= 1");
    if (horizon < 1) throw ParameterError("forecast config: horizon must be >= 1");
    if (gp_window < 1) throw ParameterError("forecast config: gp_window must be >= 1");
}

ParticleEnsemble::ParticleEnsemble(ForecastConfig cfg, Date start, Date origin_day, bool with_chr)
    : config(std::move(cfg)),
      gp(config.kernel, config.gp_window, config.gp_init_includes_signal),
      sim_start(start),
      origin(origin_day),
      has_chr(with_chr) {
    span = int(origin - sim_start) + 1;
    alloc_span = span + config.horizon;
    t_init = config.gen_pmf->max_lag();
    if (config.report_pmf) t_init = std::max(t_init, config.report_pmf->max_lag());
    if (config.admit_pmf) t_init = std::max(t_init, config.admit_pmf->max_lag());

    std::size_t cells = std::size_t(config.n_particles) * std::size_t(alloc_span);
    ln_r.assign(cells, 0.0);
    infections.assign(cells, 0.0);
    if (has_chr) ln_p.assign(cells, 0.0);
    obs_cases.assign(std::size_t(span), -1);
    obs_adm.assign(std::size_t(span), -1);
    ess.assign(std::size_t(span), kNaN);
}

std::span<const double> ParticleEnsemble::ln_r_of(int p) const {
    return {ln_r.data() + std::size_t(p) * std::size_t(alloc_span), std::size_t(alloc_span)};
}

std::span<const double> ParticleEnsemble::infections_of(int p) const {
    return {infections.data() + std::size_t(p) * std::size_t(alloc_span), std::size_t(alloc_span)};
}

std::span<const double> ParticleEnsemble::ln_p_of(int p) const {
    if (!has_chr) return {};
    return {ln_p.data() + std::size_t(p) * std::size_t(alloc_span), std::size_t(alloc_span)};
}

long long renewal_step(std::span<const double> infections_to_yesterday, double r,
                       const DiscretePMF& gen_pmf, RngStream& rng) {
    int n = int(infections_to_yesterday.size());
    const auto& pr = gen_pmf.probs();
    double acc = 0.0;
    for (int j = 0; j < int(pr.size()); ++j) {
        int idx = n - (gen_pmf.min_lag() + j);
        if (idx < 0) break;
        if (idx >= n) continue;
        acc += pr[std::size_t(j)] * infections_to_yesterday[std::size_t(idx)];
    }
    return rng.poisson(std::min(r * acc, kMeanCap));
}

double convolve_observed(std::span<const double> infections_to_today, const DiscretePMF& pmf) {
    int n = int(infections_to_today.size());
    const auto& pr = pmf.probs();
    double acc = 0.0;
    for (int j = 0; j < int(pr.size()); ++j) {
        int idx = n - 1 - (pmf.min_lag() + j);
        if (idx < 0) break;
        if (idx >= n) continue;
        acc += pr[std::size_t(j)] * infections_to_today[std::size_t(idx)];
    }
    return acc;
}

double chr_step(double ln_p, double sigma_p, RngStream& rng) {
    return rng.normal(ln_p, sigma_p);
}

double observation_loglik(double z, double h, double p, double omega_c, double omega_h,
                          std::optional<long long> obs_c, std::optional<long long> obs_a,
                          const ForecastConfig& config) {
    double ll = 0.0;
    if (obs_c) ll += log_negbin_pmf(*obs_c, config.p_c * omega_c * z, config.k_c);
    if (obs_a) ll += log_negbin_pmf(*obs_a, config.p_c * omega_h * p * h, config.k_h);
    return ll;
}

std::vector<std::uint32_t> systematic_ancestors(std::span<const double> weights, double u) {
    std::size_t n = weights.size();
    if (n == 0) throw ParameterError("systematic_ancestors: no weights");
    if (!(u >= 0.0) || u >= 1.0) throw ParameterError("systematic_ancestors: u must lie in [0, 1)");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ParameterError("systematic_ancestors: negative weight");
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total))
        throw ParameterError("systematic_ancestors: weights must have a positive finite sum");

    std::vector<std::uint32_t> anc(n);
    double step = total / double(n);
    double pos = u * step;
    std::size_t k = 0;
    double cum = weights[0];
    for (std::size_t j = 0; j < n; ++j) {
        while (cum <= pos && k + 1 < n) cum += weights[++k];
        anc[j] = std::uint32_t(k);
        pos += step;
    }
    return anc;
}

ParticleEnsemble initialize(const CountSeries* cases, const CountSeries* admissions,
                            const ForecastConfig& config, Date origin_date) {
    if (!cases && !admissions)
        throw ParameterError("forecast: at least one data series is required");
    config.validate(cases != nullptr, admissions != nullptr);

    const CountSeries* anchor = cases ? cases : admissions;
    const DiscretePMF& anchor_delay = cases ? *config.report_pmf : *config.admit_pmf;
    if (origin_date < anchor->start_date())
        throw DataError("forecast: origin date precedes the data");

    Date sim_start = std::max(origin_date - 250, anchor->start_date());
    ParticleEnsemble ens(config, sim_start, origin_date, cases && admissions);
    ens.has_cases = cases != nullptr;
    ens.has_adm = admissions != nullptr;

    if (config.use_dow) {
        if (cases) ens.omega_c = estimate_dow_effects(*cases).omega;
        if (admissions) ens.omega_h = estimate_dow_effects(*admissions).omega;
    }

    auto load = [&](const CountSeries* s, std::vector<long long>& into) {
        if (!s) return;
        for (int t = 0; t < ens.span; ++t) {
            Date d = ens.date_of(t);
            if (s->covers(d)) into[std::size_t(t)] = s->count_on(d);
        }
    };
    load(cases, ens.obs_cases);
    load(admissions, ens.obs_adm);

    int anchor_days = int(std::min(anchor->origin_date(), origin_date) - sim_start) + 1;
    if (anchor_days < ens.t_init + 7)
        throw DataError("forecast: anchoring series covers " + std::to_string(anchor_days) +
                        " days from the simulation start; needs at least " +
                        std::to_string(ens.t_init + 7));

    // infection means over the seeded prefix: smoothed anchor counts shifted
    // back by the mean delay
    std::vector<double> smoothed = centred_ma7(anchor->counts());
    int rbar = anchor_delay.mean_lag_rounded();
    std::vector<double> seed_mean(std::size_t(ens.t_init), 0.0);
    for (int t = 0; t < ens.t_init; ++t) {
        std::int64_t idx = (sim_start - anchor->start_date()) + t + rbar;
        if (idx < 0 || idx >= std::int64_t(smoothed.size()))
            throw DataError("forecast: anchoring series does not cover the seeding window");
        seed_mean[std::size_t(t)] = smoothed[std::size_t(idx)] / config.p_c;
    }

    double p_bar = 1.0;
    if (ens.has_chr) {
        long long case_total = 0, adm_total = 0;
        for (int t = 0; t < 21; ++t) {
            Date d = sim_start + t;
            if (cases->covers(d)) case_total += cases->count_on(d);
            if (admissions->covers(d)) adm_total += admissions->count_on(d);
        }
        if (case_total > 0 && adm_total > 0) {
            p_bar = double(adm_total) / double(case_total);
        } else {
            p_bar = 0.1;
            log_warn("forecast: first-21-day totals cannot anchor the case-hospitalisation "
                     "ratio; starting it at 0.1");
        }
    }

    std::size_t stride = std::size_t(ens.alloc_span);
    int t0 = ens.t_init - 1; // the reproduction number and the ratio start here
    parallel_for(std::size_t(ens.n()), resolve_threads(config.threads),
                 [&](std::size_t lo, std::size_t hi) {
                     for (std::size_t p = lo; p < hi; ++p) {
                         double* lr = ens.ln_r.data() + p * stride;
                         double* in = ens.infections.data() + p * stride;
                         double* lp = ens.has_chr ? ens.ln_p.data() + p * stride : nullptr;
                         for (int t = 0; t < ens.t_init; ++t) {
                             RngStream rng(config.seed, kParticleTag, p, std::uint64_t(t));
                             in[t] = double(rng.poisson(seed_mean[std::size_t(t)]));
                             if (t == t0) {
                                 lr[t] = rng.normal(0.0, ens.gp.conditional_sd(0));
                                 if (lp) lp[t] = std::log(rng.gamma_mean_cv(p_bar, config.p_cv));
                             }
                         }
                         for (int t = 0; t < t0; ++t) {
                             lr[t] = lr[t0];
                             if (lp) lp[t] = lp[t0];
                         }
                     }
                 });
    ens.t_cur = t0;
    ens.rt_marginals.push_back(summarize_r(ens, t0));
    return ens;
}

void run_filter(ParticleEnsemble& ens) {
    const ForecastConfig& cfg = ens.config;
    int nthreads = resolve_threads(cfg.threads);
    std::size_t n = std::size_t(ens.n());
    std::size_t stride = std::size_t(ens.alloc_span);
    std::size_t lag = std::size_t(cfg.lag);
    int t0 = ens.t_init - 1;

    std::vector<double> logw(n, 0.0), w(n, 0.0);
    std::vector<double> sc_r(n * lag), sc_i(n * lag), sc_p(ens.has_chr ? n * lag : 0);

    for (int t = ens.t_cur + 1; t < ens.span; ++t) {
        bool has_c = ens.has_cases && ens.obs_cases[std::size_t(t)] >= 0;
        bool has_a = ens.has_adm && ens.obs_adm[std::size_t(t)] >= 0;
        int wd = ens.date_of(t).weekday();
        double oc = ens.omega_c[std::size_t(wd)];
        double oh = ens.omega_h[std::size_t(wd)];
        ObsTerm case_term, adm_term;
        if (has_c) case_term = make_obs_term(ens.obs_cases[std::size_t(t)], cfg.k_c);
        if (has_a) adm_term = make_obs_term(ens.obs_adm[std::size_t(t)], cfg.k_h);

        parallel_for(n, nthreads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                RngStream rng(cfg.seed, kParticleTag, p, std::uint64_t(t));
                double* lr = ens.ln_r.data() + p * stride;
                double* in = ens.infections.data() + p * stride;
                double* lp = ens.has_chr ? ens.ln_p.data() + p * stride : nullptr;

                double draw = gp_step({lr + t0, std::size_t(t - t0)}, ens.gp, rng);
                lr[t] = std::clamp(draw, -5.0, 5.0);
                in[t] = double(renewal_step({in, std::size_t(t)}, std::exp(lr[t]),
                                            *cfg.gen_pmf, rng));
                if (lp) lp[t] = chr_step(lp[t - 1], cfg.sigma_p, rng);

                if (has_c || has_a) {
                    double ll = 0.0;
                    if (has_c) {
                        double z = convolve_observed({in, std::size_t(t) + 1}, *cfg.report_pmf);
                        ll += case_term(cfg.p_c * oc * z);
                    }
                    if (has_a) {
                        double h = convolve_observed({in, std::size_t(t) + 1}, *cfg.admit_pmf);
                        double pt = lp ? std::exp(lp[t]) : 1.0;
                        ll += adm_term(cfg.p_c * oh * pt * h);
                    }
                    logw[p] = ll;
                }
            }
        });
        ens.t_cur = t;
        if (!has_c && !has_a) { // uniform weights: resampling is the identity
            ens.rt_marginals.push_back(summarize_r(ens, t));
            continue;
        }

        double mx = kNegInf;
        for (double lw : logw) mx = std::max(mx, lw);
        if (mx == kNegInf)
            throw DegeneracyError("particle filter: every particle weight vanished on " +
                                      ens.date_of(t).iso(),
                                  ens.date_of(t).iso());
        double sum = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            w[p] = std::exp(logw[p] - mx);
            sum += w[p];
        }
        double sumsq = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double wn = w[p] / sum;
            sumsq += wn * wn;
        }
        ens.ess[std::size_t(t)] = 1.0 / sumsq;

        RngStream rrng(cfg.seed, kResampleTag, std::uint64_t(t));
        std::vector<std::uint32_t> anc = systematic_ancestors(w, rrng.uniform());

        // rewrite only the trailing lag window; older history is frozen
        int lo_day = std::max(0, t - cfg.lag + 1);
        std::size_t len = std::size_t(t - lo_day + 1);
        parallel_for(n, nthreads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                std::size_t a = anc[p];
                std::copy_n(ens.ln_r.data() + a * stride + lo_day, len, sc_r.data() + p * lag);
                std::copy_n(ens.infections.data() + a * stride + lo_day, len,
                            sc_i.data() + p * lag);
                if (ens.has_chr)
                    std::copy_n(ens.ln_p.data() + a * stride + lo_day, len, sc_p.data() + p * lag);
            }
        });
        parallel_for(n, nthreads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                std::copy_n(sc_r.data() + p * lag, len, ens.ln_r.data() + p * stride + lo_day);
                std::copy_n(sc_i.data() + p * lag, len,
                            ens.infections.data() + p * stride + lo_day);
                if (ens.has_chr)
                    std::copy_n(sc_p.data() + p * lag, len, ens.ln_p.data() + p * stride + lo_day);
            }
        });
        ens.rt_marginals.push_back(summarize_r(ens, t));
    }
}

namespace {

std::array<double, 7> sample_quantiles(const std::vector<long long>& samples) {
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    std::array<double, 7> q{};
    for (std::size_t i = 0; i < kForecastQuantileLevels.size(); ++i)
        q[i] = quantile_sorted(v, kForecastQuantileLevels[i]);
    return q;
}

} // namespace

ForecastResult forecast(ParticleEnsemble& ens, int horizon) {
    if (horizon < 0) throw ParameterError("forecast: horizon must be >= 0");
    if (horizon > ens.config.horizon)
        throw ParameterError("forecast: horizon exceeds the configured allocation");

    ForecastResult res;
    res.origin = ens.origin;
    res.horizon = horizon;
    if (ens.t_cur != ens.span - 1)
        throw ParameterError("forecast: the ensemble has not been fitted to the origin");
    res.rt_origin = summarize_r(ens, ens.span - 1);
    if (horizon == 0) return res;

    const ForecastConfig& cfg = ens.config;
    int nthreads = resolve_threads(cfg.threads);
    std::size_t n = std::size_t(ens.n());
    std::size_t stride = std::size_t(ens.alloc_span);
    int t0 = ens.t_init - 1;

    res.dates.resize(std::size_t(horizon));
    res.case_samples.assign(std::size_t(horizon), {});
    res.adm_samples.assign(std::size_t(horizon), {});
    for (int d = 0; d < horizon; ++d) {
        res.dates[std::size_t(d)] = ens.origin + (d + 1);
        if (ens.has_cases) res.case_samples[std::size_t(d)].assign(n, 0);
        if (ens.has_adm) res.adm_samples[std::size_t(d)].assign(n, 0);
    }

    for (int d = 0; d < horizon; ++d) {
        int t = ens.span + d;
        int wd = (ens.sim_start + t).weekday();
        double oc = ens.omega_c[std::size_t(wd)];
        double oh = ens.omega_h[std::size_t(wd)];
        long long* cs = ens.has_cases ? res.case_samples[std::size_t(d)].data() : nullptr;
        long long* as = ens.has_adm ? res.adm_samples[std::size_t(d)].data() : nullptr;

        parallel_for(n, nthreads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                RngStream rng(cfg.seed, kParticleTag, p, std::uint64_t(t));
                double* lr = ens.ln_r.data() + p * stride;
                double* in = ens.infections.data() + p * stride;
                double* lp = ens.has_chr ? ens.ln_p.data() + p * stride : nullptr;

                double draw = gp_step({lr + t0, std::size_t(t - t0)}, ens.gp, rng);
                lr[t] = std::clamp(draw, -5.0, 5.0);
                in[t] = double(renewal_step({in, std::size_t(t)}, std::exp(lr[t]),
                                            *cfg.gen_pmf, rng));
                if (lp) lp[t] = chr_step(lp[t - 1], cfg.sigma_p, rng);

                if (cs) {
                    double z = convolve_observed({in, std::size_t(t) + 1}, *cfg.report_pmf);
                    cs[p] = rng.negbin(std::min(cfg.p_c * oc * z, kMeanCap), cfg.k_c);
                }
                if (as) {
                    double h = convolve_observed({in, std::size_t(t) + 1}, *cfg.admit_pmf);
                    double pt = lp ? std::exp(lp[t]) : 1.0;
                    as[p] = rng.negbin(std::min(cfg.p_c * oh * pt * h, kMeanCap), cfg.k_h);
                }
            }
        });
    }

    res.case_quantiles.assign(std::size_t(horizon), {});
    res.adm_quantiles.assign(std::size_t(horizon), {});
    for (int d = 0; d < horizon; ++d) {
        if (ens.has_cases)
            res.case_quantiles[std::size_t(d)] = sample_quantiles(res.case_samples[std::size_t(d)]);
        if (ens.has_adm)
            res.adm_quantiles[std::size_t(d)] = sample_quantiles(res.adm_samples[std::size_t(d)]);
    }
    return res;
}

std::vector<RtDaySummary> rt_day_summaries(const ParticleEnsemble& ens) {
    return ens.rt_marginals;
}

} // namespace respicast
