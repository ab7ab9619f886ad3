#include "respicast/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "respicast/errors.hpp"
#include "respicast/filter.hpp"
#include "respicast/rng.hpp"

namespace respicast {

namespace {

constexpr std::uint64_t kScenarioTag = 0x9a3u;
constexpr int kRampDays = 21;
constexpr double kMeanCap = 1e12;

} // namespace

void ScenarioSpec::validate() const {
    if (length < 1) throw ParameterError("scenario: length must be >= 1");
    if (int(rt.size()) != length)
        throw ParameterError("scenario: rt trajectory must cover every day");
    for (double r : rt)
        if (!(r > 0.0) || !std::isfinite(r))
            throw ParameterError("scenario: reproduction numbers must be positive and finite");
    if (!(seed_infections >= 0.0)) throw ParameterError("scenario: seed_infections must be >= 0");
    if (!gen_pmf) throw ParameterError("scenario: generation interval pmf is required");
    if (gen_pmf->min_lag() != 1)
        throw ParameterError("scenario: generation interval must start at lag 1");
    if (!report_pmf && !admit_pmf)
        throw ParameterError("scenario: at least one observation delay pmf is required");
    if (!(p_c > 0.0) || p_c > 1.0) throw ParameterError("scenario: p_c must be in (0, 1]");
    if (!(k_c > 0.0) || !(k_h > 0.0))
        throw ParameterError("scenario: dispersions must be > 0 (infinity for Poisson)");
    if (!chr.empty() && chr.size() != 1 && int(chr.size()) != length)
        throw ParameterError("scenario: chr must be empty, one value, or one per day");
    for (double p : chr)
        if (!(p > 0.0)) throw ParameterError("scenario: chr values must be > 0");
}

ScenarioTruth simulate(const ScenarioSpec& spec) {
    spec.validate();
    const DiscretePMF& gen = *spec.gen_pmf;

    ScenarioTruth out;
    out.rt = spec.rt;
    out.infections.resize(std::size_t(spec.length));
    if (spec.report_pmf) out.z.resize(std::size_t(spec.length));
    if (spec.admit_pmf) out.h.resize(std::size_t(spec.length));

    std::vector<long long> case_counts(spec.report_pmf ? std::size_t(spec.length) : 0);
    std::vector<long long> adm_counts(spec.admit_pmf ? std::size_t(spec.length) : 0);

    std::array<double, 7> omega{1, 1, 1, 1, 1, 1, 1};
    if (spec.dow) omega = spec.dow->omega;

    std::vector<double> traj(std::size_t(kRampDays + spec.length), 0.0);
    double ramp_level = std::round(spec.seed_infections);
    for (int t = 0; t < kRampDays; ++t) traj[std::size_t(t)] = ramp_level;

    for (int t = 0; t < spec.length; ++t) {
        RngStream rng(spec.seed, kScenarioTag, std::uint64_t(t));
        std::size_t idx = std::size_t(kRampDays + t);
        traj[idx] = double(renewal_step({traj.data(), idx}, spec.rt[std::size_t(t)], gen, rng));
        out.infections[std::size_t(t)] = traj[idx];

        double om = omega[std::size_t((spec.start + t).weekday())];
        double chr_t = spec.chr.empty() ? 1.0
                       : spec.chr.size() == 1 ? spec.chr[0]
                                              : spec.chr[std::size_t(t)];

        if (spec.report_pmf) {
            double z = convolve_observed({traj.data(), idx + 1}, *spec.report_pmf);
            out.z[std::size_t(t)] = z;
            case_counts[std::size_t(t)] =
                rng.negbin(std::min(spec.p_c * om * z, kMeanCap), spec.k_c);
        }
        if (spec.admit_pmf) {
            double h = convolve_observed({traj.data(), idx + 1}, *spec.admit_pmf);
            out.h[std::size_t(t)] = h;
            adm_counts[std::size_t(t)] =
                rng.negbin(std::min(spec.p_c * om * chr_t * h, kMeanCap), spec.k_h);
        }
    }

    // extinct once no remaining generation-interval mass can reach the future
    int tail = std::min(spec.length, gen.max_lag());
    out.extinct = true;
    for (int t = spec.length - tail; t < spec.length; ++t)
        if (out.infections[std::size_t(t)] > 0.0) out.extinct = false;

    if (spec.report_pmf)
        out.cases = CountSeries(spec.pathogen, DataStream::Cases, spec.start,
                                std::move(case_counts));
    if (spec.admit_pmf)
        out.admissions = CountSeries(spec.pathogen, DataStream::Admissions, spec.start,
                                     std::move(adm_counts));
    return out;
}

std::vector<double> gp_rt_trajectory(int length, const GPKernel& kernel, int window,
                                     std::uint64_t seed, bool init_includes_signal) {
    if (length < 1) throw ParameterError("gp_rt_trajectory: length must be >= 1");
    GpConditioner cond(kernel, window, init_includes_signal);
    std::vector<double> ln_r;
    ln_r.reserve(std::size_t(length));
    std::vector<double> out(std::size_t(length), 0.0);
    for (int t = 0; t < length; ++t) {
        RngStream rng(seed, kScenarioTag + 1, std::uint64_t(t));
        double draw = std::clamp(gp_step(ln_r, cond, rng), -5.0, 5.0);
        ln_r.push_back(draw);
        out[std::size_t(t)] = std::exp(draw);
    }
    return out;
}

} // namespace respicast
