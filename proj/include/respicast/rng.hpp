#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace respicast {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based random stream. A stream is keyed by up to three substream
// ids (e.g. particle index, day, role); draws from distinct keys are
// independent of scheduling, which is what makes parallel runs bit-identical.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                       std::uint64_t c = 0) {
        state_ = mix64(seed + 0x9e3779b97f4a7c15ULL);
        state_ = mix64(state_ ^ mix64(a + 0xbf58476d1ce4e5b9ULL));
        state_ = mix64(state_ ^ mix64(b + 0x94d049bb133111ebULL));
        state_ = mix64(state_ ^ mix64(c + 0xd6e8feb86659fd93ULL));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Box-Muller; two uniforms per call.
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential() { return -std::log(uniform_pos()); }

    // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            double u = uniform_pos();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform_pos();
            double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double gamma_mean_cv(double mean, double cv) {
        double shape = 1.0 / (cv * cv);
        return gamma(shape, mean / shape);
    }

    long long poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean < 10.0) {
            double limit = std::exp(-mean);
            double p = 1.0;
            long long k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > limit);
            return k - 1;
        }
        return poisson_ptrs(mean);
    }

    // Negative binomial with mean m and dispersion k: variance m + m^2/k.
    // k = infinity selects Poisson.
    long long negbin(double mean, double dispersion) {
        if (!(mean > 0.0)) return 0;
        if (std::isinf(dispersion)) return poisson(mean);
        double lam = gamma(dispersion, mean / dispersion);
        return poisson(lam);
    }

private:
    // Hormann's transformed rejection with squeeze; valid for mean >= 10.
    long long poisson_ptrs(double lam) {
        double loglam = std::log(lam);
        double b = 0.931 + 2.53 * std::sqrt(lam);
        double a = -0.059 + 0.02483 * b;
        double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::abs(u);
            double kf = std::floor((2.0 * a / us + b) * u + lam + 0.43);
            if (us >= 0.07 && v <= vr) return (long long)kf;
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * invalpha / (a / (us * us) + b)) <=
                kf * loglam - lam - std::lgamma(kf + 1.0))
                return (long long)kf;
        }
    }

    std::uint64_t state_;
};

} // namespace respicast
