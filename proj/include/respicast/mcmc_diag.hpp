#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "respicast/errors.hpp"

namespace respicast {

// Split-Rhat and effective sample size for one scalar parameter.
// `draws` is chain-major: chain c occupies [c*n, (c+1)*n).
struct ChainStats {
    double rhat;
    double ess;
};

inline ChainStats split_chain_stats(std::span<const double> draws, int n_chains) {
    if (n_chains < 1 || draws.size() % std::size_t(n_chains) != 0)
        throw ParameterError("split_chain_stats: draws not divisible into chains");
    std::size_t iters = draws.size() / std::size_t(n_chains);
    if (iters < 4) throw ParameterError("split_chain_stats: too few iterations");

    // split each chain in half
    std::size_t half = iters / 2;
    std::size_t m = std::size_t(n_chains) * 2;
    std::vector<std::span<const double>> seq;
    seq.reserve(m);
    for (int c = 0; c < n_chains; ++c) {
        const double* base = draws.data() + std::size_t(c) * iters;
        seq.push_back({base, half});
        seq.push_back({base + (iters - half), half});
    }
    std::size_t n = half;

    std::vector<double> means(m), vars(m);
    double grand = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (double x : seq[j]) s += x;
        means[j] = s / double(n);
        grand += means[j];
        double ss = 0.0;
        for (double x : seq[j]) ss += (x - means[j]) * (x - means[j]);
        vars[j] = ss / double(n - 1);
    }
    grand /= double(m);

    double w = 0.0, b = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        w += vars[j];
        b += (means[j] - grand) * (means[j] - grand);
    }
    w /= double(m);
    b *= double(n) / double(m - 1);

    ChainStats out;
    double var_plus = (double(n - 1) / double(n)) * w + b / double(n);
    if (w <= 0.0) {
        // constant chains: converged in the degenerate sense
        out.rhat = 1.0;
        out.ess = double(m * n);
        return out;
    }
    out.rhat = std::sqrt(var_plus / w);

    // combined autocorrelations (Stan-style), Geyer initial monotone sequence
    auto acov = [&](std::size_t j, std::size_t t) {
        double s = 0.0;
        for (std::size_t i = 0; i + t < n; ++i)
            s += (seq[j][i] - means[j]) * (seq[j][i + t] - means[j]);
        return s / double(n);
    };
    std::vector<double> rho;
    rho.push_back(1.0);
    double tau_sum = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t + 1 < n; t += 2) {
        double mean_acov_t = 0.0, mean_acov_t1 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            mean_acov_t += acov(j, t);
            mean_acov_t1 += acov(j, t + 1);
        }
        mean_acov_t /= double(m);
        mean_acov_t1 /= double(m);
        double rho_t = 1.0 - (w - mean_acov_t) / var_plus;
        double rho_t1 = 1.0 - (w - mean_acov_t1) / var_plus;
        double pair = rho_t + rho_t1;
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair); // enforce monotone decrease
        prev_pair = pair;
        tau_sum += pair;
        if (t > 2000) break;
    }
    double denom = 1.0 + 2.0 * tau_sum;
    out.ess = double(m * n) / std::max(denom, 1e-12);
    out.ess = std::min(out.ess, double(m * n) * std::log10(double(m * n)));
    return out;
}

} // namespace respicast
