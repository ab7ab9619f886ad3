#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "respicast/rng.hpp"

namespace respicast {

// Matern 5/2 covariance of the latent log reproduction number.
struct GPKernel {
    double s0 = 0.1;   // signal sd
    double l = 30.0;   // correlation time scale, days
    double sn = 0.001; // observation noise sd

    void validate() const;
};

// k(d) = s0^2 (1 + sqrt(5) d/l + 5 d^2 / (3 l^2)) exp(-sqrt(5) d/l)
double matern52(double d, const GPKernel& kernel);

// One-day-ahead conditional N(mean, sd^2) of the zero-mean process given up
// to `window` noisy values on the daily grid: mean = k*' (K + sn^2 I)^-1 h,
// var = k(0) + sn^2 - k*' (K + sn^2 I)^-1 k*. The grid is regular, so the
// weights depend only on the history length; one Cholesky of the full-window
// matrix serves every length, since the leading n x n block of the factor is
// the factor of the leading n x n block.
class GpConditioner {
public:
    // init_includes_signal switches the no-history draw from variance sn^2
    // to s0^2 + sn^2.
    GpConditioner(const GPKernel& kernel, int window, bool init_includes_signal = false);

    const GPKernel& kernel() const { return kernel_; }
    int window() const { return window_; }

    // history is chronological, most recent last; only the trailing
    // min(size, window) values enter
    double conditional_mean(std::span<const double> history) const;

    // n_history 0 gives the stationary initial sd
    double conditional_sd(std::size_t n_history) const;

    // weights over the most recent n values, most recent first
    std::span<const double> weights(std::size_t n_history) const;

private:
    GPKernel kernel_;
    int window_;
    double init_sd_;
    std::vector<double> weights_; // length-n block at offset n(n-1)/2
    std::vector<double> sds_;
};

// One draw of the next process value; empty history draws the stationary
// initial value.
double gp_step(std::span<const double> history, const GpConditioner& cond, RngStream& rng);

} // namespace respicast
