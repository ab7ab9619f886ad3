#pragma once

#include <utility>
#include <vector>

#include "respicast/errors.hpp"

namespace respicast {

// Gamma delay specification: mean/sd in days plus the supported lag range.
struct DelaySpec {
    double mean = 0.0;
    double sd = 0.0;
    int max_lag = 0;
    int min_lag = 0; // 0 for observation delays, 1 for generation intervals

    void validate() const {
        if (!(mean > 0.0) || !(sd > 0.0)) throw ParameterError("DelaySpec: mean and sd must be > 0");
        if (min_lag != 0 && min_lag != 1) throw ParameterError("DelaySpec: min_lag must be 0 or 1");
        if (min_lag > max_lag) throw ParameterError("DelaySpec: min_lag > max_lag");
    }
};

// Truncated, normalised pmf over integer day lags min_lag..max_lag.
class DiscretePMF {
public:
    DiscretePMF(int min_lag, std::vector<double> probs);

    int min_lag() const { return min_lag_; }
    int max_lag() const { return min_lag_ + int(probs_.size()) - 1; }
    std::size_t size() const { return probs_.size(); }
    double at_lag(int lag) const { return probs_[std::size_t(lag - min_lag_)]; }
    const std::vector<double>& probs() const { return probs_; }

    double mean() const;
    int mean_lag_rounded() const; // nearest-integer form for shift indexing

private:
    int min_lag_;
    std::vector<double> probs_;
};

// Interval-censoring discretisation of the gamma delay: lag s receives the
// probability of [s - 0.5, s + 0.5) (lowest bin clipped at 0), renormalised
// over the truncated support.
DiscretePMF discretize_gamma(const DelaySpec& spec);

// Mean/sd of a sum of two independent delays.
std::pair<double, double> convolve_delays(std::pair<double, double> a,
                                          std::pair<double, double> b);

inline double pmf_mean(const DiscretePMF& p) { return p.mean(); }

} // namespace respicast
