#include "respicast/delay.hpp"

#include <cmath>

#include "respicast/special.hpp"

namespace respicast {

DiscretePMF::DiscretePMF(int min_lag, std::vector<double> probs)
    : min_lag_(min_lag), probs_(std::move(probs)) {
    if (probs_.empty()) throw ParameterError("DiscretePMF: empty support");
    double sum = 0.0;
    for (double p : probs_) {
        if (p < 0.0) throw ParameterError("DiscretePMF: negative mass");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        if (sum <= 0.0) throw ParameterError("DiscretePMF: zero total mass");
        for (double& p : probs_) p /= sum;
    }
}

double DiscretePMF::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i)
        m += double(min_lag_ + int(i)) * probs_[i];
    return m;
}

int DiscretePMF::mean_lag_rounded() const {
    return int(std::llround(mean()));
}

DiscretePMF discretize_gamma(const DelaySpec& spec) {
    spec.validate();
    double shape = (spec.mean / spec.sd) * (spec.mean / spec.sd);
    double rate = spec.mean / (spec.sd * spec.sd);
    if (!std::isfinite(shape) || !std::isfinite(rate) || shape <= 0.0 || rate <= 0.0)
        throw ParameterError("discretize_gamma: non-finite shape or rate");

    std::vector<double> probs;
    probs.reserve(std::size_t(spec.max_lag - spec.min_lag + 1));
    for (int s = spec.min_lag; s <= spec.max_lag; ++s) {
        double lo = std::max(0.0, double(s) - 0.5);
        double hi = double(s) + 0.5;
        double mass = gamma_cdf_lower(shape, rate * hi) - gamma_cdf_lower(shape, rate * lo);
        probs.push_back(std::max(0.0, mass));
    }
    double sum = 0.0;
    for (double p : probs) sum += p;
    if (sum <= 0.0)
        throw ParameterError("discretize_gamma: no probability mass in lag range");
    for (double& p : probs) p /= sum;
    return DiscretePMF(spec.min_lag, std::move(probs));
}

std::pair<double, double> convolve_delays(std::pair<double, double> a,
                                          std::pair<double, double> b) {
    auto [ma, sa] = a;
    auto [mb, sb] = b;
    if (ma < 0.0 || mb < 0.0 || sa < 0.0 || sb < 0.0)
        throw ParameterError("convolve_delays: negative mean or sd");
    if (!(sa > 0.0) && !(sb > 0.0) && !(ma > 0.0) && !(mb > 0.0))
        return {0.0, 0.0};
    return {ma + mb, std::sqrt(sa * sa + sb * sb)};
}

} // namespace respicast
