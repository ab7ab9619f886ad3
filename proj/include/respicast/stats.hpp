#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "respicast/errors.hpp"

namespace respicast {

// Linear-interpolation quantile (R type 7) on an already sorted range.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ParameterError("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    double h = double(sorted.size() - 1) * p;
    std::size_t lo = std::size_t(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
    double w = h - double(lo);
    return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

inline std::vector<double> quantiles(std::vector<double> values, std::span<const double> ps) {
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    out.reserve(ps.size());
    for (double p : ps) out.push_back(quantile_sorted(values, p));
    return out;
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw ParameterError("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

// sample standard deviation (n - 1 denominator)
inline double sd_of(std::span<const double> v) {
    if (v.size() < 2) throw ParameterError("sd needs at least two values");
    double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / double(v.size() - 1));
}

inline double log_sum_exp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

} // namespace respicast
