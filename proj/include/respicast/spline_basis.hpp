#pragma once

#include <array>
#include <span>
#include <vector>

#include "respicast/date.hpp"
#include "respicast/errors.hpp"

namespace respicast {

// Cubic B-spline basis on uniformly spaced knots covering a date range, with
// the knot vector extended beyond each end of the range. The first interior
// knot sits on the first day of the range so bases are reproducible across
// runs. Time is measured in days since range start.
class SplineBasis {
public:
    static constexpr int degree = 3;

    static SplineBasis build(Date start, Date end, double knot_spacing = 5.0,
                             int extension = 3);

    int n_basis() const { return n_basis_; }
    Date range_start() const { return start_; }
    Date range_end() const { return end_; }
    double range_days() const { return double(end_ - start_); }
    double knot_spacing() const { return spacing_; }
    const std::vector<double>& knots() const { return knots_; }

    // The degree+1 basis functions that are non-zero at t: B_{first..first+3}.
    struct Local {
        int first;
        std::array<double, 4> v;
    };

    Local eval(double t) const;
    Local eval_deriv(double t) const;

    double value(std::span<const double> coef, double t) const;
    double deriv(std::span<const double> coef, double t) const;

private:
    SplineBasis() = default;
    int span_of(double t) const;

    Date start_, end_;
    double spacing_ = 0.0;
    std::vector<double> knots_; // knots_[j] = (j - extension) * spacing
    int n_basis_ = 0;
};

} // namespace respicast
