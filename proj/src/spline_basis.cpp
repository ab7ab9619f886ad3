#include "respicast/spline_basis.hpp"

#include <algorithm>
#include <cmath>

namespace respicast {

SplineBasis SplineBasis::build(Date start, Date end, double knot_spacing, int extension) {
    if (!(knot_spacing > 0.0)) throw ParameterError("SplineBasis: knot spacing must be > 0");
    if (extension < degree) throw ParameterError("SplineBasis: extension must cover the degree");
    double range = double(end - start);
    if (range < 2.0 * knot_spacing)
        throw ParameterError("SplineBasis: date range shorter than two knot spacings");

    // interior knots 0, h, ..., Kh with Kh >= range, plus `extension` each side
    int top = int(std::ceil(range / knot_spacing - 1e-9));
    SplineBasis b;
    b.start_ = start;
    b.end_ = end;
    b.spacing_ = knot_spacing;
    int total = top + 1 + 2 * extension;
    b.knots_.resize(std::size_t(total));
    for (int j = 0; j < total; ++j)
        b.knots_[std::size_t(j)] = double(j - extension) * knot_spacing;
    b.n_basis_ = total - degree - 1;
    return b;
}

int SplineBasis::span_of(double t) const {
    if (t < -1e-9 || t > range_days() + 1e-9)
        throw ParameterError("SplineBasis: evaluation point outside data range");
    int span = degree + int(std::floor(t / spacing_));
    int hi = int(knots_.size()) - degree - 2;
    return std::clamp(span, degree, hi);
}

SplineBasis::Local SplineBasis::eval(double t) const {
    int j = span_of(t);
    std::array<double, degree + 1> left{}, right{};
    std::array<std::array<double, degree + 1>, degree + 1> ndu{};
    ndu[0][0] = 1.0;
    for (int r = 1; r <= degree; ++r) {
        left[std::size_t(r)] = t - knots_[std::size_t(j + 1 - r)];
        right[std::size_t(r)] = knots_[std::size_t(j + r)] - t;
        double saved = 0.0;
        for (int k = 0; k < r; ++k) {
            double temp = ndu[std::size_t(k)][std::size_t(r - 1)] /
                          (right[std::size_t(k + 1)] + left[std::size_t(r - k)]);
            ndu[std::size_t(k)][std::size_t(r)] = saved + right[std::size_t(k + 1)] * temp;
            saved = left[std::size_t(r - k)] * temp;
        }
        ndu[std::size_t(r)][std::size_t(r)] = saved;
    }
    Local out;
    out.first = j - degree;
    for (int k = 0; k <= degree; ++k) out.v[std::size_t(k)] = ndu[std::size_t(k)][degree];
    return out;
}

SplineBasis::Local SplineBasis::eval_deriv(double t) const {
    int j = span_of(t);
    // degree-2 basis values at t: Bq[k] = B_{j-2+k, 2}(t)
    std::array<double, degree> bq{};
    bq[0] = 1.0;
    for (int r = 1; r <= degree - 1; ++r) {
        double saved = 0.0;
        for (int k = 0; k < r; ++k) {
            int i = j - r + 1 + k;
            double denom = knots_[std::size_t(i + r)] - knots_[std::size_t(i)];
            double temp = bq[std::size_t(k)] / denom;
            bq[std::size_t(k)] = saved + (knots_[std::size_t(i + r)] - t) * temp;
            saved = (t - knots_[std::size_t(i)]) * temp;
        }
        bq[std::size_t(r)] = saved;
    }
    // B'_{i,3} = 3 (B_{i,2}/(t_{i+3}-t_i) - B_{i+1,2}/(t_{i+4}-t_{i+1}))
    Local out;
    out.first = j - degree;
    for (int k = 0; k <= degree; ++k) {
        int i = j - degree + k;
        double lo = (k >= 1) ? bq[std::size_t(k - 1)] /
                                   (knots_[std::size_t(i + degree)] - knots_[std::size_t(i)])
                             : 0.0;
        double hi = (k <= degree - 1)
                        ? bq[std::size_t(k)] /
                              (knots_[std::size_t(i + degree + 1)] - knots_[std::size_t(i + 1)])
                        : 0.0;
        out.v[std::size_t(k)] = double(degree) * (lo - hi);
    }
    return out;
}

double SplineBasis::value(std::span<const double> coef, double t) const {
    Local loc = eval(t);
    double s = 0.0;
    for (int k = 0; k <= degree; ++k) s += coef[std::size_t(loc.first + k)] * loc.v[std::size_t(k)];
    return s;
}

double SplineBasis::deriv(std::span<const double> coef, double t) const {
    Local loc = eval_deriv(t);
    double s = 0.0;
    for (int k = 0; k <= degree; ++k) s += coef[std::size_t(loc.first + k)] * loc.v[std::size_t(k)];
    return s;
}

} // namespace respicast
