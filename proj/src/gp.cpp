#include "respicast/gp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "respicast/errors.hpp"

namespace respicast {

void GPKernel::validate() const {
    if (!(s0 > 0.0) || !(l > 0.0) || !(sn > 0.0))
        throw ParameterError("GPKernel: s0, l and sn must be > 0");
}

double matern52(double d, const GPKernel& kernel) {
    double r = std::sqrt(5.0) * d / kernel.l;
    return kernel.s0 * kernel.s0 * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

namespace {

// Lower Cholesky factor of a; on failure adds 1e-8 to the diagonal, retries
// twice, then gives up.
Eigen::MatrixXd chol_with_jitter(Eigen::MatrixXd a) {
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0) a.diagonal().array() += 1e-8;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericalError("gp: covariance factorisation failed after jitter retries");
}

} // namespace

GpConditioner::GpConditioner(const GPKernel& kernel, int window, bool init_includes_signal)
    : kernel_(kernel), window_(window) {
    kernel_.validate();
    if (window < 1) throw ParameterError("GpConditioner: window must be >= 1");

    double noise = kernel_.sn * kernel_.sn;
    init_sd_ = std::sqrt(noise + (init_includes_signal ? kernel_.s0 * kernel_.s0 : 0.0));

    auto w = Eigen::Index(window);
    Eigen::MatrixXd cov(w, w);
    for (Eigen::Index i = 0; i < w; ++i)
        for (Eigen::Index j = 0; j < w; ++j) cov(i, j) = matern52(double(std::abs(i - j)), kernel_);
    cov.diagonal().array() += noise;
    Eigen::MatrixXd lo = chol_with_jitter(cov);

    // row i of the history matrix sits at lag i + 1 behind the target day
    Eigen::VectorXd kstar(w);
    for (Eigen::Index i = 0; i < w; ++i) kstar[i] = matern52(double(i + 1), kernel_);

    // y solved once: its prefixes are the solutions for every shorter window
    Eigen::VectorXd y = lo.triangularView<Eigen::Lower>().solve(kstar);

    double k00 = matern52(0.0, kernel_) + noise;
    weights_.resize(std::size_t(window) * std::size_t(window + 1) / 2);
    sds_.resize(std::size_t(window));
    double quad = 0.0;
    for (Eigen::Index n = 1; n <= w; ++n) {
        quad += y[n - 1] * y[n - 1];
        double var = k00 - quad;
        if (!(var > 0.0)) throw NumericalError("gp: conditional variance not positive");
        sds_[std::size_t(n - 1)] = std::sqrt(var);
        Eigen::VectorXd a = lo.topLeftCorner(n, n)
                                .transpose()
                                .triangularView<Eigen::Upper>()
                                .solve(y.head(n));
        std::size_t off = std::size_t(n) * std::size_t(n - 1) / 2;
        for (Eigen::Index i = 0; i < n; ++i) weights_[off + std::size_t(i)] = a[i];
    }
}

std::span<const double> GpConditioner::weights(std::size_t n_history) const {
    std::size_t n = std::min(n_history, std::size_t(window_));
    return {weights_.data() + n * (n - 1) / 2, n};
}

double GpConditioner::conditional_sd(std::size_t n_history) const {
    if (n_history == 0) return init_sd_;
    std::size_t n = std::min(n_history, std::size_t(window_));
    return sds_[n - 1];
}

double GpConditioner::conditional_mean(std::span<const double> history) const {
    auto w = weights(history.size());
    double mean = 0.0;
    const double* last = history.data() + history.size() - 1;
    for (std::size_t i = 0; i < w.size(); ++i) mean += w[i] * last[-std::ptrdiff_t(i)];
    return mean;
}

double gp_step(std::span<const double> history, const GpConditioner& cond, RngStream& rng) {
    if (history.empty()) return rng.normal(0.0, cond.conditional_sd(0));
    double mean = cond.conditional_mean(history);
    return rng.normal(mean, cond.conditional_sd(history.size()));
}

} // namespace respicast
