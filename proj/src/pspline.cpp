#include "respicast/pspline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "respicast/csv.hpp"
#include "respicast/log.hpp"
#include "respicast/mcmc_diag.hpp"
#include "respicast/parallel.hpp"
#include "respicast/rng.hpp"
#include "respicast/special.hpp"
#include "respicast/stats.hpp"

namespace respicast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double softplus(double a) { return a > 35.0 ? a : std::log1p(std::exp(a)); }

// Model with parameters in unconstrained space. Two layouts share the tail
// [logit(tau/tau_upper), logit(k/k_upper), (dow: w_0..w_5)] where the seventh
// log effect is -(w_0+..+w_5); the head is either the coefficients themselves,
//   centered:     [b_0..b_{N-1}, ...]
// or, for sampling, the random-walk innovations scaled to unit normals,
//   non-centered: [b_0, b_1, u_2..u_{N-1}, ...] with
//                 b_i = 2 b_{i-1} - b_{i-2} + tau * u_i.
// The non-centered form removes the tau funnel that defeats HMC on the
// centered one. Both densities include the logit change-of-variable terms,
// so they differ by the constant Jacobian of the b <-> u map only.
struct TrendModel {
    const SplineBasis* basis;
    TrendPriors priors;
    bool dow = false;
    std::vector<double> counts;
    std::vector<SplineBasis::Local> rows; // basis values per day
    std::vector<int> weekday;             // 0=Mon..6=Sun per day

    int n_basis() const { return basis->n_basis(); }
    int dim() const { return n_basis() + 2 + (dow ? 6 : 0); }

    TrendModel(const CountSeries& series, const SplineBasis& b, const TrendPriors& pr,
               bool day_of_week)
        : basis(&b), priors(pr), dow(day_of_week) {
        std::size_t t_len = series.size();
        counts.resize(t_len);
        rows.reserve(t_len);
        weekday.resize(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            counts[t] = double(series.count(t));
            rows.push_back(b.eval(double(t)));
            weekday[t] = (series.start_date() + std::int64_t(t)).weekday();
        }
    }

    // Log density in unconstrained space; fills the gradient when asked.
    // Non-finite states return -inf (the sampler rejects them).
    double logp(const std::vector<double>& x, std::vector<double>* grad,
                bool non_centered) const {
        int nb = n_basis();
        // tau and k live on (0, upper) via a logit map. A plain log map leaves
        // a hard wall at the upper bound; with weakly identified dispersion
        // (near-Poisson data) the ln k Jacobian piles mass against that wall
        // and the sampler spends warmup bouncing off it.
        double xt = x[std::size_t(nb)];
        double xk = x[std::size_t(nb) + 1];
        if (!std::isfinite(xt) || !std::isfinite(xk)) return kNegInf;
        double lst = -softplus(-xt), ls1t = -softplus(xt); // ln s, ln(1-s)
        double lsk = -softplus(-xk), ls1k = -softplus(xk);
        double lt = std::log(priors.tau_upper) + lst;
        double lk = std::log(priors.k_upper) + lsk;
        double tau = std::exp(lt);
        double k = std::exp(lk);
        if (!(tau > 0.0) || !(k > 0.0)) return kNegInf; // sigmoid underflow
        double sig_t = std::exp(lst), sig_k = std::exp(lsk);

        std::array<double, 7> lw{};
        if (dow) {
            double s = 0.0;
            for (int j = 0; j < 6; ++j) {
                lw[std::size_t(j)] = x[std::size_t(nb + 2 + j)];
                s += lw[std::size_t(j)];
            }
            lw[6] = -s;
        }

        std::vector<double> b(std::size_t(nb), 0.0);
        if (non_centered) {
            b[0] = x[0];
            b[1] = x[1];
            for (int i = 2; i < nb; ++i) {
                b[std::size_t(i)] = 2.0 * b[std::size_t(i) - 1] - b[std::size_t(i) - 2] +
                                    tau * x[std::size_t(i)];
                if (!std::isfinite(b[std::size_t(i)])) return kNegInf;
            }
        } else {
            std::copy(x.begin(), x.begin() + nb, b.begin());
        }

        if (grad) std::fill(grad->begin(), grad->end(), 0.0);
        std::vector<double> gb; // gradient with respect to b, data term only
        if (grad) gb.assign(std::size_t(nb), 0.0);

        double lp = 0.0;
        double dlk_data = 0.0;
        for (std::size_t t = 0; t < counts.size(); ++t) {
            const auto& row = rows[t];
            double s = 0.0;
            for (int j = 0; j < 4; ++j)
                s += b[std::size_t(row.first + j)] * row.v[std::size_t(j)];
            double eta = s + (dow ? lw[std::size_t(weekday[t])] : 0.0);
            eta = std::clamp(eta, -300.0, 300.0);
            double m = std::exp(eta);
            double c = counts[t];
            lp += std::lgamma(c + k) - std::lgamma(k) - std::lgamma(c + 1.0) +
                  k * (lk - std::log(k + m)) + c * (eta - std::log(k + m));
            if (grad) {
                // d/d eta of the data term
                double g = c - m * (c + k) / (k + m);
                for (int j = 0; j < 4; ++j)
                    gb[std::size_t(row.first + j)] += g * row.v[std::size_t(j)];
                if (dow && weekday[t] < 6) (*grad)[std::size_t(nb + 2 + weekday[t])] += g;
                if (dow && weekday[t] == 6)
                    for (int j = 0; j < 6; ++j) (*grad)[std::size_t(nb + 2 + j)] -= g;
                dlk_data += digamma(c + k) - digamma(k) + lk + 1.0 - std::log(k + m) -
                            (c + k) / (k + m);
            }
        }

        double dlt = 0.0;
        if (non_centered) {
            // standard-normal prior on the innovations
            for (int i = 2; i < nb; ++i) {
                double u = x[std::size_t(i)];
                lp += -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi);
            }
            if (grad) {
                // adjoint of the linear reconstruction b(beta, u, tau);
                // the recurrence starts at i = 2, so b_1 does not feed b_0's
                // adjoint through the factor-2 edge
                std::vector<double> adj(std::size_t(nb) + 2, 0.0);
                for (int i = nb - 1; i >= 1; --i)
                    adj[std::size_t(i)] = gb[std::size_t(i)] + 2.0 * adj[std::size_t(i) + 1] -
                                          adj[std::size_t(i) + 2];
                adj[0] = gb[0] - adj[2];
                (*grad)[0] = adj[0];
                (*grad)[1] = adj[1];
                for (int i = 2; i < nb; ++i) {
                    (*grad)[std::size_t(i)] = tau * adj[std::size_t(i)] - x[std::size_t(i)];
                    dlt += tau * adj[std::size_t(i)] * x[std::size_t(i)];
                }
            }
        } else {
            // second-order random walk on the coefficients
            double ss = 0.0;
            double inv_t2 = 1.0 / (tau * tau);
            for (int i = 2; i < nb; ++i) {
                double d = b[std::size_t(i)] - 2.0 * b[std::size_t(i) - 1] + b[std::size_t(i) - 2];
                ss += d * d;
                if (grad) {
                    double gd = -d * inv_t2;
                    (*grad)[std::size_t(i)] += gd;
                    (*grad)[std::size_t(i) - 1] -= 2.0 * gd;
                    (*grad)[std::size_t(i) - 2] += gd;
                }
            }
            double n_rw = double(nb - 2);
            lp += -0.5 * ss * inv_t2 - n_rw * lt - 0.5 * n_rw * std::log(2.0 * std::numbers::pi);
            dlt = ss * inv_t2 - n_rw;
            if (grad)
                for (int i = 0; i < nb; ++i) (*grad)[std::size_t(i)] += gb[std::size_t(i)];
        }

        // hyperpriors plus the Jacobian of the logit transforms; dlt and dlk
        // hold theta * d/d theta so far, i.e. the derivative in ln theta
        if (priors.tau) {
            lp += log_normal_pdf(tau, priors.tau->mean, priors.tau->sd);
            dlt += -(tau - priors.tau->mean) / (priors.tau->sd * priors.tau->sd) * tau;
        }
        double dlk = dlk_data * k;
        if (priors.k) {
            lp += log_normal_pdf(k, priors.k->mean, priors.k->sd);
            dlk += -(k - priors.k->mean) / (priors.k->sd * priors.k->sd) * k;
        }
        lp += lt + ls1t + lk + ls1k; // ln |d theta / d xi| = ln(U s (1-s))
        dlt = dlt * (1.0 - sig_t) + (1.0 - 2.0 * sig_t);
        dlk = dlk * (1.0 - sig_k) + (1.0 - 2.0 * sig_k);

        if (dow) {
            for (int j = 0; j < 6; ++j) {
                double w = x[std::size_t(nb + 2 + j)];
                lp += log_normal_pdf(w, 0.0, 1.0);
                if (grad) (*grad)[std::size_t(nb + 2 + j)] -= w;
            }
        }
        if (grad) {
            (*grad)[std::size_t(nb)] = dlt;
            (*grad)[std::size_t(nb) + 1] = dlk;
        }
        if (!std::isfinite(lp)) return kNegInf;
        return lp;
    }

    TrendState unpack(const std::vector<double>& x, bool non_centered) const {
        TrendState st;
        int nb = n_basis();
        st.tau = priors.tau_upper / (1.0 + std::exp(-x[std::size_t(nb)]));
        st.k = priors.k_upper / (1.0 + std::exp(-x[std::size_t(nb) + 1]));
        st.coef.resize(std::size_t(nb));
        if (non_centered) {
            st.coef[0] = x[0];
            st.coef[1] = x[1];
            for (int i = 2; i < nb; ++i)
                st.coef[std::size_t(i)] = 2.0 * st.coef[std::size_t(i) - 1] -
                                          st.coef[std::size_t(i) - 2] + st.tau * x[std::size_t(i)];
        } else {
            std::copy(x.begin(), x.begin() + nb, st.coef.begin());
        }
        if (dow) {
            std::array<double, 7> lw{};
            double s = 0.0;
            for (int j = 0; j < 6; ++j) {
                lw[std::size_t(j)] = x[std::size_t(nb + 2 + j)];
                s += lw[std::size_t(j)];
            }
            lw[6] = -s;
            st.log_omega = lw;
        }
        return st;
    }

    std::vector<double> initial_inv_mass() const {
        // unit scale for the whitened coefficient block, tighter for the rest
        std::vector<double> v(std::size_t(dim()), 1.0);
        v[std::size_t(n_basis())] = 0.1;
        v[std::size_t(n_basis()) + 1] = 0.1;
        for (int j = 0; j < (dow ? 6 : 0); ++j) v[std::size_t(n_basis() + 2 + j)] = 0.1;
        return v;
    }

    // Laplace whitening of the coefficient block. Adjacent coefficients are
    // strongly correlated under the posterior (smoothness plus daily data),
    // which defeats HMC with a diagonal metric in either the centered or the
    // innovation parameterisation. Sampling b = mode + L^-T z, with L L^T the
    // penalised-likelihood Hessian at the mode, makes the coefficient block
    // approximately isotropic; diagonal adaptation then only has to absorb
    // the residual tau/k coupling.
    std::vector<double> mode;
    Eigen::MatrixXd chol;   // lower factor of the Hessian at the mode
    double tau_ref = 0.1;   // scales the penalty inside the whitening
    double k_ref = 20.0;    // and the reference dispersion; see fit_pspline

    struct NewtonResult {
        Eigen::VectorXd mode;
        Eigen::MatrixXd hess; // of the negated objective, at the mode
        double obj = 0.0;
    };

    // Penalised mode of the coefficient block at fixed smoothness and
    // dispersion: data terms that depend on b plus the Gaussian penalty.
    NewtonResult newton_mode(Eigen::VectorXd b, double tau0, double k0) const {
        int nb = n_basis();
        auto objective = [&](const Eigen::VectorXd& v) {
            double f = 0.0;
            for (std::size_t t = 0; t < counts.size(); ++t) {
                const auto& row = rows[t];
                double eta = 0.0;
                for (int j = 0; j < 4; ++j) eta += v[row.first + j] * row.v[std::size_t(j)];
                eta = std::clamp(eta, -300.0, 300.0);
                f += counts[t] * eta - (counts[t] + k0) * std::log(k0 + std::exp(eta));
            }
            for (int i = 2; i < nb; ++i) {
                double d = v[i] - 2.0 * v[i - 1] + v[i - 2];
                f -= 0.5 * d * d / (tau0 * tau0);
            }
            return f;
        };

        Eigen::MatrixXd hess(nb, nb);
        Eigen::VectorXd grad_v(nb);
        auto assemble = [&](const Eigen::VectorXd& v) {
            grad_v.setZero();
            hess.setZero();
            for (std::size_t t = 0; t < counts.size(); ++t) {
                const auto& row = rows[t];
                double eta = 0.0;
                for (int j = 0; j < 4; ++j) eta += v[row.first + j] * row.v[std::size_t(j)];
                eta = std::clamp(eta, -300.0, 300.0);
                double m = std::exp(eta);
                double c = counts[t];
                double g = c - m * (c + k0) / (k0 + m);
                double w = m * (c + k0) * k0 / ((k0 + m) * (k0 + m));
                for (int i = 0; i < 4; ++i) {
                    grad_v[row.first + i] += g * row.v[std::size_t(i)];
                    for (int j = 0; j < 4; ++j)
                        hess(row.first + i, row.first + j) +=
                            w * row.v[std::size_t(i)] * row.v[std::size_t(j)];
                }
            }
            double inv_t2 = 1.0 / (tau0 * tau0);
            for (int i = 2; i < nb; ++i) {
                double d = v[i] - 2.0 * v[i - 1] + v[i - 2];
                grad_v[i] -= d * inv_t2;
                grad_v[i - 1] += 2.0 * d * inv_t2;
                grad_v[i - 2] -= d * inv_t2;
                int idx[3] = {i, i - 1, i - 2};
                double wts[3] = {1.0, -2.0, 1.0};
                for (int p = 0; p < 3; ++p)
                    for (int q = 0; q < 3; ++q)
                        hess(idx[p], idx[q]) += wts[p] * wts[q] * inv_t2;
            }
            for (int i = 0; i < nb; ++i) hess(i, i) += 1e-10;
        };

        double f = objective(b);
        for (int iter = 0; iter < 40; ++iter) {
            assemble(b);
            if (grad_v.lpNorm<Eigen::Infinity>() < 1e-9) break;
            Eigen::VectorXd step = hess.ldlt().solve(grad_v);
            double cap = step.lpNorm<Eigen::Infinity>();
            if (cap > 5.0) step *= 5.0 / cap; // guard against flat directions
            double scale = 1.0;
            for (int half = 0; half < 12; ++half) {
                Eigen::VectorXd trial = b + scale * step;
                double ft = objective(trial);
                if (ft >= f - 1e-12) {
                    b = trial;
                    f = ft;
                    break;
                }
                scale *= 0.5;
            }
            if (step.lpNorm<Eigen::Infinity>() * scale < 1e-10) break;
        }
        assemble(b); // leave the curvature evaluated at the accepted point
        return {std::move(b), std::move(hess), f};
    }

    void build_whitening(const std::vector<double>& ls_coef, double tau0, double k0) {
        int nb = n_basis();
        NewtonResult nr =
            newton_mode(Eigen::Map<const Eigen::VectorXd>(ls_coef.data(), nb), tau0, k0);
        mode.assign(nr.mode.data(), nr.mode.data() + nb);
        tau_ref = tau0;
        k_ref = k0;
        Eigen::LLT<Eigen::MatrixXd> llt(nr.hess);
        if (llt.info() != Eigen::Success) {
            nr.hess += Eigen::MatrixXd::Identity(nb, nb) * 1e-6;
            llt.compute(nr.hess);
            if (llt.info() != Eigen::Success)
                throw NumericalError("trend fit: whitening factorisation failed");
        }
        chol = llt.matrixL();
    }

    // density over [z, ln tau, ln k, dow], b = mode + L^-T z; the constant
    // log|det L| is dropped
    double logp_white(const std::vector<double>& x, std::vector<double>* grad) const {
        int nb = n_basis();
        std::vector<double> xc(x);
        Eigen::Map<const Eigen::VectorXd> z(x.data(), nb);
        Eigen::VectorXd bv =
            chol.transpose().triangularView<Eigen::Upper>().solve(z);
        for (int i = 0; i < nb; ++i) xc[std::size_t(i)] = mode[std::size_t(i)] + bv[i];
        double lp = logp(xc, grad, false);
        if (grad && std::isfinite(lp)) {
            Eigen::Map<Eigen::VectorXd> g(grad->data(), nb);
            g = chol.triangularView<Eigen::Lower>().solve(g.eval());
        }
        return lp;
    }

    TrendState unpack_white(const std::vector<double>& x) const {
        int nb = n_basis();
        std::vector<double> xc(x);
        Eigen::Map<const Eigen::VectorXd> z(x.data(), nb);
        Eigen::VectorXd bv = chol.transpose().triangularView<Eigen::Upper>().solve(z);
        for (int i = 0; i < nb; ++i) xc[std::size_t(i)] = mode[std::size_t(i)] + bv[i];
        return unpack(xc, false);
    }

    std::vector<double> coef_from_white(const std::vector<double>& x) const {
        int nb = n_basis();
        Eigen::Map<const Eigen::VectorXd> z(x.data(), nb);
        Eigen::VectorXd bv = chol.transpose().triangularView<Eigen::Upper>().solve(z);
        std::vector<double> b(std::size_t(nb), 0.0);
        for (int i = 0; i < nb; ++i) b[std::size_t(i)] = mode[std::size_t(i)] + bv[i];
        return b;
    }
};

// Least-squares projection of the smoothed log counts onto the basis gives a
// starting point near the mode, which shortens warmup considerably.
std::vector<double> initial_coef(const TrendModel& m) {
    int nb = m.n_basis();
    std::size_t t_len = m.counts.size();
    std::vector<double> target(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        std::size_t lo = t >= 3 ? t - 3 : 0;
        std::size_t hi = std::min(t + 3, t_len - 1);
        double s = 0.0;
        for (std::size_t u = lo; u <= hi; ++u) s += m.counts[u];
        target[t] = std::log(s / double(hi - lo + 1) + 0.5);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    for (std::size_t t = 0; t < t_len; ++t) {
        const auto& row = m.rows[t];
        for (int i = 0; i < 4; ++i) {
            rhs[row.first + i] += row.v[std::size_t(i)] * target[t];
            for (int j = 0; j < 4; ++j)
                a(row.first + i, row.first + j) += row.v[std::size_t(i)] * row.v[std::size_t(j)];
        }
    }
    // light roughness penalty keeps the unsupported edge coefficients finite
    double lam = 1.0;
    for (int i = 2; i < nb; ++i) {
        int idx[3] = {i, i - 1, i - 2};
        double w[3] = {1.0, -2.0, 1.0};
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) a(idx[p], idx[q]) += lam * w[p] * w[q];
    }
    for (int i = 0; i < nb; ++i) a(i, i) += 1e-8;
    Eigen::VectorXd sol = a.ldlt().solve(rhs);
    return {sol.data(), sol.data() + nb};
}

// Centre the whitening on the data. The whitening Hessian is built at a fixed
// smoothness scale; if that scale is far from where the posterior settles, the
// conditional scale of the whitened block swings with every tau update and
// step-size adaptation chases a moving target. A Laplace approximation of the
// marginal likelihood over a log grid picks the scale, then a Pearson moment
// estimate at the mode sets the reference dispersion.
void select_whitening_scales(TrendModel& model) {
    int nb = model.n_basis();
    std::vector<double> ls = initial_coef(model);
    Eigen::VectorXd warm = Eigen::Map<const Eigen::VectorXd>(ls.data(), nb);

    double k0 = 20.0;
    double best_tau = 0.1;
    auto pick_tau = [&]() {
        double best = -std::numeric_limits<double>::infinity();
        double chosen = best_tau;
        double tau = 1e-3;
        for (int g = 0; g < 14; ++g, tau *= 1.9) {
            if (model.priors.tau && g == 0) {
                // informative runs search around the transferred prior instead
                tau = std::max(model.priors.tau->mean / 8.0, 1e-6);
            }
            if (tau >= model.priors.tau_upper) break;
            TrendModel::NewtonResult nr = model.newton_mode(warm, tau, k0);
            warm = nr.mode;
            Eigen::LLT<Eigen::MatrixXd> llt(nr.hess);
            if (llt.info() != Eigen::Success) continue;
            double logdet = 0.0;
            for (int i = 0; i < nb; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
            double marg = nr.obj - double(nb - 2) * std::log(tau) - 0.5 * logdet;
            if (model.priors.tau)
                marg += log_normal_pdf(tau, model.priors.tau->mean, model.priors.tau->sd);
            if (marg > best) {
                best = marg;
                chosen = tau;
            }
        }
        best_tau = chosen;
    };

    auto pick_k = [&]() {
        TrendModel::NewtonResult nr = model.newton_mode(warm, best_tau, k0);
        warm = nr.mode;
        // method of moments on Var(c) = m + m^2/k at the penalised mode
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < model.counts.size(); ++t) {
            const auto& row = model.rows[t];
            double eta = 0.0;
            for (int j = 0; j < 4; ++j) eta += warm[row.first + j] * row.v[std::size_t(j)];
            double m = std::exp(std::clamp(eta, -300.0, 300.0));
            double r = model.counts[t] - m;
            num += m * m;
            den += r * r - m;
        }
        double cap = 0.5 * model.priors.k_upper;
        k0 = den > 0.0 ? std::clamp(num / den, 1.0, cap) : cap;
        if (model.priors.k) k0 = std::clamp(model.priors.k->mean, 1.0, cap);
    };

    pick_tau();
    pick_k();
    pick_tau(); // once more with the matched dispersion
    std::vector<double> start(warm.data(), warm.data() + nb);
    model.build_whitening(start, best_tau, k0);
}

struct DualAveraging {
    double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
    double gamma = 0.05, t0 = 10.0, kappa = 0.75, delta = 0.8;
    int count = 0;

    void restart(double eps) {
        mu = std::log(10.0 * eps);
        log_eps = std::log(eps);
        log_eps_bar = std::log(eps);
        h_bar = 0.0;
        count = 0;
    }
    void update(double accept_stat) {
        ++count;
        double eta = 1.0 / (double(count) + t0);
        h_bar = (1.0 - eta) * h_bar + eta * (delta - accept_stat);
        log_eps = mu - std::sqrt(double(count)) / gamma * h_bar;
        // runaway guard: a stretch of all-accepts must not push eps to
        // values where the first rejection can never pull it back
        log_eps = std::clamp(log_eps, std::log(1e-8), std::log(1e2));
        double w = std::pow(double(count), -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    }
    double eps() const { return std::exp(log_eps); }
    double eps_final() const { return std::exp(log_eps_bar); }
};

struct HmcChain {
    const TrendModel* model;
    RngStream rng;
    std::vector<double> x, grad, inv_mass;
    double lp = 0.0;

    HmcChain(const TrendModel& m, RngStream stream, std::vector<double> x0)
        : model(&m), rng(stream), x(std::move(x0)),
          grad(std::size_t(m.dim()), 0.0), inv_mass(m.initial_inv_mass()) {
        lp = m.logp_white(x, &grad);
    }

    // Re-evaluate after an external update of x (the Gibbs step for tau).
    void refresh() { lp = model->logp_white(x, &grad); }

    // One trajectory; returns the acceptance statistic. x/lp/grad are left at
    // the accepted state. Coordinates with zero inverse mass get no momentum
    // and never move; their density terms are constant along the trajectory
    // and cancel in the acceptance ratio.
    double transition(double eps, int n_leap) {
        std::size_t d = x.size();
        std::vector<double> p(d), xq = x, gq = grad;
        double kin0 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            p[i] = inv_mass[i] > 0.0 ? rng.normal() / std::sqrt(inv_mass[i]) : 0.0;
            kin0 += 0.5 * p[i] * p[i] * inv_mass[i];
        }
        double h0 = -lp + kin0;

        double lq = lp;
        bool bad = false;
        for (int step = 0; step < n_leap; ++step) {
            for (std::size_t i = 0; i < d; ++i) p[i] += 0.5 * eps * gq[i];
            for (std::size_t i = 0; i < d; ++i) xq[i] += eps * inv_mass[i] * p[i];
            lq = model->logp_white(xq, &gq);
            if (!std::isfinite(lq)) { bad = true; break; }
            for (std::size_t i = 0; i < d; ++i) p[i] += 0.5 * eps * gq[i];
        }
        double astat = 0.0;
        if (!bad) {
            double kin1 = 0.0;
            for (std::size_t i = 0; i < d; ++i) kin1 += 0.5 * p[i] * p[i] * inv_mass[i];
            double dh = h0 - (-lq + kin1);
            if (std::isfinite(dh)) {
                astat = std::min(1.0, std::exp(std::min(dh, 700.0)));
                if (rng.uniform() < astat) {
                    x = xq;
                    grad = gq;
                    lp = lq;
                }
            }
        }
        return astat;
    }

    double find_initial_eps() {
        double eps = 0.1 / std::sqrt(double(x.size()));
        auto probe = [&](double e) {
            std::vector<double> xs = x, gs = grad, p(x.size());
            double kin0 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                p[i] = inv_mass[i] > 0.0 ? rng.normal() / std::sqrt(inv_mass[i]) : 0.0;
                kin0 += 0.5 * p[i] * p[i] * inv_mass[i];
            }
            double h0 = -lp + kin0;
            for (std::size_t i = 0; i < x.size(); ++i) p[i] += 0.5 * e * gs[i];
            for (std::size_t i = 0; i < x.size(); ++i) xs[i] += e * inv_mass[i] * p[i];
            double lq = model->logp_white(xs, &gs);
            if (!std::isfinite(lq)) return -1e30;
            for (std::size_t i = 0; i < x.size(); ++i) p[i] += 0.5 * e * gs[i];
            double kin1 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) kin1 += 0.5 * p[i] * p[i] * inv_mass[i];
            return h0 - (-lq + kin1);
        };
        double dh = probe(eps);
        bool grow = dh > std::log(0.5);
        for (int it = 0; it < 60; ++it) {
            eps *= grow ? 2.0 : 0.5;
            dh = probe(eps);
            if (grow != (dh > std::log(0.5))) break;
            if (eps < 1e-10 || eps > 1e3) break;
        }
        return std::max(eps, 1e-10);
    }
};

struct ChainOutput {
    std::vector<TrendState> draws;
    double accept_rate = 0.0;
    double eps_final = 0.0;
};

ChainOutput run_chain(const TrendModel& model, const SamplerSettings& st, int warmup,
                      int n_draws, std::uint64_t chain_key, int attempt) {
    RngStream stream(st.seed, 0x7e5u, chain_key, std::uint64_t(attempt));
    int nb = model.n_basis();
    std::vector<double> x0(std::size_t(model.dim()), 0.0);
    // whitened coordinates: the mode is the origin, unit scale per direction
    for (int i = 0; i < nb; ++i) x0[std::size_t(i)] = 0.5 * stream.normal();
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    x0[std::size_t(nb)] =
        logit(std::min(model.tau_ref, 0.5 * model.priors.tau_upper) / model.priors.tau_upper) +
        0.5 * stream.normal();
    x0[std::size_t(nb) + 1] =
        logit(std::min(model.k_ref, 0.5 * model.priors.k_upper) / model.priors.k_upper) +
        0.3 * stream.normal();
    if (model.dow)
        for (int j = 0; j < 6; ++j) x0[std::size_t(nb + 2 + j)] = 0.05 * stream.normal();

    HmcChain chain(model, stream, std::move(x0));
    if (!std::isfinite(chain.lp))
        throw NumericalError("trend sampler: non-finite density at the starting point");

    // tau is excluded from the Hamiltonian flow (zero inverse mass) and drawn
    // from its exact conditional instead; the smoothness variance forms a
    // funnel with the coefficients that defeats a fixed diagonal metric, while
    // its conditional given the coefficients depends only on the penalty sum
    // of squares and is cheap to slice-sample.
    chain.inv_mass[std::size_t(nb)] = 0.0;
    auto slice_tau = [&]() {
        std::vector<double> b = model.coef_from_white(chain.x);
        double ss = 0.0;
        for (int i = 2; i < nb; ++i) {
            double d = b[std::size_t(i)] - 2.0 * b[std::size_t(i) - 1] + b[std::size_t(i) - 2];
            ss += d * d;
        }
        double n_rw = double(nb - 2);
        auto target = [&](double xi) {
            if (!std::isfinite(xi)) return kNegInf;
            double ls = -softplus(-xi), ls1 = -softplus(xi);
            double ltau = std::log(model.priors.tau_upper) + ls;
            double tau = std::exp(ltau);
            if (!(tau > 0.0)) return kNegInf;
            double v = -0.5 * ss / (tau * tau) - n_rw * ltau + ltau + ls1;
            if (model.priors.tau)
                v += log_normal_pdf(tau, model.priors.tau->mean, model.priors.tau->sd);
            return v;
        };
        double xi0 = chain.x[std::size_t(nb)];
        double y = target(xi0) + std::log(std::max(chain.rng.uniform(), 1e-300));
        double w = 1.0;
        double lo = xi0 - w * chain.rng.uniform();
        double hi = lo + w;
        for (int i = 0; i < 60 && target(lo) > y; ++i) lo -= w;
        for (int i = 0; i < 60 && target(hi) > y; ++i) hi += w;
        double xi1 = xi0;
        for (int i = 0; i < 100; ++i) {
            double cand = lo + chain.rng.uniform() * (hi - lo);
            if (target(cand) > y) {
                xi1 = cand;
                break;
            }
            (cand < xi0 ? lo : hi) = cand;
        }
        chain.x[std::size_t(nb)] = xi1;
        chain.refresh();
    };

    // Interweaved second update: hold the standardised increments fixed so the
    // curve rescales with tau. The conditional above barely moves tau once the
    // data pins the realised roughness; this one trades roughness against fit
    // and carries tau across that ridge.
    auto slice_tau_interweave = [&]() {
        std::vector<double> b = model.coef_from_white(chain.x);
        double xi0 = chain.x[std::size_t(nb)];
        double tau_cur =
            model.priors.tau_upper * std::exp(-softplus(-xi0));
        if (!(tau_cur > 0.0) || !std::isfinite(tau_cur)) return;
        std::vector<double> u(std::size_t(nb), 0.0);
        for (int i = 2; i < nb; ++i)
            u[std::size_t(i)] = (b[std::size_t(i)] - 2.0 * b[std::size_t(i) - 1] +
                                 b[std::size_t(i) - 2]) /
                                tau_cur;
        double k_cur =
            model.priors.k_upper * std::exp(-softplus(-chain.x[std::size_t(nb) + 1]));
        std::array<double, 7> lw{};
        if (model.dow) {
            double s = 0.0;
            for (int j = 0; j < 6; ++j) {
                lw[std::size_t(j)] = chain.x[std::size_t(nb + 2 + j)];
                s += lw[std::size_t(j)];
            }
            lw[6] = -s;
        }
        std::vector<double> bb(std::size_t(nb), 0.0);
        auto target = [&](double xi) {
            if (!std::isfinite(xi)) return kNegInf;
            double ls = -softplus(-xi), ls1 = -softplus(xi);
            double ltau = std::log(model.priors.tau_upper) + ls;
            double tau = std::exp(ltau);
            if (!(tau > 0.0)) return kNegInf;
            bb[0] = b[0];
            bb[1] = b[1];
            for (int i = 2; i < nb; ++i) {
                bb[std::size_t(i)] = 2.0 * bb[std::size_t(i) - 1] - bb[std::size_t(i) - 2] +
                                     tau * u[std::size_t(i)];
                if (!std::isfinite(bb[std::size_t(i)])) return kNegInf;
            }
            // only the eta-dependent data terms vary along this section
            double v = 0.0;
            for (std::size_t t = 0; t < model.counts.size(); ++t) {
                const auto& row = model.rows[t];
                double s = 0.0;
                for (int j = 0; j < 4; ++j)
                    s += bb[std::size_t(row.first + j)] * row.v[std::size_t(j)];
                double eta = s + (model.dow ? lw[std::size_t(model.weekday[t])] : 0.0);
                eta = std::clamp(eta, -300.0, 300.0);
                double m = std::exp(eta);
                double c = model.counts[t];
                v += c * eta - (c + k_cur) * std::log(k_cur + m);
            }
            v += ltau + ls1;
            if (model.priors.tau)
                v += log_normal_pdf(tau, model.priors.tau->mean, model.priors.tau->sd);
            return v;
        };
        double y = target(xi0) + std::log(std::max(chain.rng.uniform(), 1e-300));
        double w = 1.0;
        double lo = xi0 - w * chain.rng.uniform();
        double hi = lo + w;
        for (int i = 0; i < 60 && target(lo) > y; ++i) lo -= w;
        for (int i = 0; i < 60 && target(hi) > y; ++i) hi += w;
        double xi1 = xi0;
        for (int i = 0; i < 100; ++i) {
            double cand = lo + chain.rng.uniform() * (hi - lo);
            if (target(cand) > y) {
                xi1 = cand;
                break;
            }
            (cand < xi0 ? lo : hi) = cand;
        }
        if (xi1 == xi0) return;
        double lfinal = target(xi1); // leaves bb at the accepted curve
        if (!std::isfinite(lfinal)) return;
        Eigen::VectorXd zb(nb);
        for (int i = 0; i < nb; ++i) zb[i] = bb[std::size_t(i)] - model.mode[std::size_t(i)];
        zb = model.chol.transpose() * zb;
        for (int i = 0; i < nb; ++i) chain.x[std::size_t(i)] = zb[i];
        chain.x[std::size_t(nb)] = xi1;
        chain.refresh();
    };

    // the pair zigzags along the fit-versus-roughness ridge
    auto update_tau = [&]() {
        slice_tau();
        slice_tau_interweave();
    };
    update_tau();

    DualAveraging da;
    da.delta = st.target_accept;
    da.restart(chain.find_initial_eps());

    // adaptation phases: step-size-only buffers around doubling variance
    // estimation windows, metric updated at each window close
    int init_buf = warmup >= 150 ? 75 : std::max(warmup / 7, 1);
    int term_buf = warmup >= 150 ? 50 : std::max(warmup / 10, 1);
    int window = 25;
    int win_start = init_buf;
    int win_end = std::min(win_start + window, warmup - term_buf);
    if (2 * window + win_end > warmup - term_buf) win_end = warmup - term_buf;

    std::vector<double> mean(chain.x.size(), 0.0), m2(chain.x.size(), 0.0);
    long long n_acc = 0;

    // jitter trajectory length over the upper half of the budget; very short
    // trajectories waste gradient work on random-walk behaviour
    int leap_lo = std::max(1, st.max_leapfrog / 2);
    auto leaps = [&]() {
        return leap_lo + int(chain.rng.uniform() * double(st.max_leapfrog - leap_lo + 1));
    };

    for (int it = 0; it < warmup; ++it) {
        double astat = chain.transition(da.eps(), leaps());
        update_tau();
        da.update(astat);
        bool in_window = it >= win_start && it < win_end && win_start < win_end;
        if (in_window) {
            n_acc++;
            for (std::size_t i = 0; i < chain.x.size(); ++i) {
                double d = chain.x[i] - mean[i];
                mean[i] += d / double(n_acc);
                m2[i] += d * (chain.x[i] - mean[i]);
            }
            if (it + 1 == win_end) {
                if (n_acc >= 10) {
                    double shrink = double(n_acc) / (double(n_acc) + 5.0);
                    for (std::size_t i = 0; i < chain.x.size(); ++i) {
                        if (i == std::size_t(nb)) continue; // tau stays out of the flow
                        double v = m2[i] / double(n_acc - 1);
                        chain.inv_mass[i] = std::max(shrink * v + (1.0 - shrink) * 1e-3, 1e-10);
                    }
                }
                std::fill(mean.begin(), mean.end(), 0.0);
                std::fill(m2.begin(), m2.end(), 0.0);
                n_acc = 0;
                window *= 2;
                win_start = win_end;
                win_end = std::min(win_start + window, warmup - term_buf);
                if (2 * window + win_end > warmup - term_buf) win_end = warmup - term_buf;
                da.restart(da.eps_final());
            }
        }
    }

    double eps = da.eps_final();
    ChainOutput out;
    out.eps_final = eps;
    out.draws.reserve(std::size_t(n_draws));
    double acc = 0.0;
    for (int it = 0; it < n_draws; ++it) {
        acc += chain.transition(eps, leaps());
        update_tau();
        out.draws.push_back(model.unpack_white(chain.x));
    }
    out.accept_rate = acc / double(n_draws);
    return out;
}

FitDiagnostics evaluate_contract(const std::vector<TrendState>& draws, int n_chains,
                                 bool dow, int nb, const SamplerSettings& st) {
    FitDiagnostics diag;
    diag.max_rhat = 0.0;
    diag.min_ess = std::numeric_limits<double>::infinity();
    std::size_t n = draws.size();
    std::vector<double> buf(n);
    auto fold = [&](const std::string& name, auto&& get) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = get(draws[i]);
        ChainStats cs = split_chain_stats(buf, n_chains);
        if (cs.rhat > diag.max_rhat) {
            diag.max_rhat = cs.rhat;
            diag.max_rhat_param = name;
        }
        if (cs.ess < diag.min_ess) {
            diag.min_ess = cs.ess;
            diag.min_ess_param = name;
        }
    };
    for (int i = 0; i < nb; ++i)
        fold("b[" + std::to_string(i) + "]",
             [i](const TrendState& s) { return s.coef[std::size_t(i)]; });
    fold("tau", [](const TrendState& s) { return s.tau; });
    fold("k", [](const TrendState& s) { return s.k; });
    if (dow)
        for (int j = 0; j < 6; ++j)
            fold("log_omega[" + std::to_string(j) + "]",
                 [j](const TrendState& s) { return (*s.log_omega)[std::size_t(j)]; });
    diag.converged = diag.max_rhat < st.rhat_max && diag.min_ess > st.ess_min;
    return diag;
}

} // namespace

void TrendPriors::validate() const {
    if (tau && !(tau->sd > 0.0)) throw ParameterError("tau prior needs sd > 0");
    if (k && !(k->sd > 0.0)) throw ParameterError("k prior needs sd > 0");
    if (!(tau_upper > 0.0) || !(k_upper > 0.0))
        throw ParameterError("prior upper bounds must be positive");
}

std::string FitDiagnostics::summary() const {
    std::ostringstream os;
    os << "max split-Rhat " << max_rhat << " (" << max_rhat_param << "), min ESS " << min_ess
       << " (" << min_ess_param << "), accept rate " << accept_rate << ", attempts "
       << attempts;
    return os.str();
}

double rw2_log_prior(std::span<const double> coef, double tau) {
    if (!(tau > 0.0)) return kNegInf;
    double lp = 0.0;
    for (std::size_t i = 2; i < coef.size(); ++i) {
        double d = coef[i] - 2.0 * coef[i - 1] + coef[i - 2];
        lp += log_normal_pdf(d, 0.0, tau);
    }
    return lp;
}

double log_posterior_unconstrained(std::span<const double> x, const CountSeries& series,
                                   const SplineBasis& basis, const TrendPriors& priors,
                                   bool day_of_week, std::vector<double>* grad,
                                   bool non_centered) {
    priors.validate();
    if (basis.range_start() != series.start_date() || basis.range_end() != series.origin_date())
        throw ParameterError("basis range does not match the series");
    TrendModel model(series, basis, priors, day_of_week);
    if (int(x.size()) != model.dim())
        throw ParameterError("parameter vector does not match the model dimension");
    if (grad) grad->assign(x.size(), 0.0);
    std::vector<double> xv(x.begin(), x.end());
    return model.logp(xv, grad, non_centered);
}

double log_posterior(const TrendState& state, const CountSeries& series,
                     const SplineBasis& basis, const TrendPriors& priors) {
    priors.validate();
    if (int(state.coef.size()) != basis.n_basis())
        throw ParameterError("coefficient count does not match the basis");
    if (basis.range_start() != series.start_date() || basis.range_end() != series.origin_date())
        throw ParameterError("basis range does not match the series");
    if (!(state.tau > 0.0) || !(state.k > 0.0)) return kNegInf;
    if (state.tau >= priors.tau_upper || state.k >= priors.k_upper) return kNegInf;
    if (state.log_omega) {
        double s = 0.0;
        for (double v : *state.log_omega) s += v;
        if (std::abs(s) > 1e-8)
            throw ParameterError("log day-of-week effects must sum to zero");
    }

    double lp = rw2_log_prior(state.coef, state.tau);
    for (std::size_t t = 0; t < series.size(); ++t) {
        double s = basis.value(state.coef, double(t));
        if (state.log_omega)
            s += (*state.log_omega)[std::size_t((series.start_date() + std::int64_t(t)).weekday())];
        lp += log_negbin_pmf(series.count(t), std::exp(s), state.k);
    }
    if (priors.tau) lp += log_normal_pdf(state.tau, priors.tau->mean, priors.tau->sd);
    if (priors.k) lp += log_normal_pdf(state.k, priors.k->mean, priors.k->sd);
    if (state.log_omega)
        for (int j = 0; j < 6; ++j)
            lp += log_normal_pdf((*state.log_omega)[std::size_t(j)], 0.0, 1.0);
    return lp;
}

PosteriorSamples::PosteriorSamples(const SplineBasis& basis, Date start, int n_chains,
                                   std::vector<TrendState> draws, FitDiagnostics diag)
    : basis_(basis), start_(start), n_chains_(n_chains), draws_(std::move(draws)),
      diag_(diag) {
    if (n_chains_ < 1 || draws_.empty() || draws_.size() % std::size_t(n_chains_) != 0)
        throw ParameterError("draws must divide evenly into chains");
    for (const auto& d : draws_)
        if (int(d.coef.size()) != basis_.n_basis())
            throw ParameterError("draw dimension does not match the basis");
}

bool PosteriorSamples::has_dow() const { return draws_.front().log_omega.has_value(); }

std::vector<double> PosteriorSamples::tau_draws() const {
    std::vector<double> v(draws_.size());
    for (std::size_t i = 0; i < draws_.size(); ++i) v[i] = draws_[i].tau;
    return v;
}

std::vector<double> PosteriorSamples::k_draws() const {
    std::vector<double> v(draws_.size());
    for (std::size_t i = 0; i < draws_.size(); ++i) v[i] = draws_[i].k;
    return v;
}

PosteriorSamples fit_pspline(const CountSeries& series, const SplineBasis& basis,
                             const TrendPriors& priors, const SamplerSettings& settings,
                             bool day_of_week) {
    priors.validate();
    if (settings.chains < 4) throw ParameterError("trend fit needs at least 4 chains");
    if (settings.chains * settings.draws_per_chain < 1000)
        throw ParameterError("trend fit needs at least 1000 pooled draws");
    if (settings.warmup < 20) throw ParameterError("warmup too short");
    if (settings.max_leapfrog < 1) throw ParameterError("max_leapfrog must be positive");
    if (basis.range_start() != series.start_date() || basis.range_end() != series.origin_date())
        throw ParameterError("basis range does not match the series");

    TrendModel model(series, basis, priors, day_of_week);
    select_whitening_scales(model);

    FitDiagnostics diag;
    for (int attempt = 0; attempt < std::max(settings.max_attempts, 1); ++attempt) {
        int warmup = settings.warmup << attempt;
        int n_draws = settings.draws_per_chain << attempt;
        SamplerSettings eff = settings;
        eff.max_leapfrog = std::min(256, settings.max_leapfrog << attempt);
        std::vector<ChainOutput> outs(std::size_t(settings.chains));
        parallel_for(std::size_t(settings.chains), settings.threads,
                     [&](std::size_t lo, std::size_t hi) {
                         for (std::size_t c = lo; c < hi; ++c)
                             outs[c] = run_chain(model, eff, warmup, n_draws,
                                                 std::uint64_t(c), attempt);
                     });
        std::vector<TrendState> pooled;
        pooled.reserve(std::size_t(settings.chains) * std::size_t(n_draws));
        double acc = 0.0;
        for (auto& o : outs) {
            pooled.insert(pooled.end(), o.draws.begin(), o.draws.end());
            acc += o.accept_rate;
        }
        if (std::getenv("RESPICAST_DEBUG_CHAINS")) {
            for (std::size_t c = 0; c < outs.size(); ++c) {
                double mt = 0.0, mk = 0.0, mb = 0.0;
                for (const auto& d : outs[c].draws) {
                    mt += d.tau;
                    mk += d.k;
                    mb += d.coef[std::size_t(basis.n_basis() / 2)];
                }
                double nn = double(outs[c].draws.size());
                std::fprintf(stderr,
                             "[chain %zu] eps=%.3g accept=%.3f mean tau=%.4f k=%.2f bmid=%.4f\n",
                             c, outs[c].eps_final, outs[c].accept_rate, mt / nn, mk / nn,
                             mb / nn);
            }
        }
        diag = evaluate_contract(pooled, settings.chains, day_of_week, basis.n_basis(),
                                 settings);
        diag.accept_rate = acc / double(settings.chains);
        diag.attempts = attempt + 1;
        if (diag.converged)
            return PosteriorSamples(basis, series.start_date(), settings.chains,
                                    std::move(pooled), diag);
        log_warn("trend fit attempt " + std::to_string(attempt + 1) +
                 " failed convergence (" + diag.summary() + ")");
    }
    throw ConvergenceError("trend fit failed the convergence contract", diag.summary());
}

std::vector<std::vector<double>> growth_rate(const PosteriorSamples& samples) {
    const SplineBasis& basis = samples.basis();
    int t_len = int(basis.range_days()) + 1;
    int n = samples.n_draws();
    std::size_t t_rows = std::size_t(t_len);
    std::size_t nd = std::size_t(n);
    std::vector<std::vector<double>> out(t_rows, std::vector<double>(nd));
    for (int t = 0; t < t_len; ++t) {
        SplineBasis::Local row = basis.eval_deriv(double(t));
        for (int i = 0; i < n; ++i) {
            const auto& coef = samples.draw(i).coef;
            double r = 0.0;
            for (int j = 0; j < 4; ++j)
                r += coef[std::size_t(row.first + j)] * row.v[std::size_t(j)];
            out[std::size_t(t)][std::size_t(i)] = r;
        }
    }
    return out;
}

TrendSummary summarise_trend(const PosteriorSamples& samples,
                             const std::optional<DayOfWeekEffects>& external_dow) {
    if (samples.n_draws() < 400)
        throw ParameterError("trend summary needs at least 400 draws");
    const SplineBasis& basis = samples.basis();
    int t_len = int(basis.range_days()) + 1;
    int n = samples.n_draws();
    bool model_dow = samples.has_dow();
    bool any_dow = model_dow || external_dow.has_value();

    TrendSummary out;
    out.start = samples.start_date();
    out.n_days = t_len;
    out.expected.resize(std::size_t(t_len));
    if (any_dow) out.expected_dow.resize(std::size_t(t_len));
    out.growth.resize(std::size_t(t_len));
    out.p_growth.resize(std::size_t(t_len));
    out.doubling_time.resize(std::size_t(t_len));
    out.stable.resize(std::size_t(t_len));

    std::size_t nd = std::size_t(n);
    std::vector<double> es(nd), esd(nd), gr(nd);
    const std::vector<double> qs(kSummaryQuantiles.begin(), kSummaryQuantiles.end());
    for (int t = 0; t < t_len; ++t) {
        SplineBasis::Local row = basis.eval(double(t));
        SplineBasis::Local drow = basis.eval_deriv(double(t));
        int wd = (samples.start_date() + t).weekday();
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            const auto& st = samples.draw(i);
            double s = 0.0, r = 0.0;
            for (int j = 0; j < 4; ++j) {
                s += st.coef[std::size_t(row.first + j)] * row.v[std::size_t(j)];
                r += st.coef[std::size_t(drow.first + j)] * drow.v[std::size_t(j)];
            }
            es[std::size_t(i)] = std::exp(s);
            gr[std::size_t(i)] = r;
            if (r > 0.0) ++pos;
            if (model_dow)
                esd[std::size_t(i)] = std::exp(s + (*st.log_omega)[std::size_t(wd)]);
            else if (external_dow)
                esd[std::size_t(i)] = std::exp(s) * external_dow->omega[std::size_t(wd)];
        }
        auto eq = quantiles(es, qs);
        auto gq = quantiles(gr, qs);
        for (int q = 0; q < 5; ++q) {
            out.expected[std::size_t(t)][std::size_t(q)] = eq[std::size_t(q)];
            out.growth[std::size_t(t)][std::size_t(q)] = gq[std::size_t(q)];
        }
        if (any_dow) {
            auto dq = quantiles(esd, qs);
            for (int q = 0; q < 5; ++q)
                out.expected_dow[std::size_t(t)][std::size_t(q)] = dq[std::size_t(q)];
        }
        out.p_growth[std::size_t(t)] = double(pos) / double(n);
        double med = gq[2];
        out.doubling_time[std::size_t(t)] = std::numbers::ln2 / med;
        out.stable[std::size_t(t)] = (gq[0] < 0.0 && gq[4] > 0.0) ? 1 : 0;
    }
    return out;
}

TrendPriors derive_informative_priors(const PosteriorSamples& samples) {
    auto tv = samples.tau_draws();
    auto kv = samples.k_draws();
    NormalPrior tp{mean_of(tv), sd_of(tv)};
    NormalPrior kp{mean_of(kv), sd_of(kv)};
    if (!(tp.sd > 0.0) || !std::isfinite(tp.sd) || !(kp.sd > 0.0) || !std::isfinite(kp.sd))
        throw DataError("degenerate posterior: zero spread in tau or k");
    TrendPriors out;
    out.tau = tp;
    out.k = kp;
    return out;
}

void write_posterior_csv(const std::string& path, const PosteriorSamples& samples) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "draw,chain,parameter,value\n";
    int per_chain = samples.draws_per_chain();
    for (int i = 0; i < samples.n_draws(); ++i) {
        const TrendState& st = samples.draw(i);
        int chain = samples.chain_of(i);
        int draw = i % per_chain;
        std::string prefix = std::to_string(draw) + "," + std::to_string(chain) + ",";
        for (std::size_t j = 0; j < st.coef.size(); ++j)
            os << prefix << "b[" << j << "]," << fmt_double(st.coef[j]) << "\n";
        os << prefix << "tau," << fmt_double(st.tau) << "\n";
        os << prefix << "k," << fmt_double(st.k) << "\n";
        if (st.log_omega)
            for (int j = 0; j < 7; ++j)
                os << prefix << "log_omega[" << j << "],"
                   << fmt_double((*st.log_omega)[std::size_t(j)]) << "\n";
    }
    if (!os) throw DataError("write failed: " + path);
}

TrendPriors priors_from_posterior_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    int pcol = table.column("parameter");
    int vcol = table.column("value");
    if (pcol < 0 || vcol < 0)
        throw DataError("posterior export missing parameter/value columns: " + path);
    std::vector<double> tv, kv;
    for (const auto& row : table.rows) {
        const std::string& name = row[std::size_t(pcol)];
        if (name == "tau")
            tv.push_back(parse_double(row[std::size_t(vcol)]));
        else if (name == "k")
            kv.push_back(parse_double(row[std::size_t(vcol)]));
    }
    if (tv.size() < 2 || kv.size() < 2)
        throw DataError("posterior export lacks tau/k draws: " + path);
    NormalPrior tp{mean_of(tv), sd_of(tv)};
    NormalPrior kp{mean_of(kv), sd_of(kv)};
    if (!(tp.sd > 0.0) || !(kp.sd > 0.0))
        throw DataError("degenerate posterior export: zero spread in tau or k");
    TrendPriors out;
    out.tau = tp;
    out.k = kp;
    return out;
}

void write_trend_csv(const std::string& path, const TrendSummary& summary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "date,quantity,quantile,value\n";
    auto q_rows = [&](Date d, const char* name, const std::array<double, 5>& v) {
        for (int q = 0; q < 5; ++q)
            os << d.iso() << "," << name << "," << fmt_double(kSummaryQuantiles[std::size_t(q)])
               << "," << fmt_double(v[std::size_t(q)]) << "\n";
    };
    for (int t = 0; t < summary.n_days; ++t) {
        Date d = summary.start + t;
        q_rows(d, "expected", summary.expected[std::size_t(t)]);
        if (!summary.expected_dow.empty())
            q_rows(d, "expected_dow", summary.expected_dow[std::size_t(t)]);
        q_rows(d, "growth_rate", summary.growth[std::size_t(t)]);
        os << d.iso() << ",p_growth,," << fmt_double(summary.p_growth[std::size_t(t)]) << "\n";
        os << d.iso() << ",doubling_time,,"
           << fmt_double(summary.doubling_time[std::size_t(t)]) << "\n";
        os << d.iso() << ",stable,," << int(summary.stable[std::size_t(t)]) << "\n";
    }
    if (!os) throw DataError("write failed: " + path);
}

} // namespace respicast
