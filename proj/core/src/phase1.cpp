#include "leadlag/phase1.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/Cholesky>

#include "leadlag/errors.hpp"
#include "leadlag/proxops.hpp"

namespace leadlag {

namespace {

double trace_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a.array() * b.array()).sum();
}

struct Phase1Lagrangian {
    // fit = ||Y - X W||_F^2 is passed in because the caller already has it.
    static double value(double fit, double nuclear_w_hat, double l21_theta, double rho1,
                        double rho2, const Eigen::MatrixXd& residual,
                        const Eigen::MatrixXd& lambda1, double u) {
        return fit + rho1 * nuclear_w_hat + rho2 * l21_theta + u * residual.squaredNorm() +
               trace_inner(lambda1, residual);
    }
};

Eigen::MatrixXd w_update_gradient_descent(const Eigen::MatrixXd& xtx, const Eigen::MatrixXd& xty,
                                          const Eigen::MatrixXd& target,
                                          const Eigen::MatrixXd& lambda1, double u,
                                          Eigen::MatrixXd w) {
    // Steepest descent with the exact step of the quadratic; used only when
    // factorizing X^T X + uI is too expensive.
    for (int i = 0; i < 500; ++i) {
        Eigen::MatrixXd grad = 2.0 * (xtx * w - xty) + 2.0 * u * (w - target) + lambda1;
        const double gnorm2 = grad.squaredNorm();
        if (gnorm2 <= 1e-20 * std::max(1.0, w.squaredNorm())) {
            break;
        }
        Eigen::MatrixXd hg = 2.0 * (xtx * grad) + 2.0 * u * grad;
        const double curvature = trace_inner(grad, hg);
        if (curvature <= 0.0) {
            break;
        }
        w -= (gnorm2 / curvature) * grad;
    }
    return w;
}

} // namespace

void Phase1Config::validate() const {
    if (rho1 && *rho1 < 0.0) {
        throw ConfigError("phase1.rho1 must be >= 0");
    }
    if (rho2 && *rho2 < 0.0) {
        throw ConfigError("phase1.rho2 must be >= 0");
    }
    if (!(u0 > 0.0)) {
        throw ConfigError("phase1.u0 must be > 0");
    }
    if (u0 > u_max) {
        throw ConfigError("phase1.u0 must not exceed phase1.u_max");
    }
    if (u_growth < 1.0) {
        throw ConfigError("phase1.u_growth must be >= 1");
    }
    if (max_iter < 1) {
        throw ConfigError("phase1.max_iter must be >= 1");
    }
    if (!(tol_primal > 0.0) || !(tol_obj > 0.0)) {
        throw ConfigError("phase1 tolerances must be > 0");
    }
}

const Phase1ViewResult& Phase1Result::view(const std::string& id) const {
    for (const auto& v : views) {
        if (v.view == id) {
            return v;
        }
    }
    throw UnknownViewError("phase1 result has no view '" + id + "'");
}

Eigen::MatrixXd phase1_w_update(const Eigen::MatrixXd& xtx, const Eigen::MatrixXd& xty,
                                const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& theta,
                                const Eigen::MatrixXd& lambda1, double u) {
    if (!(u > 0.0)) {
        throw SingularSystemError("phase1_w_update: penalty must be > 0");
    }
    Eigen::MatrixXd lhs = xtx;
    lhs.diagonal().array() += u;
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success) {
        throw SingularSystemError("phase1_w_update: Cholesky failed");
    }
    return llt.solve(xty + u * (w_hat + theta) - 0.5 * lambda1);
}

Eigen::MatrixXd phase1_theta_update(const Eigen::MatrixXd& w, const Eigen::MatrixXd& w_hat,
                                    const Eigen::MatrixXd& lambda1, double u, double rho2) {
    return group_soft_threshold(w - w_hat + lambda1 / (2.0 * u), rho2 / (2.0 * u));
}

Eigen::MatrixXd phase1_w_hat_update(const Eigen::MatrixXd& w, const Eigen::MatrixXd& theta,
                                    const Eigen::MatrixXd& lambda1, double u, double rho1) {
    return svt(w - theta + lambda1 / (2.0 * u), rho1 / (2.0 * u));
}

Phase1ViewResult phase1_fit_view(const LagPair& pair, const Phase1Config& cfg) {
    cfg.validate();
    const Eigen::Index s = pair.x.rows();
    const Eigen::Index n = pair.x.cols();
    if (pair.y.rows() != s || pair.y.cols() != n) {
        throw ShapeMismatchError("phase1_fit_view: X and Y shapes differ");
    }
    if (s < 2) {
        throw ConfigError("phase1_fit_view: need at least 2 rows");
    }
    if (!pair.x.allFinite() || !pair.y.allFinite()) {
        throw NonFiniteInputError("phase1_fit_view: lag pair contains NaN or Inf");
    }

    const Eigen::MatrixXd xtx = pair.x.transpose() * pair.x;
    const Eigen::MatrixXd xty = pair.x.transpose() * pair.y;

    // Ridge warm start, consistent with the constraint (W_hat = W, Theta = 0).
    const double eps = std::max(1e-6 * xtx.trace() / static_cast<double>(n), 1e-12);
    Eigen::MatrixXd lhs0 = xtx;
    lhs0.diagonal().array() += eps;
    Eigen::MatrixXd w = Eigen::LLT<Eigen::MatrixXd>(lhs0).solve(xty);

    SvdFactors init_svd = svd_decompose(w);
    const double sigma1 = init_svd.s.size() > 0 ? init_svd.s(0) : 0.0;
    const double rho1 = cfg.rho1.value_or(sigma1 / std::sqrt(static_cast<double>(n)));
    // Unset rho2 is priced above the typical column norm of the warm start,
    // so only genuinely outlying columns are worth paying for.
    const double rho2 = cfg.rho2.value_or(2.0 * w.norm() / std::sqrt(static_cast<double>(n)));

    Phase1ViewResult res;
    res.view = pair.view;
    res.rho1 = rho1;
    res.rho2 = rho2;

    Eigen::MatrixXd w_hat = w;
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd lambda1 = Eigen::MatrixXd::Zero(n, n);
    double u = cfg.u0;
    double nuclear_w_hat = init_svd.s.sum();
    Eigen::Index rank_w_hat = (init_svd.s.array() > 0.0).count();
    double l21_theta = 0.0;
    double fit = (pair.y - pair.x * w).squaredNorm();
    double prev_objective = std::numeric_limits<double>::quiet_NaN();

    // The factorization of X^T X + uI is reused while u sits at the cap.
    double factored_u = -1.0;
    Eigen::LLT<Eigen::MatrixXd> llt;

    res.history.reserve(static_cast<std::size_t>(cfg.max_iter));
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        Phase1IterationStats stats;
        stats.u = u;

        Eigen::MatrixXd residual = w - w_hat - theta;
        stats.lagrangian_entry =
            Phase1Lagrangian::value(fit, nuclear_w_hat, l21_theta, rho1, rho2, residual, lambda1, u);

        if (u != factored_u) {
            Eigen::MatrixXd lhs = xtx;
            lhs.diagonal().array() += u;
            llt.compute(lhs);
            if (llt.info() != Eigen::Success) {
                throw SingularSystemError("phase1_fit_view: Cholesky failed");
            }
            factored_u = u;
        }
        if (cfg.w_solver == WSolver::Direct) {
            w = llt.solve(xty + u * (w_hat + theta) - 0.5 * lambda1);
        } else {
            w = w_update_gradient_descent(xtx, xty, w_hat + theta, lambda1, u, w);
        }
        fit = (pair.y - pair.x * w).squaredNorm();
        residual = w - w_hat - theta;
        stats.lagrangian_after_w =
            Phase1Lagrangian::value(fit, nuclear_w_hat, l21_theta, rho1, rho2, residual, lambda1, u);

        theta = phase1_theta_update(w, w_hat, lambda1, u, rho2);
        l21_theta = l21_norm(theta);
        residual = w - w_hat - theta;
        stats.lagrangian_after_theta =
            Phase1Lagrangian::value(fit, nuclear_w_hat, l21_theta, rho1, rho2, residual, lambda1, u);

        SvtResult svt_res = svt_with_rank(w - theta + lambda1 / (2.0 * u), rho1 / (2.0 * u));
        w_hat = std::move(svt_res.value);
        nuclear_w_hat = svt_res.nuclear_norm;
        rank_w_hat = svt_res.rank;
        residual = w - w_hat - theta;
        stats.lagrangian_after_w_hat =
            Phase1Lagrangian::value(fit, nuclear_w_hat, l21_theta, rho1, rho2, residual, lambda1, u);

        lambda1 += 2.0 * u * residual;
        u = std::min(u * cfg.u_growth, cfg.u_max);

        stats.objective = fit + rho1 * nuclear_w_hat + rho2 * l21_theta;
        stats.primal_residual = residual.norm();
        stats.rank_w_hat = rank_w_hat;
        stats.theta_nonzero_columns = nonzero_columns(theta);
        res.history.push_back(stats);

        if (!std::isfinite(stats.objective) || stats.objective > 1e12 ||
            !std::isfinite(stats.primal_residual)) {
            throw DivergedError("phase1_fit_view: objective exceeded 1e12 or turned non-finite "
                                "at iteration " +
                                std::to_string(iter + 1));
        }

        const bool primal_ok =
            stats.primal_residual <= cfg.tol_primal * std::max(1.0, w.norm());
        const bool obj_ok =
            std::isfinite(prev_objective) &&
            std::abs(stats.objective - prev_objective) <=
                cfg.tol_obj * std::max(1.0, std::abs(prev_objective));
        prev_objective = stats.objective;
        if (primal_ok && obj_ok) {
            res.converged = true;
            break;
        }
    }

    res.w = std::move(w);
    res.w_hat = std::move(w_hat);
    res.theta = std::move(theta);
    res.lambda1 = std::move(lambda1);
    return res;
}

Phase1Result phase1_fit(const PanelSeries& panel, Eigen::Index window_begin,
                        Eigen::Index window_end, const Phase1Config& cfg, int jobs) {
    const std::size_t n_views = panel.views.size();
    std::vector<LagPair> pairs;
    pairs.reserve(n_views);
    for (const auto& view : panel.views) {
        pairs.push_back(make_lag_pair(panel, view, window_begin, window_end));
    }

    Phase1Result result;
    result.views.resize(n_views);
    if (jobs <= 1 || n_views <= 1) {
        for (std::size_t v = 0; v < n_views; ++v) {
            result.views[v] = phase1_fit_view(pairs[v], cfg);
        }
        return result;
    }

    std::vector<std::exception_ptr> errors(n_views);
    std::vector<std::thread> workers;
    std::size_t stride = static_cast<std::size_t>(std::max(1, jobs));
    for (std::size_t start = 0; start < std::min(stride, n_views); ++start) {
        workers.emplace_back([&, start] {
            for (std::size_t v = start; v < n_views; v += stride) {
                try {
                    result.views[v] = phase1_fit_view(pairs[v], cfg);
                } catch (...) {
                    errors[v] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (const auto& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
    return result;
}

} // namespace leadlag
