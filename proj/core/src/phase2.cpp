#include "leadlag/phase2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "leadlag/errors.hpp"
#include "leadlag/proxops.hpp"

namespace leadlag {

namespace {

double trace_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a.array() * b.array()).sum();
}

struct Phase2State {
    std::vector<Eigen::MatrixXd> w_hat;
    std::vector<Eigen::MatrixXd> w_tilde;
    std::vector<Eigen::MatrixXd> phi;
    std::vector<Eigen::MatrixXd> a;
    std::vector<Eigen::MatrixXd> lambda2;

    double lagrangian(double rho3, double u) const {
        double value = alignment_objective(a, w_tilde);
        for (std::size_t v = 0; v < w_hat.size(); ++v) {
            value += rho3 * l21_norm(phi[v]);
            const Eigen::MatrixXd residual = w_hat[v] - w_tilde[v] - phi[v];
            value += u * residual.squaredNorm() + trace_inner(lambda2[v], residual);
        }
        return value;
    }
};

} // namespace

void Phase2Config::validate() const {
    if (rho3 && *rho3 < 0.0) {
        throw ConfigError("phase2.rho3 must be >= 0");
    }
    if (k && *k < 1) {
        throw ConfigError("phase2.k must be >= 1");
    }
    if (!(u0 > 0.0)) {
        throw ConfigError("phase2.u0 must be > 0");
    }
    if (u0 > u_max) {
        throw ConfigError("phase2.u0 must not exceed phase2.u_max");
    }
    if (u_growth < 1.0) {
        throw ConfigError("phase2.u_growth must be >= 1");
    }
    if (max_iter < 1) {
        throw ConfigError("phase2.max_iter must be >= 1");
    }
    if (!(tol_primal > 0.0) || !(tol_obj > 0.0)) {
        throw ConfigError("phase2 tolerances must be > 0");
    }
}

const Phase2ViewResult& Phase2Result::view(const std::string& id) const {
    for (const auto& v : views) {
        if (v.view == id) {
            return v;
        }
    }
    throw UnknownViewError("phase2 result has no view '" + id + "'");
}

double alignment_objective(const std::vector<Eigen::MatrixXd>& a,
                           const std::vector<Eigen::MatrixXd>& w_tilde) {
    double value = 0.0;
    for (std::size_t v = 0; v < a.size(); ++v) {
        const Eigen::MatrixXd proj_v = a[v].transpose() * w_tilde[v];
        for (std::size_t w = v + 1; w < a.size(); ++w) {
            value += (proj_v - a[w].transpose() * w_tilde[w]).squaredNorm();
        }
    }
    return value;
}

Eigen::MatrixXd phase2_w_tilde_update(const Eigen::MatrixXd& a, const Eigen::MatrixXd& coupling,
                                      const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& phi,
                                      const Eigen::MatrixXd& lambda2, double u,
                                      Eigen::Index num_views) {
    if (!(u > 0.0)) {
        throw SingularSystemError("phase2_w_tilde_update: penalty must be > 0");
    }
    const double alpha = 2.0 * u;
    const double beta = 2.0 * static_cast<double>(num_views - 1);
    Eigen::MatrixXd rhs = 2.0 * u * (w_hat - phi) + lambda2;
    if (num_views > 1) {
        rhs += 2.0 * (a * coupling);
    }
    if (beta == 0.0) {
        return rhs / alpha;
    }
    // (alpha I + beta A A^T)^-1 = (1/alpha)(I - beta/(alpha+beta) A A^T)
    // because A has orthonormal columns.
    const Eigen::MatrixXd at_rhs = a.transpose() * rhs;
    return (rhs - (beta / (alpha + beta)) * (a * at_rhs)) / alpha;
}

Eigen::MatrixXd phase2_phi_update(const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& w_tilde,
                                  const Eigen::MatrixXd& lambda2, double u, double rho3) {
    return group_soft_threshold(w_hat - w_tilde + lambda2 / (2.0 * u), rho3 / (2.0 * u));
}

Eigen::MatrixXd phase2_a_update(const Eigen::MatrixXd& w_tilde,
                                const std::vector<Eigen::MatrixXd>& other_projections,
                                const Eigen::MatrixXd& a_previous, AUpdate mode) {
    const Eigen::Index k = a_previous.cols();
    const double pairs = static_cast<double>(other_projections.size());
    const Eigen::MatrixXd ggt = w_tilde * w_tilde.transpose();
    Eigen::MatrixXd a_init = smallest_eigenvectors(pairs * ggt, k);
    if (mode == AUpdate::EigenOnly || other_projections.empty()) {
        return a_init;
    }

    Eigen::MatrixXd proj_sum_t = Eigen::MatrixXd::Zero(w_tilde.rows(), k);
    double proj_const = 0.0;
    for (const auto& p : other_projections) {
        proj_sum_t += p.transpose();
        proj_const += p.squaredNorm();
    }
    const Eigen::MatrixXd b = w_tilde * proj_sum_t; // N x k

    auto objective = [&](const Eigen::MatrixXd& a) {
        return pairs * (a.transpose() * w_tilde).squaredNorm() - 2.0 * trace_inner(a, b) +
               proj_const;
    };
    auto gradient = [&](const Eigen::MatrixXd& a) {
        return 2.0 * pairs * (ggt * a) - 2.0 * b;
    };

    StiefelResult refined = stiefel_minimize(objective, gradient, a_init);
    const double f_prev = objective(a_previous);
    if (refined.objective <= f_prev) {
        return refined.a;
    }
    // The eigen restart landed above the previous iterate; refine from the
    // previous iterate instead so the outer solve never moves uphill.
    StiefelResult from_prev = stiefel_minimize(objective, gradient, a_previous);
    return from_prev.objective <= refined.objective ? from_prev.a : refined.a;
}

Phase2Result phase2_fit(const Phase1Result& phase1, const Phase2Config& cfg) {
    cfg.validate();
    const std::size_t n_views = phase1.views.size();
    if (n_views == 0) {
        throw ConfigError("phase2_fit: no views");
    }
    const Eigen::Index n = phase1.views[0].w_hat.rows();
    for (const auto& view : phase1.views) {
        if (view.w_hat.rows() != n || view.w_hat.cols() != n) {
            throw ShapeMismatchError("phase2_fit: view matrices must be square and same size");
        }
        if (!view.w_hat.allFinite()) {
            throw NonFiniteInputError("phase2_fit: input matrix contains NaN or Inf");
        }
    }

    const Eigen::Index k = cfg.k.value_or(
        std::max<Eigen::Index>(2, (n + 9) / 10));
    if (k > n) {
        throw ConfigError("phase2.k must not exceed the entity count");
    }

    Phase2Result result;
    result.k = k;

    if (n_views == 1) {
        // Nothing to align against; flag the degenerate case.
        Phase2ViewResult view;
        view.view = phase1.views[0].view;
        view.w_tilde = phase1.views[0].w_hat;
        view.phi = Eigen::MatrixXd::Zero(n, n);
        view.a = Eigen::MatrixXd::Identity(n, k);
        view.lambda2 = Eigen::MatrixXd::Zero(n, n);
        result.views.push_back(std::move(view));
        result.converged = true;
        result.degenerate_single_view = true;
        result.rho3 = cfg.rho3.value_or(0.0);
        return result;
    }

    double sigma1_max = 0.0;
    for (const auto& view : phase1.views) {
        const SvdFactors f = svd_decompose(view.w_hat);
        if (f.s.size() > 0) {
            sigma1_max = std::max(sigma1_max, f.s(0));
        }
    }
    const double rho3 =
        cfg.rho3.value_or(0.5 * sigma1_max / std::sqrt(static_cast<double>(n)));
    result.rho3 = rho3;

    Phase2State state;
    state.w_hat.reserve(n_views);
    for (const auto& view : phase1.views) {
        state.w_hat.push_back(view.w_hat);
        state.w_tilde.push_back(view.w_hat);
        state.phi.push_back(Eigen::MatrixXd::Zero(n, n));
        state.lambda2.push_back(Eigen::MatrixXd::Zero(n, n));
    }
    const double pair_count = static_cast<double>(n_views - 1);
    for (std::size_t v = 0; v < n_views; ++v) {
        state.a.push_back(smallest_eigenvectors(
            pair_count * (state.w_tilde[v] * state.w_tilde[v].transpose()), k));
    }

    double u = cfg.u0;
    double prev_objective = std::numeric_limits<double>::quiet_NaN();
    result.history.reserve(static_cast<std::size_t>(cfg.max_iter));

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        Phase2IterationStats stats;
        stats.u = u;
        stats.lagrangian_entry = state.lagrangian(rho3, u);

        // View blocks run in ascending view order on the freshest values, so
        // each exact sub-solve can only lower the Lagrangian.
        for (std::size_t v = 0; v < n_views; ++v) {
            Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(k, n);
            for (std::size_t w = 0; w < n_views; ++w) {
                if (w != v) {
                    coupling += state.a[w].transpose() * state.w_tilde[w];
                }
            }
            state.w_tilde[v] = phase2_w_tilde_update(
                state.a[v], coupling, state.w_hat[v], state.phi[v], state.lambda2[v], u,
                static_cast<Eigen::Index>(n_views));
        }
        stats.lagrangian_after_w_tilde = state.lagrangian(rho3, u);

        for (std::size_t v = 0; v < n_views; ++v) {
            std::vector<Eigen::MatrixXd> other_projections;
            other_projections.reserve(n_views - 1);
            for (std::size_t w = 0; w < n_views; ++w) {
                if (w != v) {
                    other_projections.push_back(state.a[w].transpose() * state.w_tilde[w]);
                }
            }
            state.a[v] =
                phase2_a_update(state.w_tilde[v], other_projections, state.a[v], cfg.a_update);
            stats.max_ortho_error = std::max(
                stats.max_ortho_error,
                (state.a[v].transpose() * state.a[v] - Eigen::MatrixXd::Identity(k, k)).norm());
        }
        stats.lagrangian_after_a = state.lagrangian(rho3, u);

        for (std::size_t v = 0; v < n_views; ++v) {
            state.phi[v] =
                phase2_phi_update(state.w_hat[v], state.w_tilde[v], state.lambda2[v], u, rho3);
        }
        stats.lagrangian_after_phi = state.lagrangian(rho3, u);

        double phi_l21 = 0.0;
        for (std::size_t v = 0; v < n_views; ++v) {
            const Eigen::MatrixXd residual = state.w_hat[v] - state.w_tilde[v] - state.phi[v];
            state.lambda2[v] += 2.0 * u * residual;
            stats.max_primal_residual = std::max(stats.max_primal_residual, residual.norm());
            stats.phi_nonzero_columns += nonzero_columns(state.phi[v]);
            phi_l21 += l21_norm(state.phi[v]);
        }
        u = std::min(u * cfg.u_growth, cfg.u_max);

        stats.alignment = alignment_objective(state.a, state.w_tilde);
        stats.objective = stats.alignment + rho3 * phi_l21;
        result.history.push_back(stats);

        if (!std::isfinite(stats.objective) || stats.objective > 1e12 ||
            !std::isfinite(stats.max_primal_residual)) {
            throw DivergedError("phase2_fit: objective exceeded 1e12 or turned non-finite at "
                                "iteration " +
                                std::to_string(iter + 1));
        }

        bool primal_ok = true;
        for (std::size_t v = 0; v < n_views; ++v) {
            const double scale = std::max(1.0, state.w_hat[v].norm());
            if ((state.w_hat[v] - state.w_tilde[v] - state.phi[v]).norm() >
                cfg.tol_primal * scale) {
                primal_ok = false;
                break;
            }
        }
        const bool obj_ok = std::isfinite(prev_objective) &&
                            std::abs(stats.objective - prev_objective) <=
                                cfg.tol_obj * std::max(1.0, std::abs(prev_objective));
        prev_objective = stats.objective;
        if (primal_ok && obj_ok) {
            result.converged = true;
            break;
        }
    }

    result.views.resize(n_views);
    for (std::size_t v = 0; v < n_views; ++v) {
        result.views[v].view = phase1.views[v].view;
        result.views[v].w_tilde = std::move(state.w_tilde[v]);
        result.views[v].phi = std::move(state.phi[v]);
        result.views[v].a = std::move(state.a[v]);
        result.views[v].lambda2 = std::move(state.lambda2[v]);
    }
    return result;
}

} // namespace leadlag
