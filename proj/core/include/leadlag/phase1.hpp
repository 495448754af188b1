#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leadlag/panel.hpp"

namespace leadlag {

enum class WSolver { Direct, GradientDescent };

/// Hyperparameters for the per-view alternating solver that splits the
/// regression coefficient matrix into a low-rank part and column-group-sparse
/// outlier columns. Unset weights are resolved from the ridge initializer:
/// rho1 = sigma_1(W_init)/sqrt(N), rho2 = 2*||W_init||_F/sqrt(N).
struct Phase1Config {
    std::optional<double> rho1; // nuclear-norm weight
    std::optional<double> rho2; // L2,1 weight
    double u0 = 1e-2;           // initial penalty
    double u_max = 1e10;
    double u_growth = 1.5;
    int max_iter = 500;
    double tol_primal = 1e-6;
    double tol_obj = 1e-8;
    WSolver w_solver = WSolver::Direct;

    void validate() const;
};

/// Per-iteration diagnostics. The lagrangian_* fields snapshot the augmented
/// Lagrangian after each block update inside the iteration (fixed multiplier
/// and penalty), which is where the monotone-descent guarantee lives.
struct Phase1IterationStats {
    double objective = 0.0;       // data fit + rho1*||W_hat||_* + rho2*||Theta||_{2,1}
    double lagrangian_entry = 0.0;
    double lagrangian_after_w = 0.0;
    double lagrangian_after_theta = 0.0;
    double lagrangian_after_w_hat = 0.0;
    double primal_residual = 0.0; // ||W - W_hat - Theta||_F
    Eigen::Index rank_w_hat = 0;
    Eigen::Index theta_nonzero_columns = 0;
    double u = 0.0;               // penalty used this iteration
};

struct Phase1ViewResult {
    std::string view;
    Eigen::MatrixXd w;       // coarse coefficients
    Eigen::MatrixXd w_hat;   // low-rank part
    Eigen::MatrixXd theta;   // column-sparse outliers
    Eigen::MatrixXd lambda1; // multiplier
    std::vector<Phase1IterationStats> history;
    bool converged = false;
    double rho1 = 0.0; // resolved weights actually used
    double rho2 = 0.0;
};

struct Phase1Result {
    std::vector<Phase1ViewResult> views;

    const Phase1ViewResult& view(const std::string& id) const;
};

/// Exact minimizer of the W block: solves the SPD system
/// (X^T X + u I) W = X^T Y + u (W_hat + Theta) - lambda1 / 2.
Eigen::MatrixXd phase1_w_update(const Eigen::MatrixXd& xtx, const Eigen::MatrixXd& xty,
                                const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& theta,
                                const Eigen::MatrixXd& lambda1, double u);

/// Theta block: column group soft threshold of W - W_hat + lambda1/(2u) at
/// level rho2/(2u).
Eigen::MatrixXd phase1_theta_update(const Eigen::MatrixXd& w, const Eigen::MatrixXd& w_hat,
                                    const Eigen::MatrixXd& lambda1, double u, double rho2);

/// W_hat block: singular value thresholding of W - Theta + lambda1/(2u) at
/// level rho1/(2u).
Eigen::MatrixXd phase1_w_hat_update(const Eigen::MatrixXd& w, const Eigen::MatrixXd& theta,
                                    const Eigen::MatrixXd& lambda1, double u, double rho1);

/// Runs the alternating solver on one view's lag pair. Deterministic for
/// fixed inputs. Throws DivergedError when the objective exceeds 1e12 or
/// turns non-finite; returns converged=false when max_iter is hit first.
Phase1ViewResult phase1_fit_view(const LagPair& pair, const Phase1Config& cfg);

/// Fits every view of the panel over the inclusive timestamp window.
/// Views are independent; jobs > 1 solves them in parallel with identical
/// results.
Phase1Result phase1_fit(const PanelSeries& panel, Eigen::Index window_begin,
                        Eigen::Index window_end, const Phase1Config& cfg, int jobs = 1);

} // namespace leadlag
