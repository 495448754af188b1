#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leadlag/phase1.hpp"

namespace leadlag {

enum class AUpdate { EigenInitRefine, EigenOnly };

/// Hyperparameters for the cross-view solver that aligns per-view influence
/// matrices in a shared k-dimensional latent space and splits off
/// view-inconsistent outlier columns. Unset values resolve to
/// k = max(2, ceil(N/10)) and rho3 = 0.5 * max_v sigma_1(W_hat^v) / sqrt(N).
struct Phase2Config {
    std::optional<double> rho3; // L2,1 weight on the inconsistency matrices
    std::optional<Eigen::Index> k;
    double u0 = 1.0;
    double u_max = 1e10;
    double u_growth = 1.5;
    int max_iter = 500;
    double tol_primal = 1e-6;
    double tol_obj = 1e-8;
    AUpdate a_update = AUpdate::EigenInitRefine;

    void validate() const;
};

struct Phase2IterationStats {
    double objective = 0.0;  // alignment + rho3 * sum_v ||Phi^v||_{2,1}
    double alignment = 0.0;  // sum over unordered view pairs of ||A^v'T W~^v - A^v''T W~^v'||_F^2
    double lagrangian_entry = 0.0;
    double lagrangian_after_w_tilde = 0.0;
    double lagrangian_after_a = 0.0;
    double lagrangian_after_phi = 0.0;
    double max_primal_residual = 0.0; // max_v ||W_hat^v - W~^v - Phi^v||_F
    double max_ortho_error = 0.0;     // max_v ||A^vT A^v - I||_F
    Eigen::Index phi_nonzero_columns = 0; // summed over views
    double u = 0.0;
};

struct Phase2ViewResult {
    std::string view;
    Eigen::MatrixXd w_tilde; // robust influence matrix
    Eigen::MatrixXd phi;     // inconsistency columns
    Eigen::MatrixXd a;       // N x k, orthonormal columns
    Eigen::MatrixXd lambda2;
};

struct Phase2Result {
    std::vector<Phase2ViewResult> views;
    std::vector<Phase2IterationStats> history;
    bool converged = false;
    bool degenerate_single_view = false;
    Eigen::Index k = 0;
    double rho3 = 0.0;

    const Phase2ViewResult& view(const std::string& id) const;
};

/// Alignment objective over unordered view pairs, given per-view projections
/// A and matrices W. Exposed for property checks on the objective itself.
double alignment_objective(const std::vector<Eigen::MatrixXd>& a,
                           const std::vector<Eigen::MatrixXd>& w_tilde);

/// Exact minimizer of one view's W~ block given the coupling term
/// B = sum_{v' != v} A^v'T W~^v' (k x N): solves
/// (2(V-1) A A^T + 2u I) W~ = 2 A B + 2u W_hat - 2u Phi + lambda2
/// through the Sherman-Morrison-Woodbury identity (A has orthonormal columns).
Eigen::MatrixXd phase2_w_tilde_update(const Eigen::MatrixXd& a, const Eigen::MatrixXd& coupling,
                                      const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& phi,
                                      const Eigen::MatrixXd& lambda2, double u,
                                      Eigen::Index num_views);

/// Phi block: column group soft threshold of W_hat - W~ + lambda2/(2u) at
/// level rho3/(2u).
Eigen::MatrixXd phase2_phi_update(const Eigen::MatrixXd& w_hat, const Eigen::MatrixXd& w_tilde,
                                  const Eigen::MatrixXd& lambda2, double u, double rho3);

/// One view's projection update. Initializes from the k smallest
/// eigenvectors of (V-1) W~ W~^T, refines on the orthonormal manifold against
/// the full coupled objective, and falls back to the refined previous iterate
/// so the objective never increases. EigenOnly skips the refinement.
/// other_projections holds A^v'T W~^v' for the other views.
Eigen::MatrixXd phase2_a_update(const Eigen::MatrixXd& w_tilde,
                                const std::vector<Eigen::MatrixXd>& other_projections,
                                const Eigen::MatrixXd& a_previous, AUpdate mode);

/// Cross-view solve on the low-rank matrices from the per-view stage.
/// With a single view returns the degenerate result (W~ = W_hat, Phi = 0,
/// A = leading identity columns) and sets the degenerate flag. View blocks
/// are updated sequentially in ascending view order, so the augmented
/// Lagrangian is non-increasing across block updates within an iteration.
Phase2Result phase2_fit(const Phase1Result& phase1, const Phase2Config& cfg);

} // namespace leadlag
