#pragma once

#include <functional>

#include <Eigen/Dense>

namespace leadlag {

/// Thin SVD with a fixed sign convention (largest-magnitude entry of each
/// left singular vector is positive) so decompositions are reproducible
/// across runs. Singular values are non-increasing.
struct SvdFactors {
    Eigen::MatrixXd u;
    Eigen::VectorXd s;
    Eigen::MatrixXd vt;
};

/// Deterministic thin SVD; throws NonFiniteInputError.
SvdFactors svd_decompose(const Eigen::MatrixXd& m);

/// Singular value thresholding: U diag(max(s - tau, 0)) Vt, the unique
/// minimizer of tau*||Z||_* + 0.5*||Z - M||_F^2.
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double tau);

/// svt variant that also reports the rank and nuclear norm of the result.
struct SvtResult {
    Eigen::MatrixXd value;
    Eigen::Index rank = 0;
    double nuclear_norm = 0.0;
};
SvtResult svt_with_rank(const Eigen::MatrixXd& m, double tau);

/// Column-wise group soft threshold: each column c becomes
/// max(0, 1 - tau/||c||_2) * c, the minimizer of
/// tau*||Z||_{2,1} + 0.5*||Z - M||_F^2.
Eigen::MatrixXd group_soft_threshold(const Eigen::MatrixXd& m, double tau);

/// Sum of column Euclidean norms.
double l21_norm(const Eigen::MatrixXd& m);

/// Number of columns with norm above tol.
Eigen::Index nonzero_columns(const Eigen::MatrixXd& m, double tol = 1e-12);

/// Orthonormal eigenvectors for the k algebraically smallest eigenvalues of
/// a symmetric matrix. Throws AsymmetricInputError when
/// ||C - C^T||_inf > 1e-10 * max(1, ||C||_inf).
Eigen::MatrixXd smallest_eigenvectors(const Eigen::MatrixXd& c, Eigen::Index k);

struct StiefelOptions {
    int max_iter = 500;
    double grad_tol = 1e-7;   // stop when ||grad - A sym(A^T grad)||_F falls below
    double tau0 = 1e-3;       // initial trial step
    double tau_min = 1e-20;
    double tau_max = 1e2;
    double armijo_c = 1e-4;
    int max_backtracks = 40;
};

struct StiefelResult {
    Eigen::MatrixXd a;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;    // gradient tolerance reached
    bool no_descent = false;   // no step improved on A0; A0 returned
    double max_ortho_error = 0.0; // worst ||A^T A - I||_F over all iterates
};

/// Minimizes a smooth objective over matrices with orthonormal columns using
/// the Cayley-transform retraction with Barzilai-Borwein steps and a
/// monotone backtracking line search. Every iterate stays orthonormal to
/// 1e-8 and the returned objective never exceeds objective(A0) + 1e-12.
/// Throws NonOrthonormalStartError when A0^T A0 deviates from I by > 1e-8.
StiefelResult stiefel_minimize(
    const std::function<double(const Eigen::MatrixXd&)>& objective,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& gradient,
    const Eigen::MatrixXd& a0, const StiefelOptions& opts = {});

} // namespace leadlag
