#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "leadlag/panel.hpp"
#include "leadlag/phase1.hpp"
#include "leadlag/phase2.hpp"
#include "leadlag/rng.hpp"

namespace leadlag {

struct GeneratorParams {
    Eigen::Index entities = 0;
    Eigen::Index views = 1;
    Eigen::Index length = 0;    // timestamps in the emitted panel
    Eigen::Index k_star = 1;    // exact rank of the planted matrix
    Eigen::Index s_theta = 0;   // planted spurious columns, shared across views
    Eigen::Index s_phi = 0;     // planted inconsistency columns per corrupt view
    double sigma = 0.0;         // innovation noise std
    double radius_cap = 0.9;    // spectral radius bound for every effective matrix
    double theta_scale = 5.0;   // column amplitude relative to RMS of W*
    double phi_scale = 5.0;
    std::vector<Eigen::Index> corrupt_views; // empty resolves to {1} when s_phi > 0
    int burn_in = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Planted ground truth plus the simulated panel. The rank-k* matrix is kept
/// in factored form (W* = left * right^T) so generation scales to tens of
/// thousands of entities; dense views are materialized on demand.
struct PlantedInstance {
    GeneratorParams params;
    Eigen::MatrixXd w_left;   // N x k*
    Eigen::MatrixXd w_right;  // N x k*
    std::vector<Eigen::Index> theta_columns;
    Eigen::MatrixXd theta_block; // N x s_theta
    std::vector<Eigen::Index> phi_columns;
    std::map<Eigen::Index, Eigen::MatrixXd> phi_blocks; // corrupt view -> N x s_phi
    PanelSeries panel;
    double rescale = 1.0; // factor applied to meet the radius cap

    Eigen::MatrixXd w_star_dense() const;
    Eigen::MatrixXd theta_dense() const;
    Eigen::MatrixXd phi_dense(Eigen::Index view) const;
    /// W* + Theta* + Phi*^v for one view.
    Eigen::MatrixXd effective_dense(Eigen::Index view) const;
};

/// Simulates x_{t+1} = x_t W^v + eps per view with the planted decomposition,
/// after capping every effective matrix's spectral radius at radius_cap by a
/// common rescale. Burn-in states are discarded. Deterministic given the
/// seed. Throws InvalidDimensionsError.
PlantedInstance generate(const GeneratorParams& params);

/// Recovery scores against planted truth.
struct RecoveryMetrics {
    double rel_error_w_hat = 0.0;           // ||W_hat - W*||_F / ||W*||_F
    double precision_at_s_theta = 0.0;      // of Theta column norms vs planted set
    double auc_theta = 0.0;
    double rel_error_w_tilde = 0.0;         // phase-2 variant
    std::map<Eigen::Index, double> precision_at_s_phi; // per corrupt view
    std::map<Eigen::Index, double> auc_phi;
};

RecoveryMetrics recovery_metrics(const Phase1ViewResult& result, const PlantedInstance& truth);
RecoveryMetrics recovery_metrics(const Phase2Result& result, const PlantedInstance& truth);

/// Fraction of the s top-norm columns of m that belong to the planted index
/// set (|planted| = s). Ties resolve to the lower column index.
double precision_at_s(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& planted);

/// Area under the ROC curve for column norms of m as scores of membership in
/// the planted set; ties contribute half credit.
double column_norm_auc(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& planted);

/// Spectral radius estimate: exact dense eigenvalues at desk scale, growth
/// rate of repeated operator application beyond it.
double spectral_radius(const PlantedInstance& instance, Eigen::Index view);

/// Exports the instance as panel CSV plus a truth JSON (planted matrix,
/// outlier index sets, generator parameters, RNG description).
void export_instance(const PlantedInstance& instance, const std::string& panel_csv_path,
                     const std::string& truth_json_path);

} // namespace leadlag
