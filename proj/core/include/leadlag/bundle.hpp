#pragma once

#include <string>

#include <Eigen/Dense>

#include "leadlag/phase1.hpp"
#include "leadlag/phase2.hpp"

namespace leadlag {

/// Binary matrix file: 8-byte magic "LLMAT001", two little-endian uint64
/// (rows, cols), then rows*cols little-endian IEEE float64 in row-major
/// order.
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

/// Result bundle: a directory holding the matrix files of both solver stages
/// (W_v<i>, What_v<i>, Theta_v<i>, lambda1_v<i>, Wtilde_v<i>, Phi_v<i>,
/// A_v<i>, lambda2_v<i>) plus phase1.json / phase2.json with view order,
/// resolved weights, convergence flags and per-iteration histories. Writing
/// is deterministic: identical results produce byte-identical bundles.
void write_bundle(const std::string& dir, const Phase1Result& phase1, const Phase2Result& phase2);

struct Bundle {
    Phase1Result phase1;
    Phase2Result phase2;
};

/// Reads matrices and metadata back; histories are restored from JSON.
Bundle read_bundle(const std::string& dir);

} // namespace leadlag
