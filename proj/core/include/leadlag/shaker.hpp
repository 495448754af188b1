#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace leadlag {

/// Ranking of entities by accumulated influence. f[u] is the Euclidean norm
/// of row u of E (out-influence under the row convention: W(i,j) is the
/// influence of entity i on entity j); ranking sorts f descending with ties
/// broken by entity index ascending.
struct ShakerReport {
    Eigen::MatrixXd e;           // accumulated influence matrix
    Eigen::VectorXd f;           // per-entity influence strength
    std::vector<Eigen::Index> ranking; // full permutation, strongest first
    int top = 0;                 // requested shaker count
    int r = 0;                   // diffusion horizon used to build E
    std::string source_matrix;   // which matrix was diffused
};

/// E = W + W^2 + ... + W^r by iterated multiplication. Throws
/// SpectralBlowupError (with rescaling advice) when any entry of a power or
/// of the running sum exceeds 1e12 in magnitude.
Eigen::MatrixXd accumulate_influence(const Eigen::MatrixXd& w, int r);

/// Ranks entities by row norms of E. `top` is recorded in the report; the
/// full strength vector and permutation are always retained.
ShakerReport rank_shakers(const Eigen::MatrixXd& e, int top, int r = 0,
                          std::string source_matrix = {});

} // namespace leadlag
