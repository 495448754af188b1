#include "leadlag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

#include <json.hpp>

#include "leadlag/errors.hpp"
#include "leadlag/proxops.hpp"

namespace leadlag {

namespace {

// Dense eigenvalues are exact but cubic; above this size the radius is
// estimated from the growth rate of repeated operator application.
constexpr Eigen::Index kDenseRadiusLimit = 1500;

std::string padded_label(char prefix, Eigen::Index index, Eigen::Index count) {
    std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
    std::string digits = std::to_string(index);
    return prefix + std::string(width - digits.size(), '0') + digits;
}

// x -> x * (W* + Theta* + Phi*^view) without materializing the matrix.
Eigen::RowVectorXd apply_effective(const PlantedInstance& inst, Eigen::Index view,
                                   const Eigen::RowVectorXd& x) {
    Eigen::RowVectorXd out = (x * inst.w_left) * inst.w_right.transpose();
    for (std::size_t j = 0; j < inst.theta_columns.size(); ++j) {
        out(inst.theta_columns[j]) += x.dot(inst.theta_block.col(static_cast<Eigen::Index>(j)));
    }
    const auto it = inst.phi_blocks.find(view);
    if (it != inst.phi_blocks.end()) {
        for (std::size_t j = 0; j < inst.phi_columns.size(); ++j) {
            out(inst.phi_columns[j]) += x.dot(it->second.col(static_cast<Eigen::Index>(j)));
        }
    }
    return out;
}

double dense_spectral_radius(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double estimated_spectral_radius(const PlantedInstance& inst, Eigen::Index view) {
    // Geometric growth of ||x W^t|| over a fixed horizon; deterministic
    // start vector from the instance seed.
    SplitMix64 rng = SplitMix64(inst.params.seed).fork(0x5EC71ADULL);
    const Eigen::Index n = inst.params.entities;
    Eigen::RowVectorXd x = gaussian_matrix(rng, 1, n);
    x /= x.norm();
    const int warmup = 20;
    const int horizon = 80;
    for (int i = 0; i < warmup; ++i) {
        x = apply_effective(inst, view, x);
        const double norm = x.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        x /= norm;
    }
    double log_growth = 0.0;
    for (int i = 0; i < horizon; ++i) {
        x = apply_effective(inst, view, x);
        const double norm = x.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        log_growth += std::log(norm);
        x /= norm;
    }
    return std::exp(log_growth / horizon);
}

} // namespace

void GeneratorParams::validate() const {
    if (entities < 1 || views < 1 || length < 1) {
        throw InvalidDimensionsError("generate: entities, views and length must be >= 1");
    }
    if (k_star < 1 || k_star > entities) {
        throw InvalidDimensionsError("generate: need 1 <= k_star <= entities");
    }
    if (s_theta < 0 || s_phi < 0 || s_theta + s_phi > entities) {
        throw InvalidDimensionsError("generate: need s_theta + s_phi <= entities");
    }
    if (sigma < 0.0) {
        throw InvalidDimensionsError("generate: sigma must be >= 0");
    }
    if (!(radius_cap > 0.0) || !(radius_cap < 1.0)) {
        throw InvalidDimensionsError("generate: radius_cap must lie in (0, 1)");
    }
    if (burn_in < 0) {
        throw InvalidDimensionsError("generate: burn_in must be >= 0");
    }
    for (const Eigen::Index v : corrupt_views) {
        if (v < 0 || v >= views) {
            throw InvalidDimensionsError("generate: corrupt view index out of range");
        }
    }
}

Eigen::MatrixXd PlantedInstance::w_star_dense() const {
    return w_left * w_right.transpose();
}

Eigen::MatrixXd PlantedInstance::theta_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(params.entities, params.entities);
    for (std::size_t j = 0; j < theta_columns.size(); ++j) {
        m.col(theta_columns[j]) = theta_block.col(static_cast<Eigen::Index>(j));
    }
    return m;
}

Eigen::MatrixXd PlantedInstance::phi_dense(Eigen::Index view) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(params.entities, params.entities);
    const auto it = phi_blocks.find(view);
    if (it == phi_blocks.end()) {
        return m;
    }
    for (std::size_t j = 0; j < phi_columns.size(); ++j) {
        m.col(phi_columns[j]) = it->second.col(static_cast<Eigen::Index>(j));
    }
    return m;
}

Eigen::MatrixXd PlantedInstance::effective_dense(Eigen::Index view) const {
    return w_star_dense() + theta_dense() + phi_dense(view);
}

double spectral_radius(const PlantedInstance& instance, Eigen::Index view) {
    if (instance.params.entities <= kDenseRadiusLimit) {
        return dense_spectral_radius(instance.effective_dense(view));
    }
    return estimated_spectral_radius(instance, view);
}

PlantedInstance generate(const GeneratorParams& params) {
    params.validate();
    GeneratorParams resolved = params;
    if (resolved.corrupt_views.empty() && resolved.s_phi > 0 && resolved.views > 1) {
        resolved.corrupt_views = {1};
    }
    if (resolved.s_phi > 0 && resolved.corrupt_views.empty()) {
        throw InvalidDimensionsError("generate: s_phi > 0 needs a corrupt view (views >= 2)");
    }

    const Eigen::Index n = resolved.entities;
    SplitMix64 root(resolved.seed);

    PlantedInstance inst;
    inst.params = resolved;

    SplitMix64 structure_rng = root.fork(1);
    // Factors scaled so W* entries have unit-order RMS before capping.
    const double factor_scale = 1.0 / std::sqrt(std::sqrt(static_cast<double>(resolved.k_star)));
    inst.w_left = factor_scale * gaussian_matrix(structure_rng, n, resolved.k_star);
    inst.w_right = factor_scale * gaussian_matrix(structure_rng, n, resolved.k_star);

    // Outlier column indices: one deterministic shuffle, Theta first, Phi next.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    SplitMix64 index_rng = root.fork(2);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(index_rng.next_u64() % i);
        std::swap(order[i - 1], order[j]);
    }
    inst.theta_columns.assign(order.begin(), order.begin() + resolved.s_theta);
    inst.phi_columns.assign(order.begin() + resolved.s_theta,
                            order.begin() + resolved.s_theta + resolved.s_phi);
    std::sort(inst.theta_columns.begin(), inst.theta_columns.end());
    std::sort(inst.phi_columns.begin(), inst.phi_columns.end());

    const double w_rms = resolved.k_star > 0 && n > 0
                             ? std::sqrt(inst.w_left.squaredNorm() * inst.w_right.squaredNorm() /
                                         static_cast<double>(n * n * resolved.k_star))
                             : 0.0;
    const double theta_amp = resolved.theta_scale * std::max(w_rms, 1e-12);
    const double phi_amp = resolved.phi_scale * std::max(w_rms, 1e-12);

    SplitMix64 theta_rng = root.fork(3);
    inst.theta_block = theta_amp * gaussian_matrix(theta_rng, n, resolved.s_theta);
    for (const Eigen::Index view : resolved.corrupt_views) {
        SplitMix64 phi_rng = root.fork(100 + static_cast<std::uint64_t>(view));
        inst.phi_blocks[view] = phi_amp * gaussian_matrix(phi_rng, n, resolved.s_phi);
    }

    // One common rescale keeps every effective matrix inside the cap while
    // preserving the planted structure and amplitude ratios. The pseudo-view
    // index `views` has no Phi block and measures W* + Theta* alone.
    double radius = 0.0;
    std::set<Eigen::Index> radius_views(resolved.corrupt_views.begin(),
                                        resolved.corrupt_views.end());
    radius_views.insert(resolved.views);
    for (const Eigen::Index view : radius_views) {
        radius = std::max(radius, spectral_radius(inst, view));
    }
    if (radius > resolved.radius_cap) {
        inst.rescale = resolved.radius_cap / radius;
        inst.w_left *= inst.rescale;
        inst.theta_block *= inst.rescale;
        for (auto& [view, block] : inst.phi_blocks) {
            block *= inst.rescale;
        }
    }

    // Simulate each view independently; burn-in states are dropped.
    inst.panel.entities.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index e = 0; e < n; ++e) {
        inst.panel.entities.push_back(padded_label('e', e, n));
    }
    for (Eigen::Index v = 0; v < resolved.views; ++v) {
        inst.panel.views.push_back(padded_label('v', v, resolved.views));
    }
    for (Eigen::Index t = 0; t < resolved.length; ++t) {
        inst.panel.timestamps.push_back(std::to_string(t));
    }
    inst.panel.values.resize(static_cast<std::size_t>(resolved.views));
    for (Eigen::Index v = 0; v < resolved.views; ++v) {
        SplitMix64 sim_rng = root.fork(1000 + static_cast<std::uint64_t>(v));
        Eigen::RowVectorXd x = gaussian_matrix(sim_rng, 1, n);
        Eigen::MatrixXd series(resolved.length, n);
        for (int t = 0; t < resolved.burn_in; ++t) {
            Eigen::RowVectorXd next = apply_effective(inst, v, x);
            if (resolved.sigma > 0.0) {
                next += resolved.sigma * Eigen::RowVectorXd(gaussian_matrix(sim_rng, 1, n));
            }
            x = next;
        }
        series.row(0) = x;
        for (Eigen::Index t = 1; t < resolved.length; ++t) {
            Eigen::RowVectorXd next = apply_effective(inst, v, x);
            if (resolved.sigma > 0.0) {
                next += resolved.sigma * Eigen::RowVectorXd(gaussian_matrix(sim_rng, 1, n));
            }
            x = next;
            series.row(t) = x;
        }
        inst.panel.values[static_cast<std::size_t>(v)] = std::move(series);
    }
    inst.panel.validate();
    return inst;
}

double precision_at_s(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& planted) {
    if (planted.empty()) {
        throw ConfigError("precision_at_s: planted index set is empty");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<double> norms(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
        norms[j] = m.col(static_cast<Eigen::Index>(j)).norm();
    }
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index lhs, Eigen::Index rhs) {
        if (norms[static_cast<std::size_t>(lhs)] != norms[static_cast<std::size_t>(rhs)]) {
            return norms[static_cast<std::size_t>(lhs)] > norms[static_cast<std::size_t>(rhs)];
        }
        return lhs < rhs;
    });
    const std::set<Eigen::Index> truth(planted.begin(), planted.end());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < planted.size(); ++i) {
        if (truth.count(order[i]) > 0) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(planted.size());
}

double column_norm_auc(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& planted) {
    const std::set<Eigen::Index> truth(planted.begin(), planted.end());
    const Eigen::Index n = m.cols();
    if (truth.empty() || static_cast<Eigen::Index>(truth.size()) >= n) {
        throw ConfigError("column_norm_auc: need a non-trivial planted set");
    }
    std::vector<double> pos, neg;
    for (Eigen::Index j = 0; j < n; ++j) {
        (truth.count(j) > 0 ? pos : neg).push_back(m.col(j).norm());
    }
    double wins = 0.0;
    for (const double p : pos) {
        for (const double q : neg) {
            if (p > q) {
                wins += 1.0;
            } else if (p == q) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

RecoveryMetrics recovery_metrics(const Phase1ViewResult& result, const PlantedInstance& truth) {
    const Eigen::Index n = truth.params.entities;
    if (result.w_hat.rows() != n || result.w_hat.cols() != n) {
        throw ShapeMismatchError("recovery_metrics: result/truth entity counts differ");
    }
    RecoveryMetrics metrics;
    const Eigen::MatrixXd w_star = truth.w_star_dense();
    const double denom = std::max(w_star.norm(), 1e-300);
    metrics.rel_error_w_hat = (result.w_hat - w_star).norm() / denom;
    if (!truth.theta_columns.empty()) {
        metrics.precision_at_s_theta = precision_at_s(result.theta, truth.theta_columns);
        metrics.auc_theta = column_norm_auc(result.theta, truth.theta_columns);
    }
    return metrics;
}

RecoveryMetrics recovery_metrics(const Phase2Result& result, const PlantedInstance& truth) {
    const Eigen::Index n = truth.params.entities;
    RecoveryMetrics metrics;
    const Eigen::MatrixXd w_star = truth.w_star_dense();
    const double denom = std::max(w_star.norm(), 1e-300);
    double err_sum = 0.0;
    for (const auto& view : result.views) {
        if (view.w_tilde.rows() != n || view.w_tilde.cols() != n) {
            throw ShapeMismatchError("recovery_metrics: result/truth entity counts differ");
        }
        err_sum += (view.w_tilde - w_star).norm() / denom;
    }
    metrics.rel_error_w_tilde = err_sum / static_cast<double>(std::max<std::size_t>(1, result.views.size()));
    if (!truth.phi_columns.empty()) {
        for (const Eigen::Index view_idx : truth.params.corrupt_views) {
            if (view_idx < static_cast<Eigen::Index>(result.views.size())) {
                const auto& phi = result.views[static_cast<std::size_t>(view_idx)].phi;
                metrics.precision_at_s_phi[view_idx] = precision_at_s(phi, truth.phi_columns);
                metrics.auc_phi[view_idx] = column_norm_auc(phi, truth.phi_columns);
            }
        }
    }
    return metrics;
}

void export_instance(const PlantedInstance& instance, const std::string& panel_csv_path,
                     const std::string& truth_json_path) {
    export_csv(instance.panel, panel_csv_path);

    nlohmann::json truth;
    truth["generator"] = {
        {"entities", instance.params.entities},
        {"views", instance.params.views},
        {"length", instance.params.length},
        {"k_star", instance.params.k_star},
        {"s_theta", instance.params.s_theta},
        {"s_phi", instance.params.s_phi},
        {"sigma", instance.params.sigma},
        {"radius_cap", instance.params.radius_cap},
        {"theta_scale", instance.params.theta_scale},
        {"phi_scale", instance.params.phi_scale},
        {"burn_in", instance.params.burn_in},
        {"seed", instance.params.seed},
        {"corrupt_views", instance.params.corrupt_views},
    };
    truth["rng"] = "splitmix64 + box-muller, labeled forks; gaussians drawn row-major";
    truth["rescale"] = instance.rescale;
    truth["theta_columns"] = instance.theta_columns;
    truth["phi_columns"] = instance.phi_columns;

    auto matrix_to_json = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                row.push_back(m(i, j));
            }
            rows.push_back(std::move(row));
        }
        return rows;
    };
    if (instance.params.entities <= 512) {
        truth["w_star"] = matrix_to_json(instance.w_star_dense());
    } else {
        // Too large to dump densely; the factors reproduce it exactly.
        truth["w_star_left"] = matrix_to_json(instance.w_left);
        truth["w_star_right"] = matrix_to_json(instance.w_right);
    }

    std::ofstream file(truth_json_path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("export_instance: cannot open '" + truth_json_path + "'");
    }
    file << truth.dump(2) << '\n';
}

} // namespace leadlag
