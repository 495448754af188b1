#include <doctest.h>

#include <cmath>

#include "leadlag/errors.hpp"
#include "leadlag/phase1.hpp"
#include "leadlag/phase2.hpp"
#include "leadlag/proxops.hpp"
#include "leadlag/rng.hpp"
#include "leadlag/synth.hpp"
#include "test_support.hpp"

using namespace leadlag;
using testsupport::random_matrix;

namespace {

Phase1Result phase1_from_matrices(const std::vector<Eigen::MatrixXd>& w_hats) {
    Phase1Result res;
    for (std::size_t v = 0; v < w_hats.size(); ++v) {
        Phase1ViewResult view;
        view.view = "v" + std::to_string(v);
        view.w = w_hats[v];
        view.w_hat = w_hats[v];
        view.theta = Eigen::MatrixXd::Zero(w_hats[v].rows(), w_hats[v].cols());
        view.lambda1 = view.theta;
        view.converged = true;
        res.views.push_back(std::move(view));
    }
    return res;
}

Eigen::MatrixXd orthonormal_basis(std::uint64_t seed, Eigen::Index n, Eigen::Index k) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(seed, n, k));
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
}

} // namespace

TEST_SUITE("phase2") {

TEST_CASE("identical views admit the zero-outlier fixed point") {
    const Eigen::MatrixXd shared = random_matrix(11, 8, 8);
    const Phase1Result p1 = phase1_from_matrices({shared, shared});
    Phase2Config cfg;
    cfg.k = 3;
    const Phase2Result res = phase2_fit(p1, cfg);
    CHECK(res.converged);
    for (const auto& view : res.views) {
        CHECK(view.phi.norm() <= 1e-6);
        CHECK((view.w_tilde - shared).norm() <= 1e-6);
    }
}

TEST_CASE("w_tilde update reduces to the penalty target with a single view") {
    const Eigen::Index n = 6, k = 2;
    const Eigen::MatrixXd w_hat = random_matrix(21, n, n);
    const Eigen::MatrixXd phi = 0.1 * random_matrix(22, n, n);
    const Eigen::MatrixXd lambda2 = 0.3 * random_matrix(23, n, n);
    const double u = 1.7;
    const Eigen::MatrixXd a = orthonormal_basis(24, n, k);
    const Eigen::MatrixXd wt = phase2_w_tilde_update(a, Eigen::MatrixXd::Zero(k, n), w_hat, phi,
                                                     lambda2, u, 1);
    CHECK((wt - (w_hat - phi + lambda2 / (2.0 * u))).norm() < 1e-12);
}

TEST_CASE("w_tilde update approaches w_hat minus phi for huge penalties") {
    const Eigen::Index n = 6, k = 2;
    const Eigen::MatrixXd w_hat = random_matrix(31, n, n);
    const Eigen::MatrixXd phi = 0.1 * random_matrix(32, n, n);
    const Eigen::MatrixXd a = orthonormal_basis(33, n, k);
    const Eigen::MatrixXd coupling = random_matrix(34, k, n);
    const Eigen::MatrixXd wt = phase2_w_tilde_update(a, coupling, w_hat, phi,
                                                     Eigen::MatrixXd::Zero(n, n), 1e12, 3);
    CHECK((wt - (w_hat - phi)).norm() < 1e-6 * std::max(1.0, w_hat.norm()));
}

TEST_CASE("w_tilde update is stationary for the coupled quadratic") {
    const Eigen::Index n = 7, k = 3;
    const Eigen::Index views = 3;
    const Eigen::MatrixXd w_hat = random_matrix(41, n, n);
    const Eigen::MatrixXd phi = 0.2 * random_matrix(42, n, n);
    const Eigen::MatrixXd lambda2 = 0.4 * random_matrix(43, n, n);
    const Eigen::MatrixXd a = orthonormal_basis(44, n, k);
    const Eigen::MatrixXd coupling = random_matrix(45, k, n);
    const double u = 2.3;
    const Eigen::MatrixXd wt = phase2_w_tilde_update(a, coupling, w_hat, phi, lambda2, u, views);
    const Eigen::MatrixXd grad = 2.0 * static_cast<double>(views - 1) * (a * (a.transpose() * wt)) -
                                 2.0 * (a * coupling) - 2.0 * u * (w_hat - wt - phi) - lambda2;
    CHECK(grad.norm() <= 1e-8 * std::max(1.0, wt.norm()));
}

TEST_CASE("a update returns the eigen basis when all matrices vanish") {
    const Eigen::Index n = 6, k = 2;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd prev = orthonormal_basis(51, n, k);
    const Eigen::MatrixXd a = phase2_a_update(
        zero, {Eigen::MatrixXd::Zero(k, n)}, prev, AUpdate::EigenInitRefine);
    CHECK((a.transpose() * a - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-10);
}

TEST_CASE("a update reaches a zero alignment objective for a shared matrix") {
    const Eigen::Index n = 8, k = 3;
    const Eigen::MatrixXd shared = random_matrix(61, n, n);
    const Eigen::MatrixXd a_other = smallest_eigenvectors(shared * shared.transpose(), k);
    const Eigen::MatrixXd projection = a_other.transpose() * shared;
    const Eigen::MatrixXd a =
        phase2_a_update(shared, {projection}, a_other, AUpdate::EigenInitRefine);
    CHECK((a.transpose() * shared - projection).squaredNorm() <= 1e-10);
}

TEST_CASE("a update beats ten thousand random unit vectors at k = 1") {
    const Eigen::Index n = 6;
    const Eigen::MatrixXd w_tilde = random_matrix(71, n, n);
    const Eigen::MatrixXd p = random_matrix(72, 1, n);
    const Eigen::MatrixXd prev = orthonormal_basis(73, n, 1);
    const Eigen::MatrixXd a = phase2_a_update(w_tilde, {p}, prev, AUpdate::EigenInitRefine);
    auto objective = [&](const Eigen::MatrixXd& cand) {
        return (cand.transpose() * w_tilde - p).squaredNorm();
    };
    const double ours = objective(a);
    SplitMix64 rng(7400);
    for (int i = 0; i < 10000; ++i) {
        Eigen::MatrixXd cand = gaussian_matrix(rng, n, 1);
        cand /= cand.norm();
        CHECK(ours <= objective(cand) + 1e-9);
    }
}

TEST_CASE("phi update obeys the closed-form limits and prox optimality") {
    const Eigen::Index n = 5;
    const Eigen::MatrixXd w_hat = random_matrix(81, n, n);
    const Eigen::MatrixXd w_tilde = random_matrix(82, n, n);
    const Eigen::MatrixXd lambda2 = random_matrix(83, n, n);
    const double u = 1.9;
    CHECK(phase2_phi_update(w_hat, w_tilde, lambda2, u, 1e12).norm() == 0.0);
    const Eigen::MatrixXd pass = phase2_phi_update(w_hat, w_tilde, lambda2, u, 0.0);
    CHECK((pass - (w_hat - w_tilde + lambda2 / (2.0 * u))).norm() < 1e-14);

    const double rho3 = 0.7;
    const Eigen::MatrixXd phi = phase2_phi_update(w_hat, w_tilde, lambda2, u, rho3);
    auto block_objective = [&](const Eigen::MatrixXd& p) {
        double l21 = 0.0;
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            l21 += p.col(j).norm();
        }
        const Eigen::MatrixXd residual = w_hat - w_tilde - p;
        return rho3 * l21 + u * residual.squaredNorm() +
               (lambda2.array() * residual.array()).sum();
    };
    const double f_phi = block_objective(phi);
    SplitMix64 rng(8400);
    for (int i = 0; i < 500; ++i) {
        CHECK(f_phi <= block_objective(phi + 1e-3 * gaussian_matrix(rng, n, n)) + 1e-12);
    }
}

TEST_CASE("phi column support is non-increasing in rho3") {
    const Eigen::Index n = 8;
    const Eigen::MatrixXd w_hat = random_matrix(91, n, n);
    const Eigen::MatrixXd w_tilde = 0.2 * random_matrix(92, n, n);
    const Eigen::MatrixXd lambda2 = Eigen::MatrixXd::Zero(n, n);
    Eigen::Index last = n + 1;
    for (const double rho3 : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        const Eigen::Index cols =
            nonzero_columns(phase2_phi_update(w_hat, w_tilde, lambda2, 1.0, rho3));
        CHECK(cols <= last);
        last = cols;
    }
}

TEST_CASE("corrupted columns in the second view surface in phi") {
    GeneratorParams params;
    params.entities = 15;
    params.views = 2;
    params.length = 401;
    params.k_star = 2;
    params.s_phi = 2;
    params.sigma = 0.1;
    params.seed = 23;
    const PlantedInstance inst = generate(params);

    Phase1Config p1cfg;
    p1cfg.rho1 = 1e-3;
    p1cfg.rho2 = 1e9; // keep the inconsistency in the per-view estimates
    const Phase1Result p1 = phase1_fit(inst.panel, 0, params.length - 1, p1cfg, 1);

    Phase2Config probe;
    probe.k = 15; // full latent rank: the projections cannot sidestep the signal
    probe.max_iter = 1;
    const double base_rho3 = phase2_fit(p1, probe).rho3;

    double best_precision = 0.0;
    for (const double rho3_scale : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        Phase2Config cfg;
        cfg.k = 15;
        cfg.rho3 = rho3_scale * base_rho3;
        const Phase2Result res = phase2_fit(p1, cfg);
        const RecoveryMetrics metrics = recovery_metrics(res, inst);
        best_precision = std::max(best_precision, metrics.precision_at_s_phi.at(1));
    }
    CHECK(best_precision >= 0.99);
}

TEST_CASE("alignment residual never rises across outer iterations") {
    // Holds when the starting penalty dominates the alignment curvature;
    // small u0 over-aligns in the first iterations and then retreats.
    GeneratorParams params;
    params.entities = 12;
    params.views = 2;
    params.length = 301;
    params.k_star = 2;
    params.s_phi = 2;
    params.sigma = 0.1;
    params.seed = 29;
    const PlantedInstance inst = generate(params);
    Phase1Config p1cfg;
    p1cfg.rho1 = 1e-3;
    p1cfg.rho2 = 1e9;
    const Phase1Result p1 = phase1_fit(inst.panel, 0, params.length - 1, p1cfg, 1);
    Phase2Config cfg;
    cfg.k = 12;
    cfg.u0 = 20.0;
    cfg.max_iter = 100;
    const Phase2Result res = phase2_fit(p1, cfg);
    REQUIRE(res.history.size() > 5);
    for (std::size_t i = 1; i < res.history.size(); ++i) {
        CHECK(res.history[i].alignment <=
              res.history[i - 1].alignment + 1e-9 * std::max(1.0, res.history[i - 1].alignment));
    }
}

TEST_CASE("projections stay orthonormal at every iteration") {
    const Eigen::Index n = 8;
    std::vector<Eigen::MatrixXd> w_hats;
    for (std::uint64_t v = 0; v < 2; ++v) {
        w_hats.push_back(random_matrix(120 + v, n, n));
    }
    Phase2Config cfg;
    cfg.k = 3;
    cfg.max_iter = 40;
    const Phase2Result res = phase2_fit(phase1_from_matrices(w_hats), cfg);
    CHECK(testsupport::max_phase2_ortho_error(res.history) <= 1e-8);
    for (const auto& view : res.views) {
        CHECK((view.a.transpose() * view.a -
               Eigen::MatrixXd::Identity(res.k, res.k)).norm() <= 1e-8);
    }
}

TEST_CASE("the augmented Lagrangian is monotone within every iteration") {
    const Eigen::Index n = 7;
    std::vector<Eigen::MatrixXd> w_hats;
    const Eigen::MatrixXd base = random_matrix(131, n, n);
    for (std::uint64_t v = 0; v < 3; ++v) {
        w_hats.push_back(base + 0.4 * random_matrix(140 + v, n, n));
    }
    Phase2Config cfg;
    cfg.max_iter = 50;
    const Phase2Result res = phase2_fit(phase1_from_matrices(w_hats), cfg);
    CHECK(testsupport::phase2_lagrangian_monotone(res.history));
}

TEST_CASE("the alignment objective is invariant to a common rotation") {
    const Eigen::Index n = 8, k = 3;
    std::vector<Eigen::MatrixXd> a_list, w_list;
    for (std::uint64_t v = 0; v < 3; ++v) {
        a_list.push_back(orthonormal_basis(150 + v, n, k));
        w_list.push_back(random_matrix(160 + v, n, n));
    }
    const double before = alignment_objective(a_list, w_list);
    const Eigen::MatrixXd rot = orthonormal_basis(170, k, k); // k x k orthogonal
    std::vector<Eigen::MatrixXd> rotated;
    for (const auto& a : a_list) {
        rotated.push_back(a * rot);
    }
    const double after = alignment_objective(rotated, w_list);
    CHECK(std::abs(before - after) <= 1e-10 * std::max(1.0, before));
}

TEST_CASE("a single view degenerates to the identity projection") {
    const Eigen::MatrixXd w_hat = random_matrix(181, 6, 6);
    Phase2Config cfg;
    cfg.k = 2;
    const Phase2Result res = phase2_fit(phase1_from_matrices({w_hat}), cfg);
    CHECK(res.degenerate_single_view);
    CHECK(res.converged);
    CHECK((res.views[0].w_tilde - w_hat).norm() == 0.0);
    CHECK(res.views[0].phi.norm() == 0.0);
    CHECK((res.views[0].a - Eigen::MatrixXd::Identity(6, 2)).norm() == 0.0);
}

TEST_CASE("config validation names bad fields") {
    Phase2Config cfg;
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    Phase2Config cfg2;
    cfg2.u_growth = 0.5;
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);
    const Eigen::MatrixXd w_hat = random_matrix(191, 4, 4);
    Phase2Config cfg3;
    cfg3.k = 10; // larger than N
    CHECK_THROWS_AS(phase2_fit(phase1_from_matrices({w_hat, w_hat}), cfg3), ConfigError);
}

} // TEST_SUITE
