#include <doctest.h>

#include <cmath>

#include "leadlag/errors.hpp"
#include "leadlag/phase1.hpp"
#include "leadlag/proxops.hpp"
#include "leadlag/rng.hpp"
#include "leadlag/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace leadlag;
using testsupport::random_matrix;

namespace {

/// X iid gaussian, Y = X W + noise; the clean regression test bed.
LagPair regression_pair(std::uint64_t seed, const Eigen::MatrixXd& w, Eigen::Index s,
                        double noise = 0.0) {
    SplitMix64 rng(seed);
    LagPair pair;
    pair.view = "v0";
    pair.x = gaussian_matrix(rng, s, w.rows());
    pair.y = pair.x * w;
    if (noise > 0.0) {
        pair.y += noise * gaussian_matrix(rng, s, w.cols());
    }
    return pair;
}

Eigen::MatrixXd low_rank(std::uint64_t seed, Eigen::Index n, Eigen::Index rank) {
    return random_matrix(seed, n, rank) * random_matrix(seed + 1, n, rank).transpose() /
           std::sqrt(static_cast<double>(n));
}

} // namespace

TEST_SUITE("phase1") {

TEST_CASE("w update approaches the feasibility target for huge penalties") {
    const Eigen::Index n = 6, s = 30;
    const LagPair pair = regression_pair(11, low_rank(12, n, 2), s);
    const Eigen::MatrixXd xtx = pair.x.transpose() * pair.x;
    const Eigen::MatrixXd xty = pair.x.transpose() * pair.y;
    const Eigen::MatrixXd w_hat = random_matrix(13, n, n);
    const Eigen::MatrixXd theta = random_matrix(14, n, n);
    const Eigen::MatrixXd lambda1 = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd w = phase1_w_update(xtx, xty, w_hat, theta, lambda1, 1e12);
    CHECK((w - (w_hat + theta)).norm() < 1e-6 * (w_hat + theta).norm());
}

TEST_CASE("w update with a tiny penalty matches least squares") {
    const Eigen::Index n = 5, s = 40;
    const LagPair pair = regression_pair(21, low_rank(22, n, 3), s);
    const Eigen::MatrixXd xtx = pair.x.transpose() * pair.x;
    const Eigen::MatrixXd xty = pair.x.transpose() * pair.y;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd w = phase1_w_update(xtx, xty, zero, zero, zero, 1e-10);
    // Independent least-squares route.
    const Eigen::MatrixXd ls = pair.x.colPivHouseholderQr().solve(pair.y);
    CHECK((w - ls).norm() < 1e-6 * std::max(1.0, ls.norm()));
}

TEST_CASE("w update is stationary for its objective") {
    const Eigen::Index n = 6, s = 25;
    const LagPair pair = regression_pair(31, low_rank(32, n, 2), s, 0.05);
    const Eigen::MatrixXd xtx = pair.x.transpose() * pair.x;
    const Eigen::MatrixXd xty = pair.x.transpose() * pair.y;
    const Eigen::MatrixXd w_hat = random_matrix(33, n, n);
    const Eigen::MatrixXd theta = 0.1 * random_matrix(34, n, n);
    const Eigen::MatrixXd lambda1 = 0.2 * random_matrix(35, n, n);
    const double u = 3.7;
    const Eigen::MatrixXd w = phase1_w_update(xtx, xty, w_hat, theta, lambda1, u);
    const Eigen::MatrixXd grad =
        2.0 * (xtx * w - xty) + 2.0 * u * (w - w_hat - theta) + lambda1;
    CHECK(grad.norm() <= 1e-8 * std::max(1.0, w.norm()));
}

TEST_CASE("gradient-descent w solver agrees with the direct solve") {
    const Eigen::Index n = 5, s = 30;
    const LagPair pair = regression_pair(41, low_rank(42, n, 2), s, 0.1);
    Phase1Config direct;
    direct.max_iter = 40;
    Phase1Config grad = direct;
    grad.w_solver = WSolver::GradientDescent;
    const Phase1ViewResult a = phase1_fit_view(pair, direct);
    const Phase1ViewResult b = phase1_fit_view(pair, grad);
    CHECK((a.w - b.w).norm() < 1e-4 * std::max(1.0, a.w.norm()));
}

TEST_CASE("theta update passes through at zero weight and zeroes small columns") {
    const Eigen::Index n = 5;
    const Eigen::MatrixXd w = random_matrix(51, n, n);
    const Eigen::MatrixXd w_hat = random_matrix(52, n, n);
    const Eigen::MatrixXd lambda1 = random_matrix(53, n, n);
    const double u = 2.0;
    const Eigen::MatrixXd pass = phase1_theta_update(w, w_hat, lambda1, u, 0.0);
    CHECK((pass - (w - w_hat + lambda1 / (2.0 * u))).norm() < 1e-14);
    // Enormous weight sends every column inside the threshold ball.
    const Eigen::MatrixXd zero = phase1_theta_update(w, w_hat, lambda1, u, 1e9);
    CHECK(zero.norm() == 0.0);
}

TEST_CASE("theta update is prox-optimal against random perturbations") {
    const Eigen::Index n = 4;
    const Eigen::MatrixXd w = random_matrix(61, n, n);
    const Eigen::MatrixXd w_hat = random_matrix(62, n, n);
    const Eigen::MatrixXd lambda1 = random_matrix(63, n, n);
    const double u = 1.3, rho2 = 0.8;
    const Eigen::MatrixXd theta = phase1_theta_update(w, w_hat, lambda1, u, rho2);
    // Objective of the Theta block, up to constants.
    auto block_objective = [&](const Eigen::MatrixXd& t) {
        double l21 = 0.0;
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            l21 += t.col(j).norm();
        }
        const Eigen::MatrixXd residual = w - w_hat - t;
        return u * residual.squaredNorm() + (lambda1.array() * residual.array()).sum() +
               rho2 * l21;
    };
    const double f_theta = block_objective(theta);
    SplitMix64 rng(6400);
    for (int i = 0; i < 500; ++i) {
        const Eigen::MatrixXd perturbed = theta + 1e-3 * gaussian_matrix(rng, n, n);
        CHECK(f_theta <= block_objective(perturbed) + 1e-12);
    }
}

TEST_CASE("w_hat update obeys the closed-form limits") {
    const Eigen::Index n = 5;
    const Eigen::MatrixXd w = random_matrix(71, n, n);
    const Eigen::MatrixXd theta = random_matrix(72, n, n);
    const Eigen::MatrixXd lambda1 = random_matrix(73, n, n);
    const double u = 2.5;
    const Eigen::MatrixXd pass = phase1_w_hat_update(w, theta, lambda1, u, 0.0);
    CHECK((pass - (w - theta + lambda1 / (2.0 * u))).norm() < 1e-14);
    const Eigen::MatrixXd zero = phase1_w_hat_update(w, theta, lambda1, u, 1e12);
    CHECK(zero.norm() == 0.0);
}

TEST_CASE("rank of the w_hat update is non-increasing in rho1") {
    const Eigen::Index n = 8;
    const Eigen::MatrixXd arg = random_matrix(81, n, n);
    Eigen::Index last_rank = n + 1;
    for (const double rho1 : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        const SvtResult res = svt_with_rank(arg, rho1 / 2.0);
        CHECK(res.rank <= last_rank);
        last_rank = res.rank;
    }
}

TEST_CASE("noiseless low-rank regression is recovered") {
    const Eigen::Index n = 10, s = 200;
    const Eigen::MatrixXd w_star = low_rank(91, n, 2);
    const LagPair pair = regression_pair(92, w_star, s);
    Phase1Config cfg;
    cfg.rho1 = 1e-4;
    cfg.rho2 = 1e-4;
    const Phase1ViewResult res = phase1_fit_view(pair, cfg);
    CHECK(res.converged);
    CHECK((res.w_hat - w_star).norm() / w_star.norm() <= 0.05);
    // Sanity bound through the least-squares route.
    const Eigen::MatrixXd ls = pair.x.colPivHouseholderQr().solve(pair.y);
    CHECK((ls - w_star).norm() / w_star.norm() <= 0.01);
}

TEST_CASE("an all-zero design yields the all-zero decomposition") {
    LagPair pair;
    pair.view = "v0";
    pair.x = Eigen::MatrixXd::Zero(20, 6);
    pair.y = Eigen::MatrixXd::Zero(20, 6);
    Phase1Config cfg;
    cfg.rho1 = 0.1;
    cfg.rho2 = 0.1;
    const Phase1ViewResult res = phase1_fit_view(pair, cfg);
    CHECK(res.w.norm() == 0.0);
    CHECK(res.w_hat.norm() == 0.0);
    CHECK(res.theta.norm() == 0.0);
}

TEST_CASE("planted outlier columns carry the largest theta norms") {
    GeneratorParams params;
    params.entities = 12;
    params.views = 1;
    params.length = 301;
    params.k_star = 2;
    params.s_theta = 2;
    params.sigma = 0.1;
    params.seed = 7;
    const PlantedInstance inst = generate(params);
    const LagPair pair = make_lag_pair(inst.panel, inst.panel.views[0], 0, params.length - 1);

    Phase1Config probe;
    probe.max_iter = 1;
    const double base_rho2 = phase1_fit_view(pair, probe).rho2; // resolved default

    double best_precision = 0.0;
    for (const double rho2_scale : {0.0625, 0.125, 0.25, 0.5, 1.0}) {
        Phase1Config cfg;
        cfg.rho2 = rho2_scale * base_rho2;
        const Phase1ViewResult res = phase1_fit_view(pair, cfg);
        best_precision =
            std::max(best_precision, precision_at_s(res.theta, inst.theta_columns));
    }
    CHECK(best_precision == 1.0);
}

TEST_CASE("augmented Lagrangian is monotone within every iteration") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Eigen::Index n = 8, s = 60;
        const LagPair pair = regression_pair(100 + seed, low_rank(110 + seed, n, 3), s, 0.2);
        Phase1Config cfg;
        cfg.max_iter = 80;
        const Phase1ViewResult res = phase1_fit_view(pair, cfg);
        CHECK(testsupport::phase1_lagrangian_monotone(res.history));
    }
}

TEST_CASE("primal residual tolerance is reached on desk-scale instances") {
    const Eigen::Index n = 12, s = 120;
    const LagPair pair = regression_pair(121, low_rank(122, n, 3), s, 0.1);
    Phase1Config cfg;
    const Phase1ViewResult res = phase1_fit_view(pair, cfg);
    CHECK(res.converged);
    CHECK(static_cast<int>(res.history.size()) <= 500);
    CHECK(res.history.back().primal_residual <= cfg.tol_primal * std::max(1.0, res.w.norm()));
}

TEST_CASE("relabeling entities conjugates every matrix by the permutation") {
    const Eigen::Index n = 7, s = 50;
    const LagPair pair = regression_pair(131, low_rank(132, n, 2), s, 0.1);
    const auto perm = testsupport::random_permutation(133, n);
    LagPair shuffled;
    shuffled.view = pair.view;
    shuffled.x = pair.x * perm;
    shuffled.y = pair.y * perm;
    Phase1Config cfg;
    cfg.max_iter = 60;
    const Phase1ViewResult base = phase1_fit_view(pair, cfg);
    const Phase1ViewResult conj = phase1_fit_view(shuffled, cfg);
    REQUIRE(base.history.size() == conj.history.size());
    const Eigen::MatrixXd p = perm;
    const double tol = 1e-9 * std::max(1.0, base.w.norm());
    CHECK((p.transpose() * base.w * p - conj.w).norm() < tol);
    CHECK((p.transpose() * base.w_hat * p - conj.w_hat).norm() < tol);
    CHECK((p.transpose() * base.theta * p - conj.theta).norm() < tol);
}

TEST_CASE("oversized data trips the divergence guard") {
    LagPair pair;
    pair.view = "v0";
    pair.x = Eigen::MatrixXd::Identity(8, 8);
    pair.y = 1e8 * Eigen::MatrixXd::Ones(8, 8);
    Phase1Config cfg;
    cfg.rho1 = 1e12; // keeps W_hat at zero so the misfit term stays enormous
    cfg.rho2 = 1e12;
    cfg.u0 = 1e-4;
    CHECK_THROWS_AS(phase1_fit_view(pair, cfg), DivergedError);
}

TEST_CASE("non-finite inputs are rejected up front") {
    LagPair pair;
    pair.view = "v0";
    pair.x = Eigen::MatrixXd::Ones(5, 3);
    pair.y = Eigen::MatrixXd::Ones(5, 3);
    pair.y(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(phase1_fit_view(pair, Phase1Config{}), NonFiniteInputError);
}

TEST_CASE("config validation rejects out-of-range values") {
    Phase1Config bad_u;
    bad_u.u0 = 10.0;
    bad_u.u_max = 1.0;
    CHECK_THROWS_AS(bad_u.validate(), ConfigError);
    Phase1Config bad_growth;
    bad_growth.u_growth = 0.9;
    CHECK_THROWS_AS(bad_growth.validate(), ConfigError);
    Phase1Config bad_tol;
    bad_tol.tol_primal = 0.0;
    CHECK_THROWS_AS(bad_tol.validate(), ConfigError);
}

TEST_CASE("multi-view fits run identically with one or many workers") {
    GeneratorParams params;
    params.entities = 6;
    params.views = 3;
    params.length = 61;
    params.k_star = 2;
    params.sigma = 0.2;
    params.seed = 17;
    const PlantedInstance inst = generate(params);
    Phase1Config cfg;
    cfg.max_iter = 40;
    const Phase1Result serial = phase1_fit(inst.panel, 0, params.length - 1, cfg, 1);
    const Phase1Result parallel = phase1_fit(inst.panel, 0, params.length - 1, cfg, 3);
    REQUIRE(serial.views.size() == parallel.views.size());
    for (std::size_t v = 0; v < serial.views.size(); ++v) {
        CHECK((serial.views[v].w - parallel.views[v].w).cwiseAbs().maxCoeff() == 0.0);
        CHECK((serial.views[v].w_hat - parallel.views[v].w_hat).cwiseAbs().maxCoeff() == 0.0);
    }
}

} // TEST_SUITE
