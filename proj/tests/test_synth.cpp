#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include <Eigen/SVD>

#include "leadlag/errors.hpp"
#include "leadlag/panel.hpp"
#include "leadlag/rng.hpp"
#include "leadlag/synth.hpp"
#include "test_support.hpp"

using namespace leadlag;

namespace {

GeneratorParams small_params(std::uint64_t seed) {
    GeneratorParams p;
    p.entities = 10;
    p.views = 2;
    p.length = 40;
    p.k_star = 3;
    p.sigma = 0.2;
    p.seed = seed;
    return p;
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("the same seed reproduces the panel bit for bit") {
    const PlantedInstance a = generate(small_params(7));
    const PlantedInstance b = generate(small_params(7));
    REQUIRE(a.panel.values.size() == b.panel.values.size());
    for (std::size_t v = 0; v < a.panel.values.size(); ++v) {
        CHECK((a.panel.values[v] - b.panel.values[v]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((a.w_star_dense() - b.w_star_dense()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("different seeds give different panels") {
    const PlantedInstance a = generate(small_params(7));
    const PlantedInstance b = generate(small_params(8));
    CHECK((a.panel.values[0] - b.panel.values[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a noiseless single view follows the recursion exactly") {
    GeneratorParams p = small_params(3);
    p.views = 1;
    p.sigma = 0.0;
    const PlantedInstance inst = generate(p);
    const LagPair pair = make_lag_pair(inst.panel, inst.panel.views[0], 0, p.length - 1);
    const Eigen::MatrixXd w = inst.w_star_dense();
    CHECK((pair.y - pair.x * w).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the planted matrix has the requested exact rank") {
    const PlantedInstance inst = generate(small_params(9));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(inst.w_star_dense());
    const Eigen::VectorXd s = svd.singularValues();
    const double cutoff = 1e-10 * s(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        rank += s(i) > cutoff ? 1 : 0;
    }
    CHECK(rank == 3);
}

TEST_CASE("every effective matrix respects the radius cap") {
    GeneratorParams p = small_params(11);
    p.s_theta = 2;
    p.s_phi = 2;
    const PlantedInstance inst = generate(p);
    for (Eigen::Index v = 0; v < p.views; ++v) {
        CHECK(spectral_radius(inst, v) <= p.radius_cap + 1e-9);
    }
    CHECK(inst.theta_columns.size() == 2);
    CHECK(inst.phi_columns.size() == 2);
    // Planted index sets are disjoint.
    for (const auto t : inst.theta_columns) {
        for (const auto f : inst.phi_columns) {
            CHECK(t != f);
        }
    }
}

TEST_CASE("panels stay bounded over a hundred seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        GeneratorParams p;
        p.entities = 10;
        p.views = 1;
        p.length = 40;
        p.k_star = 2;
        p.sigma = 1.0;
        p.radius_cap = 0.9;
        p.seed = seed;
        const PlantedInstance inst = generate(p);
        CHECK(inst.panel.values[0].cwiseAbs().maxCoeff() <= 1e6);
    }
}

TEST_CASE("perfect recovery scores zero error and full precision") {
    GeneratorParams p = small_params(13);
    p.s_theta = 2;
    const PlantedInstance inst = generate(p);
    Phase1ViewResult ideal;
    ideal.view = inst.panel.views[0];
    ideal.w_hat = inst.w_star_dense();
    ideal.theta = inst.theta_dense();
    ideal.w = ideal.w_hat + ideal.theta;
    ideal.lambda1 = Eigen::MatrixXd::Zero(p.entities, p.entities);
    const RecoveryMetrics metrics = recovery_metrics(ideal, inst);
    CHECK(metrics.rel_error_w_hat == 0.0);
    CHECK(metrics.precision_at_s_theta == 1.0);
    CHECK(metrics.auc_theta == 1.0);
}

TEST_CASE("random scores produce an AUC near one half") {
    const std::vector<Eigen::Index> planted = {1, 4, 7};
    double auc_sum = 0.0;
    SplitMix64 rng(99);
    for (int shuffle = 0; shuffle < 100; ++shuffle) {
        const Eigen::MatrixXd random_scores = gaussian_matrix(rng, 10, 10);
        auc_sum += column_norm_auc(random_scores, planted);
    }
    CHECK(std::abs(auc_sum / 100.0 - 0.5) <= 0.1);
}

TEST_CASE("precision on a hand-built four-entity case") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(4, 4);
    theta.col(2).setConstant(3.0); // the planted column dominates
    theta.col(0).setConstant(0.1);
    CHECK(precision_at_s(theta, {2}) == 1.0);
    CHECK(precision_at_s(theta, {1}) == 0.0); // wrong column planted
}

TEST_CASE("recovery metrics are invariant to a consistent permutation") {
    GeneratorParams p = small_params(17);
    p.s_theta = 2;
    const PlantedInstance inst = generate(p);
    Phase1ViewResult fitted;
    fitted.view = inst.panel.views[0];
    fitted.w_hat = inst.w_star_dense() + 0.01 * testsupport::random_matrix(18, 10, 10);
    fitted.theta = inst.theta_dense();
    fitted.w = fitted.w_hat + fitted.theta;
    fitted.lambda1 = Eigen::MatrixXd::Zero(10, 10);
    const RecoveryMetrics base = recovery_metrics(fitted, inst);

    const auto perm = testsupport::random_permutation(19, 10);
    const Eigen::MatrixXd pm = perm;
    PlantedInstance permuted = inst;
    permuted.w_left = pm.transpose() * inst.w_left;
    permuted.w_right = pm.transpose() * inst.w_right;
    permuted.theta_block = pm.transpose() * inst.theta_block;
    Eigen::VectorXi inverse(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
        inverse(perm.indices()(i)) = static_cast<int>(i);
    }
    for (auto& c : permuted.theta_columns) {
        c = inverse(c);
    }
    Phase1ViewResult fitted_perm = fitted;
    fitted_perm.w_hat = pm.transpose() * fitted.w_hat * pm;
    fitted_perm.theta = pm.transpose() * fitted.theta * pm;
    const RecoveryMetrics conj = recovery_metrics(fitted_perm, permuted);
    CHECK(base.rel_error_w_hat == doctest::Approx(conj.rel_error_w_hat).epsilon(1e-12));
    CHECK(base.precision_at_s_theta == conj.precision_at_s_theta);
    CHECK(base.auc_theta == doctest::Approx(conj.auc_theta).epsilon(1e-12));
}

TEST_CASE("recovery metrics reject mismatched shapes") {
    const PlantedInstance inst = generate(small_params(25));
    Phase1ViewResult wrong;
    wrong.view = "v0";
    wrong.w_hat = Eigen::MatrixXd::Zero(4, 4); // truth has 10 entities
    wrong.theta = wrong.w_hat;
    wrong.w = wrong.w_hat;
    wrong.lambda1 = wrong.w_hat;
    CHECK_THROWS_AS(recovery_metrics(wrong, inst), ShapeMismatchError);
}

TEST_CASE("invalid dimensions are rejected") {
    GeneratorParams p = small_params(1);
    p.k_star = 20;
    CHECK_THROWS_AS(generate(p), InvalidDimensionsError);
    GeneratorParams q = small_params(1);
    q.s_theta = 6;
    q.s_phi = 6;
    CHECK_THROWS_AS(generate(q), InvalidDimensionsError);
    GeneratorParams r = small_params(1);
    r.radius_cap = 1.5;
    CHECK_THROWS_AS(generate(r), InvalidDimensionsError);
}

TEST_CASE("instances export to a re-ingestable panel and a truth file") {
    GeneratorParams p = small_params(21);
    p.s_theta = 1;
    const PlantedInstance inst = generate(p);
    const auto dir = std::filesystem::temp_directory_path();
    const std::string panel_path = (dir / "synth_panel.csv").string();
    const std::string truth_path = (dir / "synth_truth.json").string();
    export_instance(inst, panel_path, truth_path);
    const PanelSeries back = ingest_csv(panel_path);
    CHECK(back.entities == inst.panel.entities);
    for (std::size_t v = 0; v < back.values.size(); ++v) {
        CHECK((back.values[v] - inst.panel.values[v]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(std::filesystem::file_size(truth_path) > 0);
    std::remove(panel_path.c_str());
    std::remove(truth_path.c_str());
}

} // TEST_SUITE
