#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "leadlag/bundle.hpp"
#include "leadlag/errors.hpp"
#include "leadlag/phase1.hpp"
#include "leadlag/phase2.hpp"
#include "leadlag/rng.hpp"
#include "leadlag/synth.hpp"
#include "test_support.hpp"

using namespace leadlag;

TEST_SUITE("bundle") {

TEST_CASE("matrices round-trip bit-exactly through the binary format") {
    const auto dir = std::filesystem::temp_directory_path();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd m =
            testsupport::random_matrix(seed, 7, 3) * std::pow(10.0, static_cast<double>(seed) - 2);
        const std::string path = (dir / ("mat_" + std::to_string(seed) + ".bin")).string();
        write_matrix(path, m);
        const Eigen::MatrixXd back = read_matrix(path);
        REQUIRE(back.rows() == m.rows());
        REQUIRE(back.cols() == m.cols());
        CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
        std::filesystem::remove(path);
    }
}

TEST_CASE("corrupt matrix files are rejected") {
    const auto path = (std::filesystem::temp_directory_path() / "bad.bin").string();
    std::ofstream file(path, std::ios::binary);
    file << "not a matrix";
    file.close();
    CHECK_THROWS_AS(read_matrix(path), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("a full two-stage result survives the bundle round trip") {
    GeneratorParams params;
    params.entities = 8;
    params.views = 2;
    params.length = 80;
    params.k_star = 2;
    params.sigma = 0.2;
    params.seed = 5;
    const PlantedInstance inst = generate(params);
    Phase1Config p1cfg;
    p1cfg.max_iter = 30;
    const Phase1Result p1 = phase1_fit(inst.panel, 0, params.length - 1, p1cfg, 1);
    Phase2Config p2cfg;
    p2cfg.max_iter = 20;
    const Phase2Result p2 = phase2_fit(p1, p2cfg);

    const auto dir = std::filesystem::temp_directory_path() / "bundle_rt";
    std::filesystem::remove_all(dir);
    write_bundle(dir.string(), p1, p2);
    const Bundle back = read_bundle(dir.string());

    REQUIRE(back.phase1.views.size() == p1.views.size());
    for (std::size_t v = 0; v < p1.views.size(); ++v) {
        CHECK(back.phase1.views[v].view == p1.views[v].view);
        CHECK(back.phase1.views[v].converged == p1.views[v].converged);
        CHECK((back.phase1.views[v].w - p1.views[v].w).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.phase1.views[v].w_hat - p1.views[v].w_hat).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.phase1.views[v].theta - p1.views[v].theta).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back.phase1.views[v].history.size() == p1.views[v].history.size());
    }
    REQUIRE(back.phase2.views.size() == p2.views.size());
    CHECK(back.phase2.k == p2.k);
    CHECK(back.phase2.rho3 == p2.rho3);
    for (std::size_t v = 0; v < p2.views.size(); ++v) {
        CHECK((back.phase2.views[v].w_tilde - p2.views[v].w_tilde).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.phase2.views[v].phi - p2.views[v].phi).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.phase2.views[v].a - p2.views[v].a).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(back.phase2.history.size() == p2.history.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("writing the same result twice produces identical bytes") {
    GeneratorParams params;
    params.entities = 6;
    params.views = 2;
    params.length = 50;
    params.k_star = 2;
    params.sigma = 0.3;
    params.seed = 6;
    const PlantedInstance inst = generate(params);
    Phase1Config p1cfg;
    p1cfg.max_iter = 15;
    const Phase1Result p1 = phase1_fit(inst.panel, 0, params.length - 1, p1cfg, 1);
    Phase2Config p2cfg;
    p2cfg.max_iter = 10;
    const Phase2Result p2 = phase2_fit(p1, p2cfg);

    const auto dir_a = std::filesystem::temp_directory_path() / "bundle_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "bundle_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    write_bundle(dir_a.string(), p1, p2);
    write_bundle(dir_b.string(), p1, p2);

    for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
        const auto other = dir_b / entry.path().filename();
        REQUIRE(std::filesystem::exists(other));
        std::ifstream fa(entry.path(), std::ios::binary);
        std::ifstream fb(other, std::ios::binary);
        const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                                  std::istreambuf_iterator<char>());
        const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                                  std::istreambuf_iterator<char>());
        CHECK(bytes_a == bytes_b);
    }
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

} // TEST_SUITE
