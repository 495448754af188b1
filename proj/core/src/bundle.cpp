#include "leadlag/bundle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "leadlag/errors.hpp"

namespace leadlag {

namespace {

constexpr char kMagic[8] = {'L', 'L', 'M', 'A', 'T', '0', '0', '1'};

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return value;
    }
}

template <typename T>
T from_little(T value) {
    return to_little(value);
}

nlohmann::json history_to_json(const std::vector<Phase1IterationStats>& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& h : history) {
        out.push_back({{"objective", h.objective},
                       {"lagrangian_entry", h.lagrangian_entry},
                       {"lagrangian_after_w", h.lagrangian_after_w},
                       {"lagrangian_after_theta", h.lagrangian_after_theta},
                       {"lagrangian_after_w_hat", h.lagrangian_after_w_hat},
                       {"primal_residual", h.primal_residual},
                       {"rank_w_hat", h.rank_w_hat},
                       {"theta_nonzero_columns", h.theta_nonzero_columns},
                       {"u", h.u}});
    }
    return out;
}

std::vector<Phase1IterationStats> history_from_json(const nlohmann::json& arr) {
    std::vector<Phase1IterationStats> out;
    for (const auto& h : arr) {
        Phase1IterationStats s;
        s.objective = h.at("objective").get<double>();
        s.lagrangian_entry = h.at("lagrangian_entry").get<double>();
        s.lagrangian_after_w = h.at("lagrangian_after_w").get<double>();
        s.lagrangian_after_theta = h.at("lagrangian_after_theta").get<double>();
        s.lagrangian_after_w_hat = h.at("lagrangian_after_w_hat").get<double>();
        s.primal_residual = h.at("primal_residual").get<double>();
        s.rank_w_hat = h.at("rank_w_hat").get<Eigen::Index>();
        s.theta_nonzero_columns = h.at("theta_nonzero_columns").get<Eigen::Index>();
        s.u = h.at("u").get<double>();
        out.push_back(s);
    }
    return out;
}

nlohmann::json history2_to_json(const std::vector<Phase2IterationStats>& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& h : history) {
        out.push_back({{"objective", h.objective},
                       {"alignment", h.alignment},
                       {"lagrangian_entry", h.lagrangian_entry},
                       {"lagrangian_after_w_tilde", h.lagrangian_after_w_tilde},
                       {"lagrangian_after_a", h.lagrangian_after_a},
                       {"lagrangian_after_phi", h.lagrangian_after_phi},
                       {"max_primal_residual", h.max_primal_residual},
                       {"max_ortho_error", h.max_ortho_error},
                       {"phi_nonzero_columns", h.phi_nonzero_columns},
                       {"u", h.u}});
    }
    return out;
}

std::vector<Phase2IterationStats> history2_from_json(const nlohmann::json& arr) {
    std::vector<Phase2IterationStats> out;
    for (const auto& h : arr) {
        Phase2IterationStats s;
        s.objective = h.at("objective").get<double>();
        s.alignment = h.at("alignment").get<double>();
        s.lagrangian_entry = h.at("lagrangian_entry").get<double>();
        s.lagrangian_after_w_tilde = h.at("lagrangian_after_w_tilde").get<double>();
        s.lagrangian_after_a = h.at("lagrangian_after_a").get<double>();
        s.lagrangian_after_phi = h.at("lagrangian_after_phi").get<double>();
        s.max_primal_residual = h.at("max_primal_residual").get<double>();
        s.max_ortho_error = h.at("max_ortho_error").get<double>();
        s.phi_nonzero_columns = h.at("phi_nonzero_columns").get<Eigen::Index>();
        s.u = h.at("u").get<double>();
        out.push_back(s);
    }
    return out;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream file(path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("bundle: cannot open '" + path.string() + "' for writing");
    }
    file << j.dump(2) << '\n';
    if (!file) {
        throw DataError("bundle: write failed for '" + path.string() + "'");
    }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("bundle: cannot open '" + path.string() + "'");
    }
    nlohmann::json j;
    file >> j;
    return j;
}

} // namespace

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream file(path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("write_matrix: cannot open '" + path + "' for writing");
    }
    file.write(kMagic, sizeof(kMagic));
    const std::uint64_t rows = to_little(static_cast<std::uint64_t>(m.rows()));
    const std::uint64_t cols = to_little(static_cast<std::uint64_t>(m.cols()));
    file.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    file.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row[static_cast<std::size_t>(j)] = to_little(m(i, j));
        }
        file.write(reinterpret_cast<const char*>(row.data()),
                   static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    if (!file) {
        throw DataError("write_matrix: write failed for '" + path + "'");
    }
}

Eigen::MatrixXd read_matrix(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("read_matrix: cannot open '" + path + "'");
    }
    char magic[8];
    file.read(magic, sizeof(magic));
    if (!file || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("read_matrix: '" + path + "' is not a matrix file");
    }
    std::uint64_t rows = 0, cols = 0;
    file.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    file.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    rows = from_little(rows);
    cols = from_little(cols);
    if (!file || rows > (1ULL << 32) || cols > (1ULL << 32)) {
        throw DataError("read_matrix: bad header in '" + path + "'");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<double> row(static_cast<std::size_t>(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        file.read(reinterpret_cast<char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!file) {
            throw DataError("read_matrix: truncated data in '" + path + "'");
        }
        for (std::uint64_t j = 0; j < cols; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                from_little(row[static_cast<std::size_t>(j)]);
        }
    }
    return m;
}

void write_bundle(const std::string& dir, const Phase1Result& phase1,
                  const Phase2Result& phase2) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);

    nlohmann::json p1;
    p1["views"] = nlohmann::json::array();
    for (std::size_t v = 0; v < phase1.views.size(); ++v) {
        const auto& view = phase1.views[v];
        const std::string tag = "v" + std::to_string(v);
        p1["views"].push_back({{"view", view.view},
                               {"converged", view.converged},
                               {"rho1", view.rho1},
                               {"rho2", view.rho2},
                               {"history", history_to_json(view.history)}});
        write_matrix((base / ("W_" + tag + ".bin")).string(), view.w);
        write_matrix((base / ("What_" + tag + ".bin")).string(), view.w_hat);
        write_matrix((base / ("Theta_" + tag + ".bin")).string(), view.theta);
        write_matrix((base / ("lambda1_" + tag + ".bin")).string(), view.lambda1);
    }
    write_json_file(base / "phase1.json", p1);

    nlohmann::json p2;
    p2["converged"] = phase2.converged;
    p2["degenerate_single_view"] = phase2.degenerate_single_view;
    p2["k"] = phase2.k;
    p2["rho3"] = phase2.rho3;
    p2["history"] = history2_to_json(phase2.history);
    p2["views"] = nlohmann::json::array();
    for (std::size_t v = 0; v < phase2.views.size(); ++v) {
        const auto& view = phase2.views[v];
        const std::string tag = "v" + std::to_string(v);
        nlohmann::json entry = {{"view", view.view}};
        // Column scores let downstream tooling rank outliers without the
        // binary matrices.
        nlohmann::json scores = nlohmann::json::array();
        for (Eigen::Index j = 0; j < view.phi.cols(); ++j) {
            scores.push_back(view.phi.col(j).norm());
        }
        entry["phi_column_scores"] = std::move(scores);
        p2["views"].push_back(std::move(entry));
        write_matrix((base / ("Wtilde_" + tag + ".bin")).string(), view.w_tilde);
        write_matrix((base / ("Phi_" + tag + ".bin")).string(), view.phi);
        write_matrix((base / ("A_" + tag + ".bin")).string(), view.a);
        write_matrix((base / ("lambda2_" + tag + ".bin")).string(), view.lambda2);
    }
    write_json_file(base / "phase2.json", p2);
}

Bundle read_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path base(dir);
    Bundle bundle;

    const nlohmann::json p1 = read_json_file(base / "phase1.json");
    std::size_t v = 0;
    for (const auto& entry : p1.at("views")) {
        Phase1ViewResult view;
        const std::string tag = "v" + std::to_string(v);
        view.view = entry.at("view").get<std::string>();
        view.converged = entry.at("converged").get<bool>();
        view.rho1 = entry.at("rho1").get<double>();
        view.rho2 = entry.at("rho2").get<double>();
        view.history = history_from_json(entry.at("history"));
        view.w = read_matrix((base / ("W_" + tag + ".bin")).string());
        view.w_hat = read_matrix((base / ("What_" + tag + ".bin")).string());
        view.theta = read_matrix((base / ("Theta_" + tag + ".bin")).string());
        view.lambda1 = read_matrix((base / ("lambda1_" + tag + ".bin")).string());
        bundle.phase1.views.push_back(std::move(view));
        ++v;
    }

    const nlohmann::json p2 = read_json_file(base / "phase2.json");
    bundle.phase2.converged = p2.at("converged").get<bool>();
    bundle.phase2.degenerate_single_view = p2.at("degenerate_single_view").get<bool>();
    bundle.phase2.k = p2.at("k").get<Eigen::Index>();
    bundle.phase2.rho3 = p2.at("rho3").get<double>();
    bundle.phase2.history = history2_from_json(p2.at("history"));
    v = 0;
    for (const auto& entry : p2.at("views")) {
        Phase2ViewResult view;
        const std::string tag = "v" + std::to_string(v);
        view.view = entry.at("view").get<std::string>();
        view.w_tilde = read_matrix((base / ("Wtilde_" + tag + ".bin")).string());
        view.phi = read_matrix((base / ("Phi_" + tag + ".bin")).string());
        view.a = read_matrix((base / ("A_" + tag + ".bin")).string());
        view.lambda2 = read_matrix((base / ("lambda2_" + tag + ".bin")).string());
        bundle.phase2.views.push_back(std::move(view));
        ++v;
    }
    return bundle;
}

} // namespace leadlag
