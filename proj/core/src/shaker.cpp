#include "leadlag/shaker.hpp"

#include <algorithm>
#include <numeric>

#include "leadlag/errors.hpp"

namespace leadlag {

namespace {

constexpr double kBlowupLimit = 1e12;

void check_magnitude(const Eigen::MatrixXd& m, int step) {
    const double peak = m.cwiseAbs().maxCoeff();
    if (!(peak <= kBlowupLimit)) {
        throw SpectralBlowupError(
            "accumulate_influence: entries exceeded 1e12 at power " + std::to_string(step) +
            "; rescale the influence matrix (spectral radius should stay below 1) or reduce r");
    }
}

} // namespace

Eigen::MatrixXd accumulate_influence(const Eigen::MatrixXd& w, int r) {
    if (r < 1) {
        throw ConfigError("accumulate_influence: r must be >= 1");
    }
    if (w.rows() != w.cols()) {
        throw ShapeMismatchError("accumulate_influence: matrix must be square");
    }
    if (!w.allFinite()) {
        throw NonFiniteInputError("accumulate_influence: matrix contains NaN or Inf");
    }
    Eigen::MatrixXd power = w;
    Eigen::MatrixXd accumulated = w;
    check_magnitude(accumulated, 1);
    for (int step = 2; step <= r; ++step) {
        power = power * w;
        check_magnitude(power, step);
        accumulated += power;
        check_magnitude(accumulated, step);
    }
    return accumulated;
}

ShakerReport rank_shakers(const Eigen::MatrixXd& e, int top, int r, std::string source_matrix) {
    if (top < 1) {
        throw ConfigError("rank_shakers: top must be >= 1");
    }
    const Eigen::Index n = e.rows();
    ShakerReport report;
    report.e = e;
    report.f = e.rowwise().norm();
    report.top = std::min<int>(top, static_cast<int>(n));
    report.r = r;
    report.source_matrix = std::move(source_matrix);
    report.ranking.resize(static_cast<std::size_t>(n));
    std::iota(report.ranking.begin(), report.ranking.end(), Eigen::Index{0});
    std::stable_sort(report.ranking.begin(), report.ranking.end(),
                     [&](Eigen::Index lhs, Eigen::Index rhs) {
                         if (report.f(lhs) != report.f(rhs)) {
                             return report.f(lhs) > report.f(rhs);
                         }
                         return lhs < rhs;
                     });
    return report;
}

} // namespace leadlag
