#include "leadlag/rng.hpp"

#include <cmath>
#include <numbers>

namespace leadlag {

double SplitMix64::next_gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

SplitMix64 SplitMix64::fork(std::uint64_t label) const {
    // Derive the child seed from the current state and the label without
    // advancing this stream.
    SplitMix64 mixer(state_ ^ (0x9e3779b97f4a7c15ULL * (label + 1)));
    return SplitMix64(mixer.next_u64());
}

Eigen::MatrixXd gaussian_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.next_gaussian();
        }
    }
    return m;
}

} // namespace leadlag
