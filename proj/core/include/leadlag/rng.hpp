#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace leadlag {

/// Deterministic counter-style generator built on the SplitMix64 mixing
/// function. The same seed produces the same stream on every platform and
/// build; streams for sub-tasks are forked by label so the draw order of one
/// consumer never shifts another's. Gaussians come from Box-Muller on the
/// 53-bit uniform, so the whole stream is reproducible from the seed alone.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw in the open interval (0, 1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw (Box-Muller, both values of each pair used).
    double next_gaussian();

    /// Independent stream derived from this generator's seed and a label.
    /// Forking does not advance this generator's state.
    SplitMix64 fork(std::uint64_t label) const;

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Matrix of iid standard normals, filled in row-major draw order.
Eigen::MatrixXd gaussian_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols);

} // namespace leadlag
