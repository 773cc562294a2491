#pragma once

#include <cstdint>
#include <vector>

namespace dybat {

/// Deterministic xoshiro256** generator seeded through splitmix64.
/// The stream depends only on the seed, never on platform or library state,
/// so equal seeds reproduce bit-identical runs everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller on two uniforms.
    double normal();

    /// Uniform integer in [0, n), n >= 1. Fixed-point multiply bound;
    /// bias is negligible for the small n used here.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Independent generator derived from this seed and a stream tag.
    Rng fork(std::uint64_t stream) const;

    /// In-place Fisher-Yates shuffle driven by this generator.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_[4] = {0, 0, 0, 0};
    double spare_normal_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dybat
