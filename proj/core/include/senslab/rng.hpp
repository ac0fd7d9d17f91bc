#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace senslab {

/// Seeded generator whose derived draws are identical on every platform.
/// std::mt19937_64 itself is fully specified; the standard distributions are
/// not, so the conversions to doubles, bounded integers and normals live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double low, double high) { return low + (high - low) * uniform(); }

    /// Uniform integer in [0, bound) by rejection; bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via Box-Muller (one value per call, the pair partner is dropped).
    double normal();

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace senslab
