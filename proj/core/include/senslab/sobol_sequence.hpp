#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace senslab {

/// Gray-code Sobol' generator over the bundled Joe-Kuo "new-joe-kuo-6.21201"
/// direction numbers. Points are produced with 32-bit integer arithmetic only,
/// so the sequence is bit-identical on every platform.
class SobolSequence {
public:
    static constexpr std::size_t kBits = 32;

    /// Throws DimensionUnsupported outside [1, max_dimension()].
    explicit SobolSequence(std::size_t dimension);

    static std::size_t max_dimension();

    std::size_t dimension() const noexcept { return directions_.size(); }
    std::uint64_t index() const noexcept { return index_; }

    /// Positions the generator so the next point returned is point `index`
    /// (point 0 is the origin).
    void seek(std::uint64_t index);

    /// Writes the current point into `out` (size == dimension) and advances.
    void next(std::span<double> out);

private:
    std::vector<std::array<std::uint32_t, kBits>> directions_;
    std::vector<std::uint32_t> state_;
    std::uint64_t index_ = 0;
};

/// n points of dimension `dim` starting at point `skip`, row-major n x dim.
std::vector<double> sobol_sequence(std::size_t dim, std::size_t n, std::size_t skip = 1);

}  // namespace senslab
