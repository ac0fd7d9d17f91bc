#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace senslab {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor from(std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Same values under a new shape with an equal element count.
    Tensor reshaped(Shape shape) const;
    void reshape(Shape shape);

    /// Sub-tensor along the leading axis: rows [begin, begin + count).
    Tensor slice_rows(std::size_t begin, std::size_t count) const;

    bool has_grad() const noexcept { return grad_.has_value(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();
    void drop_grad() noexcept { grad_.reset(); }

    void fill(double value);
    bool all_finite() const noexcept;
    /// Throws NonFiniteValue naming `where` if any entry is NaN or infinite.
    void require_finite(std::string_view where) const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
    std::optional<std::vector<double>> grad_;
};

double l2_norm(std::span<const double> values) noexcept;

}  // namespace senslab
