#include "senslab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "senslab/error.hpp"

namespace senslab {

std::size_t shape_size(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (std::size_t d : shape_)
        if (d == 0) fail(ErrorCode::ShapeMismatch, "zero-length axis in shape " + shape_string(shape_));
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    for (std::size_t d : shape_)
        if (d == 0) fail(ErrorCode::ShapeMismatch, "zero-length axis in shape " + shape_string(shape_));
    if (shape_size(shape_) != data_.size())
        fail(ErrorCode::ShapeMismatch, "shape " + shape_string(shape_) + " does not hold " +
                                           std::to_string(data_.size()) + " values");
}

Tensor Tensor::from(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
}

void Tensor::reshape(Shape shape) {
    if (shape_size(shape) != data_.size())
        fail(ErrorCode::ShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t count) const {
    if (shape_.empty() || begin + count > shape_[0] || count == 0)
        fail(ErrorCode::ShapeMismatch, "row slice out of range for " + shape_string(shape_));
    const std::size_t stride = data_.size() / shape_[0];
    Shape shape = shape_;
    shape[0] = count;
    return Tensor(std::move(shape), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                                        data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride)));
}

std::vector<double>& Tensor::grad() {
    if (!grad_) grad_.emplace(data_.size(), 0.0);
    return *grad_;
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_) fail(ErrorCode::InvalidArgument, "tensor has no gradient buffer");
    return *grad_;
}

void Tensor::zero_grad() { grad().assign(data_.size(), 0.0); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view where) const {
    if (!all_finite()) fail(ErrorCode::NonFiniteValue, "non-finite value in " + std::string(where));
}

double l2_norm(std::span<const double> values) noexcept {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

}  // namespace senslab
