#pragma once

#include <cstddef>
#include <span>

#include "senslab/tensor.hpp"

namespace senslab {

struct LossResult {
    double value = 0.0;
    Tensor grad;  // d value / d input, same shape as the scored tensor
};

inline constexpr double kBceClamp = 1e-12;

/// Mean binary cross-entropy. Predictions are clamped to [1e-12, 1 - 1e-12];
/// targets must be 0 or 1.
LossResult bce_loss(const Tensor& pred, const Tensor& target);

/// Softmax cross-entropy of a 1-D score vector against one class.
LossResult cross_entropy_loss(const Tensor& logits, std::size_t target_class);

/// Batched softmax cross-entropy over [N, C] logits, averaged over N.
LossResult cross_entropy_loss(const Tensor& logits, std::span<const int> classes);

}  // namespace senslab
