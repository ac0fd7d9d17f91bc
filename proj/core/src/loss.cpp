#include "senslab/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "senslab/error.hpp"

namespace senslab {

LossResult bce_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        fail(ErrorCode::ShapeMismatch, "bce: prediction " + shape_string(pred.shape()) + " vs target " +
                                           shape_string(target.shape()));
    pred.require_finite("bce prediction");
    const double n = static_cast<double>(pred.size());
    LossResult r{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double y = target[i];
        if (y != 0.0 && y != 1.0) fail(ErrorCode::InvalidArgument, "bce: targets must be 0 or 1");
        const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
        r.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        r.grad[i] = -(y / p - (1.0 - y) / (1.0 - p)) / n;
    }
    r.value /= n;
    return r;
}

namespace {

// Writes softmax(row) - onehot(cls) into grad and returns -log softmax[cls].
double softmax_xent_row(const double* row, std::size_t c, std::size_t cls, double* grad) {
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
    const double log_sum = std::log(sum);
    for (std::size_t j = 0; j < c; ++j) grad[j] = std::exp(row[j] - mx - log_sum);
    grad[cls] -= 1.0;
    return -(row[cls] - mx - log_sum);
}

}  // namespace

LossResult cross_entropy_loss(const Tensor& logits, std::size_t target_class) {
    if (logits.rank() != 1) fail(ErrorCode::ShapeMismatch, "cross-entropy expects a 1-D score vector");
    if (target_class >= logits.size())
        fail(ErrorCode::ClassOutOfRange, "class " + std::to_string(target_class) + " outside " +
                                             std::to_string(logits.size()) + " scores");
    logits.require_finite("cross-entropy logits");
    LossResult r{0.0, Tensor(logits.shape())};
    r.value = softmax_xent_row(logits.data(), logits.size(), target_class, r.grad.data());
    return r;
}

LossResult cross_entropy_loss(const Tensor& logits, std::span<const int> classes) {
    if (logits.rank() != 2 || logits.dim(0) != classes.size())
        fail(ErrorCode::ShapeMismatch, "cross-entropy expects [N, C] logits with N labels");
    logits.require_finite("cross-entropy logits");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    LossResult r{0.0, Tensor(logits.shape())};
    for (std::size_t s = 0; s < n; ++s) {
        if (classes[s] < 0 || static_cast<std::size_t>(classes[s]) >= c)
            fail(ErrorCode::ClassOutOfRange, "class " + std::to_string(classes[s]) + " outside " +
                                                 std::to_string(c) + " scores");
        r.value += softmax_xent_row(logits.data() + s * c, c, static_cast<std::size_t>(classes[s]),
                                    r.grad.data() + s * c);
    }
    r.value /= static_cast<double>(n);
    for (double& g : r.grad.values()) g /= static_cast<double>(n);
    return r;
}

}  // namespace senslab
