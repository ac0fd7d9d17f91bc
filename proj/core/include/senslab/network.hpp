#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "senslab/layers.hpp"
#include "senslab/tensor.hpp"

namespace senslab {

enum class Mode { Train, Eval };

/// Sequential stack of layers (residual blocks nest their own stacks).
/// Inputs always carry a leading batch axis: [N, input_shape...].
struct Network {
    Shape input_shape;
    std::vector<Layer> layers;
    Mode mode = Mode::Eval;

    /// Per-sample output shape; throws ShapeMismatch on an inconsistent stack.
    Shape output_shape() const;
    /// Shape-checks every transition and that block ids never decrease.
    void validate() const;
    /// Per-sample output shape after the first `count` layers.
    Shape shape_after(std::size_t count) const;
};

struct BatchNormCache {
    std::vector<double> normalized;
    std::vector<double> inv_std;
    std::vector<double> batch_mean;
    std::vector<double> batch_var;
    std::size_t reduce_count = 0;
};

struct MaxPoolCache {
    std::vector<std::size_t> argmax;
};

struct ActivationTrace;

struct ResidualCache {
    std::shared_ptr<const ActivationTrace> inner;
};

using LayerCache = std::variant<std::monostate, BatchNormCache, MaxPoolCache, ResidualCache>;

/// Per-layer outputs of one forward pass plus what backward needs.
/// A trace may cover only a prefix of the network.
struct ActivationTrace {
    Mode mode = Mode::Eval;
    Tensor input;
    std::vector<Tensor> outputs;
    std::vector<LayerCache> caches;

    const Tensor& output() const;
};

/// Forward pass in the network's own mode.
ActivationTrace forward(const Network& net, const Tensor& input);
/// Forward pass through the first `layer_count` layers in the given mode.
ActivationTrace forward(const Network& net, const Tensor& input, Mode mode, std::size_t layer_count);

/// Final output only, always in Eval mode.
Tensor predict(const Network& net, const Tensor& input);

/// Gradient tensors aligned with parameters(net).
using ParamGrads = std::vector<Tensor>;

struct BackwardResult {
    ParamGrads params;
    Tensor input_grad;
    /// Gradient w.r.t. each traced layer output; filled on request only.
    std::vector<Tensor> layer_grads;
};

BackwardResult backward(const Network& net, const ActivationTrace& trace, const Tensor& output_grad,
                        bool keep_layer_grads = false);

/// Trainable tensors in a fixed depth-first order: weight then bias for
/// Dense/Conv2D, gamma then beta for BatchNorm.
std::vector<Tensor*> parameters(Network& net);
std::vector<const Tensor*> parameters(const Network& net);

/// Folds the batch statistics recorded in a Train-mode trace into the
/// running mean/variance of every BatchNorm layer (momentum update).
void commit_batch_stats(Network& net, const ActivationTrace& trace);

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, gamma=1, beta=0.
void initialize(Network& net, std::uint64_t seed);

/// Prepends a batch axis of length one.
Tensor as_batch(const Tensor& sample);

/// Index of the last top-level layer tagged with `block_id`.
std::optional<std::size_t> last_layer_of_block(const Network& net, int block_id);
std::vector<int> block_ids(const Network& net);

}  // namespace senslab
