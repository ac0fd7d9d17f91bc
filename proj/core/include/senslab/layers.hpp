#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "senslab/tensor.hpp"

namespace senslab {

enum class LayerKind : std::uint32_t {
    Dense = 1,
    Conv2D = 2,
    BatchNorm = 3,
    ReLU = 4,
    Sigmoid = 5,
    MaxPool2D = 6,
    Residual = 7,
    Flatten = 8,
};

std::string_view layer_kind_name(LayerKind kind) noexcept;

struct Layer;

/// y = x W + b with W stored [in, out].
struct Dense {
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    Tensor weight;
    Tensor bias;
};

/// Channels-last convolution. Input [N, H, W, Cin], weight [k, k, Cin, Cout].
struct Conv2D {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
    Tensor weight;
    Tensor bias;
};

/// Normalizes the last axis over every other axis (batch and spatial).
struct BatchNorm {
    std::size_t features = 0;
    double eps = 1e-5;
    double momentum = 0.1;
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
};

struct ReLU {};
struct Sigmoid {};
struct Flatten {};

struct MaxPool2D {
    std::size_t kernel = 2;
    std::size_t stride = 2;
};

/// Res(x) = x + F(x); the inner stack must map a shape onto itself.
struct Residual {
    std::vector<Layer> inner;
};

using LayerOp = std::variant<Dense, Conv2D, BatchNorm, ReLU, Sigmoid, MaxPool2D, Residual, Flatten>;

struct Layer {
    LayerOp op;
    std::optional<int> block_id;

    LayerKind kind() const noexcept;
};

Layer make_dense(std::size_t in, std::size_t out, std::optional<int> block = {});
Layer make_conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t padding, std::optional<int> block = {});
Layer make_batch_norm(std::size_t features, std::optional<int> block = {});
Layer make_relu(std::optional<int> block = {});
Layer make_sigmoid(std::optional<int> block = {});
Layer make_max_pool(std::size_t kernel, std::size_t stride, std::optional<int> block = {});
Layer make_flatten(std::optional<int> block = {});
Layer make_residual(std::vector<Layer> inner, std::optional<int> block = {});

/// Per-sample output shape of a layer, or ShapeMismatch.
Shape layer_output_shape(const Layer& layer, const Shape& input);

/// Number of trainable tensors owned by the layer, nested ones included.
std::size_t layer_param_count(const Layer& layer) noexcept;

}  // namespace senslab
