#include "senslab/layers.hpp"

#include <string>

#include "senslab/error.hpp"

namespace senslab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(std::size_t value, const char* what) {
    if (value == 0) fail(ErrorCode::InvalidArgument, std::string(what) + " must be positive");
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) noexcept {
    switch (kind) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::BatchNorm: return "BatchNorm";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Sigmoid: return "Sigmoid";
        case LayerKind::MaxPool2D: return "MaxPool2D";
        case LayerKind::Residual: return "Residual";
        case LayerKind::Flatten: return "Flatten";
    }
    return "Unknown";
}

LayerKind Layer::kind() const noexcept {
    return std::visit(overloaded{
                          [](const Dense&) { return LayerKind::Dense; },
                          [](const Conv2D&) { return LayerKind::Conv2D; },
                          [](const BatchNorm&) { return LayerKind::BatchNorm; },
                          [](const ReLU&) { return LayerKind::ReLU; },
                          [](const Sigmoid&) { return LayerKind::Sigmoid; },
                          [](const MaxPool2D&) { return LayerKind::MaxPool2D; },
                          [](const Residual&) { return LayerKind::Residual; },
                          [](const Flatten&) { return LayerKind::Flatten; },
                      },
                      op);
}

Layer make_dense(std::size_t in, std::size_t out, std::optional<int> block) {
    require_positive(in, "dense input size");
    require_positive(out, "dense output size");
    Dense d;
    d.in_features = in;
    d.out_features = out;
    d.weight = Tensor({in, out});
    d.bias = Tensor({out});
    return Layer{std::move(d), block};
}

Layer make_conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t padding, std::optional<int> block) {
    require_positive(in_channels, "conv input channels");
    require_positive(out_channels, "conv output channels");
    require_positive(kernel, "conv kernel");
    require_positive(stride, "conv stride");
    Conv2D c;
    c.in_channels = in_channels;
    c.out_channels = out_channels;
    c.kernel = kernel;
    c.stride = stride;
    c.padding = padding;
    c.weight = Tensor({kernel, kernel, in_channels, out_channels});
    c.bias = Tensor({out_channels});
    return Layer{std::move(c), block};
}

Layer make_batch_norm(std::size_t features, std::optional<int> block) {
    require_positive(features, "batch-norm features");
    BatchNorm bn;
    bn.features = features;
    bn.gamma = Tensor({features}, 1.0);
    bn.beta = Tensor({features}, 0.0);
    bn.running_mean = Tensor({features}, 0.0);
    bn.running_var = Tensor({features}, 1.0);
    return Layer{std::move(bn), block};
}

Layer make_relu(std::optional<int> block) { return Layer{ReLU{}, block}; }
Layer make_sigmoid(std::optional<int> block) { return Layer{Sigmoid{}, block}; }
Layer make_flatten(std::optional<int> block) { return Layer{Flatten{}, block}; }

Layer make_max_pool(std::size_t kernel, std::size_t stride, std::optional<int> block) {
    require_positive(kernel, "pool kernel");
    require_positive(stride, "pool stride");
    return Layer{MaxPool2D{kernel, stride}, block};
}

Layer make_residual(std::vector<Layer> inner, std::optional<int> block) {
    return Layer{Residual{std::move(inner)}, block};
}

Shape layer_output_shape(const Layer& layer, const Shape& input) {
    auto mismatch = [&](const std::string& why) -> Shape {
        fail(ErrorCode::ShapeMismatch, std::string(layer_kind_name(layer.kind())) + " on input " +
                                           shape_string(input) + ": " + why);
    };
    return std::visit(
        overloaded{
            [&](const Dense& d) -> Shape {
                if (input.size() != 1 || input[0] != d.in_features)
                    return mismatch("expected [" + std::to_string(d.in_features) + "]");
                return {d.out_features};
            },
            [&](const Conv2D& c) -> Shape {
                if (input.size() != 3 || input[2] != c.in_channels)
                    return mismatch("expected [H,W," + std::to_string(c.in_channels) + "]");
                if (input[0] + 2 * c.padding < c.kernel || input[1] + 2 * c.padding < c.kernel)
                    return mismatch("kernel larger than padded input");
                return {(input[0] + 2 * c.padding - c.kernel) / c.stride + 1,
                        (input[1] + 2 * c.padding - c.kernel) / c.stride + 1, c.out_channels};
            },
            [&](const BatchNorm& bn) -> Shape {
                if ((input.size() != 1 && input.size() != 3) || input.back() != bn.features)
                    return mismatch("expected trailing axis " + std::to_string(bn.features));
                return input;
            },
            [&](const ReLU&) -> Shape { return input; },
            [&](const Sigmoid&) -> Shape { return input; },
            [&](const MaxPool2D& p) -> Shape {
                if (input.size() != 3) return mismatch("expected [H,W,C]");
                if (input[0] < p.kernel || input[1] < p.kernel) return mismatch("pool window larger than input");
                return {(input[0] - p.kernel) / p.stride + 1, (input[1] - p.kernel) / p.stride + 1, input[2]};
            },
            [&](const Residual& r) -> Shape {
                Shape s = input;
                for (const Layer& l : r.inner) s = layer_output_shape(l, s);
                if (s != input) return mismatch("inner stack produces " + shape_string(s));
                return input;
            },
            [&](const Flatten&) -> Shape { return {shape_size(input)}; },
        },
        layer.op);
}

std::size_t layer_param_count(const Layer& layer) noexcept {
    switch (layer.kind()) {
        case LayerKind::Dense:
        case LayerKind::Conv2D:
        case LayerKind::BatchNorm:
            return 2;
        case LayerKind::Residual: {
            std::size_t n = 0;
            for (const Layer& l : std::get<Residual>(layer.op).inner) n += layer_param_count(l);
            return n;
        }
        default:
            return 0;
    }
}

}  // namespace senslab
