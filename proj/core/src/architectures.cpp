#include "senslab/architectures.hpp"

#include "senslab/error.hpp"

namespace senslab {

namespace {

void require_image(const Shape& shape) {
    if (shape.size() != 3) fail(ErrorCode::ShapeMismatch, "image networks expect an [H,W,C] input shape");
}

void finish(Network& net, std::uint64_t seed) {
    net.validate();
    initialize(net, seed);
    net.mode = Mode::Eval;
}

void add_head(Network& net, std::size_t classes) {
    const Shape features = net.output_shape();
    net.layers.push_back(make_flatten());
    net.layers.push_back(make_dense(shape_size(features), classes));
}

}  // namespace

Network make_mlp(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
    Network net;
    net.input_shape = {inputs};
    net.layers.push_back(make_dense(inputs, hidden, 1));
    net.layers.push_back(make_batch_norm(hidden, 1));
    net.layers.push_back(make_relu(1));
    net.layers.push_back(make_dense(hidden, 1, 2));
    net.layers.push_back(make_batch_norm(1, 2));
    net.layers.push_back(make_sigmoid(2));
    finish(net, seed);
    return net;
}

Network make_vgg_tiny(const Shape& image_shape, std::size_t classes, std::uint64_t seed,
                      const std::vector<std::size_t>& widths) {
    require_image(image_shape);
    Network net;
    net.input_shape = image_shape;
    std::size_t channels = image_shape[2];
    int block = 1;
    for (std::size_t width : widths) {
        net.layers.push_back(make_conv2d(channels, width, 3, 1, 1, block));
        net.layers.push_back(make_relu(block));
        net.layers.push_back(make_conv2d(width, width, 3, 1, 1, block));
        net.layers.push_back(make_relu(block));
        net.layers.push_back(make_max_pool(2, 2, block));
        channels = width;
        ++block;
    }
    add_head(net, classes);
    finish(net, seed);
    return net;
}

Network make_resnet_tiny(const Shape& image_shape, std::size_t classes, std::uint64_t seed,
                         const std::vector<std::size_t>& widths) {
    require_image(image_shape);
    if (widths.empty()) fail(ErrorCode::InvalidArgument, "resnet needs at least one stage");
    Network net;
    net.input_shape = image_shape;
    net.layers.push_back(make_conv2d(image_shape[2], widths.front(), 3, 1, 1, 0));
    net.layers.push_back(make_batch_norm(widths.front(), 0));
    net.layers.push_back(make_relu(0));
    std::size_t channels = widths.front();
    int block = 1;
    for (std::size_t width : widths) {
        net.layers.push_back(make_conv2d(channels, width, 3, 1, 1, block));
        net.layers.push_back(make_batch_norm(width, block));
        net.layers.push_back(make_relu(block));
        std::vector<Layer> inner;
        inner.push_back(make_conv2d(width, width, 3, 1, 1, block));
        inner.push_back(make_batch_norm(width, block));
        inner.push_back(make_relu(block));
        inner.push_back(make_conv2d(width, width, 3, 1, 1, block));
        inner.push_back(make_batch_norm(width, block));
        net.layers.push_back(make_residual(std::move(inner), block));
        net.layers.push_back(make_relu(block));
        net.layers.push_back(make_max_pool(2, 2, block));
        channels = width;
        ++block;
    }
    add_head(net, classes);
    finish(net, seed);
    return net;
}

}  // namespace senslab
