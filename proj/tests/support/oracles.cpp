#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>

#include "senslab/error.hpp"

namespace senslab::testing {

IshigamiOracle ishigami_oracle(double a, double b) {
    const double pi = std::numbers::pi;
    const double pi4 = std::pow(pi, 4);
    const double pi8 = std::pow(pi, 8);
    const double v1 = 0.5 * (1.0 + b * pi4 / 5.0) * (1.0 + b * pi4 / 5.0);
    const double v2 = a * a / 8.0;
    const double v13 = b * b * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
    const double v = v1 + v2 + v13;

    IshigamiOracle o;
    o.variance = v;
    o.s1 = {v1 / v, v2 / v, 0.0};
    o.st = {(v1 + v13) / v, v2 / v, v13 / v};
    return o;
}

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = f(x);
        x[i] = keep - step;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

namespace {

double weighted_output(const Network& net, const Tensor& x, std::span<const double> r) {
    const Tensor y = forward(net, x).output();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
}

void scan_margin(const std::vector<Layer>& layers, const ActivationTrace& trace, double& margin) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Tensor& in = l == 0 ? trace.input : trace.outputs[l - 1];
        const Layer& layer = layers[l];
        if (std::holds_alternative<ReLU>(layer.op)) {
            for (double v : in.values()) margin = std::min(margin, std::abs(v));
        } else if (const auto* pool = std::get_if<MaxPool2D>(&layer.op)) {
            const std::size_t n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
            const std::size_t oh = (h - pool->kernel) / pool->stride + 1;
            const std::size_t ow = (w - pool->kernel) / pool->stride + 1;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j)
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            double top = -std::numeric_limits<double>::infinity(), second = top;
                            for (std::size_t di = 0; di < pool->kernel; ++di)
                                for (std::size_t dj = 0; dj < pool->kernel; ++dj) {
                                    const double v = in[((b * h + i * pool->stride + di) * w + j * pool->stride + dj) * c + ch];
                                    if (v > top) {
                                        second = top;
                                        top = v;
                                    } else if (v > second) {
                                        second = v;
                                    }
                                }
                            // Zeros tied after a ReLU cannot move under a small
                            // perturbation; the ReLU margin already covers them.
                            if (top == 0.0 && second == 0.0) continue;
                            margin = std::min(margin, top - second);
                        }
        } else if (const auto* res = std::get_if<Residual>(&layer.op)) {
            const auto& cache = std::get<ResidualCache>(trace.caches[l]);
            scan_margin(res->inner, *cache.inner, margin);
        }
    }
}

Network single(Shape input_shape, Layer layer, Mode mode) {
    Network net;
    net.input_shape = std::move(input_shape);
    net.layers.push_back(std::move(layer));
    net.mode = mode;
    return net;
}

Network build_case(LayerKind kind, Rng& rng, std::string& name, Shape& batch_shape) {
    const std::size_t n = 2 + rng.below(3);
    const Mode mode = rng.uniform() < 0.5 ? Mode::Train : Mode::Eval;
    switch (kind) {
        case LayerKind::Dense: {
            const std::size_t in = 1 + rng.below(6), out = 1 + rng.below(5);
            name = "Dense";
            batch_shape = {n, in};
            return single({in}, make_dense(in, out), mode);
        }
        case LayerKind::Conv2D: {
            const std::size_t k = 1 + 2 * rng.below(2);  // 1 or 3
            const std::size_t stride = 1 + rng.below(2);
            const std::size_t pad = rng.below(k / 2 + 1);
            const std::size_t h = 3 + rng.below(4), w = 3 + rng.below(4);
            const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3);
            name = "Conv2D";
            batch_shape = {n, h, w, cin};
            return single({h, w, cin}, make_conv2d(cin, cout, k, stride, pad), mode);
        }
        case LayerKind::BatchNorm: {
            const bool spatial = rng.uniform() < 0.5;
            const std::size_t f = 1 + rng.below(4);
            name = mode == Mode::Train ? "BatchNorm(train)" : "BatchNorm(eval)";
            batch_shape = spatial ? Shape{n, 3, 2, f} : Shape{n, f};
            return spatial ? single({3, 2, f}, make_batch_norm(f), mode) : single({f}, make_batch_norm(f), mode);
        }
        case LayerKind::ReLU: {
            const std::size_t f = 1 + rng.below(8);
            name = "ReLU";
            batch_shape = {n, f};
            return single({f}, make_relu(), mode);
        }
        case LayerKind::Sigmoid: {
            const std::size_t f = 1 + rng.below(8);
            name = "Sigmoid";
            batch_shape = {n, f};
            return single({f}, make_sigmoid(), mode);
        }
        case LayerKind::MaxPool2D: {
            const std::size_t kernel = 2 + rng.below(2);
            const std::size_t stride = 1 + rng.below(2);
            const std::size_t h = kernel + rng.below(4), w = kernel + rng.below(4), c = 1 + rng.below(3);
            name = "MaxPool2D";
            batch_shape = {n, h, w, c};
            return single({h, w, c}, make_max_pool(kernel, stride), mode);
        }
        case LayerKind::Residual: {
            const std::size_t h = 3 + rng.below(3), w = 3 + rng.below(3), c = 1 + rng.below(3);
            std::vector<Layer> inner;
            inner.push_back(make_conv2d(c, c, 3, 1, 1));
            inner.push_back(make_batch_norm(c));
            inner.push_back(rng.uniform() < 0.5 ? make_relu() : make_sigmoid());
            inner.push_back(make_conv2d(c, c, 3, 1, 1));
            name = "Residual";
            batch_shape = {n, h, w, c};
            return single({h, w, c}, make_residual(std::move(inner)), mode);
        }
        case LayerKind::Flatten: {
            const std::size_t h = 1 + rng.below(3), w = 1 + rng.below(3), c = 1 + rng.below(3);
            name = "Flatten";
            batch_shape = {n, h, w, c};
            Network net = single({h, w, c}, make_flatten(), mode);
            net.layers.push_back(make_dense(h * w * c, 2));
            return net;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown layer kind");
}

}  // namespace

GradCheck check_network_gradients(const Network& net, const Tensor& input, Rng& rng, double step) {
    const ActivationTrace trace = forward(net, input);
    const Tensor& y = trace.output();
    Tensor r(y.shape());
    for (double& v : r.values()) v = rng.uniform(-1.0, 1.0);
    const BackwardResult back = backward(net, trace, r);

    GradCheck out;
    {
        const Shape shape = input.shape();
        auto f = [&](std::span<const double> x) {
            return weighted_output(net, Tensor(shape, std::vector<double>(x.begin(), x.end())), r.values());
        };
        const auto num = numeric_gradient(f, std::vector<double>(input.values().begin(), input.values().end()), step);
        out.input_error = relative_error(back.input_grad.values(), num);
    }
    // All parameters are compared as one vector: a tensor whose exact
    // gradient is zero (a bias feeding a batch-statistics BatchNorm) would
    // otherwise be judged on finite-difference noise alone.
    Network probe = net;
    const auto params = parameters(probe);
    std::vector<double> analytic, num;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor* t = params[p];
        analytic.insert(analytic.end(), back.params[p].values().begin(), back.params[p].values().end());
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double keep = (*t)[i];
            (*t)[i] = keep + step;
            const double up = weighted_output(probe, input, r.values());
            (*t)[i] = keep - step;
            const double down = weighted_output(probe, input, r.values());
            (*t)[i] = keep;
            num.push_back((up - down) / (2.0 * step));
        }
    }
    if (!num.empty()) out.param_error = relative_error(analytic, num);
    return out;
}

double kink_margin(const Network& net, const Tensor& input) {
    double margin = std::numeric_limits<double>::infinity();
    const ActivationTrace trace = forward(net, input);
    scan_margin(net.layers, trace, margin);
    return margin;
}

LayerCase random_layer_case(LayerKind kind, Rng& rng) {
    for (;;) {
        LayerCase c;
        Shape shape;
        c.net = build_case(kind, rng, c.name, shape);
        initialize(c.net, rng.next_u64());
        randomize_parameters(c.net, rng, -1.0, 1.0);
        for (Layer& layer : c.net.layers)
            if (auto* bn = std::get_if<BatchNorm>(&layer.op)) {
                for (double& v : bn->running_mean.values()) v = rng.uniform(-0.5, 0.5);
                for (double& v : bn->running_var.values()) v = rng.uniform(0.5, 2.0);
            }
        c.input = random_tensor(shape, rng);
        if (kink_margin(c.net, c.input) > 1e-3) return c;
    }
}

const std::vector<LayerKind>& all_layer_kinds() {
    static const std::vector<LayerKind> kinds{LayerKind::Dense,   LayerKind::Conv2D,    LayerKind::BatchNorm,
                                              LayerKind::ReLU,    LayerKind::Sigmoid,   LayerKind::MaxPool2D,
                                              LayerKind::Residual, LayerKind::Flatten};
    return kinds;
}

Tensor random_tensor(const Shape& shape, Rng& rng, double low, double high) {
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(low, high);
    return t;
}

void randomize_parameters(Network& net, Rng& rng, double low, double high) {
    for (Tensor* t : parameters(net))
        for (double& v : t->values()) v = rng.uniform(low, high);
}

double variance(std::span<const double> values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) s += (v - mean) * (v - mean);
    return s / static_cast<double>(values.size());
}

}  // namespace senslab::testing
