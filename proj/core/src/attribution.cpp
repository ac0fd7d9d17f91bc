#include "senslab/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "senslab/error.hpp"
#include "senslab/rng.hpp"

namespace senslab {

namespace {

// [H, W, C] view of an image with or without a unit batch axis.
Shape image_dims(const Tensor& image) {
    Shape s = image.shape();
    if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
    if (s.size() == 2) s.push_back(1);
    if (s.size() != 3) fail(ErrorCode::ShapeMismatch, "expected an [H, W, C] image, got " + shape_string(image.shape()));
    return s;
}

std::size_t reflect(long i, std::size_t n) {
    const long period = 2 * static_cast<long>(n);
    long m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

Tensor batched(const Network& net, const Tensor& image) {
    if (image.shape() == net.input_shape) return as_batch(image);
    Shape s = net.input_shape;
    s.insert(s.begin(), 1);
    if (image.shape() == s) return image;
    fail(ErrorCode::ShapeMismatch, "image shape " + shape_string(image.shape()) + " does not match network input " +
                                       shape_string(net.input_shape));
}

std::size_t target_depth(const Network& net, const AMTarget& target) {
    if (target.kind == AMTarget::Kind::ClassLogit) {
        const std::size_t outputs = shape_size(net.output_shape());
        if (target.index >= outputs)
            fail(ErrorCode::TargetUnresolvable, "class " + std::to_string(target.index) + " outside the " +
                                                    std::to_string(outputs) + " network outputs");
        return net.layers.size();
    }
    if (target.layer >= net.layers.size())
        fail(ErrorCode::TargetUnresolvable, "layer " + std::to_string(target.layer) + " does not exist");
    const std::size_t units = shape_size(net.shape_after(target.layer + 1));
    if (target.index >= units)
        fail(ErrorCode::TargetUnresolvable, "unit " + std::to_string(target.index) + " outside layer " +
                                                std::to_string(target.layer) + " (" + std::to_string(units) +
                                                " units)");
    return target.layer + 1;
}

struct ValueAndGrad {
    double value = 0.0;
    Tensor grad;
};

ValueAndGrad activation_and_grad(const Network& net, const Tensor& x, const AMTarget& target, std::size_t depth) {
    const ActivationTrace trace = forward(net, x, Mode::Eval, depth);
    Tensor seed(trace.output().shape());
    seed[target.index] = 1.0;
    ValueAndGrad out;
    out.value = trace.output()[target.index];
    out.grad = backward(net, trace, seed).input_grad;
    return out;
}

void clamp_into(Tensor& x, double lo, double hi) {
    for (double& v : x.values()) v = std::clamp(v, lo, hi);
}

}  // namespace

LossResult tv_loss(const Tensor& image) {
    const Shape s = image_dims(image);
    const std::size_t h = s[0], w = s[1], c = s[2];
    LossResult r;
    r.grad = Tensor(image.shape());
    auto term = [&](std::size_t a, std::size_t b) {
        const double d = image[b] - image[a];
        r.value += std::abs(d);
        const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        r.grad[b] += sg;
        r.grad[a] -= sg;
    };
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) {
                const std::size_t at = (i * w + j) * c + k;
                if (i + 1 < h) term(at, at + w * c);
                if (j + 1 < w) term(at, at + c);
            }
    return r;
}

Tensor gaussian_blur(const Tensor& image, double sigma, std::size_t radius) {
    if (!(sigma > 0.0)) fail(ErrorCode::InvalidArgument, "blur sigma must be positive");
    if (radius == 0) fail(ErrorCode::InvalidArgument, "blur radius must be at least 1");
    const Shape s = image_dims(image);
    const std::size_t h = s[0], w = s[1], c = s[2];
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
        const double d = static_cast<double>(k) - static_cast<double>(radius);
        kernel[k] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += kernel[k];
    }
    for (double& v : kernel) v /= total;
    const long r = static_cast<long>(radius);

    Tensor rows(image.shape());
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) {
                double acc = 0.0;
                for (long d = -r; d <= r; ++d)
                    acc += kernel[static_cast<std::size_t>(d + r)] *
                           image[(i * w + reflect(static_cast<long>(j) + d, w)) * c + k];
                rows[(i * w + j) * c + k] = acc;
            }
    Tensor out(image.shape());
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) {
                double acc = 0.0;
                for (long d = -r; d <= r; ++d)
                    acc += kernel[static_cast<std::size_t>(d + r)] *
                           rows[(reflect(static_cast<long>(i) + d, h) * w + j) * c + k];
                out[(i * w + j) * c + k] = acc;
            }
    return out;
}

void AMConfig::validate() const {
    if (steps == 0) fail(ErrorCode::InvalidArgument, "activation maximization needs at least one step");
    if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) fail(ErrorCode::InvalidArgument, "step sizes must be non-negative");
    if (!(clamp_low < clamp_high)) fail(ErrorCode::InvalidArgument, "clamp range must satisfy low < high");
    if (regularizer == Regularizer::Operator) {
        if (!(blur_sigma > 0.0)) fail(ErrorCode::InvalidArgument, "blur sigma must be positive");
        if (blur_radius == 0) fail(ErrorCode::InvalidArgument, "blur radius must be at least 1");
    }
}

double target_activation(const Network& net, const Tensor& image, const AMTarget& target) {
    const std::size_t depth = target_depth(net, target);
    return forward(net, batched(net, image), Mode::Eval, depth).output()[target.index];
}

AMResult am_ascend(const Network& net, const AMConfig& cfg) {
    cfg.validate();
    const std::size_t depth = target_depth(net, cfg.target);
    Tensor x;
    if (cfg.init_image) {
        x = batched(net, *cfg.init_image);
    } else {
        Shape s = net.input_shape;
        s.insert(s.begin(), 1);
        x = Tensor(s);
        Rng rng(cfg.init_seed);
        for (double& v : x.values()) v = rng.uniform(cfg.clamp_low, cfg.clamp_high);
    }
    x.require_finite("activation maximization start image");
    clamp_into(x, cfg.clamp_low, cfg.clamp_high);

    AMResult result;
    result.activation_trace.reserve(cfg.steps);
    ValueAndGrad current = activation_and_grad(net, x, cfg.target, depth);
    result.initial_activation = current.value;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        Tensor next;
        switch (cfg.regularizer) {
            case Regularizer::None:
                next = x;
                for (std::size_t i = 0; i < next.size(); ++i) next[i] += cfg.eps1 * current.grad[i];
                break;
            case Regularizer::TotalVariation: {
                const LossResult tv = tv_loss(x);
                next = x;
                for (std::size_t i = 0; i < next.size(); ++i)
                    next[i] = next[i] + cfg.eps1 * current.grad[i] - cfg.eps2 * tv.grad[i];
                break;
            }
            case Regularizer::Operator:
                next = gaussian_blur(x, cfg.blur_sigma, cfg.blur_radius);
                for (std::size_t i = 0; i < next.size(); ++i) next[i] += cfg.eps1 * current.grad[i];
                break;
        }
        if (!next.all_finite())
            fail(ErrorCode::NonFiniteValue, "activation maximization diverged at step " + std::to_string(t + 1));
        clamp_into(next, cfg.clamp_low, cfg.clamp_high);
        x = std::move(next);
        try {
            current = activation_and_grad(net, x, cfg.target, depth);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFiniteValue) throw;
            fail(ErrorCode::NonFiniteValue, "activation maximization diverged at step " + std::to_string(t + 1));
        }
        result.activation_trace.push_back(current.value);
    }
    result.final_activation = result.activation_trace.back();
    result.image = x.reshaped(net.input_shape);
    return result;
}

CrossClassResult cross_class_am(const Network& net, const Tensor& source, std::size_t target_class, AMConfig cfg) {
    cfg.target = AMTarget::class_logit(target_class);
    cfg.init_image = source;
    CrossClassResult out;
    const Tensor logits = predict(net, batched(net, source));
    const auto row = logits.values();
    if (row.size() == 1)
        out.source_class = row[0] >= 0.5 ? 1 : 0;
    else
        out.source_class = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    out.am = am_ascend(net, cfg);
    out.target_gain = out.am.final_activation - out.am.initial_activation;
    return out;
}

std::size_t default_cam_layer(const Network& net) {
    const std::vector<int> blocks = block_ids(net);
    auto spatial = [&](std::size_t i) { return net.shape_after(i + 1).size() == 3; };
    for (auto b = blocks.rbegin(); b != blocks.rend(); ++b) {
        std::optional<std::size_t> found;
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            const Layer& l = net.layers[i];
            if (l.block_id != *b || !spatial(i)) continue;
            if (l.kind() == LayerKind::Conv2D || l.kind() == LayerKind::Residual) found = i;
        }
        if (found) {
            const std::size_t next = *found + 1;
            if (next < net.layers.size() && net.layers[next].kind() == LayerKind::ReLU &&
                net.layers[next].block_id == *b)
                return next;
            return *found;
        }
    }
    fail(ErrorCode::TargetUnresolvable, "network has no convolutional feature map for Grad-CAM");
}

std::vector<double> bilinear_resize(const std::vector<double>& values, std::size_t h, std::size_t w,
                                    std::size_t out_h, std::size_t out_w) {
    std::vector<double> out(out_h * out_w);
    auto coord = [](std::size_t o, std::size_t in, std::size_t out_n, std::size_t& lo, std::size_t& hi,
                    double& frac) {
        double src = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out_n) - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        lo = static_cast<std::size_t>(std::floor(src));
        hi = std::min(lo + 1, in - 1);
        frac = src - static_cast<double>(lo);
    };
    for (std::size_t i = 0; i < out_h; ++i) {
        std::size_t i0, i1;
        double fi;
        coord(i, h, out_h, i0, i1, fi);
        for (std::size_t j = 0; j < out_w; ++j) {
            std::size_t j0, j1;
            double fj;
            coord(j, w, out_w, j0, j1, fj);
            const double top = values[i0 * w + j0] * (1.0 - fj) + values[i0 * w + j1] * fj;
            const double bottom = values[i1 * w + j0] * (1.0 - fj) + values[i1 * w + j1] * fj;
            out[i * out_w + j] = top * (1.0 - fi) + bottom * fi;
        }
    }
    return out;
}

AttributionMap grad_cam(const Network& net, const Tensor& image, std::size_t target_class,
                        std::optional<std::size_t> layer) {
    const std::size_t cam_layer = layer ? *layer : default_cam_layer(net);
    if (cam_layer >= net.layers.size())
        fail(ErrorCode::TargetUnresolvable, "layer " + std::to_string(cam_layer) + " does not exist");
    const Shape feat = net.shape_after(cam_layer + 1);
    if (feat.size() != 3)
        fail(ErrorCode::TargetUnresolvable, "layer " + std::to_string(cam_layer) + " does not produce a feature map");
    const std::size_t outputs = shape_size(net.output_shape());
    if (target_class >= outputs)
        fail(ErrorCode::TargetUnresolvable, "class " + std::to_string(target_class) + " outside the " +
                                                std::to_string(outputs) + " network outputs");
    if (net.input_shape.size() != 3) fail(ErrorCode::ShapeMismatch, "Grad-CAM needs [H, W, C] inputs");

    const ActivationTrace trace = forward(net, batched(net, image), Mode::Eval, net.layers.size());
    Tensor seed(trace.output().shape());
    seed[target_class] = 1.0;
    const BackwardResult back = backward(net, trace, seed, true);
    const Tensor& a = trace.outputs[cam_layer];
    const Tensor& g = back.layer_grads[cam_layer];

    const std::size_t h = feat[0], w = feat[1], k = feat[2];
    std::vector<double> alpha(k, 0.0);
    for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t c = 0; c < k; ++c) alpha[c] += g[p * k + c];
    for (double& v : alpha) v /= static_cast<double>(h * w);

    AttributionMap map;
    map.height = h;
    map.width = w;
    map.target_class = target_class;
    map.layer = cam_layer;
    map.values.assign(h * w, 0.0);
    for (std::size_t p = 0; p < h * w; ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < k; ++c) acc += alpha[c] * a[p * k + c];
        map.values[p] = std::max(acc, 0.0);
    }
    map.image_height = net.input_shape[0];
    map.image_width = net.input_shape[1];
    map.upsampled = bilinear_resize(map.values, h, w, map.image_height, map.image_width);
    const double peak = *std::max_element(map.upsampled.begin(), map.upsampled.end());
    if (peak > 0.0)
        for (double& v : map.upsampled) v /= peak;
    return map;
}

}  // namespace senslab
