#include "senslab/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "senslab/error.hpp"
#include "senslab/rng.hpp"

namespace senslab {

namespace {

Shape sample_shape(const Tensor& batch) { return Shape(batch.shape().begin() + 1, batch.shape().end()); }

Shape with_batch(std::size_t n, const Shape& sample) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

// ---------------------------------------------------------------------------
// Kernels. Every layer treats axis 0 as the batch axis.

Tensor dense_forward(const Dense& d, const Tensor& x) {
    const std::size_t n = x.dim(0), in = d.in_features, out = d.out_features;
    Tensor y({n, out});
    const double* w = d.weight.data();
    for (std::size_t s = 0; s < n; ++s) {
        double* yrow = y.data() + s * out;
        std::copy_n(d.bias.data(), out, yrow);
        const double* xrow = x.data() + s * in;
        for (std::size_t i = 0; i < in; ++i) {
            const double xv = xrow[i];
            const double* wrow = w + i * out;
            for (std::size_t o = 0; o < out; ++o) yrow[o] += xv * wrow[o];
        }
    }
    return y;
}

Tensor dense_backward(const Dense& d, const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db) {
    const std::size_t n = x.dim(0), in = d.in_features, out = d.out_features;
    Tensor dx(x.shape());
    const double* w = d.weight.data();
    for (std::size_t s = 0; s < n; ++s) {
        const double* g = dy.data() + s * out;
        const double* xrow = x.data() + s * in;
        for (std::size_t o = 0; o < out; ++o) db[o] += g[o];
        for (std::size_t i = 0; i < in; ++i) {
            const double xv = xrow[i];
            const double* wrow = w + i * out;
            double* dwrow = dw.data() + i * out;
            double acc = 0.0;
            for (std::size_t o = 0; o < out; ++o) {
                acc += g[o] * wrow[o];
                dwrow[o] += xv * g[o];
            }
            dx[s * in + i] = acc;
        }
    }
    return dx;
}

struct ConvGeometry {
    std::size_t n, h, w, cin, oh, ow, cout, k, stride, pad;
};

ConvGeometry conv_geometry(const Conv2D& c, const Tensor& x) {
    const std::size_t h = x.dim(1), w = x.dim(2);
    return {x.dim(0),
            h,
            w,
            c.in_channels,
            (h + 2 * c.padding - c.kernel) / c.stride + 1,
            (w + 2 * c.padding - c.kernel) / c.stride + 1,
            c.out_channels,
            c.kernel,
            c.stride,
            c.padding};
}

Tensor conv_forward(const Conv2D& c, const Tensor& x) {
    const ConvGeometry g = conv_geometry(c, x);
    Tensor y({g.n, g.oh, g.ow, g.cout});
    const double* w = c.weight.data();
    for (std::size_t s = 0; s < g.n; ++s) {
        const double* img = x.data() + s * g.h * g.w * g.cin;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                double* out = y.data() + ((s * g.oh + oy) * g.ow + ox) * g.cout;
                std::copy_n(c.bias.data(), g.cout, out);
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        const double* in = img + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
                        const double* wk = w + (ky * g.k + kx) * g.cin * g.cout;
                        for (std::size_t ci = 0; ci < g.cin; ++ci) {
                            const double v = in[ci];
                            const double* wrow = wk + ci * g.cout;
                            for (std::size_t co = 0; co < g.cout; ++co) out[co] += v * wrow[co];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv_backward(const Conv2D& c, const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db) {
    const ConvGeometry g = conv_geometry(c, x);
    Tensor dx(x.shape());
    const double* w = c.weight.data();
    for (std::size_t s = 0; s < g.n; ++s) {
        const double* img = x.data() + s * g.h * g.w * g.cin;
        double* dimg = dx.data() + s * g.h * g.w * g.cin;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const double* gout = dy.data() + ((s * g.oh + oy) * g.ow + ox) * g.cout;
                for (std::size_t co = 0; co < g.cout; ++co) db[co] += gout[co];
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        const std::size_t offset = (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
                        const double* in = img + offset;
                        double* din = dimg + offset;
                        const std::size_t wbase = (ky * g.k + kx) * g.cin * g.cout;
                        for (std::size_t ci = 0; ci < g.cin; ++ci) {
                            const double v = in[ci];
                            const double* wrow = w + wbase + ci * g.cout;
                            double* dwrow = dw.data() + wbase + ci * g.cout;
                            double acc = 0.0;
                            for (std::size_t co = 0; co < g.cout; ++co) {
                                acc += gout[co] * wrow[co];
                                dwrow[co] += v * gout[co];
                            }
                            din[ci] += acc;
                        }
                    }
                }
            }
        }
    }
    return dx;
}

Tensor batch_norm_forward(const BatchNorm& bn, const Tensor& x, Mode mode, LayerCache& cache) {
    const std::size_t f = bn.features;
    const std::size_t m = x.size() / f;
    Tensor y(x.shape());
    BatchNormCache c;
    c.reduce_count = m;
    c.normalized.resize(x.size());
    c.inv_std.resize(f);
    if (mode == Mode::Train) {
        c.batch_mean.assign(f, 0.0);
        c.batch_var.assign(f, 0.0);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < f; ++j) c.batch_mean[j] += x[r * f + j];
        for (double& v : c.batch_mean) v /= static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < f; ++j) {
                const double d = x[r * f + j] - c.batch_mean[j];
                c.batch_var[j] += d * d;
            }
        for (double& v : c.batch_var) v /= static_cast<double>(m);
        for (std::size_t j = 0; j < f; ++j) c.inv_std[j] = 1.0 / std::sqrt(c.batch_var[j] + bn.eps);
    } else {
        for (std::size_t j = 0; j < f; ++j) c.inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
    }
    const double* mean = mode == Mode::Train ? c.batch_mean.data() : bn.running_mean.data();
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < f; ++j) {
            const std::size_t i = r * f + j;
            const double xhat = (x[i] - mean[j]) * c.inv_std[j];
            c.normalized[i] = xhat;
            y[i] = bn.gamma[j] * xhat + bn.beta[j];
        }
    cache = std::move(c);
    return y;
}

Tensor batch_norm_backward(const BatchNorm& bn, const Tensor& dy, Mode mode, const BatchNormCache& c, Tensor& dgamma,
                           Tensor& dbeta) {
    const std::size_t f = bn.features;
    const std::size_t m = c.reduce_count;
    Tensor dx(dy.shape());
    std::vector<double> sum_dxhat(f, 0.0), sum_dxhat_xhat(f, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < f; ++j) {
            const std::size_t i = r * f + j;
            dgamma[j] += dy[i] * c.normalized[i];
            dbeta[j] += dy[i];
            const double dxhat = dy[i] * bn.gamma[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xhat[j] += dxhat * c.normalized[i];
        }
    const double md = static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < f; ++j) {
            const std::size_t i = r * f + j;
            const double dxhat = dy[i] * bn.gamma[j];
            if (mode == Mode::Train)
                dx[i] = c.inv_std[j] / md * (md * dxhat - sum_dxhat[j] - c.normalized[i] * sum_dxhat_xhat[j]);
            else
                dx[i] = dxhat * c.inv_std[j];
        }
    return dx;
}

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

Tensor max_pool_forward(const MaxPool2D& p, const Tensor& x, LayerCache& cache) {
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), ch = x.dim(3);
    const std::size_t oh = (h - p.kernel) / p.stride + 1, ow = (w - p.kernel) / p.stride + 1;
    Tensor y({n, oh, ow, ch});
    MaxPoolCache c;
    c.argmax.resize(y.size());
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t k = 0; k < ch; ++k) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_index = 0;
                    bool first = true;
                    for (std::size_t ky = 0; ky < p.kernel; ++ky)
                        for (std::size_t kx = 0; kx < p.kernel; ++kx) {
                            const std::size_t i = ((s * h + oy * p.stride + ky) * w + ox * p.stride + kx) * ch + k;
                            if (first || x[i] > best) {
                                best = x[i];
                                best_index = i;
                                first = false;
                            }
                        }
                    const std::size_t o = ((s * oh + oy) * ow + ox) * ch + k;
                    y[o] = best;
                    c.argmax[o] = best_index;
                }
    cache = std::move(c);
    return y;
}

// ---------------------------------------------------------------------------
// Stack evaluation with residual recursion.

ActivationTrace run_stack(std::span<const Layer> layers, const Tensor& input, Mode mode, std::size_t count);

Tensor layer_forward(const Layer& layer, const Tensor& x, Mode mode, LayerCache& cache) {
    switch (layer.kind()) {
        case LayerKind::Dense:
            return dense_forward(std::get<Dense>(layer.op), x);
        case LayerKind::Conv2D:
            return conv_forward(std::get<Conv2D>(layer.op), x);
        case LayerKind::BatchNorm:
            return batch_norm_forward(std::get<BatchNorm>(layer.op), x, mode, cache);
        case LayerKind::ReLU: {
            Tensor y = x;
            for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
            return y;
        }
        case LayerKind::Sigmoid: {
            Tensor y = x;
            for (double& v : y.values()) v = stable_sigmoid(v);
            return y;
        }
        case LayerKind::MaxPool2D:
            return max_pool_forward(std::get<MaxPool2D>(layer.op), x, cache);
        case LayerKind::Flatten:
            return x.reshaped({x.dim(0), x.size() / x.dim(0)});
        case LayerKind::Residual: {
            const auto& inner = std::get<Residual>(layer.op).inner;
            auto trace = std::make_shared<ActivationTrace>(run_stack(inner, x, mode, inner.size()));
            Tensor y = x;
            const Tensor& fx = trace->outputs.empty() ? x : trace->outputs.back();
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += fx[i];
            cache = ResidualCache{std::move(trace)};
            return y;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown layer kind");
}

Tensor backprop_stack(std::span<const Layer> layers, const ActivationTrace& trace, const Tensor& dout,
                      std::span<Tensor> grads, std::vector<Tensor>* layer_grads);

Tensor layer_backward(const Layer& layer, const Tensor& x, const Tensor& y, const LayerCache& cache, Mode mode,
                      const Tensor& dy, std::span<Tensor> grads) {
    switch (layer.kind()) {
        case LayerKind::Dense:
            return dense_backward(std::get<Dense>(layer.op), x, dy, grads[0], grads[1]);
        case LayerKind::Conv2D:
            return conv_backward(std::get<Conv2D>(layer.op), x, dy, grads[0], grads[1]);
        case LayerKind::BatchNorm:
            return batch_norm_backward(std::get<BatchNorm>(layer.op), dy, mode, std::get<BatchNormCache>(cache),
                                       grads[0], grads[1]);
        case LayerKind::ReLU: {
            Tensor dx = dy;
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (!(x[i] > 0.0)) dx[i] = 0.0;
            return dx;
        }
        case LayerKind::Sigmoid: {
            Tensor dx = dy;
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
            return dx;
        }
        case LayerKind::MaxPool2D: {
            Tensor dx(x.shape());
            const auto& argmax = std::get<MaxPoolCache>(cache).argmax;
            for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
            return dx;
        }
        case LayerKind::Flatten:
            return dy.reshaped(x.shape());
        case LayerKind::Residual: {
            const auto& inner_layers = std::get<Residual>(layer.op).inner;
            const ActivationTrace& inner = *std::get<ResidualCache>(cache).inner;
            Tensor dx = dy;
            const Tensor dinner = inner_layers.empty() ? dy : backprop_stack(inner_layers, inner, dy, grads, nullptr);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dinner[i];
            return dx;
        }
    }
    fail(ErrorCode::InvalidArgument, "unknown layer kind");
}

ActivationTrace run_stack(std::span<const Layer> layers, const Tensor& input, Mode mode, std::size_t count) {
    ActivationTrace trace;
    trace.mode = mode;
    trace.input = input;
    trace.outputs.reserve(count);
    trace.caches.resize(count);
    Shape sample = sample_shape(input);
    for (std::size_t i = 0; i < count; ++i) {
        sample = layer_output_shape(layers[i], sample);
        const Tensor& x = i == 0 ? input : trace.outputs[i - 1];
        trace.outputs.push_back(layer_forward(layers[i], x, mode, trace.caches[i]));
    }
    return trace;
}

Tensor backprop_stack(std::span<const Layer> layers, const ActivationTrace& trace, const Tensor& dout,
                      std::span<Tensor> grads, std::vector<Tensor>* layer_grads) {
    const std::size_t count = trace.outputs.size();
    std::vector<std::size_t> offsets(count + 1, 0);
    for (std::size_t i = 0; i < count; ++i) offsets[i + 1] = offsets[i] + layer_param_count(layers[i]);
    if (layer_grads) layer_grads->assign(count, Tensor());
    Tensor g = dout;
    for (std::size_t i = count; i-- > 0;) {
        if (layer_grads) (*layer_grads)[i] = g;
        const Tensor& x = i == 0 ? trace.input : trace.outputs[i - 1];
        g = layer_backward(layers[i], x, trace.outputs[i], trace.caches[i], trace.mode, g,
                           grads.subspan(offsets[i], offsets[i + 1] - offsets[i]));
    }
    return g;
}

void collect(std::vector<Layer>& layers, std::vector<Tensor*>& out) {
    for (Layer& l : layers) {
        if (auto* d = std::get_if<Dense>(&l.op)) {
            out.push_back(&d->weight);
            out.push_back(&d->bias);
        } else if (auto* c = std::get_if<Conv2D>(&l.op)) {
            out.push_back(&c->weight);
            out.push_back(&c->bias);
        } else if (auto* bn = std::get_if<BatchNorm>(&l.op)) {
            out.push_back(&bn->gamma);
            out.push_back(&bn->beta);
        } else if (auto* r = std::get_if<Residual>(&l.op)) {
            collect(r->inner, out);
        }
    }
}

void commit_stack(std::vector<Layer>& layers, const ActivationTrace& trace) {
    for (std::size_t i = 0; i < trace.outputs.size(); ++i) {
        if (auto* bn = std::get_if<BatchNorm>(&layers[i].op)) {
            const auto& c = std::get<BatchNormCache>(trace.caches[i]);
            const double m = static_cast<double>(c.reduce_count);
            const double unbias = c.reduce_count > 1 ? m / (m - 1.0) : 1.0;
            for (std::size_t j = 0; j < bn->features; ++j) {
                bn->running_mean[j] = (1.0 - bn->momentum) * bn->running_mean[j] + bn->momentum * c.batch_mean[j];
                bn->running_var[j] =
                    (1.0 - bn->momentum) * bn->running_var[j] + bn->momentum * c.batch_var[j] * unbias;
            }
        } else if (auto* r = std::get_if<Residual>(&layers[i].op)) {
            commit_stack(r->inner, *std::get<ResidualCache>(trace.caches[i]).inner);
        }
    }
}

void init_stack(std::vector<Layer>& layers, Rng& rng) {
    for (Layer& l : layers) {
        if (auto* d = std::get_if<Dense>(&l.op)) {
            const double bound = std::sqrt(6.0 / static_cast<double>(d->in_features));
            for (double& v : d->weight.values()) v = rng.uniform(-bound, bound);
            d->bias.fill(0.0);
        } else if (auto* c = std::get_if<Conv2D>(&l.op)) {
            const double bound = std::sqrt(6.0 / static_cast<double>(c->kernel * c->kernel * c->in_channels));
            for (double& v : c->weight.values()) v = rng.uniform(-bound, bound);
            c->bias.fill(0.0);
        } else if (auto* bn = std::get_if<BatchNorm>(&l.op)) {
            bn->gamma.fill(1.0);
            bn->beta.fill(0.0);
            bn->running_mean.fill(0.0);
            bn->running_var.fill(1.0);
        } else if (auto* r = std::get_if<Residual>(&l.op)) {
            init_stack(r->inner, rng);
        }
    }
}

void check_input(const Network& net, const Tensor& input) {
    if (input.rank() != net.input_shape.size() + 1 || sample_shape(input) != net.input_shape)
        fail(ErrorCode::ShapeMismatch, "network expects [N]+" + shape_string(net.input_shape) + ", got " +
                                           shape_string(input.shape()));
    input.require_finite("network input");
}

}  // namespace

Shape Network::output_shape() const { return shape_after(layers.size()); }

Shape Network::shape_after(std::size_t count) const {
    Shape s = input_shape;
    for (std::size_t i = 0; i < count && i < layers.size(); ++i) s = layer_output_shape(layers[i], s);
    return s;
}

void Network::validate() const {
    (void)output_shape();
    std::optional<int> last;
    for (const Layer& l : layers) {
        if (!l.block_id) continue;
        if (last && *l.block_id < *last)
            fail(ErrorCode::InvalidArgument, "block ids decrease along the layer list");
        last = l.block_id;
    }
}

const Tensor& ActivationTrace::output() const {
    if (outputs.empty()) return input;
    return outputs.back();
}

ActivationTrace forward(const Network& net, const Tensor& input) {
    return forward(net, input, net.mode, net.layers.size());
}

ActivationTrace forward(const Network& net, const Tensor& input, Mode mode, std::size_t layer_count) {
    if (layer_count > net.layers.size())
        fail(ErrorCode::InvalidArgument, "layer count exceeds network depth");
    check_input(net, input);
    ActivationTrace trace = run_stack(net.layers, input, mode, layer_count);
    trace.output().require_finite("network output");
    return trace;
}

Tensor predict(const Network& net, const Tensor& input) {
    ActivationTrace trace = forward(net, input, Mode::Eval, net.layers.size());
    return trace.output();
}

BackwardResult backward(const Network& net, const ActivationTrace& trace, const Tensor& output_grad,
                        bool keep_layer_grads) {
    if (trace.outputs.size() > net.layers.size() || trace.caches.size() != trace.outputs.size())
        fail(ErrorCode::TraceMismatch, "trace does not belong to this network");
    if (trace.input.rank() != net.input_shape.size() + 1 || sample_shape(trace.input) != net.input_shape)
        fail(ErrorCode::TraceMismatch, "trace input shape does not match the network");
    Shape sample = net.input_shape;
    for (std::size_t i = 0; i < trace.outputs.size(); ++i) {
        sample = layer_output_shape(net.layers[i], sample);
        if (trace.outputs[i].shape() != with_batch(trace.input.dim(0), sample))
            fail(ErrorCode::TraceMismatch, "trace output " + std::to_string(i) + " has the wrong shape");
        const bool needs_cache = net.layers[i].kind() == LayerKind::BatchNorm ||
                                 net.layers[i].kind() == LayerKind::MaxPool2D ||
                                 net.layers[i].kind() == LayerKind::Residual;
        if (needs_cache && std::holds_alternative<std::monostate>(trace.caches[i]))
            fail(ErrorCode::TraceMismatch, "trace is missing layer state for layer " + std::to_string(i));
    }
    if (output_grad.shape() != trace.output().shape())
        fail(ErrorCode::ShapeMismatch, "output gradient " + shape_string(output_grad.shape()) +
                                           " does not match trace output " + shape_string(trace.output().shape()));
    BackwardResult result;
    for (const Tensor* p : parameters(net)) result.params.emplace_back(p->shape());
    result.input_grad = backprop_stack(net.layers, trace, output_grad, result.params,
                                       keep_layer_grads ? &result.layer_grads : nullptr);
    return result;
}

std::vector<Tensor*> parameters(Network& net) {
    std::vector<Tensor*> out;
    collect(net.layers, out);
    return out;
}

std::vector<const Tensor*> parameters(const Network& net) {
    std::vector<Tensor*> raw;
    collect(const_cast<std::vector<Layer>&>(net.layers), raw);
    return {raw.begin(), raw.end()};
}

void commit_batch_stats(Network& net, const ActivationTrace& trace) {
    if (trace.mode != Mode::Train) return;
    if (trace.outputs.size() > net.layers.size()) fail(ErrorCode::TraceMismatch, "trace longer than network");
    commit_stack(net.layers, trace);
}

void initialize(Network& net, std::uint64_t seed) {
    Rng rng(seed);
    init_stack(net.layers, rng);
}

Tensor as_batch(const Tensor& sample) { return sample.reshaped(with_batch(1, sample.shape())); }

std::optional<std::size_t> last_layer_of_block(const Network& net, int block_id) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].block_id == block_id) found = i;
    return found;
}

std::vector<int> block_ids(const Network& net) {
    std::vector<int> ids;
    for (const Layer& l : net.layers)
        if (l.block_id && (ids.empty() || ids.back() != *l.block_id)) ids.push_back(*l.block_id);
    return ids;
}

}  // namespace senslab
