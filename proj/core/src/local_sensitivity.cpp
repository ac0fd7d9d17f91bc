#include "senslab/local_sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "senslab/error.hpp"
#include "senslab/parallel.hpp"

namespace senslab {

namespace {

constexpr std::size_t kBatch = 64;

std::size_t block_end(const Network& net, int block) {
    const auto last = last_layer_of_block(net, block);
    if (!last) fail(ErrorCode::UnknownBlock, "no layer is tagged with block " + std::to_string(block));
    return *last + 1;
}

Tensor single_sample(const Network& net, const Tensor& input) {
    if (input.shape() == net.input_shape) return as_batch(input);
    Shape batched = net.input_shape;
    batched.insert(batched.begin(), 1);
    if (input.shape() == batched) return input;
    fail(ErrorCode::ShapeMismatch, "input shape " + shape_string(input.shape()) + " does not match network input " +
                                       shape_string(net.input_shape));
}

double row_norm(const Tensor& t, std::size_t row) {
    const std::size_t per = t.size() / t.dim(0);
    return l2_norm(std::span<const double>(t.data() + row * per, per));
}

}  // namespace

double SensitivityMap::mean_abs() const {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += std::abs(v);
    return sum / static_cast<double>(values.size());
}

double SensitivityMap::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

int display_exponent(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    if (!(m > 0.0) || !std::isfinite(m)) return 0;
    int e = static_cast<int>(std::floor(std::log10(m))) + 1;
    // Guard against log10 rounding at exact powers of ten.
    if (m / std::pow(10.0, e) >= 1.0) ++e;
    if (m / std::pow(10.0, e) < 0.1) --e;
    return e;
}

double block_norm(const Network& net, const Tensor& input, int block) {
    const std::size_t end = block_end(net, block);
    const ActivationTrace trace = forward(net, single_sample(net, input), Mode::Eval, end);
    return row_norm(trace.output(), 0);
}

std::vector<SensitivityMap> pixel_sensitivity(const Network& net, const Tensor& image, std::span<const int> blocks,
                                              std::size_t channel, double epsilon, std::size_t threads) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorCode::InvalidArgument, "epsilon must be positive");
    if (blocks.empty()) fail(ErrorCode::InvalidArgument, "no blocks requested");
    const Tensor base = single_sample(net, image);
    if (net.input_shape.size() != 3) fail(ErrorCode::ShapeMismatch, "pixel sensitivity needs [H, W, C] inputs");
    const std::size_t h = net.input_shape[0], w = net.input_shape[1], c = net.input_shape[2];
    if (channel >= c)
        fail(ErrorCode::ShapeMismatch, "channel " + std::to_string(channel) + " outside " + std::to_string(c));

    std::vector<std::size_t> ends;
    std::size_t depth = 0;
    for (int q : blocks) {
        ends.push_back(block_end(net, q));
        depth = std::max(depth, ends.back());
    }

    const std::size_t pixels = h * w;
    const std::size_t per_image = base.size();
    // Row 0 is the unperturbed baseline, row 1 + p perturbs pixel p.
    const std::size_t total = pixels + 1;
    std::vector<std::vector<double>> norms(blocks.size(), std::vector<double>(total));
    const std::size_t batches = (total + kBatch - 1) / kBatch;
    parallel_for(batches, threads, [&](std::size_t b) {
        const std::size_t begin = b * kBatch;
        const std::size_t count = std::min(kBatch, total - begin);
        Shape shape = base.shape();
        shape[0] = count;
        Tensor batch(std::move(shape));
        for (std::size_t r = 0; r < count; ++r) {
            double* dst = batch.data() + r * per_image;
            std::copy_n(base.data(), per_image, dst);
            const std::size_t row = begin + r;
            if (row > 0) dst[(row - 1) * c + channel] += epsilon;
        }
        const ActivationTrace trace = forward(net, batch, Mode::Eval, depth);
        for (std::size_t q = 0; q < blocks.size(); ++q) {
            const Tensor& out = trace.outputs[ends[q] - 1];
            for (std::size_t r = 0; r < count; ++r) norms[q][begin + r] = row_norm(out, r);
        }
    });

    std::vector<SensitivityMap> maps(blocks.size());
    for (std::size_t q = 0; q < blocks.size(); ++q) {
        SensitivityMap& m = maps[q];
        m.height = h;
        m.width = w;
        m.block = blocks[q];
        m.channel = channel;
        m.epsilon = epsilon;
        m.values.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) m.values[p] = norms[q][p + 1] - norms[q][0];
        m.scale_exponent = display_exponent(m.values);
    }
    return maps;
}

SensitivityMap pixel_sensitivity(const Network& net, const Tensor& image, int block, std::size_t channel,
                                 double epsilon, std::size_t threads) {
    const int blocks[] = {block};
    return std::move(pixel_sensitivity(net, image, blocks, channel, epsilon, threads).front());
}

SensitivityMap pixelate(const SensitivityMap& map, std::size_t b) {
    if (b == 0) fail(ErrorCode::InvalidArgument, "pixelation block size must be at least 1");
    if (b == 1) return map;
    SensitivityMap out = map;
    out.height = (map.height + b - 1) / b;
    out.width = (map.width + b - 1) / b;
    out.aggregation = map.aggregation * b;
    out.values.assign(out.height * out.width, 0.0);
    for (std::size_t ti = 0; ti < out.height; ++ti)
        for (std::size_t tj = 0; tj < out.width; ++tj) {
            const std::size_t i1 = std::min(map.height, (ti + 1) * b);
            const std::size_t j1 = std::min(map.width, (tj + 1) * b);
            double sum = 0.0;
            for (std::size_t i = ti * b; i < i1; ++i)
                for (std::size_t j = tj * b; j < j1; ++j) sum += map.at(i, j);
            out.values[ti * out.width + tj] = sum / static_cast<double>((i1 - ti * b) * (j1 - tj * b));
        }
    out.scale_exponent = display_exponent(out.values);
    return out;
}

SensitivityMap absolute(const SensitivityMap& map) {
    SensitivityMap out = map;
    for (double& v : out.values) v = std::abs(v);
    return out;
}

ClassMeanMap class_mean_map(const Network& net, const Tensor& images, std::span<const int> labels, int label,
                            int block, std::size_t channel, double epsilon, std::size_t n_images,
                            std::size_t threads) {
    if (images.rank() == 0 || images.dim(0) != labels.size())
        fail(ErrorCode::ShapeMismatch, "images and labels disagree in count");
    if (n_images == 0) fail(ErrorCode::InvalidArgument, "n_images must be at least 1");
    ClassMeanMap result;
    for (std::size_t i = 0; i < labels.size() && result.image_indices.size() < n_images; ++i)
        if (labels[i] == label) result.image_indices.push_back(i);
    if (result.image_indices.size() < n_images)
        fail(ErrorCode::InsufficientImages, "only " + std::to_string(result.image_indices.size()) +
                                                " images of class " + std::to_string(label) + ", need " +
                                                std::to_string(n_images));
    for (std::size_t idx : result.image_indices) {
        SensitivityMap m = pixel_sensitivity(net, images.slice_rows(idx, 1), block, channel, epsilon, threads);
        m.class_label = label;
        result.per_image.push_back(std::move(m));
    }
    result.mean = result.per_image.front();
    for (std::size_t k = 1; k < result.per_image.size(); ++k)
        for (std::size_t p = 0; p < result.mean.values.size(); ++p) result.mean.values[p] += result.per_image[k].values[p];
    if (result.per_image.size() > 1)
        for (double& v : result.mean.values) v /= static_cast<double>(result.per_image.size());
    result.mean.scale_exponent = display_exponent(result.mean.values);
    return result;
}

}  // namespace senslab
