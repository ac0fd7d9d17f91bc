#include "senslab/model_analysis.hpp"

#include <algorithm>

#include "senslab/parallel.hpp"

namespace senslab {

std::vector<OutputSensitivity> analyze_model(const Network& net, const SobolPlan& plan,
                                             const OutputSelector& selector, std::size_t threads,
                                             std::size_t batch_size) {
    plan.validate();
    const std::size_t inputs = shape_size(net.input_shape);
    if (plan.factors != inputs)
        fail(ErrorCode::ShapeMismatch, "plan has " + std::to_string(plan.factors) + " factors but the network takes " +
                                           std::to_string(inputs) + " inputs");
    std::size_t layer_count = net.layers.size();
    if (selector.kind == OutputSelector::Kind::Layer) {
        if (selector.layer >= net.layers.size())
            fail(ErrorCode::InvalidArgument, "layer index " + std::to_string(selector.layer) + " out of range");
        layer_count = selector.layer + 1;
    }
    const std::size_t units = shape_size(net.shape_after(layer_count));
    if (batch_size == 0) batch_size = 1;

    const SampleBlock block = saltelli_matrices(plan);
    const std::size_t rows = block.rows;
    std::vector<double> responses(units * rows);  // unit-major
    const std::size_t batches = (rows + batch_size - 1) / batch_size;

    Shape batch_shape = net.input_shape;
    batch_shape.insert(batch_shape.begin(), 0);
    parallel_for(batches, threads, [&](std::size_t b) {
        const std::size_t begin = b * batch_size;
        const std::size_t count = std::min(batch_size, rows - begin);
        Shape shape = batch_shape;
        shape[0] = count;
        std::vector<double> values(block.values.begin() + static_cast<std::ptrdiff_t>(begin * inputs),
                                   block.values.begin() + static_cast<std::ptrdiff_t>((begin + count) * inputs));
        const ActivationTrace trace = forward(net, Tensor(std::move(shape), std::move(values)), Mode::Eval, layer_count);
        const Tensor& out = trace.output();
        for (std::size_t r = 0; r < count; ++r)
            for (std::size_t u = 0; u < units; ++u) responses[u * rows + begin + r] = out[r * units + u];
    });

    std::vector<OutputSensitivity> results(units);
    for (std::size_t u = 0; u < units; ++u) {
        results[u].unit = u;
        try {
            results[u].indices =
                analyze_outputs(std::span<const double>(responses.data() + u * rows, rows), plan);
        } catch (const Error& e) {
            results[u].error = e.code();
            results[u].message = e.what();
        }
    }
    return results;
}

SensitivityIndices analyze_model_scalar(const Network& net, const SobolPlan& plan, std::size_t threads) {
    auto results = analyze_model(net, plan, OutputSelector::final_output(), threads);
    if (results.size() != 1) fail(ErrorCode::ShapeMismatch, "network output is not a single scalar");
    if (!results[0].ok()) fail(*results[0].error, results[0].message);
    return std::move(*results[0].indices);
}

std::vector<FactorBounds> empirical_bounds(const Tensor& features) {
    if (features.rank() != 2) fail(ErrorCode::ShapeMismatch, "expected a [rows, features] matrix");
    const std::size_t n = features.dim(0), k = features.dim(1);
    std::vector<FactorBounds> bounds(k, FactorBounds{features[0], features[0]});
    for (std::size_t i = 0; i < k; ++i) bounds[i] = {features[i], features[i]};
    for (std::size_t r = 1; r < n; ++r)
        for (std::size_t i = 0; i < k; ++i) {
            bounds[i].low = std::min(bounds[i].low, features[r * k + i]);
            bounds[i].high = std::max(bounds[i].high, features[r * k + i]);
        }
    for (auto& b : bounds)
        if (!(b.low < b.high)) b.high = b.low + 1.0;
    return bounds;
}

}  // namespace senslab
