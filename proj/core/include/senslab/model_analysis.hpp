#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "senslab/error.hpp"
#include "senslab/network.hpp"
#include "senslab/sobol_analysis.hpp"

namespace senslab {

/// Which scalars of a network are analyzed: every element of the final output,
/// or every unit produced by top-level layer `layer` (e.g. a hidden ReLU).
struct OutputSelector {
    enum class Kind { Final, Layer };
    Kind kind = Kind::Final;
    std::size_t layer = 0;

    static OutputSelector final_output() { return {}; }
    static OutputSelector hidden(std::size_t layer) { return {Kind::Layer, layer}; }
};

/// Indices for one selected scalar, or the error that prevented them.
struct OutputSensitivity {
    std::size_t unit = 0;
    std::optional<SensitivityIndices> indices;
    std::optional<ErrorCode> error;
    std::string message;

    bool ok() const noexcept { return indices.has_value(); }
};

/// Evaluates the network (Eval mode) over the Saltelli block in batches and
/// analyzes each selected scalar separately. Throws ShapeMismatch when
/// plan.factors differs from the flattened input size and InvalidArgument for
/// an out-of-range layer; per-output failures such as ZeroVariance are
/// reported in the corresponding entry.
std::vector<OutputSensitivity> analyze_model(const Network& net, const SobolPlan& plan,
                                             const OutputSelector& selector = {}, std::size_t threads = 1,
                                             std::size_t batch_size = 512);

/// Convenience for a single scalar output: rethrows the per-output error.
SensitivityIndices analyze_model_scalar(const Network& net, const SobolPlan& plan, std::size_t threads = 1);

/// Per-factor [min, max] of the rows of a sample-major feature matrix.
std::vector<FactorBounds> empirical_bounds(const Tensor& features);

}  // namespace senslab
