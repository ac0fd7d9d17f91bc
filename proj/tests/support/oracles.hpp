#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "senslab/layers.hpp"
#include "senslab/network.hpp"
#include "senslab/rng.hpp"

namespace senslab::testing {

/// Closed-form Sobol indices of the Ishigami function on [-pi, pi]^3, from
/// the partial variances V1 = (1 + b pi^4 / 5)^2 / 2, V2 = a^2 / 8, V3 = 0,
/// V13 = b^2 pi^8 (1/18 - 1/50) and V = V1 + V2 + V13.
struct IshigamiOracle {
    std::array<double, 3> s1{};
    std::array<double, 3> st{};
    double variance = 0.0;
};
IshigamiOracle ishigami_oracle(double a = 7.0, double b = 0.1);

/// Central-difference derivative of f along every coordinate of x.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double step = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

struct GradCheck {
    double input_error = 0.0;
    double param_error = 0.0;  // all parameters as one vector

    double worst() const { return input_error > param_error ? input_error : param_error; }
};

/// Checks backward() against central differences of sum(r * forward(x)) for
/// a random upstream weighting r, on the input and every parameter tensor.
GradCheck check_network_gradients(const Network& net, const Tensor& input, Rng& rng, double step = 1e-5);

/// Smallest |pre-activation| seen by any ReLU and smallest gap between the two
/// largest entries of any max-pool window, nested residual stacks included.
/// Central differences are only meaningful when this is well above the step.
double kink_margin(const Network& net, const Tensor& input);

/// A random network instance exercising `kind` (alone, or wrapped as needed)
/// with a random input batch whose kink margin exceeds 1e-3.
struct LayerCase {
    std::string name;
    Network net;
    Tensor input;
};
LayerCase random_layer_case(LayerKind kind, Rng& rng);

const std::vector<LayerKind>& all_layer_kinds();

Tensor random_tensor(const Shape& shape, Rng& rng, double low = -1.0, double high = 1.0);

/// Sets every parameter tensor to uniform values in [low, high].
void randomize_parameters(Network& net, Rng& rng, double low = -1.0, double high = 1.0);

/// Population variance of all entries.
double variance(std::span<const double> values);

}  // namespace senslab::testing
