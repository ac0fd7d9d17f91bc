#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "senslab/loss.hpp"
#include "senslab/network.hpp"

namespace senslab {

/// Anisotropic total variation of an [H, W, C] (or [1, H, W, C]) image:
/// sum |x[i+1,j,c] - x[i,j,c]| + sum |x[i,j+1,c] - x[i,j,c]|.
/// The subgradient of |d| at d = 0 is taken as 0. grad has the input's shape.
LossResult tv_loss(const Tensor& image);

/// Separable Gaussian blur per channel with the normalized kernel
/// exp(-d^2 / 2 sigma^2), |d| <= radius. Borders use symmetric reflection
/// that repeats the edge pixel (... b a | a b c ... c | c b ...), so any
/// radius works on any image size.
Tensor gaussian_blur(const Tensor& image, double sigma, std::size_t radius);

/// The scalar being maximized.
struct AMTarget {
    enum class Kind { LayerNeuron, ClassLogit };
    Kind kind = Kind::ClassLogit;
    std::size_t layer = 0;  // top-level layer index (LayerNeuron)
    std::size_t index = 0;  // flattened unit within that layer's output, or class

    static AMTarget neuron(std::size_t layer, std::size_t index) { return {Kind::LayerNeuron, layer, index}; }
    static AMTarget class_logit(std::size_t cls) { return {Kind::ClassLogit, 0, cls}; }
};

enum class Regularizer { None, TotalVariation, Operator };

struct AMConfig {
    AMTarget target;
    double eps1 = 0.1;
    double eps2 = 0.1;
    std::size_t steps = 200;
    Regularizer regularizer = Regularizer::None;
    double blur_sigma = 0.5;
    std::size_t blur_radius = 1;
    double clamp_low = -1.0;
    double clamp_high = 1.0;
    /// Start image; when empty, uniform random in the clamp range from init_seed.
    std::optional<Tensor> init_image;
    std::uint64_t init_seed = 0;

    void validate() const;
};

struct AMResult {
    Tensor image;                        // [H, W, C]
    std::vector<double> activation_trace;  // a(x_t) after each step t = 1..steps
    double initial_activation = 0.0;
    double final_activation = 0.0;
};

/// Value of the target for one sample (Eval mode). Throws TargetUnresolvable.
double target_activation(const Network& net, const Tensor& image, const AMTarget& target);

/// Gradient ascent on the input. Per step, with g = da/dx at x_t:
///   None:            x_{t+1} = x_t + eps1 g
///   TotalVariation:  x_{t+1} = x_t + eps1 g - eps2 dTV/dx(x_t)
///   Operator:        x_{t+1} = blur(x_t) + eps1 g
/// followed by clamping to [clamp_low, clamp_high].
/// Throws TargetUnresolvable, or NonFiniteValue naming the diverging step.
AMResult am_ascend(const Network& net, const AMConfig& cfg);

struct CrossClassResult {
    AMResult am;
    int source_class = 0;  // prediction on the source image
    double target_gain = 0.0;  // final minus initial target activation
};

/// am_ascend started from `source` with the logit of `target_class` as target.
CrossClassResult cross_class_am(const Network& net, const Tensor& source, std::size_t target_class, AMConfig cfg);

struct AttributionMap {
    std::size_t height = 0;  // feature-map grid
    std::size_t width = 0;
    std::vector<double> values;
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::vector<double> upsampled;
    std::size_t target_class = 0;
    std::size_t layer = 0;
};

/// Default Grad-CAM layer: the last Conv2D or Residual layer of the deepest
/// tagged block (or the ReLU directly after it). Throws TargetUnresolvable
/// when the network has no such layer.
std::size_t default_cam_layer(const Network& net);

/// Grad-CAM: alpha_k = spatial mean of d logit / d A_k, map = ReLU(sum alpha_k A_k),
/// bilinear upsampling to the input size, then scaled to [0, 1] when max > 0.
AttributionMap grad_cam(const Network& net, const Tensor& image, std::size_t target_class,
                        std::optional<std::size_t> layer = {});

/// Bilinear resize of an h x w grid with half-pixel centers.
std::vector<double> bilinear_resize(const std::vector<double>& values, std::size_t h, std::size_t w,
                                    std::size_t out_h, std::size_t out_w);

}  // namespace senslab
