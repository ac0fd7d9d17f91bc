#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "senslab/network.hpp"

namespace senslab {

/// Signed single-pixel sensitivities for one channel and one block, row-major.
struct SensitivityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;
    int block = 0;
    std::size_t channel = 0;
    double epsilon = 0.1;
    std::size_t aggregation = 1;
    std::optional<int> class_label;
    int scale_exponent = 0;

    double at(std::size_t i, std::size_t j) const { return values[i * width + j]; }
    double mean_abs() const;
    double max_abs() const;
};

/// Power of ten e with max|v| / 10^e in [0.1, 1); 0 for an all-zero map.
int display_exponent(std::span<const double> values);

/// L2 norm of every activation leaving the last top-level layer tagged q,
/// computed through all layers from the input up to that point (Eval mode).
/// `input` is one sample, with or without a leading batch axis of one.
/// Throws UnknownBlock.
double block_norm(const Network& net, const Tensor& input, int block);

/// s_ij = ||B_q(x + eps e_ijc)|| - ||B_q(x)|| for every pixel (i, j) of the
/// given channel. Uses exactly H*W + 1 network evaluations, batched.
/// The image is [H, W, C] (or [1, H, W, C]).
SensitivityMap pixel_sensitivity(const Network& net, const Tensor& image, int block, std::size_t channel,
                                 double epsilon = 0.1, std::size_t threads = 1);

/// Same perturbations, one map per requested block, sharing the forward passes.
std::vector<SensitivityMap> pixel_sensitivity(const Network& net, const Tensor& image, std::span<const int> blocks,
                                              std::size_t channel, double epsilon = 0.1, std::size_t threads = 1);

/// Mean over b x b tiles, partial tiles at the right and bottom edges.
SensitivityMap pixelate(const SensitivityMap& map, std::size_t b);

/// Map with |v| in place of v, e.g. for display.
SensitivityMap absolute(const SensitivityMap& map);

struct ClassMeanMap {
    SensitivityMap mean;
    std::vector<SensitivityMap> per_image;
    std::vector<std::size_t> image_indices;
};

/// Elementwise mean of the maps of the first n_images samples labelled
/// `label` (dataset order). `images` is [N, H, W, C]. Throws InsufficientImages.
ClassMeanMap class_mean_map(const Network& net, const Tensor& images, std::span<const int> labels, int label,
                            int block, std::size_t channel, double epsilon, std::size_t n_images,
                            std::size_t threads = 1);

}  // namespace senslab
