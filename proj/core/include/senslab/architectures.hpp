#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "senslab/network.hpp"

namespace senslab {

/// Tabular classifier: Dense(in->hidden) BN ReLU | Dense(hidden->1) BN Sigmoid.
/// Block 1 is the hidden layer, block 2 the output layer.
Network make_mlp(std::size_t inputs, std::size_t hidden, std::uint64_t seed);

/// Reduced VGG: three blocks of [Conv3x3 ReLU Conv3x3 ReLU MaxPool2] with the
/// given widths, then Flatten and a Dense classifier head. Blocks are 1..3.
Network make_vgg_tiny(const Shape& image_shape, std::size_t classes, std::uint64_t seed,
                      const std::vector<std::size_t>& widths = {16, 32, 64});

/// Reduced ResNet: stem [Conv3x3 BN ReLU] (block 0) followed by three stages
/// (blocks 1..3) of [Conv3x3 BN ReLU] Residual[Conv BN ReLU Conv BN] ReLU MaxPool2,
/// then Flatten and a Dense head.
Network make_resnet_tiny(const Shape& image_shape, std::size_t classes, std::uint64_t seed,
                         const std::vector<std::size_t>& widths = {16, 32, 64});

}  // namespace senslab
