#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "senslab/network.hpp"

namespace senslab {

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

/// Binary weight file layout (all integers and floats little-endian):
///   "SLNS" | u32 version | u32 input rank | u64 dims... | u32 layer count | layers...
/// Each layer: u32 kind tag | u8 has_block | i32 block id | u32 hyper count | u64 hypers...
///             | u32 tensor count | per tensor: u32 rank, u64 dims..., f64 payload.
/// A Residual layer stores its inner layer count as its only hyper value and
/// its inner layers follow immediately, depth-first.
void save_weights(const Network& net, const std::filesystem::path& path);
Network load_weights(const std::filesystem::path& path);

std::string encode_weights(const Network& net);
Network decode_weights(std::string_view bytes);

/// Human-readable architecture, also accepted as a custom network spec.
std::string architecture_json(const Network& net);
/// Builds a network from an architecture document and initializes it with `seed`.
Network network_from_architecture_json(std::string_view json, std::uint64_t seed);

}  // namespace senslab
