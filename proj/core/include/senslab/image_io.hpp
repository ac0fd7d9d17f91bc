#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "senslab/tensor.hpp"

namespace senslab {

/// 8-bit interleaved raster; channels is 1 (PGM) or 3 (PPM).
struct RawImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Binary PGM (P5) / PPM (P6) with maxval <= 255. Throws FormatError.
RawImage parse_pnm(std::string_view bytes);
std::string encode_pnm(const RawImage& image);
RawImage read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const RawImage& image);

using Rgb = std::array<std::uint8_t, 3>;

/// The bundled 256-entry viridis table.
const std::array<Rgb, 256>& viridis_palette();

/// Linear map of [min, max] onto 0..255; a constant input maps to all zeros.
std::vector<std::uint8_t> quantize(std::span<const double> values);

RawImage heatmap_gray(std::span<const double> values, std::size_t height, std::size_t width);
RawImage heatmap_color(std::span<const double> values, std::size_t height, std::size_t width);

/// Inverse of the (x - mean) / std normalization, rounded to 8 bits.
/// `image` is [H, W, C] or [1, H, W, C] with C = 1 or 3.
RawImage to_raw_image(const Tensor& image, double mean = 0.5, double std = 0.5);

/// alpha * colormap(map) + (1 - alpha) * base; map is H x W in [0, 1].
/// Gray bases are expanded to RGB.
RawImage overlay(const RawImage& base, std::span<const double> map, double alpha = 0.5);

}  // namespace senslab
