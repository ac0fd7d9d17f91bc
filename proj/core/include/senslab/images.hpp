#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "senslab/image_io.hpp"
#include "senslab/tensor.hpp"
#include "senslab/train.hpp"

namespace senslab {

struct ImageDataset {
    Tensor images;  // [N, H, W, C], normalized
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::vector<double> channel_mean;
    std::vector<double> channel_std;

    std::size_t size() const noexcept { return labels.size(); }
    Shape image_shape() const;
    LabeledData labeled() const { return {images, labels}; }
};

/// 8-bit images with labels, before normalization.
struct RawImageSet {
    std::vector<RawImage> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;
};

/// Scales pixels to [0, 1], then (x - mean_c) / std_c per channel.
/// Throws InconsistentDims when images differ in size or channel count and
/// InvalidArgument for labels outside the class list (when one is given).
ImageDataset normalize_images(const RawImageSet& set, double mean = 0.5, double std = 0.5);

/// Packed binary layout, little-endian:
///   "SLIM" u32 version=1 u32 count u32 height u32 width u32 channels
///   u32 class_count, then class_count x (u32 length, bytes),
///   count x u32 label, count*height*width*channels u8 pixels.
std::string pack_images(const RawImageSet& set);
RawImageSet unpack_images(std::string_view bytes);

/// Manifest CSV rows "path,label" (optional header); relative paths are
/// resolved against the manifest's directory. A directory argument loads
/// its manifest.csv. Files starting with "SLIM" are read as packed sets.
RawImageSet read_image_set(const std::filesystem::path& path);
void write_image_set(const std::filesystem::path& directory, const RawImageSet& set);
ImageDataset load_images(const std::filesystem::path& path, double mean = 0.5, double std = 0.5);

/// Four-class synthetic set: horizontal stripes, vertical stripes, a blob,
/// diagonal stripes, each with random phase, colour and pixel noise.
RawImageSet make_toy_images(std::size_t per_class, std::size_t size, std::uint64_t seed);

}  // namespace senslab
