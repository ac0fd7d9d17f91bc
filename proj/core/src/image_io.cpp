#include "senslab/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "senslab/error.hpp"

// Generated at configure time from data/viridis.csv.
extern const char kViridisTable[];

namespace senslab {

namespace {

std::size_t read_header_number(std::string_view bytes, std::size_t& pos) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
        fail(ErrorCode::FormatError, "malformed PNM header");
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
        if (value > (std::size_t{1} << 24)) fail(ErrorCode::FormatError, "PNM header value too large");
        ++pos;
    }
    return value;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

RawImage parse_pnm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        fail(ErrorCode::FormatError, "not a binary PGM/PPM file");
    RawImage img;
    img.channels = bytes[1] == '5' ? 1 : 3;
    std::size_t pos = 2;
    img.width = read_header_number(bytes, pos);
    img.height = read_header_number(bytes, pos);
    const std::size_t maxval = read_header_number(bytes, pos);
    if (img.width == 0 || img.height == 0) fail(ErrorCode::FormatError, "PNM image has a zero dimension");
    if (maxval == 0 || maxval > 255) fail(ErrorCode::FormatError, "only 8-bit PNM images are supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        fail(ErrorCode::FormatError, "malformed PNM header");
    ++pos;
    const std::size_t count = img.width * img.height * img.channels;
    if (bytes.size() - pos < count) fail(ErrorCode::FormatError, "truncated PNM pixel data");
    img.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto v = static_cast<std::uint8_t>(bytes[pos + i]);
        img.pixels[i] = maxval == 255 ? v : to_byte(255.0 * v / static_cast<double>(maxval));
    }
    return img;
}

std::string encode_pnm(const RawImage& image) {
    if (image.channels != 1 && image.channels != 3) fail(ErrorCode::FormatError, "PNM needs 1 or 3 channels");
    if (image.pixels.size() != image.height * image.width * image.channels)
        fail(ErrorCode::ShapeMismatch, "pixel buffer does not match image dimensions");
    std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

RawImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_pnm(buf.str());
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
    }
}

void write_pnm(const std::filesystem::path& path, const RawImage& image) {
    const std::string bytes = encode_pnm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

const std::array<Rgb, 256>& viridis_palette() {
    static const std::array<Rgb, 256> table = [] {
        std::array<Rgb, 256> t{};
        std::istringstream in(kViridisTable);
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line) && row < t.size()) {
            if (line.empty()) continue;
            int r = 0, g = 0, b = 0;
            char c1 = 0, c2 = 0;
            std::istringstream fields(line);
            if (!(fields >> r >> c1 >> g >> c2 >> b)) continue;
            t[row++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
        }
        if (row != t.size()) fail(ErrorCode::FormatError, "bundled palette table is incomplete");
        return t;
    }();
    return table;
}

std::vector<std::uint8_t> quantize(std::span<const double> values) {
    std::vector<std::uint8_t> out(values.size(), 0);
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = to_byte(255.0 * (values[i] - *lo) / range);
    return out;
}

RawImage heatmap_gray(std::span<const double> values, std::size_t height, std::size_t width) {
    if (values.size() != height * width) fail(ErrorCode::ShapeMismatch, "heatmap size mismatch");
    return {height, width, 1, quantize(values)};
}

RawImage heatmap_color(std::span<const double> values, std::size_t height, std::size_t width) {
    if (values.size() != height * width) fail(ErrorCode::ShapeMismatch, "heatmap size mismatch");
    const auto levels = quantize(values);
    const auto& palette = viridis_palette();
    RawImage img{height, width, 3, std::vector<std::uint8_t>(levels.size() * 3)};
    for (std::size_t i = 0; i < levels.size(); ++i) std::copy_n(palette[levels[i]].begin(), 3, &img.pixels[i * 3]);
    return img;
}

RawImage to_raw_image(const Tensor& image, double mean, double std) {
    Shape s = image.shape();
    if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
    if (s.size() != 3 || (s[2] != 1 && s[2] != 3))
        fail(ErrorCode::ShapeMismatch, "expected an [H, W, 1|3] image, got " + shape_string(image.shape()));
    RawImage img{s[0], s[1], s[2], std::vector<std::uint8_t>(image.size())};
    for (std::size_t i = 0; i < image.size(); ++i) img.pixels[i] = to_byte(255.0 * (image[i] * std + mean));
    return img;
}

RawImage overlay(const RawImage& base, std::span<const double> map, double alpha) {
    if (map.size() != base.height * base.width) fail(ErrorCode::ShapeMismatch, "overlay map size mismatch");
    const auto& palette = viridis_palette();
    RawImage out{base.height, base.width, 3, std::vector<std::uint8_t>(map.size() * 3)};
    for (std::size_t p = 0; p < map.size(); ++p) {
        const Rgb& color = palette[to_byte(255.0 * std::clamp(map[p], 0.0, 1.0))];
        for (std::size_t c = 0; c < 3; ++c) {
            const double under = base.pixels[p * base.channels + (base.channels == 3 ? c : 0)];
            out.pixels[p * 3 + c] = to_byte(alpha * color[c] + (1.0 - alpha) * under);
        }
    }
    return out;
}

}  // namespace senslab
