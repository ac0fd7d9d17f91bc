#include "senslab/images.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "senslab/error.hpp"
#include "senslab/rng.hpp"

namespace senslab {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

struct Reader {
    std::string_view bytes;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (bytes.size() - pos < 4) fail(ErrorCode::FormatError, "truncated SLIM file");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string_view take(std::size_t n) {
        if (bytes.size() - pos < n) fail(ErrorCode::FormatError, "truncated SLIM file");
        const auto s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::uint8_t noisy(double v, Rng& rng, double noise) {
    const double x = v + noise * (rng.uniform() - 0.5);
    return static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * x), 0L, 255L));
}

}  // namespace

Shape ImageDataset::image_shape() const {
    Shape s = images.shape();
    if (!s.empty()) s.erase(s.begin());
    return s;
}

ImageDataset normalize_images(const RawImageSet& set, double mean, double std) {
    if (set.images.empty()) fail(ErrorCode::EmptyDataset, "image set is empty");
    if (set.images.size() != set.labels.size()) fail(ErrorCode::ShapeMismatch, "images and labels disagree in count");
    if (!(std > 0.0)) fail(ErrorCode::InvalidArgument, "normalization std must be positive");
    const RawImage& first = set.images.front();
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        const RawImage& im = set.images[i];
        if (im.height != first.height || im.width != first.width || im.channels != first.channels)
            fail(ErrorCode::InconsistentDims, "image " + std::to_string(i) + " is " + std::to_string(im.height) + "x" +
                                                  std::to_string(im.width) + "x" + std::to_string(im.channels) +
                                                  ", expected " + std::to_string(first.height) + "x" +
                                                  std::to_string(first.width) + "x" + std::to_string(first.channels));
        if (set.labels[i] < 0 ||
            (!set.class_names.empty() && static_cast<std::size_t>(set.labels[i]) >= set.class_names.size()))
            fail(ErrorCode::InvalidArgument, "label " + std::to_string(set.labels[i]) + " of image " +
                                                 std::to_string(i) + " is outside the class list");
    }
    ImageDataset ds;
    ds.labels = set.labels;
    ds.class_names = set.class_names;
    if (ds.class_names.empty()) {
        const int top = *std::max_element(set.labels.begin(), set.labels.end());
        for (int c = 0; c <= top; ++c) ds.class_names.push_back(std::to_string(c));
    }
    ds.channel_mean.assign(first.channels, mean);
    ds.channel_std.assign(first.channels, std);
    const std::size_t per = first.height * first.width * first.channels;
    ds.images = Tensor({set.images.size(), first.height, first.width, first.channels});
    for (std::size_t i = 0; i < set.images.size(); ++i)
        for (std::size_t p = 0; p < per; ++p)
            ds.images[i * per + p] = (set.images[i].pixels[p] / 255.0 - mean) / std;
    return ds;
}

std::string pack_images(const RawImageSet& set) {
    if (set.images.size() != set.labels.size()) fail(ErrorCode::ShapeMismatch, "images and labels disagree in count");
    const RawImage* first = set.images.empty() ? nullptr : &set.images.front();
    std::string out = "SLIM";
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(set.images.size()));
    put_u32(out, first ? static_cast<std::uint32_t>(first->height) : 0);
    put_u32(out, first ? static_cast<std::uint32_t>(first->width) : 0);
    put_u32(out, first ? static_cast<std::uint32_t>(first->channels) : 0);
    put_u32(out, static_cast<std::uint32_t>(set.class_names.size()));
    for (const auto& name : set.class_names) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
    }
    for (int l : set.labels) put_u32(out, static_cast<std::uint32_t>(l));
    for (const RawImage& im : set.images) {
        if (im.height != first->height || im.width != first->width || im.channels != first->channels)
            fail(ErrorCode::InconsistentDims, "packed images must share one size");
        out.append(reinterpret_cast<const char*>(im.pixels.data()), im.pixels.size());
    }
    return out;
}

RawImageSet unpack_images(std::string_view bytes) {
    if (bytes.substr(0, 4) != "SLIM") fail(ErrorCode::FormatError, "missing SLIM magic");
    Reader r{bytes, 4};
    const std::uint32_t version = r.u32();
    if (version != 1) fail(ErrorCode::FormatError, "unsupported SLIM version " + std::to_string(version));
    const std::uint32_t count = r.u32(), h = r.u32(), w = r.u32(), c = r.u32();
    if (count > 0 && (h == 0 || w == 0 || (c != 1 && c != 3))) fail(ErrorCode::FormatError, "invalid SLIM dimensions");
    RawImageSet set;
    const std::uint32_t classes = r.u32();
    for (std::uint32_t i = 0; i < classes; ++i) set.class_names.emplace_back(r.take(r.u32()));
    for (std::uint32_t i = 0; i < count; ++i) set.labels.push_back(static_cast<int>(r.u32()));
    const std::size_t per = std::size_t{h} * w * c;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto px = r.take(per);
        set.images.push_back({h, w, c, std::vector<std::uint8_t>(px.begin(), px.end())});
    }
    if (r.pos != bytes.size()) fail(ErrorCode::FormatError, "trailing bytes after SLIM payload");
    return set;
}

RawImageSet read_image_set(const std::filesystem::path& path) {
    std::filesystem::path manifest = path;
    if (std::filesystem::is_directory(path)) manifest = path / "manifest.csv";
    const std::string text = read_file(manifest);
    if (text.rfind("SLIM", 0) == 0) return unpack_images(text);

    RawImageSet set;
    const auto base = manifest.parent_path();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    int top = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        const std::size_t comma = row.rfind(',');
        if (comma == std::string_view::npos)
            fail(ErrorCode::FormatError, manifest.string() + ":" + std::to_string(line_no) + ": expected path,label");
        const std::string file(trim(row.substr(0, comma)));
        const std::string label_text(trim(row.substr(comma + 1)));
        if (line_no == 1 && label_text == "label") continue;
        int label = 0;
        try {
            std::size_t used = 0;
            label = std::stoi(label_text, &used);
            if (used != label_text.size() || label < 0) throw std::invalid_argument(label_text);
        } catch (const std::exception&) {
            fail(ErrorCode::FormatError, manifest.string() + ":" + std::to_string(line_no) + ": bad label '" +
                                             label_text + "'");
        }
        std::filesystem::path p(file);
        if (p.is_relative()) p = base / p;
        set.images.push_back(read_pnm(p));
        set.labels.push_back(label);
        top = std::max(top, label);
    }
    if (set.images.empty()) fail(ErrorCode::EmptyDataset, manifest.string() + ": no images listed");
    for (int c = 0; c <= top; ++c) set.class_names.push_back(std::to_string(c));
    return set;
}

void write_image_set(const std::filesystem::path& directory, const RawImageSet& set) {
    std::filesystem::create_directories(directory);
    std::ofstream manifest(directory / "manifest.csv");
    if (!manifest) fail(ErrorCode::IoError, "cannot write " + (directory / "manifest.csv").string());
    manifest << "path,label\n";
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%05zu.%s", i, set.images[i].channels == 1 ? "pgm" : "ppm");
        write_pnm(directory / name, set.images[i]);
        manifest << name << ',' << set.labels[i] << '\n';
    }
}

ImageDataset load_images(const std::filesystem::path& path, double mean, double std) {
    return normalize_images(read_image_set(path), mean, std);
}

RawImageSet make_toy_images(std::size_t per_class, std::size_t size, std::uint64_t seed) {
    if (per_class == 0 || size < 4) fail(ErrorCode::InvalidArgument, "toy images need per_class >= 1 and size >= 4");
    RawImageSet set;
    set.class_names = {"hstripes", "vstripes", "blob", "diagonal"};
    Rng rng(seed);
    const double n = static_cast<double>(size);
    for (std::size_t i = 0; i < per_class; ++i)
        for (int cls = 0; cls < 4; ++cls) {
            RawImage im{size, size, 3, std::vector<std::uint8_t>(size * size * 3)};
            const double period = 3.0 + 3.0 * rng.uniform();
            const double phase = 2.0 * std::numbers::pi * rng.uniform();
            const double cy = n * (0.3 + 0.4 * rng.uniform()), cx = n * (0.3 + 0.4 * rng.uniform());
            const double radius = n * (0.15 + 0.1 * rng.uniform());
            double fg[3], bg[3];
            for (int c = 0; c < 3; ++c) {
                fg[c] = 0.55 + 0.45 * rng.uniform();
                bg[c] = 0.35 * rng.uniform();
            }
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x) {
                    const double fy = static_cast<double>(y), fx = static_cast<double>(x);
                    double t = 0.0;
                    switch (cls) {
                        case 0: t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fy / period + phase); break;
                        case 1: t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fx / period + phase); break;
                        case 2: {
                            const double d2 = (fy - cy) * (fy - cy) + (fx - cx) * (fx - cx);
                            t = std::exp(-d2 / (2.0 * radius * radius));
                            break;
                        }
                        default:
                            t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (fx + fy) / (period * std::numbers::sqrt2) +
                                                     phase);
                    }
                    for (int c = 0; c < 3; ++c)
                        im.pixels[(y * size + x) * 3 + c] = noisy(bg[c] + t * (fg[c] - bg[c]), rng, 0.2);
                }
            set.images.push_back(std::move(im));
            set.labels.push_back(cls);
        }
    return set;
}

}  // namespace senslab
