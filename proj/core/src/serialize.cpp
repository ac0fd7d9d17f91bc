#include "senslab/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "senslab/error.hpp"

namespace senslab {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
public:
    template <typename T>
    void put(T value) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        out_.append(reinterpret_cast<const char*>(raw), sizeof(T));
    }
    void bytes(std::string_view s) { out_.append(s); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > in_.size()) fail(ErrorCode::FormatError, "weight file truncated");
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, in_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }
    std::string_view bytes(std::size_t n) {
        if (pos_ + n > in_.size()) fail(ErrorCode::FormatError, "weight file truncated");
        std::string_view s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    std::string_view in_;
    std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const Tensor& t) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put<std::uint64_t>(d);
    for (double v : t.values()) w.put<double>(v);
}

Tensor get_tensor(Reader& r) {
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) fail(ErrorCode::FormatError, "implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) {
        d = static_cast<std::size_t>(r.get<std::uint64_t>());
        if (d == 0 || d > (std::size_t{1} << 32)) fail(ErrorCode::FormatError, "implausible tensor dimension");
    }
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = r.get<double>();
    return Tensor(std::move(shape), std::move(values));
}

void put_layer(Writer& w, const Layer& layer) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.kind()));
    w.put<std::uint8_t>(layer.block_id ? 1 : 0);
    w.put<std::int32_t>(layer.block_id.value_or(0));
    std::vector<std::uint64_t> hyper;
    std::vector<const Tensor*> tensors;
    Tensor bn_config;
    if (const auto* d = std::get_if<Dense>(&layer.op)) {
        hyper = {d->in_features, d->out_features};
        tensors = {&d->weight, &d->bias};
    } else if (const auto* c = std::get_if<Conv2D>(&layer.op)) {
        hyper = {c->in_channels, c->out_channels, c->kernel, c->stride, c->padding};
        tensors = {&c->weight, &c->bias};
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer.op)) {
        hyper = {bn->features};
        bn_config = Tensor::from({bn->eps, bn->momentum});
        tensors = {&bn->gamma, &bn->beta, &bn->running_mean, &bn->running_var, &bn_config};
    } else if (const auto* p = std::get_if<MaxPool2D>(&layer.op)) {
        hyper = {p->kernel, p->stride};
    } else if (const auto* res = std::get_if<Residual>(&layer.op)) {
        hyper = {res->inner.size()};
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(hyper.size()));
    for (auto h : hyper) w.put<std::uint64_t>(h);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) put_tensor(w, *t);
    if (const auto* res = std::get_if<Residual>(&layer.op))
        for (const Layer& l : res->inner) put_layer(w, l);
}

void expect_shape(const Tensor& t, const Tensor& reference, const char* what) {
    if (t.shape() != reference.shape())
        fail(ErrorCode::FormatError, std::string(what) + " has shape " + shape_string(t.shape()) + ", expected " +
                                         shape_string(reference.shape()));
}

Layer get_layer(Reader& r, int depth) {
    if (depth > 16) fail(ErrorCode::FormatError, "residual nesting too deep");
    const auto tag = r.get<std::uint32_t>();
    const bool has_block = r.get<std::uint8_t>() != 0;
    const auto block = r.get<std::int32_t>();
    std::optional<int> block_id;
    if (has_block) block_id = block;
    const auto n_hyper = r.get<std::uint32_t>();
    if (n_hyper > 16) fail(ErrorCode::FormatError, "too many layer hyper-parameters");
    std::vector<std::size_t> hyper(n_hyper);
    for (auto& h : hyper) h = static_cast<std::size_t>(r.get<std::uint64_t>());
    const auto n_tensors = r.get<std::uint32_t>();
    if (n_tensors > 16) fail(ErrorCode::FormatError, "too many layer tensors");
    std::vector<Tensor> tensors;
    for (std::uint32_t i = 0; i < n_tensors; ++i) tensors.push_back(get_tensor(r));

    auto need = [&](std::size_t h, std::size_t t) {
        if (hyper.size() != h || tensors.size() != t) fail(ErrorCode::FormatError, "layer record has the wrong arity");
    };
    switch (static_cast<LayerKind>(tag)) {
        case LayerKind::Dense: {
            need(2, 2);
            Layer l = make_dense(hyper[0], hyper[1], block_id);
            auto& d = std::get<Dense>(l.op);
            expect_shape(tensors[0], d.weight, "dense weight");
            expect_shape(tensors[1], d.bias, "dense bias");
            d.weight = std::move(tensors[0]);
            d.bias = std::move(tensors[1]);
            return l;
        }
        case LayerKind::Conv2D: {
            need(5, 2);
            Layer l = make_conv2d(hyper[0], hyper[1], hyper[2], hyper[3], hyper[4], block_id);
            auto& c = std::get<Conv2D>(l.op);
            expect_shape(tensors[0], c.weight, "conv weight");
            expect_shape(tensors[1], c.bias, "conv bias");
            c.weight = std::move(tensors[0]);
            c.bias = std::move(tensors[1]);
            return l;
        }
        case LayerKind::BatchNorm: {
            need(1, 5);
            Layer l = make_batch_norm(hyper[0], block_id);
            auto& bn = std::get<BatchNorm>(l.op);
            for (int i = 0; i < 4; ++i) expect_shape(tensors[i], bn.gamma, "batch-norm tensor");
            if (tensors[4].size() != 2) fail(ErrorCode::FormatError, "batch-norm config must hold eps and momentum");
            bn.gamma = std::move(tensors[0]);
            bn.beta = std::move(tensors[1]);
            bn.running_mean = std::move(tensors[2]);
            bn.running_var = std::move(tensors[3]);
            bn.eps = tensors[4][0];
            bn.momentum = tensors[4][1];
            return l;
        }
        case LayerKind::ReLU: need(0, 0); return make_relu(block_id);
        case LayerKind::Sigmoid: need(0, 0); return make_sigmoid(block_id);
        case LayerKind::Flatten: need(0, 0); return make_flatten(block_id);
        case LayerKind::MaxPool2D: need(2, 0); return make_max_pool(hyper[0], hyper[1], block_id);
        case LayerKind::Residual: {
            need(1, 0);
            if (hyper[0] > 1024) fail(ErrorCode::FormatError, "implausible residual depth");
            std::vector<Layer> inner;
            for (std::size_t i = 0; i < hyper[0]; ++i) inner.push_back(get_layer(r, depth + 1));
            return make_residual(std::move(inner), block_id);
        }
    }
    fail(ErrorCode::FormatError, "unknown layer kind tag " + std::to_string(tag));
}

using nlohmann::json;

json layer_to_json(const Layer& layer) {
    json j;
    j["kind"] = std::string(layer_kind_name(layer.kind()));
    if (layer.block_id) j["block"] = *layer.block_id;
    if (const auto* d = std::get_if<Dense>(&layer.op)) {
        j["in"] = d->in_features;
        j["out"] = d->out_features;
    } else if (const auto* c = std::get_if<Conv2D>(&layer.op)) {
        j["in"] = c->in_channels;
        j["out"] = c->out_channels;
        j["kernel"] = c->kernel;
        j["stride"] = c->stride;
        j["padding"] = c->padding;
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer.op)) {
        j["features"] = bn->features;
        j["eps"] = bn->eps;
        j["momentum"] = bn->momentum;
    } else if (const auto* p = std::get_if<MaxPool2D>(&layer.op)) {
        j["kernel"] = p->kernel;
        j["stride"] = p->stride;
    } else if (const auto* res = std::get_if<Residual>(&layer.op)) {
        j["inner"] = json::array();
        for (const Layer& l : res->inner) j["inner"].push_back(layer_to_json(l));
    }
    return j;
}

Layer layer_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    std::optional<int> block;
    if (j.contains("block")) block = j.at("block").get<int>();
    auto size = [&](const char* key, std::size_t fallback) {
        return j.contains(key) ? j.at(key).get<std::size_t>() : fallback;
    };
    if (kind == "Dense") return make_dense(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(), block);
    if (kind == "Conv2D")
        return make_conv2d(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(), size("kernel", 3),
                           size("stride", 1), size("padding", 1), block);
    if (kind == "BatchNorm") {
        Layer l = make_batch_norm(j.at("features").get<std::size_t>(), block);
        auto& bn = std::get<BatchNorm>(l.op);
        if (j.contains("eps")) bn.eps = j.at("eps").get<double>();
        if (j.contains("momentum")) bn.momentum = j.at("momentum").get<double>();
        return l;
    }
    if (kind == "ReLU") return make_relu(block);
    if (kind == "Sigmoid") return make_sigmoid(block);
    if (kind == "Flatten") return make_flatten(block);
    if (kind == "MaxPool2D") return make_max_pool(size("kernel", 2), size("stride", 2), block);
    if (kind == "Residual") {
        std::vector<Layer> inner;
        for (const json& l : j.at("inner")) inner.push_back(layer_from_json(l));
        return make_residual(std::move(inner), block);
    }
    fail(ErrorCode::FormatError, "unknown layer kind '" + kind + "'");
}

}  // namespace

std::string encode_weights(const Network& net) {
    Writer w;
    w.bytes("SLNS");
    w.put<std::uint32_t>(kWeightsFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net.input_shape.size()));
    for (std::size_t d : net.input_shape) w.put<std::uint64_t>(d);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers.size()));
    for (const Layer& l : net.layers) put_layer(w, l);
    return w.take();
}

Network decode_weights(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(4) != "SLNS") fail(ErrorCode::FormatError, "not a weight file (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kWeightsFormatVersion)
        fail(ErrorCode::FormatError, "unsupported weight format version " + std::to_string(version));
    Network net;
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) fail(ErrorCode::FormatError, "implausible input rank");
    net.input_shape.resize(rank);
    for (auto& d : net.input_shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) net.layers.push_back(get_layer(r, 0));
    if (!r.done()) fail(ErrorCode::FormatError, "trailing bytes after the last layer");
    try {
        net.validate();
    } catch (const Error& e) {
        fail(ErrorCode::FormatError, std::string("stored architecture is inconsistent: ") + e.what());
    }
    net.mode = Mode::Eval;
    return net;
}

void save_weights(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    const std::string bytes = encode_weights(net);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

Network load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return decode_weights(buffer.str());
}

std::string architecture_json(const Network& net) {
    json j;
    j["format"] = "SLNS";
    j["version"] = kWeightsFormatVersion;
    j["input_shape"] = net.input_shape;
    j["output_shape"] = net.output_shape();
    j["layers"] = json::array();
    for (const Layer& l : net.layers) j["layers"].push_back(layer_to_json(l));
    return j.dump(2) + "\n";
}

Network network_from_architecture_json(std::string_view text, std::uint64_t seed) {
    Network net;
    try {
        const json j = json::parse(text);
        net.input_shape = j.at("input_shape").get<Shape>();
        for (const json& l : j.at("layers")) net.layers.push_back(layer_from_json(l));
    } catch (const json::exception& e) {
        fail(ErrorCode::FormatError, std::string("architecture document: ") + e.what());
    }
    net.validate();
    initialize(net, seed);
    net.mode = Mode::Eval;
    return net;
}

}  // namespace senslab
