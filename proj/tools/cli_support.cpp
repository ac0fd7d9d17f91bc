#include "cli_support.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "senslab/error.hpp"
#include "senslab/report.hpp"
#include "senslab/rng.hpp"
#include "senslab/serialize.hpp"

namespace senslab::cli {

RunContext::RunContext(std::filesystem::path out, std::ostream& log) : dir_(std::move(out)), log_(log) {
    std::filesystem::create_directories(dir_);
}

void RunContext::write_text(const std::string& name, const std::string& text) {
    write_text_file(path(name), text);
    record(name);
}

void RunContext::write_image(const std::string& name, const RawImage& image) {
    write_pnm(path(name), image);
    record(name);
}

void RunContext::record(const std::string& name) {
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
}

Objective objective_for(const Network& net) {
    return shape_size(net.output_shape()) == 1 ? Objective::BinaryCrossEntropy : Objective::SoftmaxCrossEntropy;
}

std::filesystem::path sidecar_path(const std::filesystem::path& weights) {
    std::filesystem::path p = weights;
    p.replace_extension(".json");
    if (p == weights) p += ".json";
    return p;
}

void save_model(const std::filesystem::path& weights, const ModelBundle& model) {
    save_weights(model.net, weights);
    const DataRecipe& r = model.recipe;
    nlohmann::ordered_json j;
    j["format"] = "senslab-model";
    j["architecture"] = nlohmann::ordered_json::parse(architecture_json(model.net));
    j["objective"] = model.objective == Objective::BinaryCrossEntropy ? "binary" : "softmax";
    nlohmann::ordered_json d;
    d["kind"] = r.kind;
    if (r.kind == "tabular") {
        d["label"] = r.label;
        d["features"] = r.features;
    } else {
        d["class_names"] = r.class_names;
    }
    d["train_n"] = r.train_n;
    d["test_n"] = r.test_n;
    d["split_seed"] = r.split_seed;
    d["mean"] = r.mean;
    d["std"] = r.std;
    j["data"] = d;
    write_text_file(sidecar_path(weights), j.dump(2) + "\n");
}

ModelBundle load_model(const std::filesystem::path& weights) {
    ModelBundle model;
    model.net = load_weights(weights);
    model.objective = objective_for(model.net);
    const auto side = sidecar_path(weights);
    std::ifstream in(side);
    if (!in) return model;  // weights without a sidecar: network only
    try {
        nlohmann::json j;
        in >> j;
        const auto& d = j.at("data");
        DataRecipe& r = model.recipe;
        r.kind = d.at("kind").get<std::string>();
        if (r.kind == "tabular") {
            r.label = d.at("label").get<std::string>();
            r.features = d.at("features").get<std::vector<std::string>>();
        } else {
            r.class_names = d.value("class_names", std::vector<std::string>{});
        }
        r.train_n = d.at("train_n").get<std::size_t>();
        r.test_n = d.at("test_n").get<std::size_t>();
        r.split_seed = d.at("split_seed").get<std::uint64_t>();
        r.mean = d.value("mean", std::vector<double>{});
        r.std = d.value("std", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FormatError, side.string() + ": " + e.what());
    }
    return model;
}

Split prepare_tabular(const std::filesystem::path& data, const DataRecipe& recipe) {
    TabularDataset ds = load_tabular_csv(data, recipe.label);
    if (!recipe.features.empty() && recipe.features != ds.feature_names) ds = feature_subset(ds, recipe.features);
    const std::size_t train_n = recipe.train_n == 0 ? ds.rows() : recipe.train_n;
    return split(ds, train_n, recipe.test_n, recipe.split_seed);
}

ImageSplit prepare_images(const std::filesystem::path& data, DataRecipe& recipe) {
    ImageSplit s;
    const double mean = recipe.mean.empty() ? 0.5 : recipe.mean.front();
    const double std = recipe.std.empty() ? 0.5 : recipe.std.front();
    s.all = load_images(data, mean, std);
    const std::size_t n = s.all.size();
    if (recipe.train_n == 0 && recipe.test_n == 0) {
        recipe.train_n = std::max<std::size_t>(1, n * 4 / 5);
        recipe.test_n = n - recipe.train_n;
    }
    if (recipe.train_n == 0 || recipe.train_n + recipe.test_n > n)
        fail(ErrorCode::InsufficientRows, "requested " + std::to_string(recipe.train_n) + " + " +
                                              std::to_string(recipe.test_n) + " images but the set has " +
                                              std::to_string(n));
    if (recipe.class_names.empty()) recipe.class_names = s.all.class_names;
    recipe.mean = s.all.channel_mean;
    recipe.std = s.all.channel_std;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(recipe.split_seed);
    rng.shuffle(std::span<std::size_t>(order));
    s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(recipe.train_n));
    s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(recipe.train_n),
                       order.begin() + static_cast<std::ptrdiff_t>(recipe.train_n + recipe.test_n));
    s.train.inputs = gather_rows(s.all.images, s.train_rows);
    for (std::size_t r : s.train_rows) s.train.labels.push_back(s.all.labels[r]);
    if (!s.test_rows.empty()) {
        s.test.inputs = gather_rows(s.all.images, s.test_rows);
        for (std::size_t r : s.test_rows) s.test.labels.push_back(s.all.labels[r]);
    }
    return s;
}

Tensor image_at(const ImageDataset& data, std::size_t index) {
    if (index >= data.size())
        fail(ErrorCode::InvalidArgument, "image index " + std::to_string(index) + " outside the " +
                                             std::to_string(data.size()) + " images");
    return data.images.slice_rows(index, 1).reshaped(data.image_shape());
}

void write_manifest(RunContext& ctx, nlohmann::ordered_json config, const std::string& command, std::uint64_t seed,
                    const nlohmann::ordered_json& notes) {
    nlohmann::ordered_json run;
    run["command"] = command;
    run["seed"] = seed;
    run["artifacts"] = ctx.artifacts();
    for (auto it = notes.begin(); it != notes.end(); ++it) run[it.key()] = it.value();
    config["_run"] = run;
    write_text_file(ctx.path("run.json"), config.dump(2) + "\n");
}

}  // namespace senslab::cli
