#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "senslab/image_io.hpp"
#include "senslab/images.hpp"
#include "senslab/network.hpp"
#include "senslab/tabular.hpp"
#include "senslab/train.hpp"

namespace senslab::cli {

/// A command-line mistake detected after parsing; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 1;
    std::string out = "senslab-out";
    std::size_t threads = 1;
};

/// Output directory plus the list of files a command produced.
class RunContext {
public:
    RunContext(std::filesystem::path out, std::ostream& log);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::ostream& log() noexcept { return log_; }
    const std::vector<std::string>& artifacts() const noexcept { return artifacts_; }

    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    void write_text(const std::string& name, const std::string& text);
    void write_image(const std::string& name, const RawImage& image);
    void record(const std::string& name);

private:
    std::filesystem::path dir_;
    std::ostream& log_;
    std::vector<std::string> artifacts_;
};

/// How a dataset was prepared for a model, stored next to its weights.
struct DataRecipe {
    std::string kind = "tabular";  // or "images"
    std::string label = "Outcome";
    std::vector<std::string> features;
    std::size_t train_n = 0;
    std::size_t test_n = 0;
    std::uint64_t split_seed = 1;
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<std::string> class_names;
};

struct ModelBundle {
    Network net;
    Objective objective = Objective::BinaryCrossEntropy;
    DataRecipe recipe;
};

Objective objective_for(const Network& net);

/// Writes <weights> and the sidecar <weights stem>.json.
void save_model(const std::filesystem::path& weights, const ModelBundle& model);
ModelBundle load_model(const std::filesystem::path& weights);
std::filesystem::path sidecar_path(const std::filesystem::path& weights);

/// Tabular data prepared with a recipe: optional feature subset, then the
/// seeded split with training-set z-scoring.
Split prepare_tabular(const std::filesystem::path& data, const DataRecipe& recipe);

struct ImageSplit {
    ImageDataset all;
    LabeledData train;
    LabeledData test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// Seeded shuffle of the image indices; train_n == 0 selects 80 percent.
ImageSplit prepare_images(const std::filesystem::path& data, DataRecipe& recipe);

/// One sample of an image dataset by index, as [H, W, C].
Tensor image_at(const ImageDataset& data, std::size_t index);

/// Writes run.json: the resolved configuration plus a "_run" record.
void write_manifest(RunContext& ctx, nlohmann::ordered_json config, const std::string& command, std::uint64_t seed,
                    const nlohmann::ordered_json& notes = nlohmann::ordered_json::object());

}  // namespace senslab::cli
