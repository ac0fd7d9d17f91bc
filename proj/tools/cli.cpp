#include "cli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "json_config.hpp"
#include "senslab/architectures.hpp"
#include "senslab/attribution.hpp"
#include "senslab/error.hpp"
#include "senslab/local_sensitivity.hpp"
#include "senslab/model_analysis.hpp"
#include "senslab/report.hpp"
#include "senslab/serialize.hpp"
#include "senslab/test_functions.hpp"

namespace senslab::cli {

namespace {

struct TrainOptions {
    std::string arch = "mlp-8-10-1";
    std::string data;
    std::string label = "Outcome";
    std::vector<std::string> features;
    std::size_t train_n = 0;
    std::size_t test_n = 0;
    std::size_t epochs = 300;
    double lr = 0.01;
    double l2 = 0.001;
    std::size_t batch = 32;
    std::string weights = "weights.slns";
};

struct EvalOptions {
    std::string weights;
    std::string data;
};

struct ModelSourceOptions {
    std::string function;
    std::size_t factors = 0;
    std::string weights;
    std::string data;
};

struct SobolOptions {
    ModelSourceOptions source;
    std::size_t n = 1024;
    std::string order = "first";
    std::size_t bootstrap = 200;
    double level = 0.95;
    std::string target = "output";
    int layer = -1;
    std::size_t batch = 512;
};

struct ConvergenceOptions {
    ModelSourceOptions source;
    std::vector<std::size_t> ns{128, 512, 2048, 8192, 32768, 65536};
    std::size_t bootstrap = 200;
    double level = 0.95;
};

struct LocalSensOptions {
    std::string weights;
    std::string data;
    std::size_t image = 0;
    int label = -1;
    std::size_t n_images = 1;
    std::vector<int> blocks;
    std::size_t channel = 0;
    double eps = 0.1;
    std::size_t pixelate = 1;
    std::string stat = "signed";
};

struct AmOptions {
    std::string weights;
    int target_class = -1;
    int layer = -1;
    std::size_t unit = 0;
    double eps1 = 0.1;
    double eps2 = 0.1;
    std::size_t steps = 200;
    std::string reg = "none";
    double sigma = 0.5;
    std::size_t radius = 1;
    double clamp_lo = -1.0;
    double clamp_hi = 1.0;
    std::string init = "random";
    std::string data;
    std::size_t image = 0;
};

struct GradCamOptions {
    std::string weights;
    std::string data;
    std::size_t image = 0;
    int target_class = -1;
    int layer = -1;
};

struct PcaOptions {
    std::string data;
    std::string label = "Outcome";
    std::size_t components = 4;
};

struct ToyOptions {
    std::size_t per_class = 50;
    std::size_t size = 16;
    std::string format = "dir";
};

const CLI::Validator kPowerOfTwo(
    [](std::string& value) -> std::string {
        std::size_t n = 0;
        try {
            std::size_t used = 0;
            n = std::stoull(value, &used);
            if (used != value.size()) return "not an integer: " + value;
        } catch (const std::exception&) {
            return "not an integer: " + value;
        }
        if (n < 8 || !std::has_single_bit(n)) return "must be a power of two >= 8, got " + value;
        return {};
    },
    "POWER_OF_TWO>=8");

const CLI::Validator kOpenUnit(
    [](std::string& value) -> std::string {
        try {
            const double v = std::stod(value);
            if (v > 0.0 && v < 1.0) return {};
        } catch (const std::exception&) {
        }
        return "must lie strictly between 0 and 1, got " + value;
    },
    "(0,1)");

std::string fmt(double v) { return format_number(v); }

std::string csv_of(std::initializer_list<std::string> fields) {
    return csv_line(std::vector<std::string>(fields));
}

std::string printable(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------- train

bool parse_mlp(const std::string& arch, std::size_t& inputs, std::size_t& hidden) {
    unsigned long a = 0, b = 0, c = 0;
    char tail = 0;
    if (std::sscanf(arch.c_str(), "mlp-%lu-%lu-%lu%c", &a, &b, &c, &tail) != 3 || c != 1) return false;
    inputs = a;
    hidden = b;
    return true;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void run_train(const Globals& g, const TrainOptions& o, RunContext& ctx, nlohmann::ordered_json& notes) {
    TrainConfig cfg;
    cfg.learning_rate = o.lr;
    cfg.l2_lambda = o.l2;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.seed = g.seed;

    ModelBundle model;
    std::size_t mlp_in = 0, mlp_hidden = 0;
    const bool is_mlp = parse_mlp(o.arch, mlp_in, mlp_hidden);
    const bool is_custom = o.arch.size() > 5 && o.arch.ends_with(".json");
    std::optional<Network> custom;
    if (is_custom) custom = network_from_architecture_json(read_text(o.arch), g.seed);
    const bool tabular = is_mlp || (custom && custom->input_shape.size() == 1);
    if (!is_mlp && !is_custom && o.arch != "vgg-tiny" && o.arch != "resnet-tiny")
        throw UsageError("unknown architecture '" + o.arch + "' (mlp-<in>-<hidden>-1, vgg-tiny, resnet-tiny or a .json spec)");

    LabeledData train_set, test_set;
    DataRecipe& recipe = model.recipe;
    recipe.split_seed = g.seed;
    if (tabular) {
        recipe.kind = "tabular";
        recipe.label = o.label;
        recipe.features = o.features;
        TabularDataset probe = load_tabular_csv(o.data, o.label);
        const std::size_t rows = probe.rows();
        recipe.train_n = o.train_n;
        recipe.test_n = o.test_n;
        if (recipe.train_n == 0 && recipe.test_n == 0) {
            if (rows >= 700) {
                recipe.train_n = 500;
                recipe.test_n = 200;
            } else {
                recipe.train_n = std::max<std::size_t>(1, rows * 4 / 5);
                recipe.test_n = rows - recipe.train_n;
            }
        }
        const Split s = prepare_tabular(o.data, recipe);
        recipe.features = s.train.feature_names;
        recipe.mean = s.train.normalization.mean;
        recipe.std = s.train.normalization.std;
        train_set = s.train.labeled();
        if (s.test.rows() > 0) test_set = s.test.labeled();
        const std::size_t k = s.train.feature_count();
        if (is_mlp) {
            if (mlp_in != k)
                throw UsageError("architecture " + o.arch + " expects " + std::to_string(mlp_in) + " inputs but the data has " +
                                 std::to_string(k) + " features");
            model.net = make_mlp(k, mlp_hidden, g.seed);
        } else {
            model.net = std::move(*custom);
        }
        notes["normalization"] = "features z-scored with training-split mean and standard deviation";
    } else {
        recipe.kind = "images";
        recipe.train_n = o.train_n;
        recipe.test_n = o.test_n;
        ImageSplit s = prepare_images(o.data, recipe);
        train_set = s.train;
        test_set = s.test;
        const std::size_t classes = s.all.class_names.size();
        if (custom)
            model.net = std::move(*custom);
        else if (o.arch == "vgg-tiny")
            model.net = make_vgg_tiny(s.all.image_shape(), classes, g.seed);
        else
            model.net = make_resnet_tiny(s.all.image_shape(), classes, g.seed);
        notes["normalization"] = "pixels scaled to [0,1] then (x - 0.5) / 0.5 per channel";
    }
    model.objective = objective_for(model.net);

    std::string metrics = "epoch,loss,train_accuracy\n";
    train(model.net, train_set, cfg, model.objective, [&](const EpochLog& log) {
        metrics += csv_of({std::to_string(log.epoch), fmt(log.loss), fmt(log.accuracy)});
    });
    ctx.write_text("metrics.csv", metrics);

    const double train_acc = accuracy(model.net, train_set, model.objective);
    std::string summary = "metric,value\ntrain_accuracy," + fmt(train_acc) + "\n";
    ctx.log() << "train accuracy " << printable(train_acc) << " (" << train_set.size() << " samples)\n";
    if (test_set.size() > 0) {
        const double test_acc = accuracy(model.net, test_set, model.objective);
        summary += "test_accuracy," + fmt(test_acc) + "\n";
        ctx.log() << "test accuracy " << printable(test_acc) << " (" << test_set.size() << " samples)\n";
    }
    ctx.write_text("summary.csv", summary);
    save_model(ctx.path(o.weights), model);
    ctx.record(o.weights);
    ctx.record(sidecar_path(o.weights).string());
}

// ---------------------------------------------------------------- eval

void run_eval(const EvalOptions& o, RunContext& ctx) {
    ModelBundle model = load_model(o.weights);
    std::vector<std::pair<std::string, LabeledData>> parts;
    std::vector<std::vector<std::size_t>> rows;
    if (model.recipe.kind == "tabular") {
        if (model.net.input_shape.size() != 1) throw UsageError("model has no tabular data recipe");
        const Split s = prepare_tabular(o.data, model.recipe);
        parts.emplace_back("train", s.train.labeled());
        rows.push_back(s.train_rows);
        if (s.test.rows() > 0) {
            parts.emplace_back("test", s.test.labeled());
            rows.push_back(s.test_rows);
        }
    } else {
        ImageSplit s = prepare_images(o.data, model.recipe);
        parts.emplace_back("train", s.train);
        rows.push_back(s.train_rows);
        if (s.test.size() > 0) {
            parts.emplace_back("test", s.test);
            rows.push_back(s.test_rows);
        }
    }
    std::string predictions = "split,row,label,prediction\n";
    std::string summary = "metric,value\n";
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& [name, data] = parts[p];
        const std::vector<int> pred = predict_classes(model.net, data.inputs, model.objective);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            correct += pred[i] == data.labels[i];
            predictions += csv_of({name, std::to_string(rows[p][i]), std::to_string(data.labels[i]),
                                   std::to_string(pred[i])});
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(pred.size());
        summary += name + "_accuracy," + fmt(acc) + "\n";
        ctx.log() << name << " accuracy " << printable(acc) << " (" << pred.size() << " samples)\n";
    }
    ctx.write_text("predictions.csv", predictions);
    ctx.write_text("summary.csv", summary);
}

// ---------------------------------------------------------------- sobol

struct ModelSource {
    std::optional<TestFunction> function;
    std::optional<ModelBundle> model;
    std::vector<FactorBounds> bounds;
    std::vector<std::string> names;
};

ModelSource resolve_source(const ModelSourceOptions& o) {
    ModelSource src;
    if (!o.function.empty() == !o.weights.empty())
        throw UsageError("give exactly one of --function or --weights");
    if (!o.function.empty()) {
        src.function = make_test_function(o.function, o.factors);
        src.bounds = src.function->bounds;
        for (std::size_t i = 0; i < src.bounds.size(); ++i) src.names.push_back("x" + std::to_string(i + 1));
        return src;
    }
    if (o.data.empty()) throw UsageError("--weights needs --data to derive factor bounds");
    src.model = load_model(o.weights);
    if (src.model->recipe.kind != "tabular" || src.model->net.input_shape.size() != 1)
        throw UsageError("Sobol analysis needs a tabular model");
    const Split s = prepare_tabular(o.data, src.model->recipe);
    src.bounds = empirical_bounds(s.train.features);
    src.names = s.train.feature_names;
    return src;
}

SobolPlan make_plan(const ModelSource& src, std::size_t n, SobolOrder order, std::size_t bootstrap, double level,
                    std::uint64_t seed) {
    SobolPlan plan;
    plan.factors = src.bounds.size();
    plan.bounds = src.bounds;
    plan.n_base = n;
    plan.order = order;
    plan.bootstrap_resamples = bootstrap;
    plan.confidence_level = level;
    plan.seed = seed;
    return plan;
}

SensitivityIndices analyze_source(const ModelSource& src, const SobolPlan& plan, std::size_t threads) {
    if (src.function) return analyze_function(src.function->model, plan, threads);
    return analyze_model_scalar(src.model->net, plan, threads);
}

SensitivityIndices nan_indices(const SobolPlan& plan) {
    const double nan = std::nan("");
    SensitivityIndices r;
    r.s1.assign(plan.factors, nan);
    r.st.assign(plan.factors, nan);
    r.s1_ci.assign(plan.factors, {nan, nan});
    r.st_ci.assign(plan.factors, {nan, nan});
    if (plan.order == SobolOrder::FirstSecondTotal) {
        r.s2.assign(plan.factors * plan.factors, nan);
        r.s2_ci.assign(plan.factors * plan.factors, {nan, nan});
    }
    return r;
}

void print_indices(std::ostream& out, const SensitivityIndices& r, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
        out << "  " << names[i] << "  S1 " << printable(r.s1[i]) << " [" << printable(r.s1_ci[i].first) << ", "
            << printable(r.s1_ci[i].second) << "]  ST " << printable(r.st[i]) << " [" << printable(r.st_ci[i].first)
            << ", " << printable(r.st_ci[i].second) << "]\n";
}

std::size_t default_hidden_layer(const Network& net) {
    const auto ids = block_ids(net);
    if (ids.empty()) throw UsageError("network has no tagged blocks; pass --layer");
    return *last_layer_of_block(net, ids.front());
}

void run_sobol(const Globals& g, const SobolOptions& o, RunContext& ctx) {
    const ModelSource src = resolve_source(o.source);
    const SobolOrder order = o.order == "second" ? SobolOrder::FirstSecondTotal : SobolOrder::FirstTotal;
    const SobolPlan plan = make_plan(src, o.n, order, o.bootstrap, o.level, g.seed);

    if (o.target == "output") {
        const SensitivityIndices r = analyze_source(src, plan, g.threads);
        ctx.write_text("indices.csv", indices_csv(r, src.names));
        if (r.has_second_order()) ctx.write_text("s2.csv", s2_csv(r, src.names));
        ctx.log() << "Sobol indices, N=" << plan.n_base << ", " << r.n_evaluations << " evaluations\n";
        print_indices(ctx.log(), r, src.names);
        return;
    }
    if (!src.model) throw UsageError("--target hidden needs --weights");
    const Network& net = src.model->net;
    const std::size_t layer = o.layer >= 0 ? static_cast<std::size_t>(o.layer) : default_hidden_layer(net);
    if (layer >= net.layers.size()) throw UsageError("--layer " + std::to_string(layer) + " is out of range");
    const auto results = analyze_model(net, plan, OutputSelector::hidden(layer), g.threads, o.batch);
    std::string summary = "unit,status\n";
    char name[64];
    for (const OutputSensitivity& unit : results) {
        std::snprintf(name, sizeof name, "hidden_unit_%02zu.csv", unit.unit);
        const SensitivityIndices r = unit.ok() ? *unit.indices : nan_indices(plan);
        ctx.write_text(name, indices_csv(r, src.names));
        if (r.has_second_order()) {
            std::snprintf(name, sizeof name, "hidden_unit_%02zu_s2.csv", unit.unit);
            ctx.write_text(name, s2_csv(r, src.names));
        }
        summary += std::to_string(unit.unit) + "," +
                   (unit.ok() ? std::string("ok") : std::string(error_code_name(*unit.error))) + "\n";
        ctx.log() << "unit " << unit.unit << ": " << (unit.ok() ? "ok" : unit.message) << "\n";
    }
    ctx.write_text("hidden_summary.csv", summary);
}

// ---------------------------------------------------------------- convergence

void run_convergence(const Globals& g, const ConvergenceOptions& o, RunContext& ctx) {
    const ModelSource src = resolve_source(o.source);
    std::string csv = "n,factor,s1,s1_lo,s1_hi,s1_width,st,st_lo,st_hi,st_width\n";
    for (std::size_t n : o.ns) {
        const SobolPlan plan = make_plan(src, n, SobolOrder::FirstTotal, o.bootstrap, o.level, g.seed);
        const SensitivityIndices r = analyze_source(src, plan, g.threads);
        for (std::size_t i = 0; i < src.names.size(); ++i)
            csv += csv_of({std::to_string(n), src.names[i], fmt(r.s1[i]), fmt(r.s1_ci[i].first), fmt(r.s1_ci[i].second),
                           fmt(interval_width(r.s1_ci[i])), fmt(r.st[i]), fmt(r.st_ci[i].first),
                           fmt(r.st_ci[i].second), fmt(interval_width(r.st_ci[i]))});
        ctx.log() << "N=" << n << " done\n";
    }
    ctx.write_text("convergence.csv", csv);
}

// ---------------------------------------------------------------- local-sens

ImageDataset load_model_images(const ModelBundle& model, const std::string& data) {
    if (model.net.input_shape.size() != 3) throw UsageError("this command needs an image model");
    const double mean = model.recipe.mean.empty() ? 0.5 : model.recipe.mean.front();
    const double std = model.recipe.std.empty() ? 0.5 : model.recipe.std.front();
    ImageDataset ds = load_images(data, mean, std);
    if (ds.image_shape() != model.net.input_shape)
        fail(ErrorCode::ShapeMismatch, "images are " + shape_string(ds.image_shape()) + " but the model expects " +
                                           shape_string(model.net.input_shape));
    return ds;
}

void write_map(RunContext& ctx, const std::string& stem, const std::vector<double>& values, std::size_t h,
               std::size_t w) {
    ctx.write_text(stem + ".csv", matrix_csv(values, h, w));
    ctx.write_image(stem + ".pgm", heatmap_gray(values, h, w));
    ctx.write_image(stem + ".ppm", heatmap_color(values, h, w));
}

void run_local_sens(const Globals& g, const LocalSensOptions& o, RunContext& ctx) {
    const ModelBundle model = load_model(o.weights);
    const ImageDataset ds = load_model_images(model, o.data);
    const std::vector<int> blocks = o.blocks.empty() ? block_ids(model.net) : o.blocks;
    if (blocks.empty()) throw UsageError("network has no tagged blocks");

    std::vector<SensitivityMap> maps;
    if (o.label >= 0) {
        for (int q : blocks)
            maps.push_back(class_mean_map(model.net, ds.images, ds.labels, o.label, q, o.channel, o.eps, o.n_images,
                                          g.threads)
                               .mean);
    } else {
        maps = pixel_sensitivity(model.net, image_at(ds, o.image), blocks, o.channel, o.eps, g.threads);
    }
    std::string summary = "block,channel,mean_abs,max_abs,scale_exponent\n";
    for (SensitivityMap m : maps) {
        if (o.stat == "abs") m = absolute(m);
        m = pixelate(m, o.pixelate);
        const std::string stem = "sens_block" + std::to_string(m.block) + "_ch" + std::to_string(m.channel);
        write_map(ctx, stem, m.values, m.height, m.width);
        summary += csv_of({std::to_string(m.block), std::to_string(m.channel), fmt(m.mean_abs()), fmt(m.max_abs()),
                           std::to_string(m.scale_exponent)});
        ctx.log() << "block " << m.block << ": mean |s| " << m.mean_abs() << ", scale 10^" << m.scale_exponent
                  << ", map " << m.height << "x" << m.width << "\n";
    }
    ctx.write_text("sens_summary.csv", summary);
}

// ---------------------------------------------------------------- am

void write_input(RunContext& ctx, const std::string& stem, const Tensor& x, const ModelBundle& model) {
    if (x.rank() == 3 && (x.dim(2) == 1 || x.dim(2) == 3)) {
        const double mean = model.recipe.mean.empty() ? 0.5 : model.recipe.mean.front();
        const double std = model.recipe.std.empty() ? 0.5 : model.recipe.std.front();
        ctx.write_image(stem + (x.dim(2) == 1 ? ".pgm" : ".ppm"), to_raw_image(x, mean, std));
    }
    const std::size_t cols = x.rank() >= 1 ? x.dim(x.rank() - 1) : 1;
    ctx.write_text(stem + ".csv", matrix_csv(x.values(), x.size() / cols, cols));
}

void run_am(const Globals& g, const AmOptions& o, RunContext& ctx) {
    const ModelBundle model = load_model(o.weights);
    AMConfig cfg;
    if (o.layer >= 0 && o.target_class >= 0) throw UsageError("give either --class or --layer, not both");
    cfg.target = o.layer >= 0 ? AMTarget::neuron(static_cast<std::size_t>(o.layer), o.unit)
                              : AMTarget::class_logit(static_cast<std::size_t>(std::max(o.target_class, 0)));
    cfg.eps1 = o.eps1;
    cfg.eps2 = o.eps2;
    cfg.steps = o.steps;
    cfg.regularizer = o.reg == "tv"         ? Regularizer::TotalVariation
                      : o.reg == "operator" ? Regularizer::Operator
                                            : Regularizer::None;
    cfg.blur_sigma = o.sigma;
    cfg.blur_radius = o.radius;
    cfg.clamp_low = o.clamp_lo;
    cfg.clamp_high = o.clamp_hi;
    cfg.init_seed = g.seed;

    std::string summary = "metric,value\n";
    AMResult result;
    if (o.init == "image") {
        if (o.data.empty()) throw UsageError("--init image needs --data");
        const ImageDataset ds = load_model_images(model, o.data);
        const Tensor source = image_at(ds, o.image);
        write_input(ctx, "am_source", source, model);
        if (cfg.target.kind == AMTarget::Kind::ClassLogit) {
            const CrossClassResult cc = cross_class_am(model.net, source, cfg.target.index, cfg);
            result = cc.am;
            summary += "source_label," + std::to_string(ds.labels[o.image]) + "\n";
            summary += "source_prediction," + std::to_string(cc.source_class) + "\n";
            summary += "target_gain," + fmt(cc.target_gain) + "\n";
            ctx.log() << "source image " << o.image << " predicted as class " << cc.source_class << "\n";
        } else {
            cfg.init_image = source;
            result = am_ascend(model.net, cfg);
        }
    } else {
        result = am_ascend(model.net, cfg);
    }
    write_input(ctx, "am_image", result.image, model);
    std::string trace = "step,activation\n0," + fmt(result.initial_activation) + "\n";
    for (std::size_t t = 0; t < result.activation_trace.size(); ++t)
        trace += std::to_string(t + 1) + "," + fmt(result.activation_trace[t]) + "\n";
    ctx.write_text("am_trace.csv", trace);
    summary += "initial_activation," + fmt(result.initial_activation) + "\n";
    summary += "final_activation," + fmt(result.final_activation) + "\n";
    ctx.write_text("am_summary.csv", summary);
    ctx.log() << "activation " << printable(result.initial_activation) << " -> " << printable(result.final_activation)
              << " after " << cfg.steps << " steps\n";
}

// ---------------------------------------------------------------- grad-cam

void run_grad_cam(const GradCamOptions& o, RunContext& ctx) {
    const ModelBundle model = load_model(o.weights);
    const ImageDataset ds = load_model_images(model, o.data);
    const Tensor image = image_at(ds, o.image);
    std::size_t cls = 0;
    if (o.target_class >= 0) {
        cls = static_cast<std::size_t>(o.target_class);
    } else {
        const Tensor logits = predict(model.net, as_batch(image));
        const auto v = logits.values();
        cls = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    }
    std::optional<std::size_t> layer;
    if (o.layer >= 0) layer = static_cast<std::size_t>(o.layer);
    const AttributionMap map = grad_cam(model.net, image, cls, layer);
    ctx.write_text("cam.csv", matrix_csv(map.values, map.height, map.width));
    ctx.write_text("cam_upsampled.csv", matrix_csv(map.upsampled, map.image_height, map.image_width));
    ctx.write_image("cam.pgm", heatmap_gray(map.upsampled, map.image_height, map.image_width));
    const double mean = model.recipe.mean.empty() ? 0.5 : model.recipe.mean.front();
    const double std = model.recipe.std.empty() ? 0.5 : model.recipe.std.front();
    ctx.write_image("cam_overlay.ppm", overlay(to_raw_image(image, mean, std), map.upsampled, 0.5));
    ctx.write_text("cam_summary.csv", "metric,value\nclass," + std::to_string(cls) + "\nlayer," +
                                          std::to_string(map.layer) + "\nlabel," + std::to_string(ds.labels[o.image]) +
                                          "\n");
    ctx.log() << "Grad-CAM for class " << cls << " at layer " << map.layer << " (" << map.height << "x" << map.width
              << " grid)\n";
}

// ---------------------------------------------------------------- pca

void run_pca(const PcaOptions& o, RunContext& ctx) {
    TabularDataset ds = load_tabular_csv(o.data, o.label);
    const Normalization norm = fit_normalization(ds.features);
    ds.features = apply_normalization(ds.features, norm);
    const PCAResult r = pca(ds);
    std::string ratios = "component,eigenvalue,ratio,cumulative\n";
    for (std::size_t i = 0; i < r.k; ++i)
        ratios += csv_of({std::to_string(i + 1), fmt(r.eigenvalues[i]), fmt(r.explained_variance_ratio[i]),
                          fmt(r.cumulative_ratio(i + 1))});
    ctx.write_text("pca_ratios.csv", ratios);
    std::string loadings = "component";
    for (const auto& n : r.feature_names) loadings += "," + n;
    loadings += "\n";
    for (std::size_t i = 0; i < r.k; ++i) {
        loadings += std::to_string(i + 1);
        for (std::size_t j = 0; j < r.k; ++j) loadings += "," + fmt(r.components[i * r.k + j]);
        loadings += "\n";
    }
    ctx.write_text("pca_components.csv", loadings);
    const std::size_t top = std::min(o.components, r.k);
    ctx.log() << "top-" << top << " cumulative explained variance " << printable(r.cumulative_ratio(top)) << "\n";
}

// ---------------------------------------------------------------- toy-images

void run_toy(const Globals& g, const ToyOptions& o, RunContext& ctx) {
    const RawImageSet set = make_toy_images(o.per_class, o.size, g.seed);
    if (o.format == "slim") {
        ctx.write_text("images.slim", pack_images(set));
    } else {
        write_image_set(ctx.path("images"), set);
        ctx.record("images/manifest.csv");
    }
    ctx.log() << set.images.size() << " images (" << set.class_names.size() << " classes) written to " << ctx.dir().string()
              << "\n";
}

void add_source_options(CLI::App* sub, ModelSourceOptions& o) {
    sub->add_option("--function", o.function, "Built-in test function instead of a network")
        ->check(CLI::IsMember(test_function_names()));
    sub->add_option("--factors", o.factors, "Factor count for sobol-g and linear (0 = default)");
    sub->add_option("--weights", o.weights, "Trained tabular model")->check(CLI::ExistingFile);
    sub->add_option("--data", o.data, "Dataset the model was trained on (factor bounds)")->check(CLI::ExistingFile);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sensitivity analysis and attribution for small neural networks", "senslab"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.allow_config_extras(CLI::config_extras_mode::ignore);
    app.option_defaults()->always_capture_default();
    app.fallthrough();
    app.set_config("--config", "", "JSON configuration; command-line flags take precedence");

    Globals g;
    app.add_option("--seed", g.seed, "Seed for splits, initialization, shuffling and bootstrap");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads for sobol and local-sens (0 = all cores)");

    TrainOptions train_o;
    auto* train_cmd = app.add_subcommand("train", "Train a network and write weights plus metrics");
    train_cmd->add_option("--arch", train_o.arch, "mlp-<in>-<hidden>-1, vgg-tiny, resnet-tiny or a JSON spec");
    train_cmd->add_option("--data", train_o.data, "CSV table or image set (manifest, directory or SLIM file)")
        ->required()
        ->check(CLI::ExistingPath);
    train_cmd->add_option("--label", train_o.label, "Label column of a CSV table");
    train_cmd->add_option("--features", train_o.features, "Feature subset, comma separated")->delimiter(',');
    train_cmd->add_option("--train-n", train_o.train_n, "Training rows (0 = 500, or 80 percent of small sets)");
    train_cmd->add_option("--test-n", train_o.test_n, "Test rows (0 with --train-n 0 = 200, or the remainder)");
    train_cmd->add_option("--epochs", train_o.epochs, "Training epochs");
    train_cmd->add_option("--lr", train_o.lr, "Learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--l2", train_o.l2, "L2 coefficient")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--batch", train_o.batch, "Mini-batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--weights", train_o.weights, "Weights file name inside --out");

    EvalOptions eval_o;
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy of trained weights on their train/test split");
    eval_cmd->add_option("--weights", eval_o.weights, "Weights file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_o.data, "Dataset")->required()->check(CLI::ExistingPath);

    SobolOptions sobol_o;
    auto* sobol_cmd = app.add_subcommand("sobol", "Sobol indices of a network or a built-in test function");
    add_source_options(sobol_cmd, sobol_o.source);
    sobol_cmd->add_option("--n", sobol_o.n, "Base sample count N")->check(kPowerOfTwo);
    sobol_cmd->add_option("--order", sobol_o.order, "first (S1, ST) or second (adds S2)")
        ->check(CLI::IsMember({"first", "second"}));
    sobol_cmd->add_option("--bootstrap", sobol_o.bootstrap, "Bootstrap resamples");
    sobol_cmd->add_option("--level", sobol_o.level, "Confidence level")->check(kOpenUnit);
    sobol_cmd->add_option("--target", sobol_o.target, "output or hidden")->check(CLI::IsMember({"output", "hidden"}));
    sobol_cmd->add_option("--layer", sobol_o.layer, "Hidden layer index (-1 = last layer of the first block)");
    sobol_cmd->add_option("--batch", sobol_o.batch, "Network evaluation batch size")->check(CLI::PositiveNumber);

    ConvergenceOptions conv_o;
    auto* conv_cmd = app.add_subcommand("convergence", "Sobol indices and CI widths over a sweep of N");
    add_source_options(conv_cmd, conv_o.source);
    conv_cmd->add_option("--ns", conv_o.ns, "Base sample counts")->delimiter(',')->check(kPowerOfTwo);
    conv_cmd->add_option("--bootstrap", conv_o.bootstrap, "Bootstrap resamples");
    conv_cmd->add_option("--level", conv_o.level, "Confidence level")->check(kOpenUnit);

    LocalSensOptions ls_o;
    auto* ls_cmd = app.add_subcommand("local-sens", "Single-pixel sensitivity maps per block");
    ls_cmd->add_option("--weights", ls_o.weights, "Image model weights")->required()->check(CLI::ExistingFile);
    ls_cmd->add_option("--data", ls_o.data, "Image set")->required()->check(CLI::ExistingPath);
    ls_cmd->add_option("--image", ls_o.image, "Image index");
    ls_cmd->add_option("--class", ls_o.label, "Average over images of this class instead (-1 = off)");
    ls_cmd->add_option("--n-images", ls_o.n_images, "Images averaged with --class")->check(CLI::PositiveNumber);
    ls_cmd->add_option("--block", ls_o.blocks, "Block ids (default: every block)")->delimiter(',');
    ls_cmd->add_option("--channel", ls_o.channel, "Colour channel");
    ls_cmd->add_option("--eps", ls_o.eps, "Perturbation size")->check(CLI::PositiveNumber);
    ls_cmd->add_option("--pixelate", ls_o.pixelate, "Tile size for averaging")->check(CLI::PositiveNumber);
    ls_cmd->add_option("--stat", ls_o.stat, "signed or abs")->check(CLI::IsMember({"signed", "abs"}));

    AmOptions am_o;
    auto* am_cmd = app.add_subcommand("am", "Activation maximization");
    am_cmd->add_option("--weights", am_o.weights, "Model weights")->required()->check(CLI::ExistingFile);
    am_cmd->add_option("--class", am_o.target_class, "Class logit to maximize (default 0)");
    am_cmd->add_option("--layer", am_o.layer, "Maximize a unit of this layer instead");
    am_cmd->add_option("--unit", am_o.unit, "Unit index within --layer");
    am_cmd->add_option("--eps1", am_o.eps1, "Gradient step")->check(CLI::NonNegativeNumber);
    am_cmd->add_option("--eps2", am_o.eps2, "TV step")->check(CLI::NonNegativeNumber);
    am_cmd->add_option("--steps", am_o.steps, "Iterations")->check(CLI::PositiveNumber);
    am_cmd->add_option("--reg", am_o.reg, "none, tv or operator")->check(CLI::IsMember({"none", "tv", "operator"}));
    am_cmd->add_option("--sigma", am_o.sigma, "Blur sigma for --reg operator")->check(CLI::PositiveNumber);
    am_cmd->add_option("--radius", am_o.radius, "Blur radius for --reg operator")->check(CLI::PositiveNumber);
    am_cmd->add_option("--clamp-lo", am_o.clamp_lo, "Lower pixel bound");
    am_cmd->add_option("--clamp-hi", am_o.clamp_hi, "Upper pixel bound");
    am_cmd->add_option("--init", am_o.init, "random or image")->check(CLI::IsMember({"random", "image"}));
    am_cmd->add_option("--data", am_o.data, "Image set for --init image")->check(CLI::ExistingPath);
    am_cmd->add_option("--image", am_o.image, "Source image index for --init image");

    GradCamOptions gc_o;
    auto* gc_cmd = app.add_subcommand("grad-cam", "Grad-CAM map and overlay");
    gc_cmd->add_option("--weights", gc_o.weights, "Image model weights")->required()->check(CLI::ExistingFile);
    gc_cmd->add_option("--data", gc_o.data, "Image set")->required()->check(CLI::ExistingPath);
    gc_cmd->add_option("--image", gc_o.image, "Image index");
    gc_cmd->add_option("--class", gc_o.target_class, "Target class (-1 = predicted)");
    gc_cmd->add_option("--layer", gc_o.layer, "Feature layer index (-1 = last conv of the deepest block)");

    PcaOptions pca_o;
    auto* pca_cmd = app.add_subcommand("pca", "Principal components of a z-scored CSV table");
    pca_cmd->add_option("--data", pca_o.data, "CSV table")->required()->check(CLI::ExistingFile);
    pca_cmd->add_option("--label", pca_o.label, "Label column to exclude");
    pca_cmd->add_option("--components", pca_o.components, "Components in the reported cumulative ratio");

    ToyOptions toy_o;
    auto* toy_cmd = app.add_subcommand("toy-images", "Write the synthetic 4-class image set");
    toy_cmd->add_option("--per-class", toy_o.per_class, "Images per class")->check(CLI::PositiveNumber);
    toy_cmd->add_option("--size", toy_o.size, "Image side length")->check(CLI::Range(4, 1024));
    toy_cmd->add_option("--format", toy_o.format, "dir (PPM + manifest) or slim")->check(CLI::IsMember({"dir", "slim"}));

    for (CLI::App* sub : app.get_subcommands({})) sub->configurable();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const auto parsed = app.get_subcommands();
    if (parsed.empty()) {
        err << app.help();
        return 2;
    }
    CLI::App* cmd = parsed.front();
    const std::string name = cmd->get_name();
    try {
        RunContext ctx(g.out, out);
        nlohmann::ordered_json notes = nlohmann::ordered_json::object();
        if (name == "train") run_train(g, train_o, ctx, notes);
        else if (name == "eval") run_eval(eval_o, ctx);
        else if (name == "sobol") run_sobol(g, sobol_o, ctx);
        else if (name == "convergence") run_convergence(g, conv_o, ctx);
        else if (name == "local-sens") run_local_sens(g, ls_o, ctx);
        else if (name == "am") run_am(g, am_o, ctx);
        else if (name == "grad-cam") run_grad_cam(gc_o, ctx);
        else if (name == "pca") run_pca(pca_o, ctx);
        else if (name == "toy-images") run_toy(g, toy_o, ctx);
        nlohmann::ordered_json config = JsonConfig::snapshot(&app, true);
        // Only the command that ran belongs in the manifest.
        for (CLI::App* other : app.get_subcommands({}))
            if (other != cmd) config.erase(other->get_name());
        write_manifest(ctx, std::move(config), name, g.seed, notes);
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace senslab::cli
