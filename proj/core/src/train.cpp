#include "senslab/train.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "senslab/error.hpp"
#include "senslab/loss.hpp"
#include "senslab/rng.hpp"

namespace senslab {

namespace {

constexpr std::size_t kPredictBatch = 256;

struct BatchLoss {
    double value = 0.0;
    Tensor grad;
};

BatchLoss score(const Tensor& output, std::span<const int> labels, Objective objective) {
    if (objective == Objective::BinaryCrossEntropy) {
        if (output.size() != labels.size())
            fail(ErrorCode::ShapeMismatch, "binary objective needs one output per sample");
        Tensor target(output.shape());
        for (std::size_t i = 0; i < labels.size(); ++i) target[i] = labels[i] != 0 ? 1.0 : 0.0;
        LossResult r = bce_loss(output, target);
        return {r.value, std::move(r.grad)};
    }
    LossResult r = cross_entropy_loss(output, labels);
    return {r.value, std::move(r.grad)};
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be positive");
    if (!(l2_lambda >= 0.0)) fail(ErrorCode::InvalidArgument, "l2 lambda must be non-negative");
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch size must be positive");
}

void sgd_step(Network& net, const ParamGrads& grads, const TrainConfig& cfg) {
    std::vector<Tensor*> params = parameters(net);
    if (params.size() != grads.size()) fail(ErrorCode::ShapeMismatch, "gradient list does not match parameters");
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p];
        const Tensor& g = grads[p];
        if (g.shape() != w.shape()) fail(ErrorCode::ShapeMismatch, "gradient " + std::to_string(p) + " misaligned");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * (g[i] + cfg.l2_lambda * w[i]);
    }
}

Tensor gather_rows(const Tensor& inputs, std::span<const std::size_t> rows) {
    const std::size_t stride = inputs.size() / inputs.dim(0);
    Shape shape = inputs.shape();
    shape[0] = rows.size();
    std::vector<double> out(rows.size() * stride);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy_n(inputs.data() + rows[r] * stride, stride, out.data() + r * stride);
    return Tensor(std::move(shape), std::move(out));
}

std::vector<EpochLog> train(Network& net, const LabeledData& data, const TrainConfig& cfg, Objective objective,
                            const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    if (data.size() == 0) fail(ErrorCode::EmptyDataset, "training set is empty");
    if (data.inputs.rank() == 0 || data.inputs.dim(0) != data.size())
        fail(ErrorCode::ShapeMismatch, "inputs and labels disagree on sample count");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::vector<EpochLog> log;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
            std::span<const std::size_t> rows(order.data() + begin, count);
            Tensor batch = gather_rows(data.inputs, rows);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) labels[i] = data.labels[rows[i]];

            ActivationTrace trace = forward(net, batch, Mode::Train, net.layers.size());
            BatchLoss loss = score(trace.output(), labels, objective);
            BackwardResult grads = backward(net, trace, loss.grad);
            sgd_step(net, grads.params, cfg);
            commit_batch_stats(net, trace);
            loss_sum += loss.value * static_cast<double>(count);
        }
        net.mode = Mode::Eval;
        EpochLog entry{epoch + 1, loss_sum / static_cast<double>(data.size()), accuracy(net, data, objective)};
        log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    net.mode = Mode::Eval;
    return log;
}

std::vector<int> predict_classes(const Network& net, const Tensor& inputs, Objective objective) {
    const std::size_t n = inputs.dim(0);
    std::vector<int> classes;
    classes.reserve(n);
    for (std::size_t begin = 0; begin < n; begin += kPredictBatch) {
        const std::size_t count = std::min(kPredictBatch, n - begin);
        const Tensor out = predict(net, inputs.slice_rows(begin, count));
        const std::size_t width = out.size() / count;
        for (std::size_t s = 0; s < count; ++s) {
            const double* row = out.data() + s * width;
            if (objective == Objective::BinaryCrossEntropy)
                classes.push_back(row[0] >= 0.5 ? 1 : 0);
            else
                classes.push_back(static_cast<int>(std::max_element(row, row + width) - row));
        }
    }
    return classes;
}

double accuracy(const Network& net, const LabeledData& data, Objective objective) {
    if (data.size() == 0) fail(ErrorCode::EmptyDataset, "cannot score an empty dataset");
    const std::vector<int> predicted = predict_classes(net, data.inputs, objective);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == data.labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace senslab
