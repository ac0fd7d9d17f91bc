#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "senslab/network.hpp"

namespace senslab {

struct TrainConfig {
    double learning_rate = 0.01;
    double l2_lambda = 0.001;
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;

    void validate() const;
};

enum class Objective {
    BinaryCrossEntropy,   // one sigmoid output per sample, labels 0/1
    SoftmaxCrossEntropy,  // C logits per sample, labels 0..C-1
};

/// Inputs carry a leading sample axis; labels align with it.
struct LabeledData {
    Tensor inputs;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

/// w <- w - lr * (dL/dw + lambda * w) for every trainable tensor.
void sgd_step(Network& net, const ParamGrads& grads, const TrainConfig& cfg);

/// Mini-batch SGD with L2 decay. Shuffling is driven by cfg.seed only, so two
/// runs from the same initial weights are bit-identical. Leaves the network
/// in Eval mode.
std::vector<EpochLog> train(Network& net, const LabeledData& data, const TrainConfig& cfg, Objective objective,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Predicted class per sample (threshold 0.5 for the binary objective).
std::vector<int> predict_classes(const Network& net, const Tensor& inputs, Objective objective);

double accuracy(const Network& net, const LabeledData& data, Objective objective);

/// Rows of a sample-major tensor selected by index.
Tensor gather_rows(const Tensor& inputs, std::span<const std::size_t> rows);

}  // namespace senslab
