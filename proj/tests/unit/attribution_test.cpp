#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "senslab/architectures.hpp"
#include "senslab/attribution.hpp"
#include "senslab/error.hpp"
#include "senslab/images.hpp"
#include "senslab/train.hpp"

using namespace senslab;
using senslab::testing::numeric_gradient;
using senslab::testing::random_tensor;
using senslab::testing::relative_error;
using senslab::testing::variance;

namespace {

// Flatten then one Dense unit: a(x) = w . x.
Network linear_net(const Shape& shape, const std::vector<double>& w) {
    Network net;
    net.input_shape = shape;
    net.layers.push_back(make_flatten());
    net.layers.push_back(make_dense(shape_size(shape), 1));
    initialize(net, 1);
    auto& dense = std::get<Dense>(net.layers[1].op);
    for (std::size_t i = 0; i < w.size(); ++i) dense.weight[i] = w[i];
    dense.bias.fill(0.0);
    return net;
}

double tv_direct(const Tensor& x) {
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    double s = 0.0;
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) {
                const double v = x[(i * w + j) * c + k];
                if (i + 1 < h) s += std::abs(x[((i + 1) * w + j) * c + k] - v);
                if (j + 1 < w) s += std::abs(x[(i * w + j + 1) * c + k] - v);
            }
    return s;
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<double> parameter_snapshot(const Network& net) {
    std::vector<double> out;
    for (const Tensor* t : parameters(net)) out.insert(out.end(), t->values().begin(), t->values().end());
    return out;
}

// vgg-tiny trained once on the 4-class toy set, shared by the empirical checks.
struct ToyModel {
    Network net;
    ImageDataset data;
    double train_accuracy = 0.0;
};

const ToyModel& toy_model() {
    static const ToyModel model = [] {
        ToyModel m;
        m.data = normalize_images(make_toy_images(40, 16, 11));
        m.net = make_vgg_tiny({16, 16, 3}, 4, 3);
        TrainConfig cfg;
        cfg.learning_rate = 0.01;
        cfg.epochs = 5;
        cfg.batch_size = 32;
        cfg.seed = 4;
        train(m.net, m.data.labeled(), cfg, Objective::SoftmaxCrossEntropy);
        m.train_accuracy = accuracy(m.net, m.data.labeled(), Objective::SoftmaxCrossEntropy);
        return m;
    }();
    return model;
}

}  // namespace

TEST(TotalVariation, Examples) {
    EXPECT_EQ(tv_loss(Tensor({3, 4, 2}, 0.7)).value, 0.0);
    EXPECT_EQ(tv_loss(Tensor({1, 2, 1}, {0.0, 1.0})).value, 1.0);
    const LossResult r = tv_loss(Tensor({1, 2, 1}, {0.0, 1.0}));
    EXPECT_EQ(r.grad[0], -1.0);
    EXPECT_EQ(r.grad[1], 1.0);
    // exact tie: subgradient 0
    const LossResult tie = tv_loss(Tensor({1, 2, 1}, {0.5, 0.5}));
    EXPECT_EQ(tie.grad[0], 0.0);
    EXPECT_EQ(tie.grad[1], 0.0);
}

TEST(TotalVariation, MatchesDirectDefinitionAndFiniteDifferences) {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const Shape shape{1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3)};
        const Tensor x = random_tensor(shape, rng);
        const LossResult r = tv_loss(x);
        EXPECT_NEAR(r.value, tv_direct(x), 1e-12);
        EXPECT_EQ(r.grad.shape(), shape);
        auto f = [&](std::span<const double> v) {
            return tv_direct(Tensor(shape, std::vector<double>(v.begin(), v.end())));
        };
        const auto num = numeric_gradient(f, std::vector<double>(x.values().begin(), x.values().end()), 1e-6);
        EXPECT_LT(relative_error(r.grad.values(), num), 1e-4) << "trial " << trial;
    }
}

TEST(GaussianBlur, ConstantImageUnchanged) {
    const Tensor x({6, 5, 3}, 0.25);
    const Tensor y = gaussian_blur(x, 1.3, 4);
    for (double v : y.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(GaussianBlur, ImpulseMatchesDirectKernel) {
    Tensor x({5, 5, 1});
    x[12] = 1.0;
    const Tensor y = gaussian_blur(x, 1.0, 2);
    double z = 0.0;
    for (int di = -2; di <= 2; ++di)
        for (int dj = -2; dj <= 2; ++dj) z += std::exp(-(di * di + dj * dj) / 2.0);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const int di = i - 2, dj = j - 2;
            EXPECT_NEAR(y[i * 5 + j], std::exp(-(di * di + dj * dj) / 2.0) / z, 1e-15);
        }
    EXPECT_NEAR(std::sqrt(y[12]), 0.4026, 1e-4);
}

TEST(GaussianBlur, EdgesReflectWithRepeat) {
    const Tensor y = gaussian_blur(Tensor({1, 5, 1}, {1, 0, 0, 0, 0}), 1.0, 2);
    const double k0 = 1.0, k1 = std::exp(-0.5), k2 = std::exp(-2.0), z = k0 + 2 * k1 + 2 * k2;
    EXPECT_NEAR(y[0], (k0 + k1) / z, 1e-15);
    EXPECT_NEAR(y[1], (k1 + k2) / z, 1e-15);
    EXPECT_NEAR(y[2], k2 / z, 1e-15);
    EXPECT_NEAR(y[3], 0.0, 1e-15);
}

TEST(GaussianBlur, SemigroupProperty) {
    Rng rng(22);
    const double sigma = 1.5;
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = random_tensor({16, 16, 3}, rng);
        const Tensor twice = gaussian_blur(gaussian_blur(x, sigma, 6), sigma, 6);
        const Tensor once = gaussian_blur(x, sigma * std::sqrt(2.0), 9);
        EXPECT_LT(relative_error(twice.values(), once.values()), 0.02);
    }
}

TEST(GaussianBlur, DoesNotIncreaseTotalVariation) {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const Tensor x = random_tensor({3 + rng.below(10), 3 + rng.below(10), 1 + rng.below(3)}, rng);
        const double sigma = rng.uniform(0.3, 2.0);
        EXPECT_LE(tv_loss(gaussian_blur(x, sigma, 1 + rng.below(4))).value, tv_loss(x).value + 1e-12);
    }
}

TEST(ActivationMaximization, SumTargetOneStep) {
    const Network net = linear_net({3, 3, 1}, std::vector<double>(9, 1.0));
    AMConfig cfg;
    cfg.target = AMTarget::class_logit(0);
    cfg.eps1 = 0.1;
    cfg.steps = 1;
    cfg.init_image = Tensor({3, 3, 1});
    const AMResult r = am_ascend(net, cfg);
    for (double v : r.image.values()) EXPECT_NEAR(v, 0.1, 1e-15);
    ASSERT_EQ(r.activation_trace.size(), 1u);
    EXPECT_NEAR(r.final_activation, 0.9, 1e-12);
}

TEST(ActivationMaximization, LinearTargetClosedForm) {
    Rng rng(24);
    const Shape shape{4, 3, 2};
    std::vector<double> w(shape_size(shape));
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    const Network net = linear_net(shape, w);
    const Tensor x0 = random_tensor(shape, rng);
    for (std::size_t t = 1; t <= 6; ++t) {
        AMConfig cfg;
        cfg.target = AMTarget::class_logit(0);
        cfg.eps1 = 0.1;
        cfg.steps = t;
        cfg.clamp_low = -1e6;
        cfg.clamp_high = 1e6;
        cfg.init_image = x0;
        const AMResult r = am_ascend(net, cfg);
        for (std::size_t i = 0; i < w.size(); ++i)
            EXPECT_NEAR(r.image[i], x0[i] + static_cast<double>(t) * 0.1 * w[i], 1e-12);
    }
    // with the default clamp the closed form is clamped per pixel
    AMConfig cfg;
    cfg.target = AMTarget::class_logit(0);
    cfg.eps1 = 0.5;
    cfg.steps = 1;
    cfg.init_image = x0;
    const AMResult r = am_ascend(net, cfg);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(r.image[i], std::clamp(x0[i] + 0.5 * w[i], -1.0, 1.0));
}

TEST(ActivationMaximization, TvWithZeroWeightIsPlainAscent) {
    const Network net = make_vgg_tiny({8, 8, 3}, 3, 2, {4, 4, 4});
    AMConfig plain;
    plain.target = AMTarget::class_logit(1);
    plain.steps = 15;
    plain.init_seed = 9;
    AMConfig tv = plain;
    tv.regularizer = Regularizer::TotalVariation;
    tv.eps2 = 0.0;
    const AMResult a = am_ascend(net, plain);
    const AMResult b = am_ascend(net, tv);
    EXPECT_EQ(vec(a.image), vec(b.image));
    EXPECT_EQ(a.activation_trace, b.activation_trace);
}

TEST(ActivationMaximization, BlurOnlyStrictlyReducesVariance) {
    const Network net = linear_net({8, 8, 3}, std::vector<double>(192, 1.0));
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t <= 10; ++t) {
        AMConfig cfg;
        cfg.target = AMTarget::class_logit(0);
        cfg.eps1 = 0.0;
        cfg.steps = t;
        cfg.regularizer = Regularizer::Operator;
        cfg.blur_sigma = 1.0;
        cfg.blur_radius = 2;
        cfg.init_seed = 5;
        const double v = variance(am_ascend(net, cfg).image.values());
        EXPECT_LT(v, previous) << "step " << t;
        previous = v;
    }
}

TEST(ActivationMaximization, InvalidConfigs) {
    const Network net = linear_net({2, 2, 1}, std::vector<double>(4, 1.0));
    AMConfig cfg;
    cfg.steps = 0;
    EXPECT_THROW(am_ascend(net, cfg), Error);
    cfg.steps = 1;
    cfg.clamp_low = 1.0;
    EXPECT_THROW(am_ascend(net, cfg), Error);
    cfg.clamp_low = -1.0;
    cfg.regularizer = Regularizer::Operator;
    cfg.blur_sigma = 0.0;
    EXPECT_THROW(am_ascend(net, cfg), Error);
    cfg.regularizer = Regularizer::None;
    cfg.target = AMTarget::class_logit(3);
    try {
        am_ascend(net, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TargetUnresolvable);
    }
    cfg.target = AMTarget::neuron(9, 0);
    EXPECT_THROW(am_ascend(net, cfg), Error);
}

TEST(ActivationMaximization, ZeroStepSizeReturnsClampedSource) {
    const Network net = make_vgg_tiny({8, 8, 3}, 3, 2, {4, 4, 4});
    Rng rng(25);
    const Tensor source = random_tensor({8, 8, 3}, rng, -2.0, 2.0);
    AMConfig cfg;
    cfg.eps1 = 0.0;
    cfg.steps = 1;
    const CrossClassResult r = cross_class_am(net, source, 2, cfg);
    for (std::size_t i = 0; i < source.size(); ++i) EXPECT_EQ(r.am.image[i], std::clamp(source[i], -1.0, 1.0));
}

TEST(ActivationMaximization, LayerNeuronTargetAndImageStaysInRange) {
    const Network net = make_vgg_tiny({8, 8, 3}, 3, 2, {4, 4, 4});
    AMConfig cfg;
    cfg.target = AMTarget::neuron(2, 5);
    cfg.steps = 20;
    cfg.regularizer = Regularizer::Operator;
    const AMResult r = am_ascend(net, cfg);
    EXPECT_EQ(r.activation_trace.size(), 20u);
    EXPECT_EQ(r.final_activation, r.activation_trace.back());
    EXPECT_EQ(r.final_activation, target_activation(net, r.image, cfg.target));
    for (double v : r.image.values()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(ActivationMaximization, BeatsRandomBaselineOnTrainedNet) {
    const ToyModel& m = toy_model();
    ASSERT_GE(m.train_accuracy, 0.9);
    int wins = 0;
    std::vector<int> losses_by_class(4, 0);
    for (int trial = 0; trial < 100; ++trial) {
        AMConfig cfg;
        cfg.target = AMTarget::class_logit(static_cast<std::size_t>(trial % 4));
        cfg.eps1 = 0.1;
        cfg.eps2 = 0.1;
        cfg.regularizer = Regularizer::TotalVariation;
        cfg.init_seed = 1000 + trial;
        const AMResult r = am_ascend(m.net, cfg);
        Rng rng(5000 + trial);
        double best = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 10; ++k)
            best = std::max(best, target_activation(m.net, random_tensor({16, 16, 3}, rng), cfg.target));
        if (r.final_activation > best)
            ++wins;
        else
            ++losses_by_class[trial % 4];
    }
    EXPECT_GE(wins, 95) << "losses per class: " << losses_by_class[0] << " " << losses_by_class[1] << " "
                        << losses_by_class[2] << " " << losses_by_class[3];
}

TEST(ActivationMaximization, CrossClassRaisesTargetLogit) {
    const ToyModel& m = toy_model();
    int gains = 0, pairs = 0;
    for (std::size_t i = 0; i < 12; ++i) {
        const Tensor source = m.data.images.slice_rows(i * 13, 1);
        for (std::size_t c = 0; c < 4; ++c) {
            AMConfig cfg;
            cfg.eps1 = 0.01;
            cfg.steps = 20;
            const CrossClassResult r = cross_class_am(m.net, source, c, cfg);
            ++pairs;
            if (r.target_gain > 0.0) ++gains;
            EXPECT_EQ(r.target_gain, r.am.final_activation - r.am.initial_activation);
            if (static_cast<int>(c) == r.source_class) {
                EXPECT_GE(r.am.final_activation, r.am.initial_activation);
            }
        }
    }
    EXPECT_GE(gains * 10, pairs * 9);
}

TEST(GradCam, MatchesFiniteDifferenceOracle) {
    Network net = make_vgg_tiny({8, 8, 3}, 3, 6, {3, 4, 4});
    Rng rng(26);
    const Tensor x = random_tensor({8, 8, 3}, rng);
    // Conv outputs: the suffix starts at a ReLU, so no max-pool ties of zeros
    // sit inside the finite-difference stencil.
    for (std::size_t layer : {std::size_t{2}, default_cam_layer(net) - 1}) {
        ASSERT_EQ(net.layers[layer].kind(), LayerKind::Conv2D);
        const AttributionMap cam = grad_cam(net, x, 1, layer);
        const Tensor a = forward(net, as_batch(x), Mode::Eval, layer + 1).output();
        Network suffix;
        suffix.input_shape = net.shape_after(layer + 1);
        for (std::size_t l = layer + 1; l < net.layers.size(); ++l) suffix.layers.push_back(net.layers[l]);
        suffix.mode = Mode::Eval;
        auto logit = [&](std::span<const double> v) {
            return predict(suffix, Tensor(a.shape(), std::vector<double>(v.begin(), v.end())))[1];
        };
        const auto g = numeric_gradient(logit, std::vector<double>(a.values().begin(), a.values().end()), 1e-6);
        const std::size_t h = suffix.input_shape[0], w = suffix.input_shape[1], k = suffix.input_shape[2];
        ASSERT_EQ(cam.height, h);
        ASSERT_EQ(cam.width, w);
        std::vector<double> alpha(k, 0.0);
        for (std::size_t p = 0; p < h * w; ++p)
            for (std::size_t c = 0; c < k; ++c) alpha[c] += g[p * k + c] / static_cast<double>(h * w);
        for (std::size_t p = 0; p < h * w; ++p) {
            double acc = 0.0;
            for (std::size_t c = 0; c < k; ++c) acc += alpha[c] * a[p * k + c];
            EXPECT_NEAR(cam.values[p], std::max(acc, 0.0), 1e-7);
        }
    }
}

TEST(GradCam, NonNegativeAndSized) {
    Rng rng(27);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Network vgg = make_vgg_tiny({16, 16, 3}, 4, seed, {4, 4, 8});
        const Network res = make_resnet_tiny({16, 16, 3}, 4, seed, {4, 4, 8});
        for (const Network* net : {&vgg, &res}) {
            const AttributionMap cam = grad_cam(*net, random_tensor({16, 16, 3}, rng), seed % 4);
            EXPECT_EQ(cam.upsampled.size(), 256u);
            EXPECT_EQ(cam.image_height, 16u);
            for (double v : cam.values) EXPECT_GE(v, 0.0);
            for (double v : cam.upsampled) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
        }
    }
}

TEST(GradCam, DisconnectedLayerGivesZeroMap) {
    Network net = make_vgg_tiny({8, 8, 3}, 3, 2, {4, 4, 4});
    for (double& v : std::get<Dense>(net.layers.back().op).weight.values()) v = 0.0;
    Rng rng(28);
    const AttributionMap cam = grad_cam(net, random_tensor({8, 8, 3}, rng), 0);
    for (double v : cam.values) EXPECT_EQ(v, 0.0);
    for (double v : cam.upsampled) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, InvariantToLogitShift) {
    Rng rng(29);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Network net = make_resnet_tiny({8, 8, 3}, 3, seed, {4, 4, 4});
        const Tensor x = random_tensor({8, 8, 3}, rng);
        const AttributionMap before = grad_cam(net, x, 2);
        for (double& v : std::get<Dense>(net.layers.back().op).bias.values()) v += 7.5;
        const AttributionMap after = grad_cam(net, x, 2);
        for (std::size_t i = 0; i < before.values.size(); ++i) EXPECT_NEAR(after.values[i], before.values[i], 1e-10);
        for (std::size_t i = 0; i < before.upsampled.size(); ++i)
            EXPECT_NEAR(after.upsampled[i], before.upsampled[i], 1e-10);
    }
}

TEST(GradCam, SpatialMeanLogitGivesUniformMap) {
    // logit = mean of one feature map A = 2 x + 0.5 over a constant image
    Network net;
    net.input_shape = {4, 4, 1};
    net.layers.push_back(make_conv2d(1, 1, 1, 1, 0, 1));
    net.layers.push_back(make_flatten());
    net.layers.push_back(make_dense(16, 1));
    initialize(net, 1);
    auto& conv = std::get<Conv2D>(net.layers[0].op);
    conv.weight[0] = 2.0;
    conv.bias[0] = 0.5;
    auto& dense = std::get<Dense>(net.layers[2].op);
    dense.weight.fill(1.0 / 16.0);
    dense.bias.fill(0.0);
    EXPECT_EQ(default_cam_layer(net), 0u);
    const AttributionMap cam = grad_cam(net, Tensor({4, 4, 1}, 0.3), 0);
    for (double v : cam.values) EXPECT_NEAR(v, 1.1 / 16.0, 1e-15);
    for (double v : cam.upsampled) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(GradCam, DefaultLayerAndErrors) {
    const Network vgg = make_vgg_tiny({16, 16, 3}, 4, 1);
    const Network res = make_resnet_tiny({16, 16, 3}, 4, 1);
    EXPECT_EQ(vgg.layers[default_cam_layer(vgg)].kind(), LayerKind::ReLU);
    EXPECT_EQ(vgg.layers[default_cam_layer(vgg)].block_id, 3);
    EXPECT_EQ(res.layers[default_cam_layer(res)].block_id, 3);
    Rng rng(30);
    const Tensor x = random_tensor({16, 16, 3}, rng);
    EXPECT_THROW(grad_cam(vgg, x, 4), Error);
    EXPECT_THROW(grad_cam(vgg, x, 0, vgg.layers.size() - 1), Error);
    const Network mlp = make_mlp(4, 3, 1);
    EXPECT_THROW(default_cam_layer(mlp), Error);
}

TEST(Attribution, LeavesWeightsUnchanged) {
    const Network net = make_resnet_tiny({8, 8, 3}, 3, 4, {4, 4, 4});
    const auto before = parameter_snapshot(net);
    Rng rng(31);
    const Tensor x = random_tensor({8, 8, 3}, rng);
    AMConfig cfg;
    cfg.steps = 5;
    cfg.regularizer = Regularizer::Operator;
    am_ascend(net, cfg);
    cross_class_am(net, x, 1, cfg);
    grad_cam(net, x, 0);
    EXPECT_EQ(parameter_snapshot(net), before);
}

TEST(BilinearResize, IdentityAndConstant) {
    const std::vector<double> v{1, 2, 3, 4, 5, 6};
    EXPECT_EQ(bilinear_resize(v, 2, 3, 2, 3), v);
    for (double x : bilinear_resize(std::vector<double>(4, 3.0), 2, 2, 7, 5)) EXPECT_NEAR(x, 3.0, 1e-15);
    const auto up = bilinear_resize({0.0, 1.0}, 1, 2, 1, 4);
    EXPECT_EQ(up, (std::vector<double>{0.0, 0.25, 0.75, 1.0}));
}
