#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "senslab/error.hpp"
#include "senslab/image_io.hpp"
#include "senslab/images.hpp"
#include "senslab/report.hpp"
#include "senslab/tabular.hpp"

using namespace senslab;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SENSLAB_DATA_DIR;

void expect_code(const std::function<void()>& fn, ErrorCode code) {
    try {
        fn();
        ADD_FAILURE() << "expected " << error_code_name(code);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("senslab_data_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const TabularDataset& pima() {
    static const TabularDataset data = load_tabular_csv(kData / "diabetes.csv", "Outcome");
    return data;
}

RawImage solid(std::size_t h, std::size_t w, std::size_t c, std::uint8_t v) {
    return RawImage{h, w, c, std::vector<std::uint8_t>(h * w * c, v)};
}

}  // namespace

TEST(TabularCsv, ExactReadback) {
    const TabularDataset d = parse_tabular_csv("a,b,y\n1,2.5,0\n-3,4e1,1\n0.125,7,1\n", "y");
    EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(d.label_name, "y");
    EXPECT_EQ(d.features.shape(), (Shape{3, 2}));
    const std::vector<double> expected{1, 2.5, -3, 40, 0.125, 7};
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(d.features[i], expected[i]);
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 1}));
    EXPECT_TRUE(d.normalization.empty());
}

TEST(TabularCsv, LabelColumnMayBeAnywhere) {
    const TabularDataset d = parse_tabular_csv("y,a\r\n1,2\r\n0,3\r\n", "y");
    EXPECT_EQ(d.feature_names, std::vector<std::string>{"a"});
    EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
    EXPECT_EQ(d.features[1], 3.0);
}

TEST(TabularCsv, Errors) {
    expect_code([] { parse_tabular_csv("a,y\n1,2\n", "y"); }, ErrorCode::ParseError);
    expect_code([] { parse_tabular_csv("a,y\n1,x\n", "y"); }, ErrorCode::ParseError);
    expect_code([] { parse_tabular_csv("a,y\n1,0\n2\n", "y"); }, ErrorCode::ParseError);
    expect_code([] { parse_tabular_csv("a,y\n1,0\n", "label"); }, ErrorCode::MissingColumn);
    expect_code([] { parse_tabular_csv("a,y\n", "y"); }, ErrorCode::EmptyDataset);
    expect_code([] { load_tabular_csv("/nonexistent/file.csv", "y"); }, ErrorCode::IoError);
    try {
        parse_tabular_csv("a,b,y\n1,2,0\n3,oops,1\n", "y");
        FAIL();
    } catch (const Error& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find(":3:"), std::string::npos) << what;
        EXPECT_NE(what.find("column 2"), std::string::npos) << what;
    }
}

TEST(TabularCsv, PimaShapeAndNames) {
    const TabularDataset& d = pima();
    EXPECT_EQ(d.rows(), 768u);
    EXPECT_EQ(d.feature_names,
              (std::vector<std::string>{"Pregnancies", "Glucose", "BloodPressure", "SkinThickness", "Insulin", "BMI",
                                        "DiabetesPedigreeFunction", "Age"}));
    EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 1), 268);
    // first row as printed in the public file
    const std::vector<double> first{6, 148, 72, 35, 0, 33.6, 0.627, 50};
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(d.features[j], first[j]);
}

TEST(Split, SizesAndDeterminism) {
    const TabularDataset& d = pima();
    const Split a = split(d, 500, 200, 7);
    const Split b = split(d, 500, 200, 7);
    const Split c = split(d, 500, 200, 8);
    EXPECT_EQ(a.train.rows(), 500u);
    EXPECT_EQ(a.test.rows(), 200u);
    EXPECT_EQ(a.train_rows, b.train_rows);
    EXPECT_EQ(a.test_rows, b.test_rows);
    EXPECT_NE(a.train_rows, c.train_rows);
    std::set<std::size_t> used(a.train_rows.begin(), a.train_rows.end());
    used.insert(a.test_rows.begin(), a.test_rows.end());
    EXPECT_EQ(used.size(), 700u);
    EXPECT_EQ(d.rows() - used.size(), 68u);
    for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(a.test.labels[i], d.labels[a.test_rows[i]]);

    const Split all = split(d, d.rows(), 0, 1);
    EXPECT_EQ(all.test.rows(), 0u);
    expect_code([&] { split(d, 700, 69, 1); }, ErrorCode::InsufficientRows);
}

TEST(Split, TrainStatisticsNormalizeBothParts) {
    const Split s = split(pima(), 500, 200, 3);
    const std::size_t k = 8;
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < 500; ++i) mean += s.train.features[i * k + j];
        mean /= 500.0;
        for (std::size_t i = 0; i < 500; ++i) sq += std::pow(s.train.features[i * k + j] - mean, 2);
        EXPECT_LT(std::abs(mean), 1e-10);
        EXPECT_NEAR(std::sqrt(sq / 500.0), 1.0, 1e-10);
    }
    const Normalization& n = s.train.normalization;
    ASSERT_EQ(n.mean.size(), k);
    EXPECT_EQ(s.test.normalization.mean, n.mean);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double raw = pima().features[s.test_rows[i] * k + j];
            EXPECT_NEAR(s.test.features[i * k + j], (raw - n.mean[j]) / n.std[j], 1e-12);
        }
}

TEST(Split, ConstantFeatureIsOnlyCentered) {
    const TabularDataset d = parse_tabular_csv("a,c,y\n1,5,0\n2,5,1\n3,5,0\n4,5,1\n", "y");
    const Split s = split(d, 4, 0, 1);
    EXPECT_TRUE(s.train.normalization.constant[1]);
    EXPECT_FALSE(s.train.normalization.constant[0]);
    EXPECT_EQ(s.train.normalization.std[1], 1.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.train.features[i * 2 + 1], 0.0);
}

TEST(FeatureSubset, ColumnsAndErrors) {
    const TabularDataset& d = pima();
    const TabularDataset same = feature_subset(d, d.feature_names);
    EXPECT_EQ(std::vector<double>(same.features.values().begin(), same.features.values().end()),
              std::vector<double>(d.features.values().begin(), d.features.values().end()));

    const std::vector<std::string> one{"Glucose"};
    const TabularDataset g = feature_subset(d, one);
    EXPECT_EQ(g.feature_count(), 1u);
    EXPECT_EQ(g.features[2], d.features[2 * 8 + 1]);
    EXPECT_EQ(g.labels, d.labels);

    const std::vector<std::string> weak{"Pregnancies", "BloodPressure", "SkinThickness", "DiabetesPedigreeFunction"};
    EXPECT_EQ(feature_subset(d, weak).feature_count(), 4u);
    const std::vector<std::string> strong{"Glucose", "BMI", "Age", "Insulin"};
    const TabularDataset s = feature_subset(d, strong);
    EXPECT_EQ(s.feature_names, strong);
    EXPECT_EQ(s.features[3], d.features[4]);

    const std::vector<std::string> bad{"Glucose", "Height"};
    expect_code([&] { feature_subset(d, bad); }, ErrorCode::UnknownFeature);
}

TEST(Pca, LineDataIsRankOne) {
    Tensor x({50, 2});
    for (std::size_t i = 0; i < 50; ++i) {
        x[2 * i] = static_cast<double>(i);
        x[2 * i + 1] = 3.0 * static_cast<double>(i) - 2.0;
    }
    const PCAResult r = pca(x);
    EXPECT_NEAR(r.explained_variance_ratio[0], 1.0, 1e-12);
    EXPECT_NEAR(r.explained_variance_ratio[1], 0.0, 1e-12);
    EXPECT_NEAR(r.components[0], 1.0 / std::sqrt(10.0), 1e-12);
    EXPECT_NEAR(r.components[1], 3.0 / std::sqrt(10.0), 1e-12);
}

TEST(Pca, IsotropicSampleSplitsEvenly) {
    Rng rng(12);
    Tensor x({10000, 2});
    for (double& v : x.values()) v = rng.normal();
    const PCAResult r = pca(x);
    EXPECT_NEAR(r.explained_variance_ratio[0], 0.5, 0.05);
    EXPECT_NEAR(r.explained_variance_ratio[1], 0.5, 0.05);
}

TEST(Pca, InvariantsOnRandomData) {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + rng.below(6), n = k + 2 + rng.below(40);
        Tensor x({n, k});
        for (double& v : x.values()) v = rng.normal() * (1.0 + rng.uniform());
        const PCAResult r = pca(x);
        const double total = std::accumulate(r.explained_variance_ratio.begin(), r.explained_variance_ratio.end(), 0.0);
        EXPECT_NEAR(total, 1.0, 1e-10);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_GE(r.explained_variance_ratio[i], 0.0);
            if (i > 0) {
                EXPECT_LE(r.eigenvalues[i], r.eigenvalues[i - 1]);
            }
            std::size_t big = 0;
            for (std::size_t j = 0; j < k; ++j) {
                double dot = 0.0;
                for (std::size_t m = 0; m < k; ++m) dot += r.components[i * k + m] * r.components[j * k + m];
                EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-10);
                if (std::abs(r.components[i * k + j]) > std::abs(r.components[i * k + big])) big = j;
            }
            EXPECT_GT(r.components[i * k + big], 0.0);
            for (std::size_t j = 0; j < k; ++j)
                EXPECT_NEAR(r.loadings[i * k + j], r.components[i * k + j] * std::sqrt(r.eigenvalues[i]), 1e-12);
        }
        const Tensor back = pca_reconstruct(r, pca_project(r, x, k));
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-8);
        EXPECT_EQ(pca_project(r, x, 1).shape(), (Shape{n, 1}));
    }
}

TEST(Pca, EigenvaluesMatchSampleCovariance) {
    // The trace of the sample covariance equals the eigenvalue sum.
    Rng rng(14);
    Tensor x({30, 3});
    for (double& v : x.values()) v = rng.uniform(-2.0, 2.0);
    const PCAResult r = pca(x);
    double trace = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 30; ++i) mean += x[i * 3 + j] / 30.0;
        for (std::size_t i = 0; i < 30; ++i) trace += std::pow(x[i * 3 + j] - mean, 2) / 29.0;
    }
    EXPECT_NEAR(std::accumulate(r.eigenvalues.begin(), r.eigenvalues.end(), 0.0), trace, 1e-10);
}

TEST(Pca, DiabetesTopFourAndErrors) {
    const TabularDataset& d = pima();
    const Tensor z = apply_normalization(d.features, fit_normalization(d.features));
    const PCAResult r = pca(z, d.feature_names);
    EXPECT_GT(r.cumulative_ratio(4), 0.70);
    EXPECT_NEAR(r.cumulative_ratio(8), 1.0, 1e-10);
    expect_code([] { pca(Tensor({2, 3}, 1.0)); }, ErrorCode::DegenerateCovariance);
    expect_code([] { pca(Tensor({10, 3}, 1.0)); }, ErrorCode::DegenerateCovariance);
}

TEST(Pnm, RoundTripAndErrors) {
    RawImage rgb{2, 3, 3, {}};
    for (std::size_t i = 0; i < 18; ++i) rgb.pixels.push_back(static_cast<std::uint8_t>(i * 14));
    const RawImage back = parse_pnm(encode_pnm(rgb));
    EXPECT_EQ(back.height, 2u);
    EXPECT_EQ(back.width, 3u);
    EXPECT_EQ(back.channels, 3u);
    EXPECT_EQ(back.pixels, rgb.pixels);
    EXPECT_EQ(encode_pnm(solid(1, 1, 1, 9)).substr(0, 2), "P5");

    const RawImage commented = parse_pnm(std::string("P5\n# made by hand\n2 1\n255\n") + '\x01' + '\x02');
    EXPECT_EQ(commented.pixels, (std::vector<std::uint8_t>{1, 2}));
    expect_code([] { parse_pnm("P3\n1 1\n255\n0 0 0\n"); }, ErrorCode::FormatError);
    expect_code([] { parse_pnm(std::string("P5\n2 2\n255\n") + "ab"); }, ErrorCode::FormatError);
    expect_code([] { parse_pnm(std::string("P5\n1 1\n65535\n") + "ab"); }, ErrorCode::FormatError);
}

TEST(Images, NormalizationOf128) {
    RawImageSet set;
    set.images.push_back(solid(2, 2, 3, 128));
    set.labels = {0};
    const ImageDataset d = normalize_images(set);
    EXPECT_EQ(d.image_shape(), (Shape{2, 2, 3}));
    for (double v : d.images.values()) EXPECT_NEAR(v, 0.00392, 1e-5);
    EXPECT_DOUBLE_EQ(d.images[0], (128.0 / 255.0 - 0.5) / 0.5);
}

TEST(Images, InconsistentDimsAndLabels) {
    RawImageSet set;
    set.images = {solid(2, 2, 3, 0), solid(2, 3, 3, 0)};
    set.labels = {0, 0};
    expect_code([&] { normalize_images(set); }, ErrorCode::InconsistentDims);
    set.images[1] = solid(2, 2, 1, 0);
    expect_code([&] { normalize_images(set); }, ErrorCode::InconsistentDims);
    set.images[1] = solid(2, 2, 3, 0);
    set.class_names = {"a"};
    set.labels = {0, 1};
    expect_code([&] { normalize_images(set); }, ErrorCode::InvalidArgument);
}

TEST(Images, PackedRoundTripIsLossless) {
    const RawImageSet set = make_toy_images(3, 8, 5);
    const RawImageSet back = unpack_images(pack_images(set));
    EXPECT_EQ(back.labels, set.labels);
    EXPECT_EQ(back.class_names, set.class_names);
    ASSERT_EQ(back.images.size(), set.images.size());
    for (std::size_t i = 0; i < set.images.size(); ++i) EXPECT_EQ(back.images[i].pixels, set.images[i].pixels);
    EXPECT_EQ(pack_images(set).substr(0, 4), "SLIM");
    expect_code([] { unpack_images("SLIM\x01"); }, ErrorCode::FormatError);
    expect_code([] { unpack_images("NOPE0000000000000000000000"); }, ErrorCode::FormatError);
}

TEST(Images, ManifestDirectoryAndPackedFile) {
    const fs::path dir = scratch_dir("manifest");
    const RawImageSet set = make_toy_images(2, 6, 9);
    write_image_set(dir / "set", set);
    const ImageDataset from_dir = load_images(dir / "set");
    const ImageDataset from_manifest = load_images(dir / "set" / "manifest.csv");
    write_text_file(dir / "set.slim", pack_images(set));
    const ImageDataset from_pack = load_images(dir / "set.slim");
    EXPECT_EQ(from_dir.labels, set.labels);
    for (const ImageDataset* d : {&from_manifest, &from_pack}) {
        EXPECT_EQ(d->labels, from_dir.labels);
        EXPECT_EQ(std::vector<double>(d->images.values().begin(), d->images.values().end()),
                  std::vector<double>(from_dir.images.values().begin(), from_dir.images.values().end()));
    }
    // mixed sizes in one manifest
    write_pnm(dir / "a.ppm", solid(2, 2, 3, 1));
    write_pnm(dir / "b.ppm", solid(3, 2, 3, 1));
    write_text_file(dir / "mixed.csv", "path,label\na.ppm,0\nb.ppm,1\n");
    expect_code([&] { load_images(dir / "mixed.csv"); }, ErrorCode::InconsistentDims);
    fs::remove_all(dir);
}

TEST(Images, ToySetIsDeterministic) {
    const RawImageSet a = make_toy_images(4, 16, 3);
    const RawImageSet b = make_toy_images(4, 16, 3);
    const RawImageSet c = make_toy_images(4, 16, 4);
    EXPECT_EQ(a.images.size(), 16u);
    EXPECT_EQ(a.class_names.size(), 4u);
    for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_EQ(a.images[i].pixels, b.images[i].pixels);
    EXPECT_NE(a.images[0].pixels, c.images[0].pixels);
}

TEST(Heatmaps, QuantizeAndPalette) {
    const std::vector<double> v{-1.0, 0.0, 1.0};
    EXPECT_EQ(quantize(v), (std::vector<std::uint8_t>{0, 128, 255}));
    EXPECT_EQ(quantize(std::vector<double>(4, 2.0)), std::vector<std::uint8_t>(4, 0));
    const auto& p = viridis_palette();
    EXPECT_EQ(p[0], (Rgb{68, 1, 84}));
    EXPECT_EQ(p[255], (Rgb{253, 231, 37}));
    const RawImage c = heatmap_color(v, 1, 3);
    EXPECT_EQ(c.channels, 3u);
    EXPECT_EQ(c.pixels[6], 253);
    EXPECT_EQ(heatmap_gray(v, 3, 1).pixels, (std::vector<std::uint8_t>{0, 128, 255}));
}

TEST(Heatmaps, DenormalizeAndOverlay) {
    const RawImage raw = to_raw_image(Tensor({1, 2, 1}, {-1.0, 1.0}));
    EXPECT_EQ(raw.pixels, (std::vector<std::uint8_t>{0, 255}));
    const RawImage base = solid(1, 2, 1, 100);
    const std::vector<double> map{0.0, 1.0};
    const RawImage o = overlay(base, map, 0.5);
    EXPECT_EQ(o.channels, 3u);
    // alpha 0.5 of viridis[0] = (68, 1, 84) over gray 100
    EXPECT_EQ(o.pixels[0], 84);
    EXPECT_EQ(o.pixels[1], 51);  // 50.5 rounds half away from zero
    EXPECT_EQ(o.pixels[2], 92);
}

TEST(Report, NumbersAndTables) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.0, 0.0})
        EXPECT_EQ(std::stod(format_number(v)), v) << format_number(v);
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(std::nan("")), "nan");
    const std::vector<std::string> fields{"a", "b"};
    EXPECT_EQ(csv_line(fields), "a,b\n");
    const std::vector<double> m{1, 2, 3, 4};
    EXPECT_EQ(matrix_csv(m, 2, 2), "1,2\n3,4\n");
    SensitivityIndices idx;
    idx.s1 = {0.25};
    idx.st = {0.5};
    idx.s1_ci = {{0.2, 0.3}};
    idx.st_ci = {{0.4, 0.6}};
    const std::vector<std::string> names{"x1"};
    EXPECT_EQ(indices_csv(idx, names), "factor,s1,s1_lo,s1_hi,st,st_lo,st_hi\nx1,0.25,0.2,0.3,0.5,0.4,0.6\n");
}
