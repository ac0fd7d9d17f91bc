#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "senslab/tensor.hpp"
#include "senslab/train.hpp"

namespace senslab {

/// Per-feature z-score parameters. Constant features keep std = 1 and are
/// only centered.
struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<bool> constant;

    bool empty() const noexcept { return mean.empty(); }
};

struct TabularDataset {
    std::vector<std::string> feature_names;
    std::string label_name;
    Tensor features;  // [rows, k]; empty when rows == 0
    std::vector<int> labels;
    Normalization normalization;  // empty until a split has been applied

    std::size_t rows() const noexcept { return labels.size(); }
    std::size_t feature_count() const noexcept { return feature_names.size(); }
    LabeledData labeled() const { return {features, labels}; }
};

/// Header row plus numeric cells. The label column must hold 0 or 1.
/// Throws ParseError (with 1-based line and column), MissingColumn or
/// EmptyDataset.
TabularDataset parse_tabular_csv(std::string_view text, std::string_view label_column,
                                 std::string_view source = "<memory>");
TabularDataset load_tabular_csv(const std::filesystem::path& path, std::string_view label_column);

/// Population mean and standard deviation of each column.
Normalization fit_normalization(const Tensor& features);
Tensor apply_normalization(const Tensor& features, const Normalization& norm);

struct Split {
    TabularDataset train;
    TabularDataset test;
    std::vector<std::size_t> train_rows;  // source row indices
    std::vector<std::size_t> test_rows;
};

/// Seeded shuffle, first train_n rows for training, the next test_n for
/// testing. Both parts are z-scored with the training statistics.
/// Throws InsufficientRows when train_n + test_n exceeds the row count.
Split split(const TabularDataset& data, std::size_t train_n, std::size_t test_n, std::uint64_t seed);

/// Columns named in `names`, in that order. Throws UnknownFeature.
TabularDataset feature_subset(const TabularDataset& data, std::span<const std::string> names);

struct PCAResult {
    std::vector<std::string> feature_names;
    std::size_t k = 0;
    std::vector<double> components;  // k x k, row i is component i
    std::vector<double> eigenvalues;
    std::vector<double> explained_variance_ratio;
    std::vector<double> loadings;  // k x k, component i scaled by sqrt(eigenvalue i)
    std::vector<double> mean;

    double cumulative_ratio(std::size_t count) const;
};

/// Eigendecomposition of the sample covariance of the columns, descending
/// eigenvalues, each component signed so its largest-magnitude entry is
/// positive. Throws DegenerateCovariance when rows <= k or the covariance is zero.
PCAResult pca(const Tensor& features, std::vector<std::string> feature_names = {});
PCAResult pca(const TabularDataset& data);

/// Scores of every row on the first `count` components.
Tensor pca_project(const PCAResult& result, const Tensor& features, std::size_t count);
/// Inverse of pca_project (exact when count == k).
Tensor pca_reconstruct(const PCAResult& result, const Tensor& scores);

}  // namespace senslab
