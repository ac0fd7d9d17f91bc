#include "senslab/tabular.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "senslab/error.hpp"
#include "senslab/rng.hpp"

namespace senslab {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_cell(std::string_view cell, std::string_view source, std::size_t line, std::size_t column) {
    double v = 0.0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(line) + ": column " +
                                        std::to_string(column) + ": '" + std::string(cell) + "' is not a number");
    return v;
}

TabularDataset select_rows(const TabularDataset& data, std::span<const std::size_t> rows) {
    TabularDataset out;
    out.feature_names = data.feature_names;
    out.label_name = data.label_name;
    out.normalization = data.normalization;
    if (rows.empty()) return out;
    out.features = gather_rows(data.features, rows);
    for (std::size_t r : rows) out.labels.push_back(data.labels[r]);
    return out;
}

}  // namespace

TabularDataset parse_tabular_csv(std::string_view text, std::string_view label_column, std::string_view source) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t eol = text.find('\n', start);
        if (eol == std::string_view::npos) eol = text.size();
        lines.push_back(text.substr(start, eol - start));
        start = eol + 1;
    }
    std::size_t header_line = 0;
    while (header_line < lines.size() && trim(lines[header_line]).empty()) ++header_line;
    if (header_line == lines.size()) fail(ErrorCode::ParseError, std::string(source) + ": missing header row");

    const auto header = split_fields(lines[header_line]);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        fail(ErrorCode::MissingColumn, std::string(source) + ": no column named '" + std::string(label_column) + "'");
    const std::size_t label_index = static_cast<std::size_t>(label_it - header.begin());

    TabularDataset data;
    data.label_name = std::string(label_column);
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_index) data.feature_names.emplace_back(header[c]);
    const std::size_t k = data.feature_names.size();
    if (k == 0) fail(ErrorCode::MissingColumn, std::string(source) + ": no feature columns");

    std::vector<double> values;
    for (std::size_t l = header_line + 1; l < lines.size(); ++l) {
        if (trim(lines[l]).empty()) continue;
        const auto fields = split_fields(lines[l]);
        if (fields.size() != header.size())
            fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(l + 1) + ": expected " +
                                            std::to_string(header.size()) + " fields, found " +
                                            std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const double v = parse_cell(fields[c], source, l + 1, c + 1);
            if (c == label_index) {
                if (v != 0.0 && v != 1.0)
                    fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(l + 1) + ": column " +
                                                    std::to_string(c + 1) + ": label must be 0 or 1");
                data.labels.push_back(static_cast<int>(v));
            } else {
                values.push_back(v);
            }
        }
    }
    if (data.labels.empty()) fail(ErrorCode::EmptyDataset, std::string(source) + ": no data rows");
    data.features = Tensor({data.labels.size(), k}, std::move(values));
    return data;
}

TabularDataset load_tabular_csv(const std::filesystem::path& path, std::string_view label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_tabular_csv(buf.str(), label_column, path.string());
}

Normalization fit_normalization(const Tensor& features) {
    if (features.rank() != 2) fail(ErrorCode::ShapeMismatch, "expected a [rows, features] matrix");
    const std::size_t n = features.dim(0), k = features.dim(1);
    Normalization norm;
    norm.mean.assign(k, 0.0);
    norm.std.assign(k, 1.0);
    norm.constant.assign(k, false);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) norm.mean[c] += features[r * k + c];
    for (double& m : norm.mean) m /= static_cast<double>(n);
    for (std::size_t c = 0; c < k; ++c) {
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = features[r * k + c] - norm.mean[c];
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (sd > 1e-12 * std::max(1.0, std::abs(norm.mean[c])))
            norm.std[c] = sd;
        else
            norm.constant[c] = true;
    }
    return norm;
}

Tensor apply_normalization(const Tensor& features, const Normalization& norm) {
    if (features.empty()) return features;
    const std::size_t k = features.dim(1);
    if (norm.mean.size() != k) fail(ErrorCode::ShapeMismatch, "normalization does not match the feature count");
    Tensor out = features;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - norm.mean[i % k]) / norm.std[i % k];
    return out;
}

Split split(const TabularDataset& data, std::size_t train_n, std::size_t test_n, std::uint64_t seed) {
    if (train_n + test_n > data.rows())
        fail(ErrorCode::InsufficientRows, "requested " + std::to_string(train_n) + " + " + std::to_string(test_n) +
                                              " rows but the dataset has " + std::to_string(data.rows()));
    if (train_n == 0) fail(ErrorCode::InsufficientRows, "the training split needs at least one row");
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    Split s;
    s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_n));
    s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(train_n),
                       order.begin() + static_cast<std::ptrdiff_t>(train_n + test_n));
    s.train = select_rows(data, s.train_rows);
    s.test = select_rows(data, s.test_rows);
    const Normalization norm = fit_normalization(s.train.features);
    s.train.features = apply_normalization(s.train.features, norm);
    s.test.features = apply_normalization(s.test.features, norm);
    s.train.normalization = norm;
    s.test.normalization = norm;
    return s;
}

TabularDataset feature_subset(const TabularDataset& data, std::span<const std::string> names) {
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), name);
        if (it == data.feature_names.end()) fail(ErrorCode::UnknownFeature, "unknown feature '" + name + "'");
        cols.push_back(static_cast<std::size_t>(it - data.feature_names.begin()));
    }
    if (cols.empty()) fail(ErrorCode::InvalidArgument, "feature subset is empty");
    TabularDataset out;
    out.label_name = data.label_name;
    out.labels = data.labels;
    for (std::size_t c : cols) out.feature_names.push_back(data.feature_names[c]);
    const std::size_t k = data.feature_count();
    if (!data.normalization.empty())
        for (std::size_t c : cols) {
            out.normalization.mean.push_back(data.normalization.mean[c]);
            out.normalization.std.push_back(data.normalization.std[c]);
            out.normalization.constant.push_back(data.normalization.constant[c]);
        }
    if (data.rows() == 0) return out;
    std::vector<double> values;
    values.reserve(data.rows() * cols.size());
    for (std::size_t r = 0; r < data.rows(); ++r)
        for (std::size_t c : cols) values.push_back(data.features[r * k + c]);
    out.features = Tensor({data.rows(), cols.size()}, std::move(values));
    return out;
}

double PCAResult::cumulative_ratio(std::size_t count) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < std::min(count, explained_variance_ratio.size()); ++i) sum += explained_variance_ratio[i];
    return sum;
}

PCAResult pca(const Tensor& features, std::vector<std::string> feature_names) {
    if (features.rank() != 2) fail(ErrorCode::ShapeMismatch, "expected a [rows, features] matrix");
    const std::size_t n = features.dim(0), k = features.dim(1);
    if (n <= k)
        fail(ErrorCode::DegenerateCovariance, "PCA needs more rows (" + std::to_string(n) + ") than features (" +
                                                  std::to_string(k) + ")");
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const Matrix> x(features.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const double trace = cov.trace();
    if (!(trace > 1e-300)) fail(ErrorCode::DegenerateCovariance, "covariance matrix is zero");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) fail(ErrorCode::DegenerateCovariance, "eigendecomposition failed");

    PCAResult r;
    r.k = k;
    r.feature_names = feature_names.empty() ? std::vector<std::string>(k) : std::move(feature_names);
    r.mean.assign(mean.data(), mean.data() + k);
    r.components.resize(k * k);
    r.loadings.resize(k * k);
    // Eigen returns ascending eigenvalues.
    for (std::size_t i = 0; i < k; ++i) {
        const Eigen::Index src = static_cast<Eigen::Index>(k - 1 - i);
        const double lambda = std::max(0.0, solver.eigenvalues()(src));
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index peak = 0;
        v.cwiseAbs().maxCoeff(&peak);
        if (v(peak) < 0.0) v = -v;
        r.eigenvalues.push_back(lambda);
        for (std::size_t j = 0; j < k; ++j) {
            r.components[i * k + j] = v(static_cast<Eigen::Index>(j));
            r.loadings[i * k + j] = v(static_cast<Eigen::Index>(j)) * std::sqrt(lambda);
        }
    }
    const double total = std::accumulate(r.eigenvalues.begin(), r.eigenvalues.end(), 0.0);
    for (double l : r.eigenvalues) r.explained_variance_ratio.push_back(l / total);
    return r;
}

PCAResult pca(const TabularDataset& data) { return pca(data.features, data.feature_names); }

Tensor pca_project(const PCAResult& result, const Tensor& features, std::size_t count) {
    const std::size_t k = result.k;
    if (features.rank() != 2 || features.dim(1) != k) fail(ErrorCode::ShapeMismatch, "feature count mismatch");
    if (count == 0 || count > k) fail(ErrorCode::InvalidArgument, "component count out of range");
    const std::size_t n = features.dim(0);
    Tensor scores({n, count});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < count; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += (features[r * k + j] - result.mean[j]) * result.components[c * k + j];
            scores[r * count + c] = acc;
        }
    return scores;
}

Tensor pca_reconstruct(const PCAResult& result, const Tensor& scores) {
    const std::size_t k = result.k;
    if (scores.rank() != 2 || scores.dim(1) > k) fail(ErrorCode::ShapeMismatch, "score matrix does not fit the PCA");
    const std::size_t n = scores.dim(0), count = scores.dim(1);
    Tensor out({n, k});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < k; ++j) {
            double acc = result.mean[j];
            for (std::size_t c = 0; c < count; ++c) acc += scores[r * count + c] * result.components[c * k + j];
            out[r * k + j] = acc;
        }
    return out;
}

}  // namespace senslab
