#include "senslab/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "senslab/error.hpp"

namespace senslab {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) fail(ErrorCode::FormatError, "number formatting failed");
    return std::string(buf, ptr);
}

std::string csv_line(std::span<const std::string> fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    out += '\n';
    return out;
}

std::string matrix_csv(std::span<const double> values, std::size_t rows, std::size_t cols) {
    if (values.size() != rows * cols) fail(ErrorCode::ShapeMismatch, "matrix size mismatch");
    std::string out;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) out += ',';
            out += format_number(values[r * cols + c]);
        }
        out += '\n';
    }
    return out;
}

std::string indices_csv(const SensitivityIndices& indices, std::span<const std::string> factor_names) {
    const std::size_t k = indices.s1.size();
    if (factor_names.size() != k) fail(ErrorCode::ShapeMismatch, "one name per factor is required");
    std::string out = "factor,s1,s1_lo,s1_hi,st,st_lo,st_hi\n";
    for (std::size_t i = 0; i < k; ++i) {
        const std::string fields[] = {factor_names[i],
                                      format_number(indices.s1[i]),
                                      format_number(indices.s1_ci[i].first),
                                      format_number(indices.s1_ci[i].second),
                                      format_number(indices.st[i]),
                                      format_number(indices.st_ci[i].first),
                                      format_number(indices.st_ci[i].second)};
        out += csv_line(fields);
    }
    return out;
}

std::string s2_csv(const SensitivityIndices& indices, std::span<const std::string> factor_names) {
    const std::size_t k = indices.s1.size();
    if (!indices.has_second_order()) fail(ErrorCode::InvalidArgument, "second-order indices were not computed");
    if (factor_names.size() != k) fail(ErrorCode::ShapeMismatch, "one name per factor is required");
    std::string out = "factor";
    for (const auto& n : factor_names) out += "," + n;
    out += '\n';
    for (std::size_t i = 0; i < k; ++i) {
        out += factor_names[i];
        for (std::size_t j = 0; j < k; ++j) {
            out += ',';
            if (i != j) out += format_number(indices.s2_at(i, j));
        }
        out += '\n';
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace senslab
