#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "senslab/sobol_analysis.hpp"

namespace senslab {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Joins fields with commas and appends a newline.
std::string csv_line(std::span<const std::string> fields);

/// rows x cols matrix, one CSV line per row, no header.
std::string matrix_csv(std::span<const double> values, std::size_t rows, std::size_t cols);

/// factor,s1,s1_lo,s1_hi,st,st_lo,st_hi
std::string indices_csv(const SensitivityIndices& indices, std::span<const std::string> factor_names);

/// Header row of factor names, then one row per factor; lower triangle mirrors
/// the upper, diagonal empty.
std::string s2_csv(const SensitivityIndices& indices, std::span<const std::string> factor_names);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace senslab
