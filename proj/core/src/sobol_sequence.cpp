#include "senslab/sobol_sequence.hpp"

#include <bit>
#include <charconv>
#include <string>
#include <string_view>

#include "senslab/error.hpp"

// Generated at configure time from data/new-joe-kuo-6.21201.
extern const char kJoeKuoDirectionTable[];

namespace senslab {

namespace {

struct PrimitiveRecord {
    std::uint32_t degree = 0;
    std::uint32_t coefficients = 0;
    std::vector<std::uint32_t> initial;
};

std::uint64_t parse_number(std::string_view& line) {
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
    if (ec != std::errc()) fail(ErrorCode::FormatError, "malformed direction-number table");
    line.remove_prefix(static_cast<std::size_t>(ptr - line.data()));
    return value;
}

// Records for dimensions 2..21201; dimension 1 is the van der Corput sequence.
const std::vector<PrimitiveRecord>& primitive_table() {
    static const std::vector<PrimitiveRecord> table = [] {
        std::vector<PrimitiveRecord> records;
        std::string_view text(kJoeKuoDirectionTable);
        bool header = true;
        while (!text.empty()) {
            const std::size_t eol = text.find('\n');
            std::string_view line = text.substr(0, eol);
            text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
            if (header) {
                header = false;
                continue;
            }
            if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
            PrimitiveRecord rec;
            parse_number(line);  // dimension index
            rec.degree = static_cast<std::uint32_t>(parse_number(line));
            rec.coefficients = static_cast<std::uint32_t>(parse_number(line));
            for (std::uint32_t i = 0; i < rec.degree; ++i)
                rec.initial.push_back(static_cast<std::uint32_t>(parse_number(line)));
            records.push_back(std::move(rec));
        }
        return records;
    }();
    return table;
}

std::array<std::uint32_t, SobolSequence::kBits> direction_numbers(std::size_t dimension) {
    constexpr std::size_t bits = SobolSequence::kBits;
    std::array<std::uint32_t, bits> v{};
    if (dimension == 0) {
        for (std::size_t k = 0; k < bits; ++k) v[k] = std::uint32_t{1} << (bits - 1 - k);
        return v;
    }
    const PrimitiveRecord& rec = primitive_table()[dimension - 1];
    const std::size_t s = rec.degree;
    for (std::size_t k = 0; k < bits && k < s; ++k) v[k] = rec.initial[k] << (bits - 1 - k);
    for (std::size_t k = s; k < bits; ++k) {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for (std::size_t l = 1; l < s; ++l)
            if ((rec.coefficients >> (s - 1 - l)) & 1u) v[k] ^= v[k - l];
    }
    return v;
}

}  // namespace

std::size_t SobolSequence::max_dimension() { return primitive_table().size() + 1; }

SobolSequence::SobolSequence(std::size_t dimension) {
    if (dimension == 0 || dimension > max_dimension())
        fail(ErrorCode::DimensionUnsupported, "Sobol dimension " + std::to_string(dimension) +
                                                  " outside [1, " + std::to_string(max_dimension()) + "]");
    directions_.reserve(dimension);
    for (std::size_t d = 0; d < dimension; ++d) directions_.push_back(direction_numbers(d));
    state_.assign(dimension, 0);
}

void SobolSequence::seek(std::uint64_t index) {
    if (index >= (std::uint64_t{1} << kBits)) fail(ErrorCode::InvalidArgument, "Sobol index exceeds 2^32");
    const std::uint64_t gray = index ^ (index >> 1);
    for (std::size_t d = 0; d < directions_.size(); ++d) {
        std::uint32_t x = 0;
        for (std::size_t k = 0; k < kBits; ++k)
            if ((gray >> k) & 1u) x ^= directions_[d][k];
        state_[d] = x;
    }
    index_ = index;
}

void SobolSequence::next(std::span<double> out) {
    if (out.size() != directions_.size()) fail(ErrorCode::ShapeMismatch, "Sobol point buffer has the wrong size");
    if (index_ >= (std::uint64_t{1} << kBits) - 1) fail(ErrorCode::InvalidArgument, "Sobol sequence exhausted");
    for (std::size_t d = 0; d < state_.size(); ++d) out[d] = static_cast<double>(state_[d]) * 0x1.0p-32;
    const auto bit = static_cast<std::size_t>(std::countr_one(index_));
    for (std::size_t d = 0; d < state_.size(); ++d) state_[d] ^= directions_[d][bit];
    ++index_;
}

std::vector<double> sobol_sequence(std::size_t dim, std::size_t n, std::size_t skip) {
    SobolSequence seq(dim);
    if (n == 0) fail(ErrorCode::InvalidArgument, "requested zero Sobol points");
    seq.seek(skip);
    std::vector<double> points(n * dim);
    for (std::size_t i = 0; i < n; ++i) seq.next(std::span<double>(points.data() + i * dim, dim));
    return points;
}

}  // namespace senslab
