#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace senslab {

enum class SobolOrder { FirstTotal, FirstSecondTotal };

struct FactorBounds {
    double low = 0.0;
    double high = 1.0;
};

struct SobolPlan {
    std::size_t factors = 1;
    std::vector<FactorBounds> bounds;
    std::size_t n_base = 1024;
    SobolOrder order = SobolOrder::FirstTotal;
    std::size_t bootstrap_resamples = 200;
    double confidence_level = 0.95;
    std::uint64_t seed = 0;
    std::size_t skip = 1;

    /// Unit bounds for every factor.
    static SobolPlan unit(std::size_t factors, std::size_t n_base, SobolOrder order = SobolOrder::FirstTotal);

    /// Throws InvalidArgument unless factors >= 1, low < high per factor,
    /// n_base is a power of two >= 8 and the level lies in (0, 1).
    void validate() const;

    /// Model evaluations per base sample: k + 2, or 2k + 2 with second order.
    std::size_t rows_per_base() const noexcept;
    std::size_t total_rows() const noexcept { return n_base * rows_per_base(); }
};

/// Saltelli design, grouped by base sample j:
///   A_j, AB_1j .. AB_kj, [BA_1j .. BA_kj], B_j
/// where AB_i is A with column i taken from B and BA_i is B with column i from A.
struct SampleBlock {
    std::size_t factors = 0;
    std::size_t rows = 0;
    std::vector<double> values;  // rows x factors, row-major, scaled to bounds

    std::span<const double> row(std::size_t r) const { return {values.data() + r * factors, factors}; }
};

SampleBlock saltelli_matrices(const SobolPlan& plan);

using Interval = std::pair<double, double>;

struct SensitivityIndices {
    std::vector<double> s1;
    std::vector<Interval> s1_ci;
    std::vector<double> st;
    std::vector<Interval> st_ci;
    /// k x k row-major, upper triangle populated, empty without second order.
    std::vector<double> s2;
    std::vector<Interval> s2_ci;
    double total_variance = 0.0;
    std::size_t n_evaluations = 0;

    bool has_second_order() const noexcept { return !s2.empty(); }
    double s2_at(std::size_t i, std::size_t j) const;
};

/// Point estimates: Saltelli (2010) first order, Jansen total order, second
/// order from the BA_i / AB_j cross terms. Outputs are centered on the pooled
/// A and B mean first, which makes every index invariant under f -> a f + b.
/// Confidence intervals are set to zero width. Throws ZeroVariance when the
/// pooled variance is below 1e-12 * mean^2 + 1e-30.
SensitivityIndices estimate_indices(std::span<const double> outputs, const SobolPlan& plan);

/// Percentile bootstrap over the base-sample index: each resample draws N
/// base rows with replacement and keeps their A/B/AB/BA rows together. Each
/// interval is widened if needed so it contains its point estimate. With zero
/// resamples the intervals collapse onto the point estimates.
void bootstrap_ci(std::span<const double> outputs, const SobolPlan& plan, SensitivityIndices& indices);

/// estimate_indices followed by bootstrap_ci.
SensitivityIndices analyze_outputs(std::span<const double> outputs, const SobolPlan& plan);

using ScalarModel = std::function<double(std::span<const double>)>;

/// Evaluates `model` on every row of the Saltelli block and analyzes the result.
SensitivityIndices analyze_function(const ScalarModel& model, const SobolPlan& plan, std::size_t threads = 1);

inline double interval_width(const Interval& ci) noexcept { return ci.second - ci.first; }

}  // namespace senslab
