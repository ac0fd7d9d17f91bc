#include "senslab/sobol_analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "senslab/error.hpp"
#include "senslab/parallel.hpp"
#include "senslab/rng.hpp"
#include "senslab/sobol_sequence.hpp"

namespace senslab {

namespace {

// Views of the model responses for one base-sample ordering.
struct ResponseSet {
    std::size_t k = 0;
    std::size_t n = 0;
    bool second = false;
    std::vector<double> a, b;
    std::vector<double> ab;  // k x n
    std::vector<double> ba;  // k x n, second order only
};

ResponseSet gather(std::span<const double> outputs, const SobolPlan& plan, std::span<const std::size_t> base_rows,
                   double center) {
    ResponseSet r;
    r.k = plan.factors;
    r.n = base_rows.size();
    r.second = plan.order == SobolOrder::FirstSecondTotal;
    const std::size_t stride = plan.rows_per_base();
    r.a.resize(r.n);
    r.b.resize(r.n);
    r.ab.resize(r.k * r.n);
    if (r.second) r.ba.resize(r.k * r.n);
    for (std::size_t j = 0; j < r.n; ++j) {
        const double* block = outputs.data() + base_rows[j] * stride;
        r.a[j] = block[0] - center;
        for (std::size_t i = 0; i < r.k; ++i) r.ab[i * r.n + j] = block[1 + i] - center;
        if (r.second)
            for (std::size_t i = 0; i < r.k; ++i) r.ba[i * r.n + j] = block[1 + r.k + i] - center;
        r.b[j] = block[stride - 1] - center;
    }
    return r;
}

struct Estimates {
    std::vector<double> s1, st, s2;
    double variance = 0.0;
};

Estimates compute(const ResponseSet& r) {
    const double n = static_cast<double>(r.n);
    double mean = 0.0;
    for (std::size_t j = 0; j < r.n; ++j) mean += r.a[j] + r.b[j];
    mean /= 2.0 * n;
    double var = 0.0;
    for (std::size_t j = 0; j < r.n; ++j) {
        var += (r.a[j] - mean) * (r.a[j] - mean);
        var += (r.b[j] - mean) * (r.b[j] - mean);
    }
    var /= 2.0 * n;

    Estimates e;
    e.variance = var;
    e.s1.resize(r.k);
    e.st.resize(r.k);
    for (std::size_t i = 0; i < r.k; ++i) {
        const double* ab = r.ab.data() + i * r.n;
        double first = 0.0, total = 0.0;
        for (std::size_t j = 0; j < r.n; ++j) {
            first += r.b[j] * (ab[j] - r.a[j]);
            const double d = r.a[j] - ab[j];
            total += d * d;
        }
        e.s1[i] = first / n / var;
        e.st[i] = 0.5 * total / n / var;
    }
    if (r.second) {
        e.s2.assign(r.k * r.k, 0.0);
        for (std::size_t i = 0; i < r.k; ++i)
            for (std::size_t l = i + 1; l < r.k; ++l) {
                const double* ba = r.ba.data() + i * r.n;
                const double* ab = r.ab.data() + l * r.n;
                double closed = 0.0;
                for (std::size_t j = 0; j < r.n; ++j) closed += ba[j] * ab[j] - r.a[j] * r.b[j];
                e.s2[i * r.k + l] = closed / n / var - e.s1[i] - e.s1[l];
            }
    }
    return e;
}

double pooled_mean(std::span<const double> outputs, const SobolPlan& plan) {
    const std::size_t stride = plan.rows_per_base();
    double sum = 0.0;
    for (std::size_t j = 0; j < plan.n_base; ++j) sum += outputs[j * stride] + outputs[j * stride + stride - 1];
    return sum / (2.0 * static_cast<double>(plan.n_base));
}

void check_outputs(std::span<const double> outputs, const SobolPlan& plan) {
    plan.validate();
    if (outputs.size() != plan.total_rows())
        fail(ErrorCode::ShapeMismatch, "expected " + std::to_string(plan.total_rows()) + " model outputs, got " +
                                           std::to_string(outputs.size()));
    for (double v : outputs)
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "model output is not finite");
}

// Linear-interpolated quantile of sorted values.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval percentile_interval(std::vector<double> samples, double level, double point) {
    if (samples.empty()) return {point, point};
    std::sort(samples.begin(), samples.end());
    const double alpha = (1.0 - level) / 2.0;
    return {std::min(point, quantile(samples, alpha)), std::max(point, quantile(samples, 1.0 - alpha))};
}

}  // namespace

SobolPlan SobolPlan::unit(std::size_t factors, std::size_t n_base, SobolOrder order) {
    SobolPlan plan;
    plan.factors = factors;
    plan.bounds.assign(factors, FactorBounds{0.0, 1.0});
    plan.n_base = n_base;
    plan.order = order;
    return plan;
}

void SobolPlan::validate() const {
    if (factors == 0) fail(ErrorCode::InvalidArgument, "a Sobol plan needs at least one factor");
    if (bounds.size() != factors) fail(ErrorCode::InvalidArgument, "one (low, high) pair is required per factor");
    for (std::size_t i = 0; i < factors; ++i)
        if (!(bounds[i].low < bounds[i].high))
            fail(ErrorCode::InvalidArgument, "factor " + std::to_string(i) + " has low >= high");
    if (n_base < 8 || !std::has_single_bit(n_base))
        fail(ErrorCode::InvalidArgument, "base sample count must be a power of two >= 8, got " +
                                             std::to_string(n_base));
    if (!(confidence_level > 0.0 && confidence_level < 1.0))
        fail(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
}

std::size_t SobolPlan::rows_per_base() const noexcept {
    return order == SobolOrder::FirstSecondTotal ? 2 * factors + 2 : factors + 2;
}

double SensitivityIndices::s2_at(std::size_t i, std::size_t j) const {
    if (s2.empty()) fail(ErrorCode::InvalidArgument, "second-order indices were not computed");
    const std::size_t k = s1.size();
    if (i > j) std::swap(i, j);
    return s2[i * k + j];
}

SampleBlock saltelli_matrices(const SobolPlan& plan) {
    plan.validate();
    const std::size_t k = plan.factors;
    const std::size_t stride = plan.rows_per_base();
    const bool second = plan.order == SobolOrder::FirstSecondTotal;
    SampleBlock block;
    block.factors = k;
    block.rows = plan.total_rows();
    block.values.resize(block.rows * k);

    SobolSequence seq(2 * k);
    seq.seek(plan.skip);
    std::vector<double> point(2 * k);
    for (std::size_t j = 0; j < plan.n_base; ++j) {
        seq.next(point);
        for (std::size_t i = 0; i < 2 * k; ++i) {
            const FactorBounds& fb = plan.bounds[i % k];
            point[i] = fb.low + (fb.high - fb.low) * point[i];
        }
        const double* a = point.data();
        const double* b = point.data() + k;
        double* base = block.values.data() + j * stride * k;
        std::copy_n(a, k, base);
        for (std::size_t i = 0; i < k; ++i) {
            double* row = base + (1 + i) * k;
            std::copy_n(a, k, row);
            row[i] = b[i];
        }
        if (second)
            for (std::size_t i = 0; i < k; ++i) {
                double* row = base + (1 + k + i) * k;
                std::copy_n(b, k, row);
                row[i] = a[i];
            }
        std::copy_n(b, k, base + (stride - 1) * k);
    }
    return block;
}

SensitivityIndices estimate_indices(std::span<const double> outputs, const SobolPlan& plan) {
    check_outputs(outputs, plan);
    const double mean = pooled_mean(outputs, plan);
    std::vector<std::size_t> all(plan.n_base);
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    const ResponseSet responses = gather(outputs, plan, all, mean);
    const Estimates e = compute(responses);
    if (!(e.variance >= 1e-12 * mean * mean + 1e-30))
        fail(ErrorCode::ZeroVariance, "model output is constant over the sample (variance " +
                                          std::to_string(e.variance) + ")");

    SensitivityIndices out;
    out.s1 = e.s1;
    out.st = e.st;
    out.s2 = e.s2;
    out.total_variance = e.variance;
    out.n_evaluations = outputs.size();
    for (double v : out.s1) out.s1_ci.emplace_back(v, v);
    for (double v : out.st) out.st_ci.emplace_back(v, v);
    for (double v : out.s2) out.s2_ci.emplace_back(v, v);
    return out;
}

void bootstrap_ci(std::span<const double> outputs, const SobolPlan& plan, SensitivityIndices& indices) {
    check_outputs(outputs, plan);
    const std::size_t k = plan.factors;
    if (indices.s1.size() != k) fail(ErrorCode::ShapeMismatch, "indices do not match the plan");
    const std::size_t resamples = plan.bootstrap_resamples;
    const double mean = pooled_mean(outputs, plan);

    std::vector<std::vector<double>> s1(k), st(k), s2(indices.s2.size());
    Rng rng(plan.seed);
    std::vector<std::size_t> rows(plan.n_base);
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& r : rows) r = static_cast<std::size_t>(rng.below(plan.n_base));
        const Estimates e = compute(gather(outputs, plan, rows, mean));
        if (!(e.variance > 0.0)) continue;
        for (std::size_t i = 0; i < k; ++i) {
            s1[i].push_back(e.s1[i]);
            st[i].push_back(e.st[i]);
        }
        for (std::size_t i = 0; i < e.s2.size() && i < s2.size(); ++i) s2[i].push_back(e.s2[i]);
    }
    const double level = plan.confidence_level;
    for (std::size_t i = 0; i < k; ++i) {
        indices.s1_ci[i] = percentile_interval(std::move(s1[i]), level, indices.s1[i]);
        indices.st_ci[i] = percentile_interval(std::move(st[i]), level, indices.st[i]);
    }
    for (std::size_t i = 0; i < s2.size(); ++i) {
        const bool upper = (i % k) > (i / k);
        indices.s2_ci[i] = upper ? percentile_interval(std::move(s2[i]), level, indices.s2[i])
                                 : Interval{indices.s2[i], indices.s2[i]};
    }
}

SensitivityIndices analyze_outputs(std::span<const double> outputs, const SobolPlan& plan) {
    SensitivityIndices indices = estimate_indices(outputs, plan);
    bootstrap_ci(outputs, plan, indices);
    return indices;
}

SensitivityIndices analyze_function(const ScalarModel& model, const SobolPlan& plan, std::size_t threads) {
    const SampleBlock block = saltelli_matrices(plan);
    std::vector<double> outputs(block.rows);
    parallel_for(block.rows, threads, [&](std::size_t r) { outputs[r] = model(block.row(r)); });
    return analyze_outputs(outputs, plan);
}

}  // namespace senslab
