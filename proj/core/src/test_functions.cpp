#include "senslab/test_functions.hpp"

#include <cmath>
#include <numbers>

#include "senslab/error.hpp"

namespace senslab {

double ishigami(std::span<const double> x, double a, double b) {
    if (x.size() != 3) fail(ErrorCode::ShapeMismatch, "ishigami takes exactly 3 factors");
    const double s2 = std::sin(x[1]);
    const double x3 = x[2] * x[2];
    return std::sin(x[0]) * (1.0 + b * x3 * x3) + a * s2 * s2;
}

double sobol_g(std::span<const double> x, std::span<const double> a) {
    if (x.size() != a.size()) fail(ErrorCode::ShapeMismatch, "sobol-g needs one coefficient per factor");
    double y = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) y *= (std::abs(4.0 * x[i] - 2.0) + a[i]) / (1.0 + a[i]);
    return y;
}

double linear(std::span<const double> x, std::span<const double> coefficients) {
    if (x.size() != coefficients.size()) fail(ErrorCode::ShapeMismatch, "linear needs one coefficient per factor");
    double y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) y += coefficients[i] * x[i];
    return y;
}

TestFunction make_test_function(std::string_view name, std::size_t factors) {
    TestFunction fn;
    fn.name = std::string(name);
    if (name == "ishigami") {
        if (factors != 0 && factors != 3) fail(ErrorCode::InvalidArgument, "ishigami has exactly 3 factors");
        fn.model = [](std::span<const double> x) { return ishigami(x); };
        fn.bounds.assign(3, FactorBounds{-std::numbers::pi, std::numbers::pi});
        return fn;
    }
    if (name == "sobol-g") {
        const std::size_t k = factors == 0 ? 8 : factors;
        std::vector<double> a{0.0, 1.0, 4.5, 9.0, 99.0, 99.0, 99.0, 99.0};
        a.resize(k, 99.0);
        fn.model = [a](std::span<const double> x) { return sobol_g(x, a); };
        fn.bounds.assign(k, FactorBounds{0.0, 1.0});
        return fn;
    }
    if (name == "linear") {
        const std::size_t k = factors == 0 ? 2 : factors;
        std::vector<double> c(k, 1.0);
        fn.model = [c](std::span<const double> x) { return linear(x, c); };
        fn.bounds.assign(k, FactorBounds{0.0, 1.0});
        return fn;
    }
    fail(ErrorCode::InvalidArgument, "unknown test function '" + std::string(name) + "'");
}

std::vector<std::string> test_function_names() { return {"ishigami", "sobol-g", "linear"}; }

}  // namespace senslab
