#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itokit/errors.hpp"
#include "itokit/quadrature.hpp"

#include <cmath>
#include <vector>

using namespace itokit;
using namespace itokit::quad;

TEST_CASE("panel rules integrate polynomials at their design order") {
    // gauss_k is exact through degree 2k-1 on [0,1]
    auto integrate = [](Rule r, auto&& f) {
        const auto nodes = rule_nodes(r);
        const auto weights = rule_weights(r);
        double acc = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q)
            acc += weights[q] * f(nodes[q]);
        return acc;
    };
    CHECK(integrate(Rule::gauss1, [](double x) { return x; }) ==
          doctest::Approx(0.5));
    CHECK(integrate(Rule::gauss2, [](double x) { return x * x * x; }) ==
          doctest::Approx(0.25));
    CHECK(integrate(Rule::gauss3, [](double x) {
              return x * x * x * x * x;
          }) == doctest::Approx(1.0 / 6.0));
    CHECK(integrate(Rule::gauss5, [](double x) {
              return std::pow(x, 9.0);
          }) == doctest::Approx(0.1));
    CHECK(integrate(Rule::left_rect, [](double) { return 3.0; }) ==
          doctest::Approx(3.0));
    CHECK(rule_from_name("gauss3") == Rule::gauss3);
    CHECK_THROWS_AS(rule_from_name("simpson"), ConfigError);
}

TEST_CASE("adaptive quadrature reaches singular endpoints") {
    // ln antiderivative: integral of 1/s over [e^-1, 1] is exactly 1
    const auto r1 = integrate_adaptive([](double s) { return 1.0 / s; },
                                       std::exp(-1.0), 1.0);
    CHECK(std::fabs(r1.value - 1.0) <= 1e-8);
    CHECK(r1.converged);

    // integral of s^-1/2 over [delta, 1] -> 2 via delta -> 0 extrapolation
    std::vector<double> deltas, values;
    for (int j = 2; j <= 6; ++j) {
        const double d = std::pow(10.0, -j);
        deltas.push_back(d);
        values.push_back(
            integrate_adaptive([](double s) { return 1.0 / std::sqrt(s); },
                               d, 1.0)
                .value);
    }
    const double limit = power_law_extrapolate(deltas, values);
    CHECK(std::fabs(limit - 2.0) <= 1e-6);

    // smooth integrand sanity
    const auto r2 = integrate_adaptive([](double s) { return std::sin(s); },
                                       0.0, 3.141592653589793);
    CHECK(r2.value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("extrapolation needs enough levels") {
    std::vector<double> d{0.1, 0.01};
    std::vector<double> v{1.0, 1.1};
    CHECK_THROWS_AS(power_law_extrapolate(d, v), ConfigError);
}
