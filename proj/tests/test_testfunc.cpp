#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itokit/errors.hpp"
#include "itokit/rng.hpp"
#include "itokit/testfunc.hpp"

#include <cmath>
#include <vector>

using namespace itokit;
using namespace itokit::calculus;

TEST_CASE("first increment: direct evaluations") {
    const auto q2 = quadratic(2);
    const std::vector<double> v{1.0, 2.0}, a{3.0, 4.0}, zero{0.0, 0.0};
    CHECK(increment_first(q2, v, a) == doctest::Approx(47.0)); // 52 - 5
    CHECK(increment_first(q2, v, zero) == 0.0);

    // quartic at the origin with a unit kick: the counterexample's
    // remainder value at unit time
    const auto q4 = power_abs(4.0, 1);
    const std::vector<double> o{0.0}, one{1.0};
    CHECK(increment_first(q4, o, one) == doctest::Approx(1.0));
}

TEST_CASE("second increment: quadratic remainder is |a|^2 exactly") {
    const auto q2 = quadratic(3);
    rng::Substream s(123);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> v(3), a(3);
        for (auto& c : v)
            c = s.uniform(-5.0, 5.0);
        for (auto& c : a)
            c = s.uniform(-5.0, 5.0);
        const double expect = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        CHECK(increment_second(q2, v, a) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
    const std::vector<double> v{1.0, -2.0, 0.5}, zero{0.0, 0.0, 0.0};
    CHECK(increment_second(q2, v, zero) == 0.0);
}

TEST_CASE("second increment: quartic direct value") {
    const auto q4 = power_abs(4.0, 1);
    const std::vector<double> v{1.0}, a{1.0};
    // 2^4 - 1 - 4 = 11
    CHECK(increment_second(q4, v, a) == doctest::Approx(11.0));
}

TEST_CASE("increments decompose bitwise") {
    // first == linear + second with no rounding gap, by construction
    const auto q4 = power_abs(4.0, 2);
    rng::Substream s(77);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> v(2), a(2), grad(2);
        for (auto& c : v)
            c = s.uniform(-2.0, 2.0);
        for (auto& c : a)
            c = s.uniform(-2.0, 2.0);
        q4.gradient(v, grad);
        const double lin = a[0] * grad[0] + a[1] * grad[1];
        const double first = increment_first(q4, v, a);
        const double second = increment_second(q4, v, a);
        CHECK(first - lin - second == 0.0);
    }
}

TEST_CASE("power function guards the origin") {
    for (double p : {2.0, 2.5, 3.0, 4.0, 5.5}) {
        const auto f = power_abs(p, 2);
        const std::vector<double> zero{0.0, 0.0};
        std::vector<double> g(2), h(4);
        f.gradient(zero, g);
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
        f.hessian(zero, h);
        for (double v : h)
            CHECK(std::isfinite(v));
        if (p == 2.0)
            CHECK(h[0] == doctest::Approx(2.0));
    }
    CHECK_THROWS_AS(power_abs(1.5, 1), ConfigError);
}

TEST_CASE("derivative validation flags injected faults") {
    const auto q4 = power_abs(4.0, 2);
    std::vector<std::vector<double>> pts{{1.0, 0.5}, {-0.7, 1.3}, {2.0, -1.0}};
    const auto ok = validate_derivatives(q4, pts, 1e-4);
    CHECK(ok.pass(1e-6));
    CHECK(ok.max_hessian_asymmetry <= 1e-10);

    // exact quadratic: only roundoff left
    const auto q2 = quadratic(2);
    const auto exact = validate_derivatives(q2, pts, 1e-4);
    CHECK(exact.max_hessian_rel_error <= 1e-9);

    // a gradient off by 10 percent must fail
    TestFunction broken = q4;
    broken.gradient = [](std::span<const double> x, std::span<double> g) {
        const auto ref = power_abs(4.0, 2);
        ref.gradient(x, g);
        for (auto& c : g)
            c *= 1.1;
    };
    const auto bad = validate_derivatives(broken, pts, 1e-4);
    CHECK_FALSE(bad.pass(1e-4));

    CHECK_THROWS_AS(validate_derivatives(q4, pts, 0.0), ConfigError);
}

TEST_CASE("non-finite evaluations are reported, not thrown") {
    TestFunction f = quadratic(1);
    f.value = [](std::span<const double>) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<std::vector<double>> pts{{1.0}};
    const auto rep = validate_derivatives(f, pts, 1e-4);
    CHECK_FALSE(rep.notes.empty());
    CHECK_FALSE(rep.pass());
}

TEST_CASE("product identities hold on random triples") {
    rng::Substream s(991);
    double worst_first = 0.0, worst_second = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const int M = 1 + (i % 3);
        const auto f = power_abs(2.0 + (i % 5) * 0.5, M);
        const auto g = gaussian_bump(M, 1.2);
        const auto fg = product(f, g);
        std::vector<double> v(std::size_t(M)), a(std::size_t(M)), va;
        for (auto& c : v)
            c = s.uniform(-1.5, 1.5);
        for (auto& c : a)
            c = s.uniform(-1.5, 1.5);
        va = v;
        for (int c = 0; c < M; ++c)
            va[std::size_t(c)] += a[std::size_t(c)];

        const double i_fg = increment_first(fg, v, a);
        const double i_f = increment_first(f, v, a);
        const double i_g = increment_first(g, v, a);
        const double rhs = g.value(v) * i_f + f.value(va) * i_g;
        worst_first = std::max(worst_first,
                               std::fabs(i_fg - rhs) /
                                   (1.0 + std::fabs(i_fg) + std::fabs(rhs)));

        const double j_fg = increment_second(fg, v, a);
        const double j_f = increment_second(f, v, a);
        const double j_g = increment_second(g, v, a);
        const double rhs2 = g.value(v) * j_f + f.value(v) * j_g + i_f * i_g;
        worst_second =
            std::max(worst_second,
                     std::fabs(j_fg - rhs2) /
                         (1.0 + std::fabs(j_fg) + std::fabs(rhs2)));
    }
    CHECK(worst_first <= 1e-10);
    CHECK(worst_second <= 1e-10);
}
