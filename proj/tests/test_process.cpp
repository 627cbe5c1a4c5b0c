#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itokit/errors.hpp"
#include "itokit/process.hpp"

#include <cmath>
#include <vector>

using namespace itokit;
using namespace itokit::process;

namespace {

DriverSet make_drivers(double T, std::size_t n_steps,
                       std::vector<drivers::MarkMeasure> measures,
                       std::size_t R, std::uint64_t seed) {
    DriverSet d;
    d.measures = std::move(measures);
    d.jumps = drivers::sample_jumps(d.measures, T, seed);
    const auto merged =
        drivers::TimeGrid::uniform(T, n_steps).merged_with(d.jumps.times());
    d.wiener = drivers::sample_wiener(merged, std::max<std::size_t>(1, R),
                                      seed);
    return d;
}

Coefficients unit_compensated_jump() {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> out) { out[0] = 1.0; };
    c.jump.push_back(jc);
    return c;
}

} // namespace

TEST_CASE("zero coefficients freeze the path") {
    Coefficients c;
    c.state_dim = 2;
    c.wiener_dim = 0;
    auto d = make_drivers(1.0, 16, {drivers::MarkMeasure::dirac(1.0)}, 0, 3);
    c.jump.resize(1); // present but null callables = identically zero
    const std::vector<double> x0{0.4, -0.7};
    const auto path = simulate(x0, c, d);
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        CHECK(path.state(i)[0] == 0.4);
        CHECK(path.state(i)[1] == -0.7);
    }
}

TEST_CASE("uncompensated unit jumps reproduce the Poisson mean") {
    // X_t = x0 + N_t; E X_1 - x0 = 1 within MC tolerance
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.direct = [](double, double, std::span<const double>,
                   std::span<double> out) { out[0] = 1.0; };
    c.jump.push_back(jc);

    const std::size_t reps = 10000;
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        auto d = make_drivers(1.0, 8, {drivers::MarkMeasure::dirac(1.0)}, 0,
                              9000 + r);
        const std::vector<double> x0{0.25};
        const auto path = simulate(x0, c, d);
        sum += path.state(path.times.size() - 1)[0] - 0.25;
        // jump consistency: increments match the evaluated amplitude exactly
        for (const auto& ev : path.events)
            CHECK(ev.x_after[0] - ev.x_before[0] == 1.0);
    }
    const double mean = sum / double(reps);
    CHECK(std::fabs(mean - 1.0) <= 4.0 / std::sqrt(double(reps)));
}

TEST_CASE("pure diffusion matches the Wiener marginal") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 1;
    c.diffusion = [](double, std::span<const double>, std::span<double> out) {
        out[0] = 1.0;
    };
    const std::size_t reps = 10000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        DriverSet d;
        d.jumps.horizon = 1.0;
        d.wiener = drivers::sample_wiener(drivers::TimeGrid::uniform(1.0, 32),
                                          1, 100 + r);
        const std::vector<double> x0{0.0};
        const auto path = simulate(x0, c, d);
        const double xT = path.state(path.times.size() - 1)[0];
        sum += xT;
        sumsq += xT * xT;
    }
    const double mean = sum / double(reps);
    const double var = sumsq / double(reps) - mean * mean;
    CHECK(std::fabs(var - 1.0) <= 0.05);
}

TEST_CASE("compensated bounded jumps are mean-zero") {
    const auto c = unit_compensated_jump();
    const std::size_t reps = 10000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        auto d = make_drivers(1.0, 16, {drivers::MarkMeasure::dirac(1.0)}, 0,
                              777 + r);
        const std::vector<double> x0{0.0};
        const auto path = simulate(x0, c, d);
        const double xT = path.state(path.times.size() - 1)[0];
        sum += xT;
        sumsq += xT * xT;
    }
    const double mean = sum / double(reps);
    const double var = sumsq / double(reps) - mean * mean;
    const double se = std::sqrt(var / double(reps));
    CHECK(std::fabs(mean) <= 4.0 * se);
}

TEST_CASE("left limits feed the jump integrands") {
    // amplitude = current state doubles it: X+ = 2 X-
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.direct = [](double, double, std::span<const double> x,
                   std::span<double> out) { out[0] = x[0]; };
    c.jump.push_back(jc);
    auto d = make_drivers(1.0, 8, {drivers::MarkMeasure::dirac(1.0, 3.0)}, 0,
                          4242);
    const std::vector<double> x0{1.0};
    const auto path = simulate(x0, c, d);
    for (const auto& ev : path.events)
        CHECK(ev.x_after[0] == doctest::Approx(2.0 * ev.x_before[0]));
}

TEST_CASE("state blow-up reports the first bad time") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    c.drift = [](double, std::span<const double> x, std::span<double> out) {
        out[0] = x[0] * x[0] * x[0] * 1e8;
    };
    DriverSet d;
    d.jumps.horizon = 1.0;
    d.wiener =
        drivers::sample_wiener(drivers::TimeGrid::uniform(1.0, 64), 1, 5);
    const std::vector<double> x0{10.0};
    try {
        simulate(x0, c, d);
        CHECK(false);
    } catch (const BlowupError& e) {
        CHECK(e.first_bad_time > 0.0);
        CHECK(e.first_bad_time <= 1.0);
    }
}

TEST_CASE("scheme and dimension validation") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    DriverSet d;
    d.jumps.horizon = 1.0;
    d.wiener =
        drivers::sample_wiener(drivers::TimeGrid::uniform(1.0, 8), 1, 5);
    const std::vector<double> bad_x0{1.0, 2.0};
    CHECK_THROWS_AS(simulate(bad_x0, c, d), ConfigError);

    SimOptions opts;
    opts.scheme = Scheme::exact_between_jumps;
    const std::vector<double> x0{1.0};
    CHECK_THROWS_AS(simulate(x0, c, d, opts), ConfigError); // not declared
    c.state_independent = true;
    c.finite_activity = true;
    const auto path = simulate(x0, c, d, opts);
    CHECK(path.state(path.times.size() - 1)[0] == 1.0);

    // wiener grid missing a jump time
    auto measures = std::vector<drivers::MarkMeasure>{
        drivers::MarkMeasure::dirac(1.0, 5.0)};
    DriverSet d2;
    d2.measures = measures;
    d2.jumps = drivers::sample_jumps(measures, 1.0, 6);
    d2.wiener = d.wiener; // plain uniform grid, not merged
    Coefficients cj = unit_compensated_jump();
    if (!d2.jumps.events.empty())
        CHECK_THROWS_AS(simulate(x0, cj, d2), ConfigError);
}

TEST_CASE("euler strong order sits in the multiplicative-noise band") {
    // error against a 2x-refined reference halves at rate ~0.5
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 1;
    c.drift = [](double, std::span<const double> x, std::span<double> out) {
        out[0] = 1.0 - x[0];
    };
    c.diffusion = [](double, std::span<const double> x,
                     std::span<double> out) {
        out[0] = 0.2 + 0.4 * x[0];
    };
    const double T = 1.0;
    const std::size_t reps = 128;
    const int coarse_pow = 5; // 32 steps
    const int levels = 4;
    const std::size_t n_ref = std::size_t(1) << (coarse_pow + levels + 2);
    std::vector<double> rms(levels, 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
        const auto fine = drivers::TimeGrid::uniform(T, n_ref);
        const auto wief = drivers::sample_wiener(fine, 1, 31000 + r);
        DriverSet dref;
        dref.jumps.horizon = T;
        dref.wiener = wief;
        const std::vector<double> x0{0.5};
        const double ref = simulate(x0, c, dref)
                               .state(dref.wiener.grid.points.size() - 1)[0];
        for (int l = 0; l < levels; ++l) {
            DriverSet d;
            d.jumps.horizon = T;
            d.wiener = wief.coarsened(drivers::TimeGrid::uniform(
                T, std::size_t(1) << (coarse_pow + l)));
            const double xT =
                simulate(x0, c, d).state(d.wiener.grid.points.size() - 1)[0];
            rms[std::size_t(l)] += (xT - ref) * (xT - ref);
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int l = 0; l < levels; ++l) {
        const double x = std::log(T / double(std::size_t(1) << (coarse_pow + l)));
        const double y =
            0.5 * std::log(rms[std::size_t(l)] / double(reps));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double order =
        (levels * sxy - sx * sy) / (levels * sxx - sx * sx);
    CHECK(order >= 0.35);
    CHECK(order <= 0.7);
}

TEST_CASE("condition report: orthogonality and boundedness") {
    // overlapping hbar and h trip the hard flag
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.direct = [](double, double, std::span<const double>,
                   std::span<double> out) { out[0] = 1.0; };
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> out) { out[0] = 0.5; };
    c.jump.push_back(jc);
    auto d = make_drivers(1.0, 16, {drivers::MarkMeasure::dirac(1.0, 2.0)}, 0,
                          808);
    const std::vector<double> x0{0.0};
    const auto path = simulate(x0, c, d);
    const auto rep = check_conditions(c, path, d);
    CHECK(rep.orthogonality_failed);
    CHECK(rep.orthogonality_max == doctest::Approx(0.5));

    // hbar == 0 keeps it clean
    const auto clean_coeffs = unit_compensated_jump();
    auto d2 = make_drivers(1.0, 16, {drivers::MarkMeasure::dirac(1.0)}, 0,
                           809);
    const auto path2 = simulate(x0, clean_coeffs, d2);
    const auto rep2 = check_conditions(clean_coeffs, path2, d2);
    CHECK(rep2.orthogonality_max == 0.0);
    CHECK_FALSE(rep2.orthogonality_failed);
    CHECK(rep2.esssup_compensated == doctest::Approx(1.0));
}

TEST_CASE("condition estimates: bounded amplitude stays bounded") {
    const auto c = unit_compensated_jump();
    auto d = make_drivers(1.0, 256, {drivers::MarkMeasure::dirac(1.0)}, 0,
                          515);
    const std::vector<double> x0{0.3};
    const auto path = simulate(x0, c, d);
    const auto phi = calculus::power_abs(4.0, 1);
    const auto rep = check_conditions(c, path, d, &phi);
    REQUIRE(rep.second_order.has_value());
    CHECK_FALSE(rep.second_order->suspected_divergent);
    CHECK_FALSE(rep.first_order->suspected_divergent);

    // |J| <= sup |D2 phi| |h|^2 along the realized path
    double sup_h2 = 0.0;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < path.times.size(); ++i)
        max_abs = std::max(max_abs, std::fabs(path.state(i)[0]));
    std::vector<double> hess(1);
    const std::vector<double> probe{max_abs + 1.0};
    phi.hessian(probe, hess);
    sup_h2 = hess[0];
    CHECK(rep.second_order->values.back() <=
          sup_h2 * rep.compensated_sq_integral + 1e-9);
}

TEST_CASE("condition estimates flag the singular counterexample") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double t, double, std::span<const double>,
                        std::span<double> out) {
        out[0] = t > 0.0 ? std::pow(t, -0.25) : 0.0;
    };
    c.jump.push_back(jc);
    auto d = make_drivers(1.0, 4096, {drivers::MarkMeasure::dirac(1.0)}, 0,
                          616);
    const std::vector<double> x0{0.0};
    const auto path = simulate(x0, c, d);
    const auto phi = calculus::power_abs(4.0, 1);
    const auto rep = check_conditions(c, path, d, &phi);
    REQUIRE(rep.second_order.has_value());
    CHECK(rep.second_order->suspected_divergent);
    // the dominant piece grows like log(1/delta): increments near log(4)
    const auto& est = *rep.second_order;
    const double inc = est.values.back() - est.values[est.values.size() - 2];
    CHECK(inc == doctest::Approx(std::log(4.0)).epsilon(0.15));
    CHECK(rep.first_order->suspected_divergent); // ~ 1/delta growth
}
