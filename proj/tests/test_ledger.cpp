#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itokit/errors.hpp"
#include "itokit/ledger.hpp"

#include <cmath>
#include <sstream>
#include <vector>

using namespace itokit;
using namespace itokit::process;
using namespace itokit::calculus;

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

Coefficients bounded_jump_diffusion() {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 1;
    c.drift = [](double, std::span<const double> x, std::span<double> o) {
        o[0] = 0.2 - 0.1 * x[0];
    };
    c.diffusion = [](double, std::span<const double> x, std::span<double> o) {
        o[0] = 0.3 + 0.05 * std::cos(x[0]);
    };
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> o) { o[0] = 0.6; };
    c.jump.push_back(jc);
    return c;
}

} // namespace

TEST_CASE("linear test function kills the remainder terms") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 1;
    c.drift = [](double, std::span<const double>, std::span<double> o) {
        o[0] = 0.7;
    };
    c.diffusion = [](double, std::span<const double>, std::span<double> o) {
        o[0] = 0.4;
    };
    DriverSet d;
    d.jumps.horizon = 1.0;
    d.wiener =
        drivers::sample_wiener(drivers::TimeGrid::uniform(1.0, 128), 1, 21);
    const std::vector<double> x0{0.0};
    const auto path = simulate(x0, c, d);
    const auto phi = linear({2.0}, 0.5);
    const auto led = ledger_natural(path, c, d, phi);
    for (std::size_t t = 0; t < led.term_names.size(); ++t)
        if (led.term_names[t] == "jump_remainder")
            CHECK(led.terms[t].back() == 0.0);
    // affine phi of an exactly-integrated affine step: only roundoff is left
    CHECK(std::fabs(led.final_residual()) <= 1e-12 * led.term_scale());
    CHECK(led.residual.front() == 0.0);
}

TEST_CASE("pure-jump natural ledger telescopes to rounding") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> o) { o[0] = 0.7; };
    c.jump.push_back(jc);
    const auto phi = quadratic(1);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto d = make_drivers(1.0, 64, {drivers::MarkMeasure::dirac(1.0)}, 0,
                              seed);
        const std::vector<double> x0{0.3};
        const auto path = simulate(x0, c, d);
        const auto led = ledger_natural(path, c, d, phi);
        CHECK(std::fabs(led.final_residual()) <= 1e-10 * led.term_scale());
        CHECK(led.final_budget() <= 1e-10 * led.term_scale());
    }
}

TEST_CASE("standard and natural forms assemble the same total") {
    const auto c = bounded_jump_diffusion();
    const auto phi = power_abs(4.0, 1);
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        auto d = make_drivers(1.0, 128, {drivers::MarkMeasure::dirac(1.0)}, 1,
                              seed);
        const std::vector<double> x0{0.5};
        const auto path = simulate(x0, c, d);
        const auto cond = check_conditions(c, path, d, &phi);
        const auto std_led = ledger_standard(path, c, d, phi, &cond);
        const auto nat_led = ledger_natural(path, c, d, phi);
        const double diff =
            std::fabs(std_led.rhs_total() - nat_led.rhs_total());
        CHECK(diff <= 1e-9 + std_led.final_budget() + nat_led.final_budget());
        // the two decompositions agree pathwise, not only at T
        for (std::size_t j = 0; j < path.times.size(); ++j) {
            const double dj =
                std::fabs(std_led.rhs_total(j) - nat_led.rhs_total(j));
            CHECK(dj <= 1e-9 + std_led.quad_budget[j] +
                            nat_led.quad_budget[j]);
        }
    }
}

TEST_CASE("monte-carlo mark layers keep both forms consistent") {
    // amplitude depends on the mark, measure has no analytic integral:
    // the compensators fall back to fixed-substream MC, and both ledger
    // forms must still agree within the reported budget
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double, double z, std::span<const double>,
                        std::span<double> o) { o[0] = 0.4 + 0.3 * z; };
    c.jump.push_back(jc);
    const auto phi = quadratic(1);
    auto d = make_drivers(1.0, 64,
                          {drivers::MarkMeasure::uniform(0.0, 1.0, 1.5)}, 0,
                          3333);
    const std::vector<double> x0{0.2};
    const auto path = simulate(x0, c, d);
    CHECK(path.intervals[0].compensator_se > 0.0);
    const auto cond = check_conditions(c, path, d, &phi);
    const auto std_led = ledger_standard(path, c, d, phi, &cond);
    const auto nat_led = ledger_natural(path, c, d, phi);
    CHECK(nat_led.final_budget() > 0.0);
    CHECK(std::fabs(std_led.rhs_total() - nat_led.rhs_total()) <=
          1e-9 + std_led.final_budget() + nat_led.final_budget());
}

TEST_CASE("power ledger: compensated Poisson second moment") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> o) { o[0] = 1.0; };
    c.jump.push_back(jc);
    const std::size_t reps = 2000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        auto d = make_drivers(1.0, 32, {drivers::MarkMeasure::dirac(1.0)}, 0,
                              50000 + r);
        const std::vector<double> x0{0.0};
        const auto path = simulate(x0, c, d);
        const auto led = ledger_power(path, c, d, 2.0);
        CHECK(std::fabs(led.final_residual()) <= 1e-10 * led.term_scale());
        // (p-2)-weighted column vanishes identically at p = 2
        for (std::size_t t = 0; t < led.term_names.size(); ++t)
            if (led.term_names[t] == "ds_gauss_excess")
                for (double v : led.terms[t])
                    CHECK(v == 0.0);
        sum += led.lhs.back();
        sumsq += led.lhs.back() * led.lhs.back();
    }
    const double mean = sum / double(reps);
    const double var = sumsq / double(reps) - mean * mean;
    CHECK(std::fabs(mean - 1.0) <= 4.0 * std::sqrt(var / double(reps)));
}

TEST_CASE("power ledger: zero path exercises the 0/0 convention") {
    Coefficients c;
    c.state_dim = 2;
    c.wiener_dim = 0;
    c.jump.resize(1);
    auto d = make_drivers(1.0, 16, {drivers::MarkMeasure::dirac(1.0)}, 0, 9);
    const std::vector<double> x0{0.0, 0.0};
    const auto path = simulate(x0, c, d);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        const auto led = ledger_power(path, c, d, p);
        CHECK(led.lhs.back() == 0.0);
        CHECK(led.final_residual() == 0.0);
        for (const auto& term : led.terms)
            CHECK(term.back() == 0.0);
    }
    CHECK_THROWS_AS(ledger_power(path, c, d, 1.5), ConfigError);
}

TEST_CASE("power ledger agrees with the generic quartic ledger") {
    const auto c = bounded_jump_diffusion();
    auto d = make_drivers(1.0, 128, {drivers::MarkMeasure::dirac(1.0)}, 1,
                          246);
    const std::vector<double> x0{0.5};
    const auto path = simulate(x0, c, d);
    const auto led_pow = ledger_power(path, c, d, 4.0);
    const auto led_gen = ledger_natural(path, c, d, power_abs(4.0, 1));
    CHECK(std::fabs(led_pow.rhs_total() - led_gen.rhs_total()) <=
          1e-11 * (1.0 + std::fabs(led_gen.rhs_total())));
    CHECK(std::fabs(led_pow.final_residual() - led_gen.final_residual()) <=
          1e-11 * led_gen.term_scale());
}

TEST_CASE("refusal semantics on the singular counterexample") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double t, double, std::span<const double>,
                        std::span<double> o) {
        o[0] = t > 0.0 ? std::pow(t, -0.25) : 0.0;
    };
    c.jump.push_back(jc);
    auto d = make_drivers(1.0, 2048, {drivers::MarkMeasure::dirac(1.0)}, 0,
                          31);
    const std::vector<double> x0{0.0};
    const auto path = simulate(x0, c, d);
    const auto phi = power_abs(4.0, 1);
    const auto cond = check_conditions(c, path, d, &phi);
    REQUIRE(cond.any_divergent());

    bool refused = false;
    try {
        (void)ledger_standard(path, c, d, phi, &cond);
    } catch (const LedgerRefusal& e) {
        refused = true;
        CHECK_FALSE(e.term.empty());
    }
    CHECK(refused);

    // force-through still evaluates, and the natural form never refuses
    LedgerOptions force;
    force.force = true;
    const auto forced = ledger_standard(path, c, d, phi, &cond, force);
    CHECK(std::isfinite(forced.final_residual()));
    const auto nat = ledger_natural(path, c, d, phi);
    CHECK(std::fabs(nat.final_residual()) <=
          1e-10 * nat.term_scale() + nat.final_budget());
}

TEST_CASE("orthogonality violations are rejected up front") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.direct = [](double, double, std::span<const double>,
                   std::span<double> o) { o[0] = 1.0; };
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> o) { o[0] = 1.0; };
    c.jump.push_back(jc);
    auto d = make_drivers(1.0, 16, {drivers::MarkMeasure::dirac(1.0, 2.0)},
                          0, 66);
    const std::vector<double> x0{0.0};
    const auto path = simulate(x0, c, d);
    const auto phi = quadratic(1);
    const auto cond = check_conditions(c, path, d, &phi);
    CHECK(cond.orthogonality_failed);
    CHECK_THROWS_AS(ledger_standard(path, c, d, phi, &cond), ConfigError);
}

TEST_CASE("ledger CSV export carries every column") {
    Coefficients c;
    c.state_dim = 1;
    c.wiener_dim = 0;
    Coefficients::JumpCoefficient jc;
    jc.compensated = [](double, double, std::span<const double>,
                        std::span<double> o) { o[0] = 0.5; };
    c.jump.push_back(jc);
    auto d = make_drivers(1.0, 8, {drivers::MarkMeasure::dirac(1.0)}, 0, 77);
    const std::vector<double> x0{0.1};
    const auto path = simulate(x0, c, d);
    const auto led = ledger_natural(path, c, d, quadratic(1));
    std::ostringstream os;
    write_csv(os, led);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header ==
          "t,dw_gradient,ds_drift_hessian,jump_direct,"
          "jump_linear_compensated,jump_remainder,lhs,residual,quad_budget");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(is, line))
        ++lines;
    CHECK(lines == path.times.size());
}
