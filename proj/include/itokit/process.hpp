#pragma once

#include "itokit/drivers.hpp"
#include "itokit/quadrature.hpp"
#include "itokit/testfunc.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace itokit::process {

// Coefficient callbacks of the state equation
//   dX = f dt + g dw + hbar dpi + h dpi~.
// All callbacks receive the state strictly before t (the left limit), which
// is what makes the evaluated integrands predictable. Null callables mean
// identically zero.
struct Coefficients {
    int state_dim = 1;  // M
    int wiener_dim = 0; // R

    // f(t, x) -> M
    std::function<void(double, std::span<const double>, std::span<double>)>
        drift;
    // g(t, x) -> M x R, row-major
    std::function<void(double, std::span<const double>, std::span<double>)>
        diffusion;

    struct JumpCoefficient {
        // hbar(t, z, x) -> M, integrated against pi (no compensation)
        std::function<void(double, double, std::span<const double>,
                           std::span<double>)>
            direct;
        // h(t, z, x) -> M, integrated against pi~ (compensated)
        std::function<void(double, double, std::span<const double>,
                           std::span<double>)>
            compensated;
    };
    std::vector<JumpCoefficient> jump; // one entry per driving measure

    bool finite_activity = true;
    // True when f, g, hbar, h do not read the state; enables the
    // exact-between-jumps scheme.
    bool state_independent = false;
    // User-declared bound on the ignored Wiener tail mass; echoed in
    // reports, never validated (the truncation error is the caller's claim).
    std::optional<double> wiener_tail_bound;

    void validate(std::size_t n_measures) const;
};

// The driving noise bundle a path is built from.
struct DriverSet {
    drivers::WienerBasis wiener;
    drivers::JumpStream jumps;
    std::vector<drivers::MarkMeasure> measures;
};

enum class Scheme { euler, exact_between_jumps };

struct SimOptions {
    Scheme scheme = Scheme::euler;
};

// Per-interval caches of the frozen coefficient values the step actually
// used. The ledgers re-integrate against exactly these.
struct PathInterval {
    double t0 = 0.0, t1 = 0.0;
    std::vector<double> drift;       // f(t0, X_{t0}), M
    std::vector<double> gdw;         // g(t0, X_{t0}) dW, M
    std::vector<double> sigma;       // g g^T, M x M
    std::vector<double> compensator; // sum_k int h^k(t0, z, X_{t0}) mu^k(dz)
    double compensator_se = 0.0;     // MC std error of the above, if any
};

struct PathEvent {
    std::size_t grid_index = 0; // index of the event time in times[]
    double time = 0.0;
    double mark = 0.0;
    int measure = 0;
    int layer = 0;
    std::vector<double> jump_direct;      // hbar at the event
    std::vector<double> jump_compensated; // h at the event
    std::vector<double> x_before;         // left limit seen by the event
    std::vector<double> x_after;
};

struct PathRecord {
    int state_dim = 1;
    std::vector<double> times;    // merged grid
    std::vector<double> values;   // times.size() x M, post-jump states
    std::vector<std::uint8_t> jump_flag;
    std::vector<PathEvent> events;
    std::vector<PathInterval> intervals; // times.size() - 1
    std::vector<double> x0;
    bool tie_warning = false;

    std::span<const double> state(std::size_t i) const {
        return {values.data() + i * static_cast<std::size_t>(state_dim),
                static_cast<std::size_t>(state_dim)};
    }
    // Left limit at grid point i (equals state(i) off jump times).
    std::vector<double> left_limit(std::size_t i) const;
};

// Euler-Maruyama on the merged grid; jump increments applied atomically at
// event times; the compensator of h is subtracted per step via
// mark_integral. The Wiener basis must be sampled on the merged grid
// (TimeGrid::merged_with the jump times).
PathRecord simulate(std::span<const double> x0, const Coefficients& coeffs,
                    const DriverSet& drivers, const SimOptions& opts = {});

void write_csv(std::ostream& os, const PathRecord& path);

// Estimates of one integrability condition at decreasing truncation levels.
struct ConditionEstimate {
    std::string name;
    std::vector<double> cutoffs; // lower time cutoffs, decreasing
    std::vector<double> values;  // integral over [cutoff, T]
    bool suspected_divergent = false;
    double growth_slope = 0.0; // last increment / d log(1/cutoff)
};

struct ConditionReport {
    double orthogonality_max = 0.0; // max |hbar^i h^j| over samples
    bool orthogonality_failed = false;

    double direct_abs_integral = 0.0;   // sum over events of |hbar|
    double compensated_sq_integral = 0.0; // int int |h|^2 mu dz ds
    double drift_abs_integral = 0.0;    // int |f| ds
    double diffusion_sq_integral = 0.0; // int |g|^2 ds
    double esssup_direct = 0.0;      // xi: esssup |hbar| over realized jumps
    double esssup_compensated = 0.0; // eta: esssup |h| over realized jumps

    std::optional<ConditionEstimate> first_order;  // int int |I phi|^2 mu ds
    std::optional<ConditionEstimate> second_order; // int int |J phi| mu ds

    bool any_divergent() const {
        return (first_order && first_order->suspected_divergent) ||
               (second_order && second_order->suspected_divergent);
    }
};

struct ConditionOptions {
    // Lower time cutoffs for the truncation study; decreasing, in (0,T).
    // Empty -> T * 4^{-j}, j = 1..5.
    std::vector<double> cutoffs;
    // Divergence flag: every increment across the last `levels_required`
    // cutoff refinements exceeds slope_threshold * d log(1/cutoff).
    double slope_threshold = 0.25;
    std::size_t levels_required = 4;
    double orthogonality_tol = 1e-12;
    quad::Rule rule = quad::Rule::gauss3;
};

ConditionReport check_conditions(const Coefficients& coeffs,
                                 const PathRecord& path,
                                 const DriverSet& drivers,
                                 const calculus::TestFunction* phi = nullptr,
                                 const ConditionOptions& opts = {});

} // namespace itokit::process
