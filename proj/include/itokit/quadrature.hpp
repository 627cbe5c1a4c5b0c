#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace itokit::quad {

// Panel rules used for the ledgers' time integrals on each grid interval.
// left_rect samples the left endpoint only; gauss_k is the k-point
// Gauss-Legendre rule (exact for polynomial degree 2k-1).
enum class Rule { left_rect, gauss1, gauss2, gauss3, gauss5 };

const char* rule_name(Rule r);
Rule rule_from_name(const std::string& name);

// Nodes/weights on the reference interval [0,1].
std::span<const double> rule_nodes(Rule r);
std::span<const double> rule_weights(Rule r);

// One-step-lower embedded rule for error estimation (left_rect estimates
// against gauss1).
Rule embedded_rule(Rule r);

struct AdaptiveResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t intervals = 0;
    bool converged = false;
};

// Adaptive Gauss-Kronrod (G7,K15) with bisection. Tolerances combine as
// |err| <= abs_tol + rel_tol * |value|.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f,
                                  double a, double b, double rel_tol = 1e-10,
                                  double abs_tol = 1e-12,
                                  std::size_t max_intervals = 20000);

// Extrapolates I(delta) = A - B * delta^q to delta -> 0 from samples at
// geometrically decreasing delta (at least three). The exponent is fitted
// from successive differences; returns the estimated limit A.
double power_law_extrapolate(std::span<const double> deltas,
                             std::span<const double> values);

} // namespace itokit::quad
