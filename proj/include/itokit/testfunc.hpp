#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace itokit::calculus {

// A C^2 test function with caller-supplied derivatives. gradient fills M
// entries, hessian fills MxM row-major.
struct TestFunction {
    int dim = 1;
    std::string name;
    enum class Smoothness { c2, c2_bounded };
    Smoothness smoothness = Smoothness::c2;

    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    std::function<void(std::span<const double>, std::span<double>)> hessian;

    double operator()(std::span<const double> x) const { return value(x); }
};

// phi(v+a) - phi(v)
double increment_first(const TestFunction& phi, std::span<const double> v,
                       std::span<const double> a);

// phi(v+a) - phi(v) - a . grad phi(v). Computed literally as
// increment_first(...) minus the dot product, so first - linear - second
// cancels exactly in floating point.
double increment_second(const TestFunction& phi, std::span<const double> v,
                        std::span<const double> a);

// |x|^p for p >= 2, with gradient p|x|^{p-2} x and hessian
// p|x|^{p-2} ((p-2) u_i u_j + delta_ij), u = x/|x|, using the 0/0 := 0
// convention at the origin. For p in (2,4) the |x|^{p-4} factor is never
// formed directly.
TestFunction power_abs(double p, int dim);
// |x|^2 with exact quadratic derivatives.
TestFunction quadratic(int dim);
// a.x + b
TestFunction linear(std::vector<double> a, double b = 0.0);
// Pointwise product (fg) with product-rule derivatives.
TestFunction product(const TestFunction& f, const TestFunction& g);
// exp(-|x|^2 / (2 s^2)), bounded with bounded derivatives.
TestFunction gaussian_bump(int dim, double s = 1.0);

struct DerivativeCheck {
    double max_gradient_rel_error = 0.0;
    double max_hessian_rel_error = 0.0;
    double max_hessian_asymmetry = 0.0;
    std::vector<std::string> notes; // non-finite evaluations and the like
    bool pass(double tol = 1e-4) const {
        return notes.empty() && max_gradient_rel_error <= tol &&
               max_hessian_rel_error <= tol;
    }
};

// Central-difference validation of the supplied derivatives at the given
// points. fd_step is scaled by (1 + |x|) per point.
DerivativeCheck validate_derivatives(const TestFunction& phi,
                                     std::span<const std::vector<double>> points,
                                     double fd_step);

} // namespace itokit::calculus
