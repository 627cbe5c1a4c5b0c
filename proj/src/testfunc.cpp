#include "itokit/testfunc.hpp"

#include "itokit/errors.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace itokit::calculus {
namespace {

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return s;
}

} // namespace

double increment_first(const TestFunction& phi, std::span<const double> v,
                       std::span<const double> a) {
    std::vector<double> shifted(v.begin(), v.end());
    for (std::size_t i = 0; i < shifted.size(); ++i)
        shifted[i] += a[i];
    return phi.value(shifted) - phi.value(v);
}

double increment_second(const TestFunction& phi, std::span<const double> v,
                        std::span<const double> a) {
    std::vector<double> grad(v.size());
    phi.gradient(v, grad);
    double lin = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        lin += a[i] * grad[i];
    return increment_first(phi, v, a) - lin;
}

TestFunction power_abs(double p, int dim) {
    if (p < 2.0)
        throw ConfigError("power_abs requires p >= 2");
    TestFunction f;
    f.dim = dim;
    f.name = "abs_pow_" + std::to_string(p);
    f.value = [p](std::span<const double> x) {
        return std::pow(norm2(x), 0.5 * p);
    };
    f.gradient = [p](std::span<const double> x, std::span<double> g) {
        const double r2 = norm2(x);
        const double w = r2 == 0.0 ? 0.0 : std::pow(r2, 0.5 * p - 1.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            g[i] = p * w * x[i];
    };
    f.hessian = [p](std::span<const double> x, std::span<double> h) {
        const std::size_t m = x.size();
        const double r2 = norm2(x);
        if (r2 == 0.0) {
            // 0/0 := 0 for the off-diagonal factor; the diagonal survives
            // only at p == 2.
            const double diag = p == 2.0 ? 2.0 : 0.0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    h[i * m + j] = i == j ? diag : 0.0;
            return;
        }
        const double r = std::sqrt(r2);
        const double w = std::pow(r2, 0.5 * p - 1.0); // |x|^{p-2}
        for (std::size_t i = 0; i < m; ++i) {
            const double ui = x[i] / r;
            for (std::size_t j = 0; j < m; ++j) {
                const double uj = x[j] / r;
                double v = p * (p - 2.0) * w * ui * uj;
                if (i == j)
                    v += p * w;
                h[i * m + j] = v;
            }
        }
    };
    return f;
}

TestFunction quadratic(int dim) {
    TestFunction f;
    f.dim = dim;
    f.name = "abs_squared";
    f.value = [](std::span<const double> x) { return norm2(x); };
    f.gradient = [](std::span<const double> x, std::span<double> g) {
        for (std::size_t i = 0; i < x.size(); ++i)
            g[i] = 2.0 * x[i];
    };
    f.hessian = [](std::span<const double> x, std::span<double> h) {
        const std::size_t m = x.size();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                h[i * m + j] = i == j ? 2.0 : 0.0;
    };
    return f;
}

TestFunction linear(std::vector<double> a, double b) {
    TestFunction f;
    f.dim = static_cast<int>(a.size());
    f.name = "linear";
    f.smoothness = TestFunction::Smoothness::c2;
    auto coeff = std::make_shared<std::vector<double>>(std::move(a));
    f.value = [coeff, b](std::span<const double> x) {
        double s = b;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += (*coeff)[i] * x[i];
        return s;
    };
    f.gradient = [coeff](std::span<const double>, std::span<double> g) {
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = (*coeff)[i];
    };
    f.hessian = [](std::span<const double> x, std::span<double> h) {
        const std::size_t m = x.size();
        for (std::size_t i = 0; i < m * m; ++i)
            h[i] = 0.0;
    };
    return f;
}

TestFunction product(const TestFunction& f, const TestFunction& g) {
    if (f.dim != g.dim)
        throw ConfigError("product of test functions with different dims");
    TestFunction p;
    p.dim = f.dim;
    p.name = f.name + "*" + g.name;
    auto fv = f.value, gv = g.value;
    auto fg = f.gradient, gg = g.gradient;
    auto fh = f.hessian, gh = g.hessian;
    p.value = [fv, gv](std::span<const double> x) { return fv(x) * gv(x); };
    p.gradient = [fv, gv, fg, gg](std::span<const double> x,
                                  std::span<double> out) {
        const std::size_t m = x.size();
        std::vector<double> a(m), b(m);
        fg(x, a);
        gg(x, b);
        const double F = fv(x), G = gv(x);
        for (std::size_t i = 0; i < m; ++i)
            out[i] = a[i] * G + F * b[i];
    };
    p.hessian = [fv, gv, fg, gg, fh, gh](std::span<const double> x,
                                         std::span<double> out) {
        const std::size_t m = x.size();
        std::vector<double> a(m), b(m), ha(m * m), hb(m * m);
        fg(x, a);
        gg(x, b);
        fh(x, ha);
        gh(x, hb);
        const double F = fv(x), G = gv(x);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                out[i * m + j] = ha[i * m + j] * G + F * hb[i * m + j] +
                                 a[i] * b[j] + a[j] * b[i];
    };
    return p;
}

TestFunction gaussian_bump(int dim, double s) {
    TestFunction f;
    f.dim = dim;
    f.name = "gaussian";
    f.smoothness = TestFunction::Smoothness::c2_bounded;
    const double inv = 1.0 / (s * s);
    f.value = [inv](std::span<const double> x) {
        return std::exp(-0.5 * inv * norm2(x));
    };
    f.gradient = [inv](std::span<const double> x, std::span<double> g) {
        const double e = std::exp(-0.5 * inv * norm2(x));
        for (std::size_t i = 0; i < x.size(); ++i)
            g[i] = -inv * x[i] * e;
    };
    f.hessian = [inv](std::span<const double> x, std::span<double> h) {
        const std::size_t m = x.size();
        const double e = std::exp(-0.5 * inv * norm2(x));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double v = inv * inv * x[i] * x[j] * e;
                if (i == j)
                    v -= inv * e;
                h[i * m + j] = v;
            }
    };
    return f;
}

DerivativeCheck validate_derivatives(
    const TestFunction& phi, std::span<const std::vector<double>> points,
    double fd_step) {
    if (!(fd_step > 0.0))
        throw ConfigError("fd_step must be positive");
    DerivativeCheck out;
    const int m = phi.dim;
    std::vector<double> grad(m), hess(m * m);
    std::vector<double> xp, xm;
    for (const auto& x : points) {
        const double fx = phi.value(x);
        if (!std::isfinite(fx)) {
            out.notes.push_back("non-finite value at sample point");
            continue;
        }
        double scale = 1.0;
        for (double c : x)
            scale = std::max(scale, std::fabs(c));
        const double h = fd_step * scale;
        phi.gradient(x, grad);
        phi.hessian(x, hess);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                out.max_hessian_asymmetry =
                    std::max(out.max_hessian_asymmetry,
                             std::fabs(hess[i * m + j] - hess[j * m + i]));
        // gradient vs central differences
        double grad_norm = 0.0;
        for (int i = 0; i < m; ++i)
            grad_norm = std::max(grad_norm, std::fabs(grad[i]));
        for (int i = 0; i < m; ++i) {
            xp.assign(x.begin(), x.end());
            xm.assign(x.begin(), x.end());
            xp[i] += h;
            xm[i] -= h;
            const double fd = (phi.value(xp) - phi.value(xm)) / (2.0 * h);
            const double denom = std::max(1.0, grad_norm);
            out.max_gradient_rel_error =
                std::max(out.max_gradient_rel_error,
                         std::fabs(fd - grad[i]) / denom);
        }
        // hessian vs differenced gradients
        double hess_norm = 0.0;
        for (int i = 0; i < m * m; ++i)
            hess_norm = std::max(hess_norm, std::fabs(hess[i]));
        std::vector<double> gp(m), gm(m);
        for (int j = 0; j < m; ++j) {
            xp.assign(x.begin(), x.end());
            xm.assign(x.begin(), x.end());
            xp[j] += h;
            xm[j] -= h;
            phi.gradient(xp, gp);
            phi.gradient(xm, gm);
            for (int i = 0; i < m; ++i) {
                const double fd = (gp[i] - gm[i]) / (2.0 * h);
                const double denom = std::max(1.0, hess_norm);
                out.max_hessian_rel_error =
                    std::max(out.max_hessian_rel_error,
                             std::fabs(fd - hess[i * m + j]) / denom);
            }
        }
    }
    return out;
}

} // namespace itokit::calculus
