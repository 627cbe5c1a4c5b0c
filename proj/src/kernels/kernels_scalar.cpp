#include "itokit/kernels.hpp"

#include <cmath>
#include <cstddef>

// Reference implementations. Plain loops, kept free of hand-tuning so they
// stay readable; the SIMD tables are equivalence-tested against these.

namespace itokit::kernels {
namespace {

double s_sum(const double* x, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += x[i];
        acc1 += x[i + 1];
        acc2 += x[i + 2];
        acc3 += x[i + 3];
    }
    for (; i < n; ++i)
        acc0 += x[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

double s_dot(const double* x, const double* y, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += x[i] * y[i];
        acc1 += x[i + 1] * y[i + 1];
        acc2 += x[i + 2] * y[i + 2];
        acc3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i)
        acc0 += x[i] * y[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += a * x[i];
}

void s_lerp(const double* a, const double* b, double t, double* out,
            std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a[i] + t * (b[i] - a[i]);
}

void s_diff_central(const double* in, double* out, std::size_t n,
                    double inv2dx, bool periodic) {
    if (n == 0)
        return;
    if (n == 1) {
        out[0] = 0.0;
        return;
    }
    const double left_end = periodic ? in[n - 1] : 0.0;
    const double right_end = periodic ? in[0] : 0.0;
    out[0] = (in[1] - left_end) * inv2dx;
    for (std::size_t i = 1; i + 1 < n; ++i)
        out[i] = (in[i + 1] - in[i - 1]) * inv2dx;
    out[n - 1] = (right_end - in[n - 2]) * inv2dx;
}

void s_convolve(const double* in, std::size_t n, const double* taps,
                std::size_t half, double* out, bool periodic) {
    const long m = static_cast<long>(half);
    const long ln = static_cast<long>(n);
    for (long i = 0; i < ln; ++i) {
        double acc = 0.0;
        for (long j = -m; j <= m; ++j) {
            long k = i - j;
            if (periodic) {
                k %= ln;
                if (k < 0)
                    k += ln;
            } else if (k < 0 || k >= ln) {
                continue;
            }
            acc += taps[m + j] * in[k];
        }
        out[i] = acc;
    }
}

double s_pow_sum(const double* u, std::size_t n, double p) {
    if (p == 2.0)
        return s_dot(u, u, n);
    if (p == 4.0) {
        double acc0 = 0.0, acc1 = 0.0;
        std::size_t i = 0;
        for (; i + 2 <= n; i += 2) {
            const double a = u[i] * u[i];
            const double b = u[i + 1] * u[i + 1];
            acc0 += a * a;
            acc1 += b * b;
        }
        for (; i < n; ++i) {
            const double a = u[i] * u[i];
            acc0 += a * a;
        }
        return acc0 + acc1;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += std::pow(std::fabs(u[i]), p);
    return acc;
}

double s_wprod_sum(const double* u, const double* v, const double* w,
                   std::size_t n, double q) {
    if (q == 0.0)
        return s_dot(v, w, n);
    if (q == 2.0) {
        double acc0 = 0.0, acc1 = 0.0;
        std::size_t i = 0;
        for (; i + 2 <= n; i += 2) {
            acc0 += u[i] * u[i] * v[i] * w[i];
            acc1 += u[i + 1] * u[i + 1] * v[i + 1] * w[i + 1];
        }
        for (; i < n; ++i)
            acc0 += u[i] * u[i] * v[i] * w[i];
        return acc0 + acc1;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(u[i]);
        const double weight = (a == 0.0 && q != 0.0) ? 0.0 : std::pow(a, q);
        acc += weight * v[i] * w[i];
    }
    return acc;
}

} // namespace

const Table& scalar() {
    static const Table t{"scalar",   s_sum,      s_dot,     s_axpy,
                         s_lerp,     s_diff_central, s_convolve,
                         s_pow_sum,  s_wprod_sum};
    return t;
}

} // namespace itokit::kernels
