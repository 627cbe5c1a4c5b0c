#include "itokit/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>
#include <cstddef>

// NEON variants for aarch64. Only the straight-line kernels are vectorized;
// the remaining entries reuse the scalar reference implementations.

namespace itokit::kernels {
namespace {

double n_sum(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
        acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
    }
    double res = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i)
        res += x[i];
    return res;
}

double n_dot(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    double res = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i)
        res += x[i] * y[i];
    return res;
}

void n_axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i)
        y[i] += a * x[i];
}

void n_lerp(const double* a, const double* b, double t, double* out,
            std::size_t n) {
    const float64x2_t vt = vdupq_n_f64(t);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t va = vld1q_f64(a + i);
        const float64x2_t vb = vld1q_f64(b + i);
        vst1q_f64(out + i, vfmaq_f64(va, vt, vsubq_f64(vb, va)));
    }
    for (; i < n; ++i)
        out[i] = a[i] + t * (b[i] - a[i]);
}

} // namespace

const Table& neon() {
    const Table& s = scalar();
    static const Table t{"neon",  n_sum,          n_dot,      n_axpy,
                         n_lerp,  s.diff_central, s.convolve,
                         s.pow_sum, s.wprod_sum};
    return t;
}

} // namespace itokit::kernels

#endif // __aarch64__
