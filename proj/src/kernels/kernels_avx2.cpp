#include "itokit/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <cmath>
#include <cstddef>
#include <immintrin.h>

// AVX2 variants of the hot kernels. Tails fall back to the scalar loops.
// Reductions use independent accumulators, so results can differ from the
// scalar table by reassociation rounding; the equivalence tests bound that.

namespace itokit::kernels {
namespace {

inline double hadd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double v_sum(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double res = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        res += x[i];
    return res;
}

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                               _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                               acc0);
    double res = hadd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        res += x[i] * y[i];
    return res;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

void v_lerp(const double* a, const double* b, double t, double* out,
            std::size_t n) {
    const __m256d vt = _mm256_set1_pd(t);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        _mm256_storeu_pd(out + i,
                         _mm256_fmadd_pd(vt, _mm256_sub_pd(vb, va), va));
    }
    for (; i < n; ++i)
        out[i] = a[i] + t * (b[i] - a[i]);
}

void v_diff_central(const double* in, double* out, std::size_t n,
                    double inv2dx, bool periodic) {
    if (n < 2) {
        if (n == 1)
            out[0] = 0.0;
        return;
    }
    const __m256d vs = _mm256_set1_pd(inv2dx);
    std::size_t i = 1;
    for (; i + 5 <= n; i += 4) {
        const __m256d hi = _mm256_loadu_pd(in + i + 1);
        const __m256d lo = _mm256_loadu_pd(in + i - 1);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(hi, lo), vs));
    }
    for (; i + 1 < n; ++i)
        out[i] = (in[i + 1] - in[i - 1]) * inv2dx;
    const double left_end = periodic ? in[n - 1] : 0.0;
    const double right_end = periodic ? in[0] : 0.0;
    out[0] = (in[1] - left_end) * inv2dx;
    out[n - 1] = (right_end - in[n - 2]) * inv2dx;
}

void v_convolve(const double* in, std::size_t n, const double* taps,
                std::size_t half, double* out, bool periodic) {
    const long m = static_cast<long>(half);
    const long ln = static_cast<long>(n);
    // Interior nodes, vectorized over output index; boundary strip scalar.
    const long lo = m;
    const long hi = ln - m; // [lo, hi) never reads out of range
    for (long i = 0; i < std::min(lo, ln); ++i)
        out[i] = 0.0;
    for (long i = std::max(hi, 0L); i < ln; ++i)
        out[i] = 0.0;
    long i = lo;
    for (; i + 4 <= hi; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (long j = -m; j <= m; ++j) {
            const __m256d vt = _mm256_set1_pd(taps[m + j]);
            acc = _mm256_fmadd_pd(vt, _mm256_loadu_pd(in + (i - j)), acc);
        }
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < hi; ++i) {
        double acc = 0.0;
        for (long j = -m; j <= m; ++j)
            acc += taps[m + j] * in[i - j];
        out[i] = acc;
    }
    // Boundary strip (wrap or zero-pad), scalar.
    auto edge = [&](long idx) {
        double acc = 0.0;
        for (long j = -m; j <= m; ++j) {
            long k = idx - j;
            if (periodic) {
                k %= ln;
                if (k < 0)
                    k += ln;
            } else if (k < 0 || k >= ln) {
                continue;
            }
            acc += taps[m + j] * in[k];
        }
        out[idx] = acc;
    };
    for (long idx = 0; idx < std::min(lo, ln); ++idx)
        edge(idx);
    for (long idx = std::max(hi, 0L); idx < ln; ++idx)
        edge(idx);
}

double v_pow_sum(const double* u, std::size_t n, double p) {
    if (p == 2.0)
        return v_dot(u, u, n);
    if (p == 4.0) {
        __m256d acc0 = _mm256_setzero_pd();
        __m256d acc1 = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 8 <= n; i += 8) {
            const __m256d a = _mm256_loadu_pd(u + i);
            const __m256d b = _mm256_loadu_pd(u + i + 4);
            const __m256d a2 = _mm256_mul_pd(a, a);
            const __m256d b2 = _mm256_mul_pd(b, b);
            acc0 = _mm256_fmadd_pd(a2, a2, acc0);
            acc1 = _mm256_fmadd_pd(b2, b2, acc1);
        }
        double res = hadd(_mm256_add_pd(acc0, acc1));
        for (; i < n; ++i) {
            const double a = u[i] * u[i];
            res += a * a;
        }
        return res;
    }
    // General exponents go through libm; no vector pow here.
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += std::pow(std::fabs(u[i]), p);
    return acc;
}

double v_wprod_sum(const double* u, const double* v, const double* w,
                   std::size_t n, double q) {
    if (q == 0.0)
        return v_dot(v, w, n);
    if (q == 2.0) {
        __m256d acc = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            const __m256d vu = _mm256_loadu_pd(u + i);
            const __m256d vv = _mm256_loadu_pd(v + i);
            const __m256d vw = _mm256_loadu_pd(w + i);
            acc = _mm256_fmadd_pd(_mm256_mul_pd(vu, vu),
                                  _mm256_mul_pd(vv, vw), acc);
        }
        double res = hadd(acc);
        for (; i < n; ++i)
            res += u[i] * u[i] * v[i] * w[i];
        return res;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(u[i]);
        const double weight = (a == 0.0) ? 0.0 : std::pow(a, q);
        acc += weight * v[i] * w[i];
    }
    return acc;
}

} // namespace

bool avx2_available() {
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Table& avx2() {
    static const Table t{"avx2",   v_sum,          v_dot,      v_axpy,
                         v_lerp,   v_diff_central, v_convolve,
                         v_pow_sum, v_wprod_sum};
    return t;
}

} // namespace itokit::kernels

#endif // x86_64
