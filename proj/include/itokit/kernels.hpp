#pragma once

#include <cstddef>
#include <string>

namespace itokit::kernels {

// Scalar reference kernels plus SIMD variants selected at runtime.
//
// All reductions used by the ledgers go through the active table, so every
// identity the test suites check is evaluated with one consistent kernel set.
// Conventions:
//   sum       : Σ x[i]
//   dot       : Σ x[i] y[i]
//   axpy      : y[i] += a * x[i]
//   lerp      : out[i] = a[i] + t * (b[i] - a[i])
//   diff_central : out[i] = (in[i+1] - in[i-1]) * inv2dx, zero-padded or
//                  periodic at the ends
//   convolve  : out[i] = Σ_{j=-half..half} taps[half+j] * in[i-j], zero-padded
//               or periodic
//   pow_sum   : Σ |u[i]|^p          (fast paths for p = 2 and p = 4)
//   wprod_sum : Σ |u[i]|^q v[i] w[i] with the convention |0|^0 := 1
//               (fast paths for q = 0 and q = 2)
struct Table {
    const char* name;
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*lerp)(const double* a, const double* b, double t, double* out,
                 std::size_t n);
    void (*diff_central)(const double* in, double* out, std::size_t n,
                         double inv2dx, bool periodic);
    void (*convolve)(const double* in, std::size_t n, const double* taps,
                     std::size_t half, double* out, bool periodic);
    double (*pow_sum)(const double* u, std::size_t n, double p);
    double (*wprod_sum)(const double* u, const double* v, const double* w,
                        std::size_t n, double q);
};

const Table& scalar();

#if defined(__x86_64__) || defined(_M_X64)
bool avx2_available();
const Table& avx2(); // only callable when avx2_available()
#endif
#if defined(__aarch64__)
const Table& neon();
#endif

// The dispatched table. Resolved once: honours ITOKIT_KERNELS
// (auto|scalar|avx2|neon), otherwise picks the widest supported variant.
const Table& active();

// Re-resolve the dispatch, e.g. after setting ITOKIT_KERNELS in a test.
// Returns the name of the now-active table. Throws ConfigError for an
// unknown or unsupported request.
const std::string& force(const std::string& which);

} // namespace itokit::kernels
