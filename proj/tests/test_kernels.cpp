#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itokit/errors.hpp"
#include "itokit/kernels.hpp"
#include "itokit/rng.hpp"

#include <cmath>
#include <vector>

using namespace itokit;

namespace {

std::vector<double> random_vec(std::size_t n, rng::Substream& s,
                               double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v)
        x = s.uniform(lo, hi);
    return v;
}

// Tables to compare against the scalar reference on this machine.
std::vector<const kernels::Table*> simd_tables() {
    std::vector<const kernels::Table*> out;
#if defined(__x86_64__) || defined(_M_X64)
    if (kernels::avx2_available())
        out.push_back(&kernels::avx2());
#endif
#if defined(__aarch64__)
    out.push_back(&kernels::neon());
#endif
    return out;
}

} // namespace

TEST_CASE("scalar kernel semantics") {
    const auto& kt = kernels::scalar();
    std::vector<double> x{1.0, -2.0, 3.0, -4.0, 5.0};
    CHECK(kt.sum(x.data(), x.size()) == doctest::Approx(3.0));
    CHECK(kt.dot(x.data(), x.data(), x.size()) == doctest::Approx(55.0));

    std::vector<double> y{0.0, 0.0, 0.0, 0.0, 0.0};
    kt.axpy(2.0, x.data(), y.data(), x.size());
    CHECK(y[3] == doctest::Approx(-8.0));

    std::vector<double> out(5);
    kt.lerp(x.data(), y.data(), 0.5, out.data(), x.size());
    CHECK(out[0] == doctest::Approx(1.5));

    // central difference of a linear ramp is exact in the interior
    std::vector<double> ramp{0.0, 1.0, 2.0, 3.0, 4.0};
    kt.diff_central(ramp.data(), out.data(), ramp.size(), 0.5, false);
    for (std::size_t i = 1; i + 1 < ramp.size(); ++i)
        CHECK(out[i] == doctest::Approx(1.0));

    CHECK(kt.pow_sum(x.data(), x.size(), 2.0) == doctest::Approx(55.0));
    CHECK(kt.pow_sum(x.data(), x.size(), 4.0) ==
          doctest::Approx(1.0 + 16.0 + 81.0 + 256.0 + 625.0));
    CHECK(kt.pow_sum(x.data(), x.size(), 3.0) ==
          doctest::Approx(1.0 + 8.0 + 27.0 + 64.0 + 125.0));

    // |0|^0 := 1 so the q = 0 weight ignores u entirely
    std::vector<double> u{0.0, 0.0};
    std::vector<double> v{2.0, 3.0}, w{4.0, 5.0};
    CHECK(kt.wprod_sum(u.data(), v.data(), w.data(), 2, 0.0) ==
          doctest::Approx(23.0));
    // q > 0 kills nodes where u vanishes
    CHECK(kt.wprod_sum(u.data(), v.data(), w.data(), 2, 1.5) == 0.0);
}

TEST_CASE("convolution respects zero padding and wrap-around") {
    const auto& kt = kernels::scalar();
    std::vector<double> in{1.0, 0.0, 0.0, 0.0};
    std::vector<double> taps{0.25, 0.5, 0.25};
    std::vector<double> out(4);
    kt.convolve(in.data(), in.size(), taps.data(), 1, out.data(), false);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] == doctest::Approx(0.25));
    CHECK(out[3] == doctest::Approx(0.0));
    kt.convolve(in.data(), in.size(), taps.data(), 1, out.data(), true);
    CHECK(out[3] == doctest::Approx(0.25)); // wraps
}

TEST_CASE("simd tables match the scalar reference") {
    const auto tables = simd_tables();
    if (tables.empty())
        return; // nothing but scalar on this host
    const auto& ref = kernels::scalar();
    for (const auto* kt : tables) {
        CAPTURE(kt->name);
        for (std::size_t n : {1u, 3u, 7u, 8u, 17u, 64u, 1001u}) {
            rng::Substream gen(rng::mix(0x5eed, n));
            const auto x = random_vec(n, gen);
            const auto y = random_vec(n, gen);
            const auto z = random_vec(n, gen);
            const double tol = 1e-12 * (1.0 + double(n));

            CHECK(std::fabs(kt->sum(x.data(), n) - ref.sum(x.data(), n)) <=
                  tol);
            CHECK(std::fabs(kt->dot(x.data(), y.data(), n) -
                            ref.dot(x.data(), y.data(), n)) <= tol);

            auto y1 = y, y2 = y;
            kt->axpy(1.7, x.data(), y1.data(), n);
            ref.axpy(1.7, x.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(std::fabs(y1[i] - y2[i]) <= 1e-14 * (1.0 + std::fabs(y2[i])));

            std::vector<double> o1(n), o2(n);
            kt->lerp(x.data(), y.data(), 0.3, o1.data(), n);
            ref.lerp(x.data(), y.data(), 0.3, o2.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(std::fabs(o1[i] - o2[i]) <= 1e-14);

            for (bool periodic : {false, true}) {
                kt->diff_central(x.data(), o1.data(), n, 3.7, periodic);
                ref.diff_central(x.data(), o2.data(), n, 3.7, periodic);
                for (std::size_t i = 0; i < n; ++i)
                    CHECK(std::fabs(o1[i] - o2[i]) <= 1e-13);
            }

            if (n >= 7) {
                std::vector<double> taps{0.05, 0.2, 0.5, 0.2, 0.05};
                for (bool periodic : {false, true}) {
                    kt->convolve(x.data(), n, taps.data(), 2, o1.data(),
                                 periodic);
                    ref.convolve(x.data(), n, taps.data(), 2, o2.data(),
                                 periodic);
                    for (std::size_t i = 0; i < n; ++i)
                        CHECK(std::fabs(o1[i] - o2[i]) <= 1e-13);
                }
            }

            for (double p : {2.0, 4.0, 3.3}) {
                const double a = kt->pow_sum(x.data(), n, p);
                const double b = ref.pow_sum(x.data(), n, p);
                CHECK(std::fabs(a - b) <= 1e-12 * (1.0 + std::fabs(b)));
            }
            for (double q : {0.0, 2.0, 1.3}) {
                const double a =
                    kt->wprod_sum(x.data(), y.data(), z.data(), n, q);
                const double b =
                    ref.wprod_sum(x.data(), y.data(), z.data(), n, q);
                CHECK(std::fabs(a - b) <= 1e-12 * (1.0 + std::fabs(b)));
            }
        }
    }
}

TEST_CASE("dispatch honours explicit forcing") {
    const auto restore = kernels::active().name;
    CHECK(kernels::force("scalar") == "scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    CHECK_THROWS_AS(kernels::force("bogus"), ConfigError);
    kernels::force(restore);
}
