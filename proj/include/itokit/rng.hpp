#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace itokit::rng {

// SplitMix64 finalizer. Used to derive substream keys from (seed, indices)
// so that every (purpose, measure, layer, replica, component) tuple gets an
// independent, reproducible stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + splitmix64(b)));
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                         std::uint64_t d) {
    return mix(mix(a, b, c), d);
}

// Stream purposes. Keys derived from distinct purposes never collide with
// each other regardless of the other indices.
enum class Stream : std::uint64_t {
    wiener = 0x57,
    jump_count = 0x4a,
    jump_time = 0x4b,
    jump_mark = 0x4c,
    mark_mc = 0x4d,
    replica = 0x52,
    scratch = 0x5a,
};

inline std::uint64_t key(std::uint64_t seed, Stream s) {
    return mix(seed, static_cast<std::uint64_t>(s));
}
inline std::uint64_t key(std::uint64_t seed, Stream s, std::uint64_t i) {
    return mix(seed, static_cast<std::uint64_t>(s), i);
}
inline std::uint64_t key(std::uint64_t seed, Stream s, std::uint64_t i,
                         std::uint64_t j) {
    return mix(seed, static_cast<std::uint64_t>(s), i, j);
}

// Deterministic substream. Distributions are implemented by hand on top of
// the raw 64-bit output, so sequences are bit-identical across standard
// library implementations (std::normal_distribution is not portable).
class Substream {
public:
    explicit Substream(std::uint64_t k) : eng_(k) {}

    // Uniform on the open interval (0,1); never returns 0, so -log(u) is safe.
    double uniform() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal via Box-Muller; the second draw of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double exponential() { return -std::log(uniform()); }

    // Poisson count by summing exponential inter-arrival times. O(lambda);
    // intended for the moderate layer masses this library simulates.
    std::uint64_t poisson(double lambda) {
        if (lambda <= 0.0)
            return 0;
        std::uint64_t n = 0;
        double acc = exponential();
        while (acc < lambda) {
            ++n;
            acc += exponential();
        }
        return n;
    }

    std::uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace itokit::rng
