#pragma once

#include "itokit/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace itokit::drivers {

// Sorted time grid on [0,T]. Construct uniform, then merge in jump times.
struct TimeGrid {
    double horizon = 0.0;
    std::size_t base_steps = 0; // resolution of the uniform skeleton
    std::vector<double> points; // strictly increasing, points.front()==0,
                                // points.back()==horizon

    static TimeGrid uniform(double horizon, std::size_t n_steps);

    // New grid containing this grid's points plus the given times
    // (deduplicated). Times outside (0,horizon) are rejected.
    TimeGrid merged_with(std::span<const double> times) const;

    std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
    double max_spacing() const;
    bool contains(double t, double tol = 0.0) const;
    void validate() const;
};

// Finite truncation of the driving Wiener sequence, realized as per-step
// increments on a grid. Component r draws from its own substream keyed by
// (seed, Stream::wiener, r), so enlarging n_components keeps the existing
// components' increments unchanged.
struct WienerBasis {
    TimeGrid grid;
    std::size_t n_components = 0;
    std::uint64_t seed = 0;
    std::vector<double> increments; // steps x n_components, row-major

    double increment(std::size_t step, std::size_t component) const {
        return increments[step * n_components + component];
    }

    // Sums increments onto a coarser grid whose points are a subset of this
    // grid's points. Used by refinement studies to keep one Brownian path
    // across step sizes.
    WienerBasis coarsened(const TimeGrid& coarse) const;
};

WienerBasis sample_wiener(const TimeGrid& grid, std::size_t n_components,
                          std::uint64_t seed);

// One finite-mass slab Z_n \ Z_{n-1} of a sigma-finite mark measure:
// a sampler for marks plus the slab's total mass. The optional analytic
// integral evaluates integrands against the slab measure exactly.
struct MarkLayer {
    double mass = 0.0;
    std::function<double(rng::Substream&)> sampler; // draws one mark
    std::function<double(const std::function<double(double)>&)> analytic;
    std::optional<double> atom; // set when the layer is a point mass
    std::string label;
};

struct MarkIntegral {
    double value = 0.0;
    double std_error = 0.0; // zero when every layer integrated analytically
};

// Mark measure realized as explicit disjoint layers. mc_seed/mc_samples
// control the fixed-substream Monte-Carlo fallback of mark_integral.
struct MarkMeasure {
    std::vector<MarkLayer> layers;
    std::uint64_t mc_seed = 0x6d63;
    std::size_t mc_samples = 4096;

    double total_mass(std::size_t n_layers) const;
    void validate() const;

    // Dirac mass at z0 (analytic integral supplied).
    static MarkMeasure dirac(double z0, double mass = 1.0);
    // Uniform marks on [a,b] with given total mass. By default it has no
    // analytic form, so mark_integral falls back to Monte-Carlo; pass
    // analytic=true to attach Gauss-Legendre integration instead.
    static MarkMeasure uniform(double a, double b, double mass,
                               bool analytic = false);
};

MarkIntegral mark_integral(const MarkMeasure& measure,
                           const std::function<double(double)>& integrand,
                           std::size_t n_layers);
MarkIntegral mark_integral(const MarkMeasure& measure,
                           const std::function<double(double)>& integrand);

// One realized jump of one Poisson random measure.
struct JumpEvent {
    double time = 0.0;
    double mark = 0.0;
    int measure = 0; // index k of the driving measure
    int layer = 0;   // truncation layer the mark came from
};

// Realized Poisson random measures on (0,T], merged over measures and
// layers, sorted by (time, measure). Per (measure, layer), the event count,
// times and marks come from substreams keyed by (seed, purpose, k, layer),
// which makes the stream for n_layers = m a sub-multiset of the stream for
// n_layers = m+1 under the same seed.
struct JumpStream {
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::vector<JumpEvent> events;
    bool tie_warning = false; // coincident times were ordered by measure index

    std::vector<double> times() const;
};

JumpStream sample_jumps(std::span<const MarkMeasure> measures, double horizon,
                        std::span<const std::size_t> n_layers,
                        std::uint64_t seed);
// All layers of every measure.
JumpStream sample_jumps(std::span<const MarkMeasure> measures, double horizon,
                        std::uint64_t seed);

void write_csv(std::ostream& os, const JumpStream& stream);

} // namespace itokit::drivers
