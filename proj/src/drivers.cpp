#include "itokit/drivers.hpp"

#include "itokit/errors.hpp"
#include "itokit/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace itokit::drivers {

TimeGrid TimeGrid::uniform(double horizon, std::size_t n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ConfigError("time grid horizon must be positive and finite");
    if (n_steps == 0)
        throw ConfigError("time grid needs at least one step");
    TimeGrid g;
    g.horizon = horizon;
    g.base_steps = n_steps;
    g.points.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        g.points[i] = horizon * static_cast<double>(i) /
                      static_cast<double>(n_steps);
    g.points.back() = horizon;
    return g;
}

TimeGrid TimeGrid::merged_with(std::span<const double> times) const {
    validate();
    TimeGrid g;
    g.horizon = horizon;
    g.base_steps = base_steps;
    g.points = points;
    for (double t : times) {
        if (!(t > 0.0) || t > horizon || !std::isfinite(t))
            throw ConfigError("merged time outside (0, horizon]");
        g.points.push_back(t);
    }
    std::sort(g.points.begin(), g.points.end());
    g.points.erase(std::unique(g.points.begin(), g.points.end()),
                   g.points.end());
    return g;
}

double TimeGrid::max_spacing() const {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        m = std::max(m, points[i + 1] - points[i]);
    return m;
}

bool TimeGrid::contains(double t, double tol) const {
    auto it = std::lower_bound(points.begin(), points.end(), t - tol);
    return it != points.end() && std::fabs(*it - t) <= tol;
}

void TimeGrid::validate() const {
    if (points.size() < 2)
        throw ConfigError("time grid must have at least two points");
    if (points.front() != 0.0 || points.back() != horizon)
        throw ConfigError("time grid must span [0, horizon]");
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        if (!(points[i] < points[i + 1]))
            throw ConfigError("time grid points must be strictly increasing");
}

WienerBasis sample_wiener(const TimeGrid& grid, std::size_t n_components,
                          std::uint64_t seed) {
    grid.validate();
    if (n_components == 0)
        throw ConfigError("wiener basis needs at least one component");
    WienerBasis w;
    w.grid = grid;
    w.n_components = n_components;
    w.seed = seed;
    const std::size_t steps = grid.steps();
    w.increments.resize(steps * n_components);
    for (std::size_t r = 0; r < n_components; ++r) {
        rng::Substream s(rng::key(seed, rng::Stream::wiener, r));
        for (std::size_t i = 0; i < steps; ++i) {
            const double dt = grid.points[i + 1] - grid.points[i];
            w.increments[i * n_components + r] = std::sqrt(dt) * s.normal();
        }
    }
    return w;
}

WienerBasis WienerBasis::coarsened(const TimeGrid& coarse) const {
    coarse.validate();
    WienerBasis out;
    out.grid = coarse;
    out.n_components = n_components;
    out.seed = seed;
    out.increments.assign(coarse.steps() * n_components, 0.0);
    std::size_t fine = 0;
    for (std::size_t c = 0; c < coarse.steps(); ++c) {
        const double t1 = coarse.points[c + 1];
        while (fine < grid.steps() && grid.points[fine + 1] <= t1) {
            for (std::size_t r = 0; r < n_components; ++r)
                out.increments[c * n_components + r] +=
                    increments[fine * n_components + r];
            ++fine;
        }
        if (grid.points[fine] != t1)
            throw ConfigError("coarse grid is not a subset of the fine grid");
    }
    return out;
}

double MarkMeasure::total_mass(std::size_t n_layers) const {
    double m = 0.0;
    for (std::size_t i = 0; i < std::min(n_layers, layers.size()); ++i)
        m += layers[i].mass;
    return m;
}

void MarkMeasure::validate() const {
    for (const auto& l : layers) {
        if (!(l.mass >= 0.0) || !std::isfinite(l.mass))
            throw ConfigError("mark layer mass must be finite and >= 0");
    }
}

MarkMeasure MarkMeasure::dirac(double z0, double mass) {
    MarkMeasure m;
    MarkLayer l;
    l.mass = mass;
    l.label = "dirac";
    l.atom = z0;
    l.sampler = [z0](rng::Substream&) { return z0; };
    l.analytic = [z0, mass](const std::function<double(double)>& f) {
        return mass * f(z0);
    };
    m.layers.push_back(std::move(l));
    return m;
}

MarkMeasure MarkMeasure::uniform(double a, double b, double mass,
                                 bool analytic) {
    if (!(b > a))
        throw ConfigError("uniform mark layer needs b > a");
    MarkMeasure m;
    MarkLayer l;
    l.mass = mass;
    l.label = "uniform";
    l.sampler = [a, b](rng::Substream& s) { return s.uniform(a, b); };
    if (analytic) {
        l.analytic = [a, b, mass](const std::function<double(double)>& f) {
            // density mass/(b-a); 5-point Gauss per panel, 32 panels
            const auto nodes = quad::rule_nodes(quad::Rule::gauss5);
            const auto wts = quad::rule_weights(quad::Rule::gauss5);
            const int panels = 32;
            const double h = (b - a) / panels;
            double acc = 0.0;
            for (int p = 0; p < panels; ++p) {
                const double x0 = a + p * h;
                for (std::size_t q = 0; q < nodes.size(); ++q)
                    acc += wts[q] * f(x0 + nodes[q] * h);
            }
            return acc * h * mass / (b - a);
        };
    }
    m.layers.push_back(std::move(l));
    return m;
}

MarkIntegral mark_integral(const MarkMeasure& measure,
                           const std::function<double(double)>& integrand,
                           std::size_t n_layers) {
    measure.validate();
    MarkIntegral out;
    const std::size_t nl = std::min(n_layers, measure.layers.size());
    for (std::size_t li = 0; li < nl; ++li) {
        const MarkLayer& layer = measure.layers[li];
        if (layer.mass == 0.0)
            continue;
        if (layer.analytic) {
            out.value += layer.analytic(integrand);
            continue;
        }
        if (!layer.sampler)
            throw UnsupportedMeasureError(
                "mark layer '" + layer.label +
                "' has neither an analytic integral nor a sampler");
        // Fixed-substream Monte-Carlo quadrature: same points every call.
        rng::Substream s(rng::key(measure.mc_seed, rng::Stream::mark_mc, li));
        const std::size_t n = std::max<std::size_t>(measure.mc_samples, 2);
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = integrand(layer.sampler(s));
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / static_cast<double>(n);
        const double var =
            std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
        out.value += layer.mass * mean;
        const double se_mean = std::sqrt(var / static_cast<double>(n));
        out.std_error = std::hypot(out.std_error, layer.mass * se_mean);
    }
    return out;
}

MarkIntegral mark_integral(const MarkMeasure& measure,
                           const std::function<double(double)>& integrand) {
    return mark_integral(measure, integrand, measure.layers.size());
}

JumpStream sample_jumps(std::span<const MarkMeasure> measures, double horizon,
                        std::span<const std::size_t> n_layers,
                        std::uint64_t seed) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ConfigError("jump stream horizon must be positive and finite");
    if (n_layers.size() != measures.size())
        throw ConfigError("one layer count per measure required");
    JumpStream out;
    out.horizon = horizon;
    out.seed = seed;
    for (std::size_t k = 0; k < measures.size(); ++k) {
        measures[k].validate();
        if (n_layers[k] > measures[k].layers.size())
            throw ConfigError("layer count exceeds available layers");
        for (std::size_t li = 0; li < n_layers[k]; ++li) {
            const MarkLayer& layer = measures[k].layers[li];
            if (!std::isfinite(layer.mass))
                throw ConfigError("layer mass must be finite");
            if (layer.mass == 0.0)
                continue;
            if (!layer.sampler)
                throw UnsupportedMeasureError(
                    "mark layer '" + layer.label + "' cannot be sampled");
            rng::Substream count_s(
                rng::key(seed, rng::Stream::jump_count, k, li));
            rng::Substream time_s(
                rng::key(seed, rng::Stream::jump_time, k, li));
            rng::Substream mark_s(
                rng::key(seed, rng::Stream::jump_mark, k, li));
            const std::uint64_t n = count_s.poisson(layer.mass * horizon);
            for (std::uint64_t i = 0; i < n; ++i) {
                JumpEvent e;
                // uniform() is open on (0,1), so times land in (0,T)
                e.time = horizon * time_s.uniform();
                e.mark = layer.sampler(mark_s);
                e.measure = static_cast<int>(k);
                e.layer = static_cast<int>(li);
                out.events.push_back(e);
            }
        }
    }
    std::sort(out.events.begin(), out.events.end(),
              [](const JumpEvent& a, const JumpEvent& b) {
                  if (a.time != b.time)
                      return a.time < b.time;
                  if (a.measure != b.measure)
                      return a.measure < b.measure;
                  return a.layer < b.layer;
              });
    for (std::size_t i = 0; i + 1 < out.events.size(); ++i)
        if (out.events[i].time == out.events[i + 1].time)
            out.tie_warning = true;
    return out;
}

JumpStream sample_jumps(std::span<const MarkMeasure> measures, double horizon,
                        std::uint64_t seed) {
    std::vector<std::size_t> all(measures.size());
    for (std::size_t k = 0; k < measures.size(); ++k)
        all[k] = measures[k].layers.size();
    return sample_jumps(measures, horizon, all, seed);
}

std::vector<double> JumpStream::times() const {
    std::vector<double> t;
    t.reserve(events.size());
    for (const auto& e : events)
        t.push_back(e.time);
    return t;
}

void write_csv(std::ostream& os, const JumpStream& stream) {
    os << "time,mark,measure_k,layer_n\n";
    os.precision(17);
    for (const auto& e : stream.events)
        os << e.time << ',' << e.mark << ',' << e.measure << ',' << e.layer
           << '\n';
}

} // namespace itokit::drivers
