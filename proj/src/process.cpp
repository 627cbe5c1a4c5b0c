#include "itokit/process.hpp"

#include "itokit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace itokit::process {
namespace {

bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v))
            return false;
    return true;
}

double euclid(std::span<const double> x) {
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return std::sqrt(s);
}

} // namespace

void Coefficients::validate(std::size_t n_measures) const {
    if (state_dim < 1)
        throw ConfigError("state dimension must be >= 1");
    if (wiener_dim < 0)
        throw ConfigError("wiener dimension must be >= 0");
    if (!jump.empty() && jump.size() != n_measures)
        throw ConfigError("one jump coefficient per driving measure required");
}

std::vector<double> PathRecord::left_limit(std::size_t i) const {
    if (jump_flag[i]) {
        for (const auto& e : events)
            if (e.grid_index == i)
                return e.x_before;
    }
    auto s = state(i);
    return {s.begin(), s.end()};
}

PathRecord simulate(std::span<const double> x0, const Coefficients& coeffs,
                    const DriverSet& drv, const SimOptions& opts) {
    coeffs.validate(drv.measures.size());
    const int M = coeffs.state_dim;
    const int R = coeffs.wiener_dim;
    if (static_cast<int>(x0.size()) != M)
        throw ConfigError("x0 dimension does not match state_dim");
    if (R > 0 && static_cast<std::size_t>(R) > drv.wiener.n_components)
        throw ConfigError("diffusion needs more Wiener components than the "
                          "basis provides");
    if (opts.scheme == Scheme::exact_between_jumps) {
        if (!coeffs.finite_activity || !coeffs.state_independent)
            throw ConfigError("exact-between-jumps requires finite activity "
                              "and state-independent coefficients");
    }
    const drivers::TimeGrid& grid = drv.wiener.grid;
    grid.validate();
    for (const auto& e : drv.jumps.events)
        if (!grid.contains(e.time))
            throw ConfigError("wiener grid must contain every jump time; "
                              "build it with TimeGrid::merged_with");

    PathRecord path;
    path.state_dim = M;
    path.times = grid.points;
    path.x0.assign(x0.begin(), x0.end());
    path.tie_warning = drv.jumps.tie_warning;
    const std::size_t n = grid.points.size();
    path.values.assign(n * M, 0.0);
    path.jump_flag.assign(n, 0);
    path.intervals.resize(n - 1);

    std::vector<double> x(x0.begin(), x0.end());
    std::copy(x.begin(), x.end(), path.values.begin());

    std::vector<double> f(M), g(M * std::max(R, 1)), hval(M);
    std::size_t next_event = 0;

    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double t0 = grid.points[i];
        const double t1 = grid.points[i + 1];
        const double dt = t1 - t0;
        PathInterval& iv = path.intervals[i];
        iv.t0 = t0;
        iv.t1 = t1;
        iv.drift.assign(M, 0.0);
        iv.gdw.assign(M, 0.0);
        iv.sigma.assign(M * M, 0.0);
        iv.compensator.assign(M, 0.0);

        if (coeffs.drift) {
            coeffs.drift(t0, x, f);
            iv.drift = f;
        }
        if (coeffs.diffusion && R > 0) {
            coeffs.diffusion(t0, x, g);
            for (int a = 0; a < M; ++a) {
                double acc = 0.0;
                for (int r = 0; r < R; ++r)
                    acc += g[a * R + r] *
                           drv.wiener.increment(i, static_cast<std::size_t>(r));
                iv.gdw[a] = acc;
            }
            for (int a = 0; a < M; ++a)
                for (int b = 0; b < M; ++b) {
                    double acc = 0.0;
                    for (int r = 0; r < R; ++r)
                        acc += g[a * R + r] * g[b * R + r];
                    iv.sigma[a * M + b] = acc;
                }
        }
        for (std::size_t k = 0; k < coeffs.jump.size(); ++k) {
            const auto& jc = coeffs.jump[k];
            if (!jc.compensated)
                continue;
            for (int a = 0; a < M; ++a) {
                auto integrand = [&](double z) {
                    jc.compensated(t0, z, x, hval);
                    return hval[a];
                };
                const auto mi =
                    drivers::mark_integral(drv.measures[k], integrand);
                iv.compensator[a] += mi.value;
                iv.compensator_se = std::hypot(iv.compensator_se, mi.std_error);
            }
        }

        for (int a = 0; a < M; ++a)
            x[a] += iv.drift[a] * dt + iv.gdw[a] - iv.compensator[a] * dt;

        // Jumps at t1 are applied atomically on top of the continuous step.
        while (next_event < drv.jumps.events.size() &&
               drv.jumps.events[next_event].time == t1) {
            const auto& ev = drv.jumps.events[next_event];
            PathEvent pe;
            pe.grid_index = i + 1;
            pe.time = ev.time;
            pe.mark = ev.mark;
            pe.measure = ev.measure;
            pe.layer = ev.layer;
            pe.x_before = x;
            pe.jump_direct.assign(M, 0.0);
            pe.jump_compensated.assign(M, 0.0);
            if (!coeffs.jump.empty()) {
                const auto& jc = coeffs.jump[ev.measure];
                if (jc.direct) {
                    jc.direct(ev.time, ev.mark, pe.x_before, hval);
                    pe.jump_direct = hval;
                }
                if (jc.compensated) {
                    jc.compensated(ev.time, ev.mark, pe.x_before, hval);
                    pe.jump_compensated = hval;
                }
            }
            for (int a = 0; a < M; ++a)
                x[a] += pe.jump_direct[a] + pe.jump_compensated[a];
            pe.x_after = x;
            path.jump_flag[i + 1] = 1;
            path.events.push_back(std::move(pe));
            ++next_event;
        }

        if (!all_finite(x)) {
            std::ostringstream msg;
            msg << "state became non-finite at t=" << t1;
            throw BlowupError(msg.str(), t1);
        }
        std::copy(x.begin(), x.end(), path.values.begin() + (i + 1) * M);
    }
    return path;
}

void write_csv(std::ostream& os, const PathRecord& path) {
    const int M = path.state_dim;
    os << "t,is_jump";
    for (int a = 0; a < M; ++a)
        os << ",x" << a + 1;
    for (int a = 0; a < M; ++a)
        os << ",left_x" << a + 1;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        os << path.times[i] << ',' << int(path.jump_flag[i]);
        auto s = path.state(i);
        for (int a = 0; a < M; ++a)
            os << ',' << s[a];
        const auto l = path.left_limit(i);
        for (int a = 0; a < M; ++a)
            os << ',' << l[a];
        os << '\n';
    }
}

namespace {

// Integrates lambda(s) mu(dz) over [cutoff, T] on the merged grid, linearly
// interpolating the path state inside each interval. Used for the condition
// estimates, where the integrand must see the true coefficient values at
// the node times (not the frozen per-step values).
double truncated_time_integral(
    const PathRecord& path, double cutoff, quad::Rule rule,
    const std::function<double(double, std::span<const double>)>& node_value) {
    const auto nodes = quad::rule_nodes(rule);
    const auto weights = quad::rule_weights(rule);
    const int M = path.state_dim;
    std::vector<double> xs(M);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double t1 = path.times[i + 1];
        if (t1 <= cutoff)
            continue;
        const double t0 = std::max(path.times[i], cutoff);
        const double dt = t1 - t0;
        if (dt <= 0.0)
            continue;
        // State endpoints for interpolation: left limit convention at the
        // right end (the event at t1 belongs to the next interval).
        const auto xa = path.left_limit(i + 1); // value approaching t1
        auto x_begin = path.state(i);
        const double full = path.times[i + 1] - path.times[i];
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const double s = t0 + nodes[q] * dt;
            const double theta = full > 0.0 ? (s - path.times[i]) / full : 0.0;
            for (int a = 0; a < M; ++a)
                xs[a] = x_begin[a] + theta * (xa[a] - x_begin[a]);
            acc += weights[q] * dt * node_value(s, xs);
        }
    }
    return acc;
}

void detect_divergence(ConditionEstimate& est, double slope_threshold,
                       std::size_t levels_required) {
    est.suspected_divergent = false;
    est.growth_slope = 0.0;
    if (est.cutoffs.size() < levels_required + 1)
        return;
    std::size_t consecutive = 0;
    for (std::size_t j = 0; j + 1 < est.cutoffs.size(); ++j) {
        const double dlog =
            std::log(est.cutoffs[j] / est.cutoffs[j + 1]);
        if (!(dlog > 0.0))
            continue;
        const double slope = (est.values[j + 1] - est.values[j]) / dlog;
        est.growth_slope = slope;
        if (slope > slope_threshold)
            ++consecutive;
        else
            consecutive = 0;
    }
    est.suspected_divergent = consecutive >= levels_required;
}

} // namespace

ConditionReport check_conditions(const Coefficients& coeffs,
                                 const PathRecord& path,
                                 const DriverSet& drv,
                                 const calculus::TestFunction* phi,
                                 const ConditionOptions& opts) {
    coeffs.validate(drv.measures.size());
    const int M = coeffs.state_dim;
    ConditionReport rep;
    std::vector<double> hbar(M), h(M);

    // Orthogonality and essential suprema over realized events, plus probe
    // marks drawn per layer at interval left endpoints.
    auto probe = [&](double t, double z, std::span<const double> xs,
                     std::size_t k) {
        const auto& jc = coeffs.jump[k];
        std::fill(hbar.begin(), hbar.end(), 0.0);
        std::fill(h.begin(), h.end(), 0.0);
        if (jc.direct)
            jc.direct(t, z, xs, hbar);
        if (jc.compensated)
            jc.compensated(t, z, xs, h);
        for (int a = 0; a < M; ++a)
            for (int b = 0; b < M; ++b)
                rep.orthogonality_max = std::max(
                    rep.orthogonality_max, std::fabs(hbar[a] * h[b]));
    };
    if (!coeffs.jump.empty()) {
        for (const auto& ev : path.events) {
            probe(ev.time, ev.mark, ev.x_before,
                  static_cast<std::size_t>(ev.measure));
            rep.esssup_direct =
                std::max(rep.esssup_direct, euclid(ev.jump_direct));
            rep.esssup_compensated =
                std::max(rep.esssup_compensated, euclid(ev.jump_compensated));
            rep.direct_abs_integral += euclid(ev.jump_direct);
        }
        for (std::size_t k = 0; k < drv.measures.size(); ++k) {
            for (std::size_t li = 0; li < drv.measures[k].layers.size();
                 ++li) {
                const auto& layer = drv.measures[k].layers[li];
                if (!layer.sampler || layer.mass == 0.0)
                    continue;
                rng::Substream zs(rng::key(0x70726f62, rng::Stream::scratch,
                                           k, li));
                for (int rep_i = 0; rep_i < 8; ++rep_i) {
                    const double z = layer.sampler(zs);
                    // stride over the grid to keep the probe cheap
                    const std::size_t stride =
                        std::max<std::size_t>(1, path.intervals.size() / 32);
                    for (std::size_t i = 0; i < path.intervals.size();
                         i += stride)
                        probe(path.intervals[i].t0, z, path.state(i), k);
                }
            }
        }
    }
    rep.orthogonality_failed = rep.orthogonality_max > opts.orthogonality_tol;

    // (integrals): running magnitudes of the driving terms.
    for (const auto& iv : path.intervals) {
        const double dt = iv.t1 - iv.t0;
        rep.drift_abs_integral += euclid(iv.drift) * dt;
        double tr = 0.0;
        for (int a = 0; a < M; ++a)
            tr += iv.sigma[a * M + a];
        rep.diffusion_sq_integral += tr * dt;
    }
    for (std::size_t k = 0; k < coeffs.jump.size(); ++k) {
        const auto& jc = coeffs.jump[k];
        if (!jc.compensated)
            continue;
        rep.compensated_sq_integral += truncated_time_integral(
            path, 0.0, opts.rule,
            [&](double s, std::span<const double> xs) {
                auto sq = [&](double z) {
                    jc.compensated(s, z, xs, h);
                    double acc = 0.0;
                    for (int a = 0; a < M; ++a)
                        acc += h[a] * h[a];
                    return acc;
                };
                return drivers::mark_integral(drv.measures[k], sq).value;
            });
    }

    if (!phi)
        return rep;

    // Truncated estimates of the two phi-dependent conditions.
    const double T = path.times.back();
    std::vector<double> cutoffs = opts.cutoffs;
    if (cutoffs.empty()) {
        for (int j = 1; j <= 5; ++j)
            cutoffs.push_back(T * std::pow(4.0, -j));
    }
    std::sort(cutoffs.begin(), cutoffs.end(), std::greater<double>());

    ConditionEstimate first, second;
    first.name = "first_order_square";
    second.name = "second_order_abs";
    first.cutoffs = cutoffs;
    second.cutoffs = cutoffs;
    std::vector<double> a_vec(M);
    for (double cutoff : cutoffs) {
        double v1 = 0.0, v2 = 0.0;
        for (std::size_t k = 0; k < coeffs.jump.size(); ++k) {
            const auto& jc = coeffs.jump[k];
            if (!jc.compensated)
                continue;
            v1 += truncated_time_integral(
                path, cutoff, opts.rule,
                [&](double s, std::span<const double> xs) {
                    auto f1 = [&](double z) {
                        jc.compensated(s, z, xs, a_vec);
                        const double inc =
                            calculus::increment_first(*phi, xs, a_vec);
                        return inc * inc;
                    };
                    return drivers::mark_integral(drv.measures[k], f1).value;
                });
            v2 += truncated_time_integral(
                path, cutoff, opts.rule,
                [&](double s, std::span<const double> xs) {
                    auto f2 = [&](double z) {
                        jc.compensated(s, z, xs, a_vec);
                        return std::fabs(
                            calculus::increment_second(*phi, xs, a_vec));
                    };
                    return drivers::mark_integral(drv.measures[k], f2).value;
                });
        }
        first.values.push_back(v1);
        second.values.push_back(v2);
    }
    detect_divergence(first, opts.slope_threshold, opts.levels_required);
    detect_divergence(second, opts.slope_threshold, opts.levels_required);
    rep.first_order = std::move(first);
    rep.second_order = std::move(second);
    return rep;
}

} // namespace itokit::process
