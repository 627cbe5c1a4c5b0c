#include "itokit/lpcalculus.hpp"

#include "itokit/errors.hpp"
#include "itokit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace itokit::lpfield {
namespace {

using kernels::Table;


// |u|^{p-2} u . v reduced over nodes, M components interleaved.
// For M = 1 this is a single kernel call.
double weighted_pair(const Table& kt, const Field& u, const Field& v,
                     double p) {
    if (u.comps == 1)
        return kt.wprod_sum(u.data(), u.data(), v.data(), u.values.size(),
                            p - 2.0);
    const std::size_t n = u.grid.nodes();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r2 = 0.0, dot = 0.0;
        for (int c = 0; c < u.comps; ++c) {
            r2 += u.at(i, c) * u.at(i, c);
            dot += u.at(i, c) * v.at(i, c);
        }
        const double r = std::sqrt(r2);
        const double w = (p == 2.0) ? 1.0
                         : (r == 0.0 ? 0.0 : std::pow(r, p - 2.0));
        acc += w * dot;
    }
    return acc;
}

// |u|^{p-2} s(x) reduced over nodes for a scalar weight field s.
double weighted_scalar(const Table& kt, const Field& u, const Field& s,
                       double p) {
    if (u.comps == 1) {
        // v = s, w = 1 via wprod with ones is wasteful; use pow-weight on u
        // against s with w-slot set to s and v-slot all ones instead.
        static thread_local std::vector<double> ones;
        if (ones.size() < u.values.size())
            ones.assign(u.values.size(), 1.0);
        return kt.wprod_sum(u.data(), s.data(), ones.data(), u.values.size(),
                            p - 2.0);
    }
    const std::size_t n = u.grid.nodes();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r2 = 0.0;
        for (int c = 0; c < u.comps; ++c)
            r2 += u.at(i, c) * u.at(i, c);
        const double r = std::sqrt(r2);
        const double w = (p == 2.0) ? 1.0
                         : (r == 0.0 ? 0.0 : std::pow(r, p - 2.0));
        acc += w * s.at(i, 0);
    }
    return acc;
}

// Memoizing coefficient evaluator shared by the stepper and the ledger, so
// both sides integrate bitwise-identical frozen fields.
struct CoeffCache {
    const LpCoefficients& c;
    const LpDriverSet& d;
    const Grid& grid;
    double kappa_se = 0.0;

    CoeffCache(const LpCoefficients& c_, const LpDriverSet& d_,
               const Grid& g_)
        : c(c_), d(d_), grid(g_) {}

    Field free_drift(double t) {
        if (!c.free_drift)
            return Field::zeros(grid, c.comps);
        if (!c.time_invariant)
            return c.free_drift(t);
        if (!f0_)
            f0_ = c.free_drift(0.0);
        return *f0_;
    }

    Field div_drift(double t, int k) {
        if (c.div_drift.empty() || !c.div_drift[std::size_t(k)])
            return Field::zeros(grid, c.comps);
        if (!c.time_invariant)
            return c.div_drift[std::size_t(k)](t);
        if (fk_.empty())
            fk_.resize(c.div_drift.size());
        if (!fk_[std::size_t(k)])
            fk_[std::size_t(k)] = c.div_drift[std::size_t(k)](0.0);
        return *fk_[std::size_t(k)];
    }

    Field diffusion(double t, int r) {
        if (!c.diffusion)
            return Field::zeros(grid, c.comps);
        if (!c.time_invariant)
            return c.diffusion(t, r);
        if (g_.empty())
            g_.resize(std::size_t(c.wiener_dim));
        if (!g_[std::size_t(r)])
            g_[std::size_t(r)] = c.diffusion(0.0, r);
        return *g_[std::size_t(r)];
    }

    // sum_{i,r} g^{ir}(x)^2 (scalar field), the trace of the Gaussian
    // quadratic terms.
    Field diffusion_sq(double t) {
        if (c.time_invariant && g2_)
            return *g2_;
        Field s = Field::zeros(grid, 1);
        const std::size_t nodes = grid.nodes();
        for (int r = 0; r < c.wiener_dim; ++r) {
            const Field g = diffusion(t, r);
            for (std::size_t node = 0; node < nodes; ++node)
                for (int cc = 0; cc < c.comps; ++cc)
                    s.values[node] += g.at(node, cc) * g.at(node, cc);
        }
        if (c.time_invariant)
            g2_ = s;
        return s;
    }

    Field compensator(double t) {
        if (c.time_invariant && kappa_)
            return *kappa_;
        Field k = compute_compensator(t);
        if (c.time_invariant)
            kappa_ = k;
        return k;
    }

private:
    Field compute_compensator(double t) {
        if (c.jump_compensator)
            return c.jump_compensator(t);
        Field k = Field::zeros(grid, c.comps);
        if (!c.jump_amplitude)
            return k;
        for (std::size_t li = 0; li < d.measure.layers.size(); ++li) {
            const auto& layer = d.measure.layers[li];
            if (layer.mass == 0.0)
                continue;
            if (layer.atom) {
                const Field h = c.jump_amplitude(t, *layer.atom);
                for (std::size_t i = 0; i < k.values.size(); ++i)
                    k.values[i] += layer.mass * h.values[i];
                continue;
            }
            if (!layer.sampler)
                throw UnsupportedMeasureError(
                    "mark layer '" + layer.label +
                    "' has neither an atom nor a sampler");
            // fixed-substream Monte-Carlo average of the amplitude field
            rng::Substream s(
                rng::key(d.measure.mc_seed, rng::Stream::mark_mc, li));
            const std::size_t nmc = std::max<std::size_t>(d.mc_field_samples, 2);
            Field mean = Field::zeros(grid, c.comps);
            Field sq = Field::zeros(grid, 1);
            for (std::size_t m = 0; m < nmc; ++m) {
                const Field h = c.jump_amplitude(t, layer.sampler(s));
                for (std::size_t i = 0; i < mean.values.size(); ++i)
                    mean.values[i] += h.values[i];
                for (std::size_t node = 0; node < grid.nodes(); ++node) {
                    double r2 = 0.0;
                    for (int cc = 0; cc < c.comps; ++cc)
                        r2 += h.at(node, cc) * h.at(node, cc);
                    sq.values[node] += r2;
                }
            }
            double var_bar = 0.0;
            for (std::size_t node = 0; node < grid.nodes(); ++node) {
                double m2 = 0.0;
                for (int cc = 0; cc < c.comps; ++cc) {
                    const double mu = mean.at(node, cc) / double(nmc);
                    m2 += mu * mu;
                }
                var_bar = std::max(
                    var_bar, sq.values[node] / double(nmc) - m2);
            }
            kappa_se = std::max(
                kappa_se, layer.mass * std::sqrt(std::max(0.0, var_bar) /
                                                 double(nmc)));
            for (std::size_t i = 0; i < k.values.size(); ++i)
                k.values[i] += layer.mass * mean.values[i] / double(nmc);
        }
        return k;
    }

    std::optional<Field> f0_, kappa_, g2_;
    std::vector<std::optional<Field>> fk_, g_;
};

} // namespace

void LpCoefficients::validate(const Grid& grid) const {
    grid.validate();
    if (comps < 1)
        throw ConfigError("field equation needs comps >= 1");
    if (wiener_dim < 0)
        throw ConfigError("wiener dimension must be >= 0");
    if (!div_drift.empty() &&
        div_drift.size() != static_cast<std::size_t>(grid.dim))
        throw ConfigError("one divergence drift component per axis required");
}

const Field& LpPathRecord::left_limit(std::size_t i) const {
    if (i < jump_flag.size() && jump_flag[i]) {
        for (const auto& e : events)
            if (e.grid_index == i)
                return e.state_before;
    }
    return states[i];
}

LpPathRecord simulate_lp(const Field& psi, const LpCoefficients& coeffs,
                         const LpDriverSet& drv, const LpSimOptions&) {
    coeffs.validate(psi.grid);
    if (psi.comps != coeffs.comps)
        throw ConfigError("initial field has wrong component count");
    if (coeffs.wiener_dim > 0 &&
        static_cast<std::size_t>(coeffs.wiener_dim) > drv.wiener.n_components)
        throw ConfigError("diffusion needs more Wiener components than the "
                          "basis provides");
    const drivers::TimeGrid& tgrid = drv.wiener.grid;
    tgrid.validate();
    for (const auto& e : drv.jumps.events)
        if (!tgrid.contains(e.time))
            throw ConfigError("wiener grid must contain every jump time");

    CoeffCache cache(coeffs, drv, psi.grid);
    const auto& kt = kernels::active();
    LpPathRecord path;
    path.grid = psi.grid;
    path.comps = psi.comps;
    path.times = tgrid.points;
    path.jump_flag.assign(tgrid.points.size(), 0);
    path.states.reserve(tgrid.points.size());
    path.states.push_back(psi);

    Field u = psi;
    std::size_t next_event = 0;
    const std::size_t nvals = u.values.size();
    for (std::size_t i = 0; i + 1 < tgrid.points.size(); ++i) {
        const double t0 = tgrid.points[i];
        const double t1 = tgrid.points[i + 1];
        const double dt = t1 - t0;

        Field step = cache.free_drift(t0);
        for (int k = 0; k < psi.grid.dim; ++k) {
            if (coeffs.div_drift.empty() ||
                !coeffs.div_drift[std::size_t(k)])
                continue;
            const Field fk = cache.div_drift(t0, k);
            const Field dfk = discrete_gradient(fk, k);
            kt.axpy(1.0, dfk.data(), step.data(), nvals);
        }
        if (coeffs.jump_amplitude || coeffs.jump_compensator) {
            const Field kap = cache.compensator(t0);
            kt.axpy(-1.0, kap.data(), step.data(), nvals);
        }
        kt.axpy(dt, step.data(), u.data(), nvals);
        for (int r = 0; r < coeffs.wiener_dim; ++r) {
            const Field g = cache.diffusion(t0, r);
            kt.axpy(drv.wiener.increment(i, std::size_t(r)), g.data(),
                    u.data(), nvals);
        }

        while (next_event < drv.jumps.events.size() &&
               drv.jumps.events[next_event].time == t1) {
            const auto& ev = drv.jumps.events[next_event];
            LpEvent e;
            e.grid_index = i + 1;
            e.time = ev.time;
            e.mark = ev.mark;
            e.layer = ev.layer;
            e.state_before = u;
            e.amplitude = coeffs.jump_amplitude
                              ? coeffs.jump_amplitude(ev.time, ev.mark)
                              : Field::zeros(psi.grid, psi.comps);
            kt.axpy(1.0, e.amplitude.data(), u.data(), nvals);
            path.jump_flag[i + 1] = 1;
            path.events.push_back(std::move(e));
            ++next_event;
        }

        for (double v : u.values)
            if (!std::isfinite(v))
                throw BlowupError("field became non-finite at t=" +
                                      std::to_string(t1),
                                  t1);
        path.states.push_back(u);
    }
    path.compensator_se = cache.kappa_se;
    return path;
}

double LpLedger::rhs_total(std::size_t i) const {
    double rhs = 0.0;
    for (const auto& t : terms)
        rhs += t[i];
    return rhs;
}

double LpLedger::term_scale() const {
    double s = 1.0;
    for (const auto& t : terms)
        s += std::fabs(t.back());
    return s;
}

double LpLedger::max_group_mismatch() const {
    double worst = 0.0;
    for (std::size_t g = 0; g < group_names.size(); ++g) {
        const double a = general_groups[g], b = scalar_groups[g];
        worst = std::max(worst,
                         std::fabs(a - b) / (1.0 + std::fabs(a) +
                                             std::fabs(b)));
    }
    return worst;
}

LpLedger ledger_lp(const LpPathRecord& path, const LpCoefficients& coeffs,
                   const LpDriverSet& drv, double p,
                   const LpLedgerOptions& opts) {
    if (p < 2.0)
        throw ConfigError("L_p formula requires p >= 2");
    coeffs.validate(path.grid);
    const auto& kt = kernels::active();
    CoeffCache cache(coeffs, drv, path.grid);
    const std::size_t n = path.times.size();
    const double vol = path.grid.cell_volume();
    const int dim = path.grid.dim;
    const std::size_t nvals = path.states[0].values.size();
    const bool scalar_route = path.comps == 1;

    LpLedger out;
    out.p = p;
    out.rule = opts.rule;
    out.times = path.times;
    out.term_names = {"dw_power",        "ds_free_drift",
                      "ds_div_gradient", "ds_div_excess",
                      "ds_gauss_excess", "ds_gauss_trace",
                      "jump_linear_compensated", "jump_remainder"};
    enum { T_DW, T_F0, T_DIVG, T_DIVX, T_GX, T_GTR, T_JLIN, T_JREM };
    std::vector<std::vector<double>> inc(out.term_names.size(),
                                         std::vector<double>(n, 0.0));
    std::vector<double> budget_inc(n, 0.0);
    // scalar-route accumulators: dw, drift group, gauss group, jump linear,
    // jump remainder
    double s_dw = 0.0, s_drift = 0.0, s_gauss = 0.0, s_jlin = 0.0,
           s_jrem = 0.0;

    const auto main_nodes = quad::rule_nodes(opts.rule);
    const auto main_wts = quad::rule_weights(opts.rule);
    const auto emb_nodes = quad::rule_nodes(quad::embedded_rule(opts.rule));
    const auto emb_wts = quad::rule_weights(quad::embedded_rule(opts.rule));

    Field uq = Field::zeros(path.grid, path.comps);
    std::vector<Field> gq; // lerped gradients of u along each axis
    for (int k = 0; k < dim; ++k)
        gq.push_back(Field::zeros(path.grid, path.comps));

    const bool have_div = !coeffs.div_drift.empty();
    const bool have_g = coeffs.wiener_dim > 0 && coeffs.diffusion != nullptr;
    const bool have_jump = coeffs.jump_amplitude != nullptr ||
                           coeffs.jump_compensator != nullptr;

    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double t0 = path.times[i];
        const double dt = path.times[i + 1] - t0;
        const Field& u0 = path.state(i);
        const Field& u1 = path.left_limit(i + 1);

        // frozen coefficient fields for this step
        const Field f0 = cache.free_drift(t0);
        std::vector<Field> fk, du0, du1;
        if (have_div)
            for (int k = 0; k < dim; ++k) {
                fk.push_back(cache.div_drift(t0, k));
                du0.push_back(discrete_gradient(u0, k));
                du1.push_back(discrete_gradient(u1, k));
            }
        Field g2 = have_g ? cache.diffusion_sq(t0)
                          : Field::zeros(path.grid, 1);
        std::vector<Field> gs; // per-component diffusion fields, for the
                               // (p-2)-weighted excess with M > 1
        if (have_g && p != 2.0 && !scalar_route)
            for (int r = 0; r < coeffs.wiener_dim; ++r)
                gs.push_back(cache.diffusion(t0, r));
        Field kap = have_jump ? cache.compensator(t0)
                              : Field::zeros(path.grid, path.comps);

        // dw term at the left endpoint (predictable)
        if (have_g) {
            Field gdw = Field::zeros(path.grid, path.comps);
            for (int r = 0; r < coeffs.wiener_dim; ++r) {
                const Field g = cache.diffusion(t0, r);
                kt.axpy(drv.wiener.increment(i, std::size_t(r)), g.data(),
                        gdw.data(), nvals);
            }
            const double v = p * vol * weighted_pair(kt, u0, gdw, p);
            inc[T_DW][i + 1] += v;
            s_dw += v;
        }

        // time quadrature of the ds terms; embedded rule charged to budget
        struct DsAcc {
            double f0 = 0, divg = 0, divx = 0, gx = 0, gtr = 0, jlin = 0;
            double s_drift = 0, s_gauss = 0;
        };
        auto eval_at = [&](double theta, DsAcc& acc, double w) {
            kt.lerp(u0.data(), u1.data(), theta, uq.data(), nvals);
            for (int k = 0; have_div && k < dim; ++k)
                kt.lerp(du0[std::size_t(k)].data(),
                        du1[std::size_t(k)].data(), theta,
                        gq[std::size_t(k)].data(), nvals);
            if (coeffs.free_drift) {
                const double v = p * vol * weighted_pair(kt, uq, f0, p);
                acc.f0 += w * v;
                acc.s_drift += w * v;
            }
            for (int k = 0; have_div && k < dim; ++k) {
                if (!coeffs.div_drift[std::size_t(k)])
                    continue;
                // -p |u|^{p-2} f^k . D_k u
                double grad_part;
                if (scalar_route) {
                    grad_part = kt.wprod_sum(uq.data(), gq[std::size_t(k)].data(),
                                             fk[std::size_t(k)].data(), nvals,
                                             p - 2.0);
                } else {
                    grad_part = 0.0;
                    for (std::size_t node = 0; node < path.grid.nodes();
                         ++node) {
                        double r2 = 0.0, dot = 0.0;
                        for (int c = 0; c < path.comps; ++c) {
                            r2 += uq.at(node, c) * uq.at(node, c);
                            dot += gq[std::size_t(k)].at(node, c) *
                                   fk[std::size_t(k)].at(node, c);
                        }
                        const double r = std::sqrt(r2);
                        const double wgt =
                            (p == 2.0) ? 1.0
                            : (r == 0.0 ? 0.0 : std::pow(r, p - 2.0));
                        grad_part += wgt * dot;
                    }
                }
                acc.divg += w * (-p * vol * grad_part);
                // -(p/2)(p-2) |u|^{p-4} u^i f^{ik} D_k |u|^2, with
                // D_k |u|^2 = 2 u . D_k u and |u|^{p-4} u ... factored
                // through unit vectors
                if (p != 2.0) {
                    // -(p/2)(p-2) |u|^{p-4} u^i f^{ik} D_k|u|^2 with
                    // D_k|u|^2 = 2 u . D_k u; for M = 1 the integrand
                    // collapses to (p-2) times the gradient part.
                    double v;
                    if (scalar_route) {
                        v = -p * (p - 2.0) * vol * grad_part;
                    } else {
                        double excess = 0.0;
                        for (std::size_t node = 0; node < path.grid.nodes();
                             ++node) {
                            double r2 = 0.0, uf = 0.0, udu = 0.0;
                            for (int c = 0; c < path.comps; ++c) {
                                r2 += uq.at(node, c) * uq.at(node, c);
                                uf += uq.at(node, c) *
                                      fk[std::size_t(k)].at(node, c);
                                udu += uq.at(node, c) *
                                       gq[std::size_t(k)].at(node, c);
                            }
                            if (r2 == 0.0)
                                continue;
                            const double r = std::sqrt(r2);
                            const double wgt = std::pow(r, p - 2.0);
                            excess += wgt * (uf / r) * (udu / r) * 2.0;
                        }
                        v = -0.5 * p * (p - 2.0) * vol * excess;
                    }
                    acc.divx += w * v;
                }
                if (scalar_route)
                    acc.s_drift += w * (-p * (p - 1.0) * vol * grad_part);
            }
            if (have_g) {
                const double trace_part = weighted_scalar(kt, uq, g2, p);
                acc.gtr += w * (0.5 * p * vol * trace_part);
                if (p != 2.0) {
                    double ex;
                    if (scalar_route) {
                        // |u|^{p-4} |u g|^2 = |u|^{p-2} g^2 for M = 1
                        ex = trace_part;
                    } else {
                        ex = 0.0;
                        for (std::size_t node = 0; node < path.grid.nodes();
                             ++node) {
                            double r2 = 0.0;
                            for (int c = 0; c < path.comps; ++c)
                                r2 += uq.at(node, c) * uq.at(node, c);
                            if (r2 == 0.0)
                                continue;
                            double dsum = 0.0;
                            for (const auto& g : gs) {
                                double d = 0.0;
                                for (int c = 0; c < path.comps; ++c)
                                    d += uq.at(node, c) * g.at(node, c);
                                dsum += d * d;
                            }
                            ex += std::pow(std::sqrt(r2), p - 2.0) * dsum / r2;
                        }
                    }
                    acc.gx += w * (0.5 * p * (p - 2.0) * vol * ex);
                }
                acc.s_gauss += w * (0.5 * p * (p - 1.0) * vol * trace_part);
            }
            if (have_jump) {
                const double v = -p * vol * weighted_pair(kt, uq, kap, p);
                acc.jlin += w * v;
            }
        };

        DsAcc main_acc, emb_acc;
        for (std::size_t q = 0; q < main_nodes.size(); ++q)
            eval_at(main_nodes[q], main_acc, main_wts[q]);
        for (std::size_t q = 0; q < emb_nodes.size(); ++q)
            eval_at(emb_nodes[q], emb_acc, emb_wts[q]);

        inc[T_F0][i + 1] += main_acc.f0 * dt;
        inc[T_DIVG][i + 1] += main_acc.divg * dt;
        inc[T_DIVX][i + 1] += main_acc.divx * dt;
        inc[T_GX][i + 1] += main_acc.gx * dt;
        inc[T_GTR][i + 1] += main_acc.gtr * dt;
        inc[T_JLIN][i + 1] += main_acc.jlin * dt;
        s_drift += main_acc.s_drift * dt;
        s_gauss += main_acc.s_gauss * dt;
        s_jlin += main_acc.jlin * dt;
        const double main_sum = main_acc.f0 + main_acc.divg + main_acc.divx +
                                main_acc.gx + main_acc.gtr + main_acc.jlin;
        const double emb_sum = emb_acc.f0 + emb_acc.divg + emb_acc.divx +
                               emb_acc.gx + emb_acc.gtr + emb_acc.jlin;
        budget_inc[i + 1] += std::fabs(main_sum - emb_sum) * dt;
        if (path.compensator_se > 0.0)
            budget_inc[i + 1] += 3.0 * path.compensator_se * p * vol *
                                 double(path.grid.nodes()) * dt;
    }

    // jump events: linear compensated part plus the remainder
    for (const auto& ev : path.events) {
        const double lin =
            p * vol * weighted_pair(kt, ev.state_before, ev.amplitude, p);
        inc[T_JLIN][ev.grid_index] += lin;
        s_jlin += lin;
        Field after = ev.state_before;
        kt.axpy(1.0, ev.amplitude.data(), after.data(), nvals);
        const double rem = lp_norm_pow(after, p) -
                           lp_norm_pow(ev.state_before, p) - lin;
        inc[T_JREM][ev.grid_index] += rem;
        s_jrem += rem;
    }

    out.terms.assign(out.term_names.size(), std::vector<double>(n, 0.0));
    out.lhs.resize(n);
    out.residual.resize(n);
    out.quad_budget.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        out.lhs[j] = lp_norm_pow(path.state(j), p);
    for (std::size_t t = 0; t < out.term_names.size(); ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += inc[t][j];
            out.terms[t][j] = acc;
        }
    }
    double bud = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        bud += budget_inc[j];
        out.quad_budget[j] = bud;
        double rhs = 0.0;
        for (std::size_t t = 0; t < out.term_names.size(); ++t)
            rhs += out.terms[t][j];
        out.residual[j] = out.lhs[j] - out.lhs[0] - rhs;
    }

    // diagnostics
    out.sup_lp_pow = *std::max_element(out.lhs.begin(), out.lhs.end());
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dt = path.times[i + 1] - path.times[i];
        out.lp_integral += out.lhs[i] * dt;
        double w1 = lp_norm(path.state(i), p);
        for (int k = 0; k < dim; ++k)
            w1 += lp_norm(discrete_gradient(path.state(i), k), p);
        out.w1p_integral += std::pow(w1, p) * dt;
    }
    {
        // discrete K_p^p(T) over the frozen coefficients
        const double T = path.times.back();
        double per_t = 0.0;
        const Field f0 = cache.free_drift(0.0);
        per_t += lp_norm_pow(f0, p);
        for (int k = 0; have_div && k < dim; ++k)
            per_t += lp_norm_pow(cache.div_drift(0.0, k), p);
        if (have_g) {
            const Field g2 = cache.diffusion_sq(0.0);
            for (std::size_t node = 0; node < path.grid.nodes(); ++node)
                per_t += std::pow(g2.at(node, 0), 0.5 * p) * vol;
        }
        if (coeffs.jump_amplitude) {
            // |h(x,.)|_{L_{p,2}}^p with the measure's atoms / samples
            for (const auto& layer : drv.measure.layers) {
                if (!layer.atom || layer.mass == 0.0)
                    continue;
                const Field h = coeffs.jump_amplitude(0.0, *layer.atom);
                for (std::size_t node = 0; node < path.grid.nodes(); ++node) {
                    double r2 = 0.0;
                    for (int c = 0; c < path.comps; ++c)
                        r2 += h.at(node, c) * h.at(node, c);
                    const double lp_z =
                        std::pow(layer.mass * std::pow(std::sqrt(r2), p),
                                 1.0 / p);
                    const double l2_z =
                        std::sqrt(layer.mass * r2);
                    per_t += std::pow(std::max(lp_z, l2_z), p) * vol;
                }
            }
        }
        out.coeff_bound = per_t * T;
    }

    out.group_names = {"dw", "drift", "gauss", "jump_linear",
                       "jump_remainder"};
    out.general_groups = {
        out.terms[T_DW].back(),
        out.terms[T_F0].back() + out.terms[T_DIVG].back() +
            out.terms[T_DIVX].back(),
        out.terms[T_GX].back() + out.terms[T_GTR].back(),
        out.terms[T_JLIN].back(), out.terms[T_JREM].back()};
    if (scalar_route)
        out.scalar_groups = {s_dw, s_drift, s_gauss, s_jlin, s_jrem};
    else
        out.scalar_groups = out.general_groups;
    return out;
}

void write_csv(std::ostream& os, const LpLedger& ledger) {
    os << "t";
    for (const auto& name : ledger.term_names)
        os << ',' << name;
    os << ",lhs,residual,quad_budget\n";
    os.precision(17);
    for (std::size_t j = 0; j < ledger.times.size(); ++j) {
        os << ledger.times[j];
        for (const auto& t : ledger.terms)
            os << ',' << t[j];
        os << ',' << ledger.lhs[j] << ',' << ledger.residual[j] << ','
           << ledger.quad_budget[j] << '\n';
    }
}

double weak_form_defect(const LpPathRecord& path,
                        const LpCoefficients& coeffs,
                        const LpDriverSet& drv, const Field& phi) {
    if (path.comps != 1)
        throw ConfigError("weak_form_defect expects scalar fields");
    CoeffCache cache(coeffs, drv, path.grid);
    std::vector<Field> dphi;
    for (int k = 0; k < path.grid.dim; ++k)
        dphi.push_back(discrete_gradient(phi, k));

    double defect = 0.0;
    double rhs = weak_pair(path.state(0), phi);
    std::size_t next_event = 0;
    const double scale = 1.0 + std::fabs(rhs);
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double t0 = path.times[i];
        const double dt = path.times[i + 1] - t0;
        double drift_pair = 0.0;
        if (coeffs.free_drift)
            drift_pair += weak_pair(cache.free_drift(t0), phi);
        for (int k = 0; k < path.grid.dim; ++k) {
            if (coeffs.div_drift.empty() || !coeffs.div_drift[std::size_t(k)])
                continue;
            drift_pair -= weak_pair(cache.div_drift(t0, k),
                                    dphi[std::size_t(k)]);
        }
        if (coeffs.jump_amplitude || coeffs.jump_compensator)
            drift_pair -= weak_pair(cache.compensator(t0), phi);
        rhs += drift_pair * dt;
        for (int r = 0; r < coeffs.wiener_dim; ++r)
            rhs += weak_pair(cache.diffusion(t0, r), phi) *
                   drv.wiener.increment(i, std::size_t(r));
        while (next_event < path.events.size() &&
               path.events[next_event].grid_index == i + 1) {
            rhs += weak_pair(path.events[next_event].amplitude, phi);
            ++next_event;
        }
        defect = std::max(defect,
                          std::fabs(weak_pair(path.state(i + 1), phi) - rhs) /
                              scale);
    }
    return defect;
}

} // namespace itokit::lpfield
