#include "itokit/ledger.hpp"

#include "itokit/errors.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

namespace itokit::calculus {
namespace {

using process::Coefficients;
using process::DriverSet;
using process::PathRecord;

double TermLedger_scale(const TermLedger& l) {
    double s = 1.0;
    for (const auto& t : l.terms)
        s += std::fabs(t.back());
    return s;
}

// Shared evaluation state: one ledger under construction.
struct Builder {
    const PathRecord& path;
    const DriverSet& drv;
    quad::Rule rule;
    std::size_t n;
    int M;
    std::vector<std::vector<double>> inc; // per-term increments by grid index
    std::vector<double> budget_inc;
    std::vector<std::string> names;

    double noted_se = 0.0; // worst MC std error seen inside the current term

    Builder(const PathRecord& p, const DriverSet& d, quad::Rule r)
        : path(p), drv(d), rule(r), n(p.times.size()), M(p.state_dim),
          budget_inc(n, 0.0) {}

    int add_term(std::string name) {
        names.push_back(std::move(name));
        inc.emplace_back(n, 0.0);
        return static_cast<int>(inc.size()) - 1;
    }

    // Integrands that fall back to Monte-Carlo mark quadrature report their
    // standard error here; add_ds charges it to the budget once.
    void note_se(double se) { noted_se = std::max(noted_se, se); }

    // Integrates integrand(s, x_hat) over interval i with the main rule,
    // charging |main - embedded| to the budget. x_hat interpolates the
    // stored state linearly up to the left limit at the right endpoint.
    void add_ds(int term, std::size_t i,
                const std::function<double(double, std::span<const double>)>&
                    integrand) {
        const auto& iv = path.intervals[i];
        const double dt = iv.t1 - iv.t0;
        auto x0 = path.state(i);
        const auto x1 = path.left_limit(i + 1);
        std::vector<double> xq(M);
        auto eval_rule = [&](quad::Rule r) {
            const auto nodes = quad::rule_nodes(r);
            const auto weights = quad::rule_weights(r);
            double acc = 0.0;
            for (std::size_t q = 0; q < nodes.size(); ++q) {
                const double theta = nodes[q];
                for (int a = 0; a < M; ++a)
                    xq[a] = x0[a] + theta * (x1[a] - x0[a]);
                acc += weights[q] * integrand(iv.t0 + theta * dt, xq);
            }
            return acc * dt;
        };
        noted_se = 0.0;
        const double main = eval_rule(rule);
        const double embedded = eval_rule(quad::embedded_rule(rule));
        inc[term][i + 1] += main;
        budget_inc[i + 1] += std::fabs(main - embedded);
        if (noted_se > 0.0) {
            budget_inc[i + 1] += 3.0 * noted_se * dt;
            noted_se = 0.0;
        }
    }

    void add_event(int term, const process::PathEvent& ev, double value) {
        inc[term][ev.grid_index] += value;
    }

    void add_budget(std::size_t grid_index, double amount) {
        budget_inc[grid_index] += amount;
    }

    TermLedger finish(std::string formula,
                      const std::function<double(std::span<const double>)>&
                          lhs_of_state) {
        TermLedger out;
        out.formula = std::move(formula);
        out.rule = rule;
        out.times = path.times;
        out.term_names = names;
        out.terms.assign(names.size(), std::vector<double>(n, 0.0));
        out.lhs.resize(n);
        out.residual.resize(n);
        out.quad_budget.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            out.lhs[j] = lhs_of_state(path.state(j));
        double bud = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            bud += budget_inc[j];
            out.quad_budget[j] = bud;
        }
        for (std::size_t t = 0; t < names.size(); ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += inc[t][j];
                out.terms[t][j] = acc;
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            double rhs = 0.0;
            for (std::size_t t = 0; t < names.size(); ++t)
                rhs += out.terms[t][j];
            out.residual[j] = out.lhs[j] - out.lhs[0] - rhs;
            if (!std::isfinite(out.residual[j])) {
                throw BlowupError("ledger produced a non-finite value at t=" +
                                      std::to_string(path.times[j]),
                                  path.times[j]);
            }
        }
        return out;
    }
};

// Diffusion part shared by the standard and natural formulas:
// dw term (left endpoint) and the drift+hessian ds term.
void add_diffusion_terms(Builder& b, int term_dw, int term_ds,
                         const TestFunction& phi) {
    const int M = b.M;
    std::vector<double> grad(M), hess(M * M);
    for (std::size_t i = 0; i + 1 < b.n; ++i) {
        const auto& iv = b.path.intervals[i];
        auto x0 = b.path.state(i);
        phi.gradient(x0, grad);
        double dw = 0.0;
        for (int a = 0; a < M; ++a)
            dw += grad[a] * iv.gdw[a];
        b.inc[term_dw][i + 1] += dw;

        bool have_drift = false, have_sigma = false;
        for (int a = 0; a < M && !have_drift; ++a)
            have_drift = iv.drift[a] != 0.0;
        for (int a = 0; a < M * M && !have_sigma; ++a)
            have_sigma = iv.sigma[a] != 0.0;
        if (!have_drift && !have_sigma)
            continue;
        b.add_ds(term_ds, i, [&](double, std::span<const double> x) {
            phi.gradient(x, grad);
            double acc = 0.0;
            for (int a = 0; a < M; ++a)
                acc += iv.drift[a] * grad[a];
            if (have_sigma) {
                phi.hessian(x, hess);
                double tr = 0.0;
                for (int a = 0; a < M * M; ++a)
                    tr += iv.sigma[a] * hess[a];
                acc += 0.5 * tr;
            }
            return acc;
        });
    }
}

// Frozen jump amplitude at the interval's left endpoint, as a function of
// the mark. Matches what the step's compensator used.
std::function<void(double, std::span<double>)>
frozen_amplitude(const Coefficients& coeffs, std::size_t k, double t0,
                 std::span<const double> x0) {
    const auto& jc = coeffs.jump[k];
    return [&jc, t0, x0](double z, std::span<double> out) {
        jc.compensated(t0, z, x0, out);
    };
}

} // namespace

double TermLedger::rhs_total(std::size_t i) const {
    double rhs = 0.0;
    for (const auto& t : terms)
        rhs += t[i];
    return rhs;
}

double TermLedger::term_scale() const { return TermLedger_scale(*this); }

void write_csv(std::ostream& os, const TermLedger& ledger) {
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

TermLedger ledger_standard(const PathRecord& path, const Coefficients& coeffs,
                           const DriverSet& drv, const TestFunction& phi,
                           const process::ConditionReport* conditions,
                           const LedgerOptions& opts) {
    process::ConditionReport local;
    if (!conditions) {
        local = process::check_conditions(coeffs, path, drv, &phi);
        conditions = &local;
    }
    if (conditions->orthogonality_failed)
        throw ConfigError("jump integrands violate the orthogonality "
                          "requirement: max |hbar^i h^j| = " +
                          std::to_string(conditions->orthogonality_max));
    if (conditions->any_divergent() && !opts.force) {
        const bool second = conditions->second_order &&
                            conditions->second_order->suspected_divergent;
        const std::string term =
            second ? "compensator_remainder" : "jump_compensated_increment";
        const std::string cond = second ? "second_order_abs (condition2)"
                                        : "first_order_square (condition1)";
        throw LedgerRefusal(
            "standard-formula term '" + term +
                "' was flagged divergent by the condition checker [" + cond +
                "]; pass force=true to evaluate anyway",
            term);
    }

    Builder b(path, drv, opts.rule);
    const int t_ds = b.add_term("ds_drift_hessian");
    const int t_dw = b.add_term("dw_gradient");
    const int t_direct = b.add_term("jump_direct");
    const int t_comp = b.add_term("jump_compensated_increment");
    const int t_rem = b.add_term("compensator_remainder");
    add_diffusion_terms(b, t_dw, t_ds, phi);

    const int M = b.M;
    std::vector<double> amp(M);
    // mu x ds parts of the compensated increment and the remainder
    for (std::size_t k = 0; k < coeffs.jump.size(); ++k) {
        if (!coeffs.jump[k].compensated)
            continue;
        for (std::size_t i = 0; i + 1 < b.n; ++i) {
            const auto& iv = path.intervals[i];
            auto frozen = frozen_amplitude(coeffs, k, iv.t0, path.state(i));
            b.add_ds(t_comp, i, [&](double, std::span<const double> x) {
                auto f = [&](double z) {
                    frozen(z, amp);
                    return increment_first(phi, x, amp);
                };
                const auto mi = drivers::mark_integral(drv.measures[k], f);
                b.note_se(mi.std_error);
                return -mi.value;
            });
            b.add_ds(t_rem, i, [&](double, std::span<const double> x) {
                auto f = [&](double z) {
                    frozen(z, amp);
                    return increment_second(phi, x, amp);
                };
                const auto mi = drivers::mark_integral(drv.measures[k], f);
                b.note_se(mi.std_error);
                return mi.value;
            });
        }
    }
    for (const auto& ev : path.events) {
        b.add_event(t_direct, ev,
                    increment_first(phi, ev.x_before, ev.jump_direct));
        b.add_event(t_comp, ev,
                    increment_first(phi, ev.x_before, ev.jump_compensated));
    }
    return b.finish("standard", [&](std::span<const double> x) {
        return phi.value(x);
    });
}

TermLedger ledger_natural(const PathRecord& path, const Coefficients& coeffs,
                          const DriverSet& drv, const TestFunction& phi,
                          const LedgerOptions& opts) {
    (void)coeffs; // everything needed is frozen in the path caches
    Builder b(path, drv, opts.rule);
    const int t_dw = b.add_term("dw_gradient");
    const int t_ds = b.add_term("ds_drift_hessian");
    const int t_direct = b.add_term("jump_direct");
    const int t_lin = b.add_term("jump_linear_compensated");
    const int t_rem = b.add_term("jump_remainder");
    add_diffusion_terms(b, t_dw, t_ds, phi);

    const int M = b.M;
    std::vector<double> grad(M);
    // -int grad phi(X) . kappa ds, with kappa the step's frozen compensator
    for (std::size_t i = 0; i + 1 < b.n; ++i) {
        const auto& iv = path.intervals[i];
        bool have = false;
        for (int a = 0; a < M && !have; ++a)
            have = iv.compensator[a] != 0.0;
        if (iv.compensator_se > 0.0) {
            double gn = 0.0;
            phi.gradient(path.state(i), grad);
            for (int a = 0; a < M; ++a)
                gn += grad[a] * grad[a];
            b.add_budget(i + 1, 3.0 * iv.compensator_se * std::sqrt(gn) *
                                    (iv.t1 - iv.t0));
        }
        if (!have)
            continue;
        b.add_ds(t_lin, i, [&](double, std::span<const double> x) {
            phi.gradient(x, grad);
            double acc = 0.0;
            for (int a = 0; a < M; ++a)
                acc += grad[a] * iv.compensator[a];
            return -acc;
        });
    }
    for (const auto& ev : path.events) {
        b.add_event(t_direct, ev,
                    increment_first(phi, ev.x_before, ev.jump_direct));
        phi.gradient(ev.x_before, grad);
        double lin = 0.0;
        for (int a = 0; a < M; ++a)
            lin += grad[a] * ev.jump_compensated[a];
        b.add_event(t_lin, ev, lin);
        b.add_event(t_rem, ev,
                    increment_second(phi, ev.x_before, ev.jump_compensated));
    }
    return b.finish("natural", [&](std::span<const double> x) {
        return phi.value(x);
    });
}

namespace {

double norm_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return std::sqrt(s);
}

// |x|^{p-2} with 0/0 := 0 (and |0|^0 := 1 so p = 2 reduces to the identity
// weight).
double power_weight(double r, double p) {
    if (p == 2.0)
        return 1.0;
    if (r == 0.0)
        return 0.0;
    return std::pow(r, p - 2.0);
}

} // namespace

TermLedger ledger_power(const PathRecord& path, const Coefficients& coeffs,
                        const DriverSet& drv, double p,
                        const LedgerOptions& opts) {
    if (p < 2.0)
        throw ConfigError("power formula requires p >= 2");
    Builder b(path, drv, opts.rule);
    const int t_dw = b.add_term("dw_power");
    const int t_drift = b.add_term("ds_drift");
    const int t_gex = b.add_term("ds_gauss_excess"); // (p-2)-weighted
    const int t_gtr = b.add_term("ds_gauss_trace");
    const int t_direct = b.add_term("jump_direct");
    const int t_lin = b.add_term("jump_linear_compensated");
    const int t_rem = b.add_term("jump_remainder");

    const int M = b.M;
    for (std::size_t i = 0; i + 1 < b.n; ++i) {
        const auto& iv = path.intervals[i];
        auto x0 = path.state(i);
        {
            const double r = norm_of(x0);
            const double w = power_weight(r, p);
            double dw = 0.0;
            for (int a = 0; a < M; ++a)
                dw += x0[a] * iv.gdw[a];
            b.inc[t_dw][i + 1] += p * w * dw;
        }
        bool have_drift = false, have_sigma = false;
        for (int a = 0; a < M && !have_drift; ++a)
            have_drift = iv.drift[a] != 0.0;
        for (int a = 0; a < M * M && !have_sigma; ++a)
            have_sigma = iv.sigma[a] != 0.0;
        if (have_drift)
            b.add_ds(t_drift, i, [&](double, std::span<const double> x) {
                const double w = power_weight(norm_of(x), p);
                double acc = 0.0;
                for (int a = 0; a < M; ++a)
                    acc += x[a] * iv.drift[a];
                return p * w * acc;
            });
        if (have_sigma) {
            // (p/2)(p-2) |x|^{p-2} u^T sigma u, u = x/|x| (0/0 := 0)
            if (p != 2.0)
                b.add_ds(t_gex, i, [&](double, std::span<const double> x) {
                    const double r = norm_of(x);
                    if (r == 0.0)
                        return 0.0;
                    const double w = power_weight(r, p);
                    double q = 0.0;
                    for (int a = 0; a < M; ++a)
                        for (int c = 0; c < M; ++c)
                            q += (x[a] / r) * iv.sigma[a * M + c] * (x[c] / r);
                    return 0.5 * p * (p - 2.0) * w * q;
                });
            b.add_ds(t_gtr, i, [&](double, std::span<const double> x) {
                const double w = power_weight(norm_of(x), p);
                double tr = 0.0;
                for (int a = 0; a < M; ++a)
                    tr += iv.sigma[a * M + a];
                return 0.5 * p * w * tr;
            });
        }
        bool have_comp = false;
        for (int a = 0; a < M && !have_comp; ++a)
            have_comp = iv.compensator[a] != 0.0;
        if (iv.compensator_se > 0.0) {
            const double w = power_weight(norm_of(x0), p);
            b.add_budget(i + 1, 3.0 * iv.compensator_se * p * w *
                                    std::max(1.0, norm_of(x0)) *
                                    (iv.t1 - iv.t0));
        }
        if (have_comp)
            b.add_ds(t_lin, i, [&](double, std::span<const double> x) {
                const double w = power_weight(norm_of(x), p);
                double acc = 0.0;
                for (int a = 0; a < M; ++a)
                    acc += x[a] * iv.compensator[a];
                return -p * w * acc;
            });
    }
    std::vector<double> shifted(M);
    for (const auto& ev : path.events) {
        const double r_before = norm_of(ev.x_before);
        const double lhs_before = std::pow(r_before, p);
        if (!ev.jump_direct.empty()) {
            for (int a = 0; a < M; ++a)
                shifted[a] = ev.x_before[a] + ev.jump_direct[a];
            b.add_event(t_direct, ev,
                        std::pow(norm_of(shifted), p) - lhs_before);
        }
        const double w = power_weight(r_before, p);
        double lin = 0.0;
        for (int a = 0; a < M; ++a)
            lin += ev.x_before[a] * ev.jump_compensated[a];
        lin *= p * w;
        b.add_event(t_lin, ev, lin);
        for (int a = 0; a < M; ++a)
            shifted[a] = ev.x_before[a] + ev.jump_compensated[a];
        b.add_event(t_rem, ev,
                    std::pow(norm_of(shifted), p) - lhs_before - lin);
    }
    (void)coeffs;
    return b.finish("power", [&](std::span<const double> x) {
        return std::pow(norm_of(x), p);
    });
}

} // namespace itokit::calculus
