#include "itokit/quadrature.hpp"

#include "itokit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace itokit::quad {
namespace {

// Nodes on [0,1] (Gauss-Legendre, mapped from [-1,1]).
constexpr double g1_n[] = {0.5};
constexpr double g1_w[] = {1.0};

constexpr double g2_n[] = {0.21132486540518711775, 0.78867513459481288225};
constexpr double g2_w[] = {0.5, 0.5};

constexpr double g3_n[] = {0.11270166537925831148, 0.5,
                           0.88729833462074168852};
constexpr double g3_w[] = {0.27777777777777777778, 0.44444444444444444444,
                           0.27777777777777777778};

constexpr double g5_n[] = {0.046910077030668003601, 0.23076534494715845448,
                           0.5, 0.76923465505284154552, 0.95308992296933199640};
constexpr double g5_w[] = {0.11846344252809454375, 0.23931433524968323402,
                           0.28444444444444444444, 0.23931433524968323402,
                           0.11846344252809454375};

constexpr double lr_n[] = {0.0};
constexpr double lr_w[] = {1.0};

// Kronrod 15 / Gauss 7 abscissae and weights on [-1,1] (symmetric half).
constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelEstimate {
    double value;
    double error;
};

PanelEstimate gk15(const std::function<double(double)>& f, double a,
                   double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double result_k = wgk[7] * fc;
    double result_g = wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double x = h * xgk[j];
        const double f1 = f(c - x);
        const double f2 = f(c + x);
        result_k += wgk[j] * (f1 + f2);
        if (j % 2 == 1)
            result_g += wg[j / 2] * (f1 + f2);
    }
    const double value = result_k * h;
    const double err = std::fabs((result_k - result_g) * h);
    return {value, err};
}

} // namespace

const char* rule_name(Rule r) {
    switch (r) {
    case Rule::left_rect:
        return "left_rect";
    case Rule::gauss1:
        return "gauss1";
    case Rule::gauss2:
        return "gauss2";
    case Rule::gauss3:
        return "gauss3";
    case Rule::gauss5:
        return "gauss5";
    }
    return "?";
}

Rule rule_from_name(const std::string& name) {
    if (name == "left_rect")
        return Rule::left_rect;
    if (name == "gauss1")
        return Rule::gauss1;
    if (name == "gauss2")
        return Rule::gauss2;
    if (name == "gauss3")
        return Rule::gauss3;
    if (name == "gauss5")
        return Rule::gauss5;
    throw ConfigError("unknown quadrature rule '" + name + "'");
}

std::span<const double> rule_nodes(Rule r) {
    switch (r) {
    case Rule::left_rect:
        return {lr_n, 1};
    case Rule::gauss1:
        return {g1_n, 1};
    case Rule::gauss2:
        return {g2_n, 2};
    case Rule::gauss3:
        return {g3_n, 3};
    case Rule::gauss5:
        return {g5_n, 5};
    }
    return {};
}

std::span<const double> rule_weights(Rule r) {
    switch (r) {
    case Rule::left_rect:
        return {lr_w, 1};
    case Rule::gauss1:
        return {g1_w, 1};
    case Rule::gauss2:
        return {g2_w, 2};
    case Rule::gauss3:
        return {g3_w, 3};
    case Rule::gauss5:
        return {g5_w, 5};
    }
    return {};
}

Rule embedded_rule(Rule r) {
    switch (r) {
    case Rule::left_rect:
        return Rule::gauss1;
    case Rule::gauss1:
        return Rule::left_rect;
    case Rule::gauss2:
        return Rule::gauss1;
    case Rule::gauss3:
        return Rule::gauss2;
    case Rule::gauss5:
        return Rule::gauss3;
    }
    return Rule::gauss1;
}

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f,
                                  double a, double b, double rel_tol,
                                  double abs_tol,
                                  std::size_t max_intervals) {
    AdaptiveResult out;
    if (a == b)
        return {0.0, 0.0, 0, true};

    struct Seg {
        double a, b, value, error;
        bool operator<(const Seg& o) const { return error < o.error; }
    };
    std::priority_queue<Seg> heap;
    PanelEstimate first = gk15(f, a, b);
    heap.push({a, b, first.value, first.error});
    double total = first.value;
    double total_err = first.error;
    std::size_t count = 1;

    while (count < max_intervals) {
        if (total_err <= abs_tol + rel_tol * std::fabs(total))
            break;
        Seg worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        PanelEstimate l = gk15(f, worst.a, mid);
        PanelEstimate r = gk15(f, mid, worst.b);
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        heap.push({worst.a, mid, l.value, l.error});
        heap.push({mid, worst.b, r.value, r.error});
        ++count;
    }
    out.value = total;
    out.error_estimate = total_err;
    out.intervals = count;
    out.converged = total_err <= abs_tol + rel_tol * std::fabs(total);
    return out;
}

double power_law_extrapolate(std::span<const double> deltas,
                             std::span<const double> values) {
    if (deltas.size() < 3 || deltas.size() != values.size())
        throw ConfigError("power_law_extrapolate needs >= 3 (delta, value) "
                          "pairs");
    const std::size_t n = deltas.size();
    const double i1 = values[n - 3], i2 = values[n - 2], i3 = values[n - 1];
    const double d2 = i2 - i1, d3 = i3 - i2;
    if (d3 == 0.0)
        return i3;
    const double r = deltas[n - 1] / deltas[n - 2];
    // I(d) = A - B d^q  =>  (I3-I2)/(I2-I1) = r^q for geometric deltas.
    const double ratio = d3 / d2;
    if (ratio <= 0.0 || ratio >= 1.0)
        return i3; // not a decaying power law; best available value
    const double rho = ratio; // contraction factor per level
    (void)r;
    return i3 + d3 * rho / (1.0 - rho);
}

} // namespace itokit::quad
