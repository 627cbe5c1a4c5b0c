#include "itokit/lpfield.hpp"

#include "itokit/errors.hpp"
#include "itokit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>

namespace itokit::lpfield {

double Grid::cell_volume() const {
    double v = spacing();
    for (int k = 1; k < dim; ++k)
        v *= spacing();
    return v;
}

std::size_t Grid::nodes() const {
    std::size_t n = cells;
    for (int k = 1; k < dim; ++k)
        n *= cells;
    return n;
}

void Grid::validate() const {
    if (dim != 1 && dim != 2)
        throw ConfigError("grid dimension must be 1 or 2");
    if (!(half_width > 0.0))
        throw ConfigError("grid half-width must be positive");
    if (cells < 8)
        throw ConfigError("grid needs at least 8 cells per axis");
}

Field Field::zeros(const Grid& g, int comps) {
    g.validate();
    Field f;
    f.grid = g;
    f.comps = comps;
    f.values.assign(g.nodes() * std::size_t(comps), 0.0);
    return f;
}

Field Field::sample(const Grid& g,
                    const std::function<double(const double*)>& fn) {
    Field f = zeros(g, 1);
    double x[2] = {0.0, 0.0};
    if (g.dim == 1) {
        for (std::size_t i = 0; i < g.cells; ++i) {
            x[0] = g.coord(i);
            f.values[i] = fn(x);
        }
    } else {
        std::size_t node = 0;
        for (std::size_t i = 0; i < g.cells; ++i) {
            x[0] = g.coord(i);
            for (std::size_t j = 0; j < g.cells; ++j, ++node) {
                x[1] = g.coord(j);
                f.values[node] = fn(x);
            }
        }
    }
    return f;
}

std::size_t Field::boundary_band() const {
    const std::size_t n = grid.cells;
    std::size_t band = n;
    auto nonzero_node = [&](std::size_t node) {
        for (int c = 0; c < comps; ++c)
            if (values[node * comps + c] != 0.0)
                return true;
        return false;
    };
    if (grid.dim == 1) {
        for (std::size_t i = 0; i < n; ++i)
            if (nonzero_node(i))
                band = std::min({band, i, n - 1 - i});
    } else {
        std::size_t node = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j, ++node)
                if (nonzero_node(node))
                    band = std::min({band, i, n - 1 - i, j, n - 1 - j});
    }
    return band;
}

void Field::require_compatible(const Field& other, const char* what) const {
    if (!(grid == other.grid) || comps != other.comps)
        throw ConfigError(std::string(what) +
                          ": fields live on different grids");
}

Mollifier make_mollifier(const Grid& grid, double epsilon) {
    grid.validate();
    if (!(epsilon > 0.0))
        throw ConfigError("mollifier radius must be positive");
    const double dx = grid.spacing();
    const int half = static_cast<int>(std::ceil(epsilon / dx)) - 1;
    if (half < 0)
        throw ConfigError("mollifier radius below one cell");
    Mollifier m;
    m.radius = epsilon;
    m.half = half;
    m.dim = grid.dim;
    const int width = 2 * half + 1;
    const auto bump = [epsilon](double r2) {
        // exp(-1/(1-|y/eps|^2)) inside the unit ball of radius eps
        const double q = r2 / (epsilon * epsilon);
        return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
    };
    if (grid.dim == 1) {
        m.taps.resize(width);
        for (int j = -half; j <= half; ++j)
            m.taps[half + j] = bump(double(j) * dx * double(j) * dx);
    } else {
        m.taps.resize(std::size_t(width) * width);
        for (int i = -half; i <= half; ++i)
            for (int j = -half; j <= half; ++j) {
                const double r2 = (double(i) * dx) * (double(i) * dx) +
                                  (double(j) * dx) * (double(j) * dx);
                m.taps[std::size_t(half + i) * width + (half + j)] = bump(r2);
            }
    }
    // Renormalize to exact unit discrete mass; fold the summation residue
    // into the center tap.
    long double sum = 0.0L;
    for (double t : m.taps)
        sum += t;
    if (!(sum > 0.0L))
        throw ConfigError("mollifier kernel vanished on the grid");
    for (double& t : m.taps)
        t = static_cast<double>(t / sum);
    long double mass = 0.0L;
    for (double t : m.taps)
        mass += t;
    const std::size_t center =
        grid.dim == 1 ? std::size_t(half)
                      : std::size_t(half) * width + std::size_t(half);
    m.taps[center] += static_cast<double>(1.0L - mass);
    return m;
}

double Mollifier::discrete_mass() const {
    double s = 0.0;
    for (double t : taps)
        s += t;
    return s;
}

Field mollify(const Field& v, const Mollifier& m) {
    v.grid.validate();
    if (m.dim != v.grid.dim)
        throw ConfigError("mollifier dimension does not match the grid");
    if (!v.grid.periodic && v.boundary_band() < std::size_t(m.half))
        throw ConfigError("mollifier support exceeds the field's zero "
                          "boundary band");
    Field out = Field::zeros(v.grid, v.comps);
    const auto& kt = kernels::active();
    const std::size_t n = v.grid.cells;
    if (v.grid.dim == 1 && v.comps == 1) {
        kt.convolve(v.data(), n, m.taps.data(), std::size_t(m.half),
                    out.data(), v.grid.periodic);
        return out;
    }
    // General case: direct stencil sums.
    const int width = 2 * m.half + 1;
    const long ln = static_cast<long>(n);
    auto wrap = [&](long k) {
        if (v.grid.periodic) {
            k %= ln;
            if (k < 0)
                k += ln;
            return k;
        }
        return (k < 0 || k >= ln) ? -1L : k;
    };
    if (v.grid.dim == 1) {
        for (long i = 0; i < ln; ++i)
            for (int c = 0; c < v.comps; ++c) {
                double acc = 0.0;
                for (int j = -m.half; j <= m.half; ++j) {
                    const long k = wrap(i - j);
                    if (k >= 0)
                        acc += m.taps[std::size_t(m.half + j)] *
                               v.at(std::size_t(k), c);
                }
                out.at(std::size_t(i), c) = acc;
            }
        return out;
    }
    for (long i = 0; i < ln; ++i)
        for (long j = 0; j < ln; ++j)
            for (int c = 0; c < v.comps; ++c) {
                double acc = 0.0;
                for (int a = -m.half; a <= m.half; ++a) {
                    const long ka = wrap(i - a);
                    if (ka < 0)
                        continue;
                    for (int b = -m.half; b <= m.half; ++b) {
                        const long kb = wrap(j - b);
                        if (kb < 0)
                            continue;
                        acc += m.taps[std::size_t(m.half + a) * width +
                                      std::size_t(m.half + b)] *
                               v.at(std::size_t(ka) * n + std::size_t(kb), c);
                    }
                }
                out.at(std::size_t(i) * n + std::size_t(j), c) = acc;
            }
    return out;
}

double lp_norm_pow(const Field& v, double p) {
    if (!(p >= 1.0))
        throw ConfigError("lp norm requires p >= 1");
    const auto& kt = kernels::active();
    if (v.comps == 1)
        return kt.pow_sum(v.data(), v.values.size(), p) *
               v.grid.cell_volume();
    double acc = 0.0;
    const std::size_t n = v.grid.nodes();
    for (std::size_t i = 0; i < n; ++i) {
        double r2 = 0.0;
        for (int c = 0; c < v.comps; ++c) {
            const double a = v.at(i, c);
            r2 += a * a;
        }
        acc += std::pow(r2, 0.5 * p);
    }
    return acc * v.grid.cell_volume();
}

double lp_norm(const Field& v, double p) {
    return std::pow(lp_norm_pow(v, p), 1.0 / p);
}

double weak_pair(const Field& u, const Field& phi) {
    u.require_compatible(phi, "weak_pair");
    if (u.comps != 1)
        throw ConfigError("weak_pair expects scalar fields");
    const auto& kt = kernels::active();
    return kt.dot(u.data(), phi.data(), u.values.size()) *
           u.grid.cell_volume();
}

Field discrete_gradient(const Field& v, int axis) {
    v.grid.validate();
    if (axis < 0 || axis >= v.grid.dim)
        throw ConfigError("gradient axis out of range");
    Field out = Field::zeros(v.grid, v.comps);
    const double inv2dx = 1.0 / (2.0 * v.grid.spacing());
    const auto& kt = kernels::active();
    const std::size_t n = v.grid.cells;
    if (v.grid.dim == 1 && v.comps == 1) {
        kt.diff_central(v.data(), out.data(), n, inv2dx, v.grid.periodic);
        return out;
    }
    const long ln = static_cast<long>(n);
    auto sample = [&](long i, long j, int c) -> double {
        auto fix = [&](long k) -> long {
            if (v.grid.periodic) {
                k %= ln;
                if (k < 0)
                    k += ln;
                return k;
            }
            return (k < 0 || k >= ln) ? -1 : k;
        };
        i = fix(i);
        j = fix(j);
        if (i < 0 || j < 0)
            return 0.0;
        const std::size_t node = v.grid.dim == 1
                                     ? std::size_t(i)
                                     : std::size_t(i) * n + std::size_t(j);
        return v.at(node, c);
    };
    if (v.grid.dim == 1) {
        for (long i = 0; i < ln; ++i)
            for (int c = 0; c < v.comps; ++c)
                out.at(std::size_t(i), c) =
                    (sample(i + 1, 0, c) - sample(i - 1, 0, c)) * inv2dx;
        return out;
    }
    for (long i = 0; i < ln; ++i)
        for (long j = 0; j < ln; ++j)
            for (int c = 0; c < v.comps; ++c) {
                const double hi = axis == 0 ? sample(i + 1, j, c)
                                            : sample(i, j + 1, c);
                const double lo = axis == 0 ? sample(i - 1, j, c)
                                            : sample(i, j - 1, c);
                out.at(std::size_t(i) * n + std::size_t(j), c) =
                    (hi - lo) * inv2dx;
            }
    return out;
}

void write_csv(std::ostream& os, const Field& v) {
    os << "node";
    for (int k = 0; k < v.grid.dim; ++k)
        os << ",x" << k + 1;
    for (int c = 0; c < v.comps; ++c)
        os << ",u" << c + 1;
    os << '\n';
    os.precision(17);
    const std::size_t n = v.grid.cells;
    const std::size_t total = v.grid.nodes();
    for (std::size_t node = 0; node < total; ++node) {
        os << node;
        if (v.grid.dim == 1) {
            os << ',' << v.grid.coord(node);
        } else {
            os << ',' << v.grid.coord(node / n) << ','
               << v.grid.coord(node % n);
        }
        for (int c = 0; c < v.comps; ++c)
            os << ',' << v.at(node, c);
        os << '\n';
    }
}

void write_flat_binary(std::ostream& os, const Field& v) {
    os.write(reinterpret_cast<const char*>(v.values.data()),
             static_cast<std::streamsize>(v.values.size() * sizeof(double)));
}

} // namespace itokit::lpfield
