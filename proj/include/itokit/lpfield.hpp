#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace itokit::lpfield {

// Uniform cell-centered grid on the box [-L, L]^dim. Node i along an axis
// sits at -L + (i + 1/2) dx, so the plain cell-volume-weighted sum is the
// midpoint rule and indicators aligned to cell boundaries integrate
// exactly. dim is 1 or 2.
struct Grid {
    int dim = 1;
    double half_width = 1.0; // L
    std::size_t cells = 8;   // per axis
    bool periodic = false;

    double spacing() const { return 2.0 * half_width / double(cells); }
    double cell_volume() const;
    std::size_t nodes() const;
    double coord(std::size_t index_along_axis) const {
        return -half_width + (double(index_along_axis) + 0.5) * spacing();
    }
    void validate() const;
    bool operator==(const Grid& o) const {
        return dim == o.dim && half_width == o.half_width && cells == o.cells &&
               periodic == o.periodic;
    }
};

// R^M-valued samples on a grid, node-major with the M components
// interleaved (the same layout the flat binary dump uses).
struct Field {
    Grid grid;
    int comps = 1;
    std::vector<double> values;

    static Field zeros(const Grid& g, int comps = 1);
    // Scalar field from a callable of the node coordinates.
    static Field sample(const Grid& g,
                        const std::function<double(const double*)>& f);

    double& at(std::size_t node, int c = 0) { return values[node * comps + c]; }
    double at(std::size_t node, int c = 0) const {
        return values[node * comps + c];
    }
    double* data() { return values.data(); }
    const double* data() const { return values.data(); }

    // Width in cells of the all-zero band at the domain boundary,
    // minimized over axes. Infinite-band (all-zero field) reports cells.
    std::size_t boundary_band() const;
    void require_compatible(const Field& other, const char* what) const;
};

// Discrete mollifier: the standard C-infinity bump exp(-1/(1-|y/eps|^2))
// sampled on the grid lattice and renormalized so the discrete mass is
// exactly 1 (the rounding residue is folded into the center tap).
struct Mollifier {
    double radius = 0.0; // eps
    int half = 0;        // support half-width in cells, per axis
    int dim = 1;
    std::vector<double> taps; // (2*half+1)^dim, includes the cell volume

    double discrete_mass() const;
};

Mollifier make_mollifier(const Grid& grid, double epsilon);

// Discrete convolution with the mollifier taps. On non-periodic grids the
// field must keep an all-zero boundary band at least as wide as the kernel.
Field mollify(const Field& v, const Mollifier& m);

// integral |v|^p dx (midpoint rule), |v| the Euclidean norm across
// components, and its p-th root.
double lp_norm_pow(const Field& v, double p);
double lp_norm(const Field& v, double p);

// integral u * phi dx for scalar fields on the same grid.
double weak_pair(const Field& u, const Field& phi);

// Second-order central difference along the given axis; satisfies the
// summation-by-parts identity exactly on compactly supported fields.
Field discrete_gradient(const Field& v, int axis);

void write_csv(std::ostream& os, const Field& v);
// Raw little-endian doubles, node-major, components interleaved.
void write_flat_binary(std::ostream& os, const Field& v);

} // namespace itokit::lpfield
