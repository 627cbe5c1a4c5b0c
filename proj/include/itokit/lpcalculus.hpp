#pragma once

#include "itokit/drivers.hpp"
#include "itokit/lpfield.hpp"
#include "itokit/quadrature.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace itokit::lpfield {

// Coefficient fields of the grid equation
//   du = (f0 + sum_k D_k fk) dt + g^r dw^r + h dpi~.
// Callables return whole fields; they may depend on time and (for h) the
// mark, but not on the state. time_invariant lets the engine evaluate each
// of them once.
struct LpCoefficients {
    int comps = 1;      // M
    int wiener_dim = 0; // R

    std::function<Field(double)> free_drift;             // f^0(t), or null
    std::vector<std::function<Field(double)>> div_drift; // f^k(t), k = 1..dim
    std::function<Field(double, int)> diffusion;         // g^r(t), r = 0..R-1
    std::function<Field(double, double)> jump_amplitude; // h(t, z)
    // Optional closed-form compensator field int_Z h(t,z,.) mu(dz). When
    // null it is derived from the measure: exactly for Dirac layers,
    // by fixed-substream Monte-Carlo otherwise.
    std::function<Field(double)> jump_compensator;

    bool time_invariant = true;

    void validate(const Grid& grid) const;
};

struct LpDriverSet {
    drivers::WienerBasis wiener; // sampled on the merged grid
    drivers::JumpStream jumps;
    drivers::MarkMeasure measure; // single driving measure, as in the
                                  // L_p formulation
    std::size_t mc_field_samples = 256;
};

struct LpEvent {
    std::size_t grid_index = 0;
    double time = 0.0;
    double mark = 0.0;
    int layer = 0;
    Field amplitude;    // h at the event
    Field state_before; // left limit seen by this event
};

struct LpPathRecord {
    Grid grid;
    int comps = 1;
    std::vector<double> times;
    std::vector<Field> states; // post-jump
    std::vector<std::uint8_t> jump_flag;
    std::vector<LpEvent> events;
    double compensator_se = 0.0; // worst MC std error of the compensator

    const Field& state(std::size_t i) const { return states[i]; }
    const Field& left_limit(std::size_t i) const;
};

struct LpSimOptions {
    bool record_all = true; // keep every grid state (ledger needs them)
};

LpPathRecord simulate_lp(const Field& psi, const LpCoefficients& coeffs,
                         const LpDriverSet& drivers,
                         const LpSimOptions& opts = {});

// Term-by-term evaluation of the L_p norm identity along one field path,
// with grouped totals recomputed through the scalar (M = 1) form of the
// formula for cross-checking.
struct LpLedger {
    double p = 2.0;
    std::vector<double> times;
    std::vector<std::string> term_names;
    std::vector<std::vector<double>> terms; // cumulative
    std::vector<double> lhs;                // |u_t|_{L_p}^p
    std::vector<double> residual;
    std::vector<double> quad_budget;
    quad::Rule rule = quad::Rule::gauss3;

    // Totals at T of matching term groups, through the general route and
    // the scalar route (populated when comps == 1).
    std::vector<std::string> group_names;
    std::vector<double> general_groups;
    std::vector<double> scalar_groups;

    // Diagnostics accumulated along the run.
    double sup_lp_pow = 0.0;     // sup_t |u_t|_{L_p}^p
    double w1p_integral = 0.0;   // int |u_t|_{W^1_p}^p dt
    double lp_integral = 0.0;    // int |u_t|_{L_p}^p dt
    double coeff_bound = 0.0;    // discrete K_p^p(T) of the coefficients

    double rhs_total(std::size_t i) const;
    double final_residual() const { return residual.back(); }
    double final_budget() const { return quad_budget.back(); }
    double term_scale() const;
    double max_group_mismatch() const; // relative, across groups
};

struct LpLedgerOptions {
    quad::Rule rule = quad::Rule::gauss3;
};

LpLedger ledger_lp(const LpPathRecord& path, const LpCoefficients& coeffs,
                   const LpDriverSet& drivers, double p,
                   const LpLedgerOptions& opts = {});

void write_csv(std::ostream& os, const LpLedger& ledger);

// Max defect of the weak-form identity (u_t, phi) = (psi, phi)
// + int (f^0, phi) - (f^k, D_k phi) ds + sum_r int (g^r, phi) dw^r
// + compensated jump pairings, over all grid times, for one test field.
// Uses the same left-endpoint convention as the stepper, so on exact
// arithmetic the defect is zero.
double weak_form_defect(const LpPathRecord& path, const LpCoefficients& coeffs,
                        const LpDriverSet& drivers, const Field& phi);

} // namespace itokit::lpfield
