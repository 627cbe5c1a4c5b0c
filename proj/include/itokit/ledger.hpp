#pragma once

#include "itokit/process.hpp"
#include "itokit/quadrature.hpp"
#include "itokit/testfunc.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace itokit::calculus {

// Term-by-term evaluation of one Ito formula along one realized path.
// Every column is cumulative on the merged grid; residual(t) is
// lhs(t) - lhs(0) - sum of terms. quad_budget accumulates the embedded
// quadrature error estimate plus 3x the standard error of any Monte-Carlo
// mark integrals, so exact scenarios carry a near-zero budget.
struct TermLedger {
    std::string formula; // "standard" | "natural" | "power"
    std::vector<double> times;
    std::vector<std::string> term_names;
    std::vector<std::vector<double>> terms; // [term][time point]
    std::vector<double> lhs;
    std::vector<double> residual;
    std::vector<double> quad_budget;
    quad::Rule rule = quad::Rule::gauss3;

    double rhs_total(std::size_t i) const;
    double rhs_total() const { return rhs_total(times.size() - 1); }
    double final_residual() const { return residual.back(); }
    double final_budget() const { return quad_budget.back(); }
    // 1 + sum of final term magnitudes; the reference scale for residual
    // tolerances.
    double term_scale() const;
};

void write_csv(std::ostream& os, const TermLedger& ledger);

struct LedgerOptions {
    quad::Rule rule = quad::Rule::gauss3;
    bool force = false; // evaluate even if a condition was flagged divergent
};

// Classical chain-rule formula: compensated jump increment term plus the
// remainder integrated against mu x ds. Refuses when the condition report
// (supplied, or computed here when null) flags a divergent integral and
// force is not set.
TermLedger ledger_standard(const process::PathRecord& path,
                           const process::Coefficients& coeffs,
                           const process::DriverSet& drivers,
                           const TestFunction& phi,
                           const process::ConditionReport* conditions = nullptr,
                           const LedgerOptions& opts = {});

// Rearranged formula valid under the natural integrability conditions:
// linear compensated term plus remainder summed against realized jumps.
TermLedger ledger_natural(const process::PathRecord& path,
                          const process::Coefficients& coeffs,
                          const process::DriverSet& drivers,
                          const TestFunction& phi,
                          const LedgerOptions& opts = {});

// Specialization of the natural formula to |x|^p, p >= 2 real, with
// closed-form derivatives and the 0/0 := 0 convention at the origin. The
// (p-2)-weighted column is identically zero when p == 2.
TermLedger ledger_power(const process::PathRecord& path,
                        const process::Coefficients& coeffs,
                        const process::DriverSet& drivers, double p,
                        const LedgerOptions& opts = {});

} // namespace itokit::calculus
