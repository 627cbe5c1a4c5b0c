#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace itokit::harness {

// One verification experiment: a named scenario plus seeds, sizes and
// optional per-rule tolerance overrides. Loaded from a JSON config file
// (see README for the schema) or built programmatically.
struct ExperimentConfig {
    std::string scenario;
    std::uint64_t seed = 0x1705ULL;
    std::size_t replicas = 0; // 0 = scenario default
    int threads = 0;          // replica parallelism cap; 0 = hardware
    std::string output_dir;   // empty = no artifacts written
    std::map<std::string, double> overrides;  // scenario knobs
    std::map<std::string, double> tolerances; // rule id -> threshold

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);

    double knob(const std::string& name, double fallback) const;
    double tolerance(const std::string& rule_id, double fallback) const;
};

struct RuleResult {
    std::string id;
    std::string description;
    bool pass = false;
    double observed = 0.0;
    double threshold = 0.0;
    std::string details; // offending numbers on failure
};

struct VerificationReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::size_t replicas = 0;
    std::string kernels;
    std::vector<RuleResult> rules;
    std::vector<std::string> artifacts;

    bool pass() const;
    void add(RuleResult r) { rules.push_back(std::move(r)); }
    std::string to_json() const;
    void print(std::ostream& os) const; // one line per rule
};

// Runs the named scenario's full rule set. Reports are a pure function of
// (config, seed); replicas run in parallel with independent substreams.
VerificationReport run_verification(const ExperimentConfig& cfg);

std::vector<std::string> scenario_names();
const std::string& scenario_description(const std::string& name);

// The counterexample's three integrand profiles s^{-1/2}, s^{-3/4}, s^{-1}
// integrated over [delta, t] for each truncation level, against their
// antiderivatives; the first profile is also extrapolated to delta -> 0.
struct SingularIntegralRow {
    double delta = 0.0;
    double c1 = 0.0, c1_exact = 0.0;
    double c2 = 0.0, c2_exact = 0.0;
    double c3 = 0.0, c3_exact = 0.0;
};

struct SingularIntegralReport {
    double horizon = 1.0;
    std::vector<SingularIntegralRow> rows;
    double c1_extrapolated = 0.0; // delta -> 0 limit of the c1 profile
    double max_abs_error = 0.0;   // numeric vs antiderivative, all cells
    double max_c3_increment_error = 0.0; // vs log of the level ratio
};

SingularIntegralReport example1_experiment(std::span<const double> deltas,
                                           double t);
void write_csv(std::ostream& os, const SingularIntegralReport& rep);

enum class StudyAxis { dt, dx, eps, wiener_components, layers };
StudyAxis study_axis_from_name(const std::string& name);

struct StudyResult {
    StudyAxis axis;
    std::string scenario;
    std::vector<double> parameter; // refined values, decreasing
    std::vector<double> residual;  // metric per level
    double order = 0.0;            // least-squares slope of log-log fit
    bool monotone = false;
    bool indeterminate = false; // non-monotone residuals
    std::string note;
};

StudyResult convergence_study(const ExperimentConfig& cfg, StudyAxis axis);

// Runs fn(replica) for replica in [0, n) across up to `threads` workers.
// Results must be written to per-replica slots; the caller aggregates
// afterwards, so the outcome does not depend on scheduling.
void parallel_replicas(std::size_t n, int threads,
                       const std::function<void(std::size_t)>& fn);

} // namespace itokit::harness
