#include "itokit/errors.hpp"
#include "itokit/harness.hpp"
#include "itokit/io.hpp"
#include "itokit/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

// Command-line surface over the verification harness.
// Exit codes: 0 = all rules pass, 1 = a verification rule failed,
// 2 = configuration error.

namespace {

using itokit::harness::ExperimentConfig;

std::string default_output() {
    const char* env = std::getenv("ITOKIT_OUT");
    return env ? std::string(env) : std::string();
}

struct CommonOpts {
    std::string config_path;
    std::string scenario;
    std::string output = default_output();
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t replicas = 0;
    int threads = 0;
};

ExperimentConfig build_config(const CommonOpts& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty())
        cfg = ExperimentConfig::from_file(o.config_path);
    if (!o.scenario.empty())
        cfg.scenario = o.scenario;
    if (o.seed_set)
        cfg.seed = o.seed;
    if (o.replicas)
        cfg.replicas = o.replicas;
    if (o.threads)
        cfg.threads = o.threads;
    if (!o.output.empty())
        cfg.output_dir = o.output;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool with_config = true) {
    if (with_config)
        cmd->add_option("--config", o.config_path,
                        "JSON experiment config (see README for the schema)");
    cmd->add_option("--scenario", o.scenario, "built-in scenario name");
    cmd->add_option("--output", o.output,
                    "artifact directory (default: $ITOKIT_OUT)");
    cmd->add_option("--seed", o.seed, "seed override")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--replicas", o.replicas, "replica count override");
    cmd->add_option("--threads", o.threads,
                    "max replica parallelism (0 = hardware)");
}

int run_scenarios(const CommonOpts& opts,
                  const std::vector<std::string>& names, bool gate_exit) {
    bool all_pass = true;
    for (const auto& name : names) {
        CommonOpts o = opts;
        o.scenario = name;
        const ExperimentConfig cfg = build_config(o);
        const auto rep = itokit::harness::run_verification(cfg);
        std::cout << "== scenario " << rep.scenario << " (seed " << rep.seed
                  << ", kernels " << rep.kernels << ")\n";
        rep.print(std::cout);
        all_pass = all_pass && rep.pass();
    }
    if (!gate_exit)
        return 0;
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"itokit: pathwise verification of jump-process chain rules "
                 "and L_p norm identities"};
    app.require_subcommand(1);

    CommonOpts verify_opts, sim_opts, lp_opts, study_opts;
    std::string report_path;
    double ex1_t = 1.0;
    int ex1_levels = 6;
    std::string study_axis = "dt";
    CommonOpts ex1_opts;

    auto* verify = app.add_subcommand(
        "verify", "run a verification scenario and gate on its rules");
    add_common(verify, verify_opts);

    auto* simulate = app.add_subcommand(
        "simulate",
        "run a scenario with a small replica count and dump CSV artifacts");
    add_common(simulate, sim_opts);

    auto* example1 = app.add_subcommand(
        "example1",
        "integrate the counterexample's singular profiles over [delta, t]");
    example1->add_option("--t", ex1_t, "upper integration limit");
    example1->add_option("--delta-levels", ex1_levels,
                         "number of halving truncation levels");
    add_common(example1, ex1_opts, false);

    auto* lp_verify = app.add_subcommand(
        "lp-verify", "run the L_p field scenarios (lp-jump-p2, lp-full-p4)");
    add_common(lp_verify, lp_opts);

    auto* study = app.add_subcommand(
        "study", "refinement study along one axis (dt, dx, eps, r, layers)");
    study->add_option("--axis", study_axis, "refinement axis")->required();
    add_common(study, study_opts);

    auto* report = app.add_subcommand(
        "report", "re-print a saved report and gate on its verdict");
    report->add_option("file", report_path, "report JSON path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            ExperimentConfig cfg = build_config(verify_opts);
            if (cfg.scenario.empty())
                throw itokit::ConfigError(
                    "verify needs --scenario or --config");
            return run_scenarios(verify_opts, {cfg.scenario}, true);
        }
        if (simulate->parsed()) {
            ExperimentConfig cfg = build_config(sim_opts);
            if (cfg.scenario.empty())
                throw itokit::ConfigError(
                    "simulate needs --scenario or --config");
            if (cfg.output_dir.empty())
                cfg.output_dir = "itokit-out";
            CommonOpts o = sim_opts;
            o.output = cfg.output_dir;
            if (!o.replicas)
                o.replicas = 2;
            return run_scenarios(o, {cfg.scenario}, false);
        }
        if (example1->parsed()) {
            if (ex1_levels < 1)
                throw itokit::ConfigError("need at least one delta level");
            std::vector<double> deltas;
            for (int j = 1; j <= ex1_levels; ++j)
                deltas.push_back(ex1_t * std::pow(2.0, -j));
            const auto rep =
                itokit::harness::example1_experiment(deltas, ex1_t);
            std::cout << "delta          c1            c2            c3      "
                         "      c3 increment\n";
            std::cout.precision(10);
            for (std::size_t i = 0; i < rep.rows.size(); ++i) {
                const auto& r = rep.rows[i];
                std::cout << r.delta << "  " << r.c1 << "  " << r.c2 << "  "
                          << r.c3;
                if (i > 0)
                    std::cout << "  " << (r.c3 - rep.rows[i - 1].c3);
                std::cout << '\n';
            }
            std::cout << "c1 limit (delta -> 0): " << rep.c1_extrapolated
                      << "\nmax |numeric - antiderivative|: "
                      << rep.max_abs_error << '\n';
            if (!ex1_opts.output.empty()) {
                const auto dir = itokit::io::ensure_dir(ex1_opts.output);
                std::ofstream os(itokit::io::join(dir, "example1.csv"));
                itokit::harness::write_csv(os, rep);
            }
            return 0;
        }
        if (lp_verify->parsed()) {
            std::vector<std::string> names{"lp-jump-p2", "lp-full-p4"};
            if (!lp_opts.scenario.empty())
                names = {lp_opts.scenario};
            CommonOpts o = lp_opts;
            o.scenario.clear();
            return run_scenarios(o, names, true);
        }
        if (study->parsed()) {
            const auto axis =
                itokit::harness::study_axis_from_name(study_axis);
            ExperimentConfig cfg = build_config(study_opts);
            const auto res = itokit::harness::convergence_study(cfg, axis);
            std::cout << "study scenario: " << res.scenario << '\n';
            std::cout << "parameter       metric\n";
            std::cout.precision(10);
            for (std::size_t i = 0; i < res.parameter.size(); ++i)
                std::cout << res.parameter[i] << "    " << res.residual[i]
                          << '\n';
            if (res.indeterminate)
                std::cout << "order: indeterminate (" << res.note << ")\n";
            else
                std::cout << "order: " << res.order << '\n';
            return 0;
        }
        if (report->parsed()) {
            std::ifstream is(report_path);
            if (!is)
                throw itokit::ConfigError("cannot open report '" +
                                          report_path + "'");
            nlohmann::json j;
            try {
                is >> j;
            } catch (const nlohmann::json::parse_error& e) {
                throw itokit::ConfigError(
                    std::string("report is not valid JSON: ") + e.what());
            }
            bool pass = j.value("pass", false);
            std::cout << "scenario: " << j.value("scenario", "?")
                      << "  pass: " << (pass ? "yes" : "no") << '\n';
            for (const auto& r : j["rules"])
                std::cout << (r.value("pass", false) ? "PASS" : "FAIL")
                          << "  " << r.value("id", "?") << "  observed="
                          << r.value("observed", 0.0)
                          << " threshold=" << r.value("threshold", 0.0)
                          << '\n';
            return pass ? 0 : 1;
        }
    } catch (const itokit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
