#include "itokit/harness.hpp"

#include "itokit/errors.hpp"
#include "itokit/kernels.hpp"
#include "itokit/quadrature.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace itokit::harness {

using nlohmann::json;

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") +
                          e.what());
    }
    ExperimentConfig cfg;
    if (!j.contains("scenario") || !j["scenario"].is_string())
        throw ConfigError("config needs a string field 'scenario'");
    cfg.scenario = j["scenario"].get<std::string>();
    if (j.contains("seed"))
        cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("replicas"))
        cfg.replicas = j["replicas"].get<std::size_t>();
    if (j.contains("threads"))
        cfg.threads = j["threads"].get<int>();
    if (j.contains("output"))
        cfg.output_dir = j["output"].get<std::string>();
    if (j.contains("overrides"))
        for (auto& [k, v] : j["overrides"].items())
            cfg.overrides[k] = v.get<double>();
    if (j.contains("tolerances"))
        for (auto& [k, v] : j["tolerances"].items())
            cfg.tolerances[k] = v.get<double>();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(
    const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str());
}

double ExperimentConfig::knob(const std::string& name,
                              double fallback) const {
    auto it = overrides.find(name);
    return it == overrides.end() ? fallback : it->second;
}

double ExperimentConfig::tolerance(const std::string& rule_id,
                                   double fallback) const {
    auto it = tolerances.find(rule_id);
    return it == tolerances.end() ? fallback : it->second;
}

bool VerificationReport::pass() const {
    for (const auto& r : rules)
        if (!r.pass)
            return false;
    return !rules.empty();
}

std::string VerificationReport::to_json() const {
    json j;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["replicas"] = replicas;
    j["kernels"] = kernels;
    j["pass"] = pass();
    j["rules"] = json::array();
    for (const auto& r : rules) {
        json jr;
        jr["id"] = r.id;
        jr["description"] = r.description;
        jr["pass"] = r.pass;
        jr["observed"] = r.observed;
        jr["threshold"] = r.threshold;
        if (!r.details.empty())
            jr["details"] = r.details;
        j["rules"].push_back(jr);
    }
    j["artifacts"] = artifacts;
    return j.dump(2);
}

void VerificationReport::print(std::ostream& os) const {
    for (const auto& r : rules) {
        os << (r.pass ? "PASS" : "FAIL") << "  " << r.id << "  observed="
           << r.observed << " threshold=" << r.threshold << "  "
           << r.description;
        if (!r.pass && !r.details.empty())
            os << "  [" << r.details << "]";
        os << '\n';
    }
}

SingularIntegralReport example1_experiment(std::span<const double> deltas,
                                           double t) {
    if (deltas.empty())
        throw ConfigError("example1 needs at least one truncation level");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0) || deltas[i] >= t)
            throw ConfigError("truncation levels must lie in (0, t)");
        if (i > 0 && !(deltas[i] < deltas[i - 1]))
            throw ConfigError("truncation levels must decrease");
    }
    SingularIntegralReport rep;
    rep.horizon = t;
    const auto run = [&](double a, double expo) {
        return quad::integrate_adaptive(
                   [expo](double s) { return std::pow(s, expo); }, a, t,
                   1e-12, 1e-14)
            .value;
    };
    std::vector<double> c1s;
    for (double d : deltas) {
        SingularIntegralRow row;
        row.delta = d;
        row.c1 = run(d, -0.5);
        row.c1_exact = 2.0 * (std::sqrt(t) - std::sqrt(d));
        row.c2 = run(d, -0.75);
        row.c2_exact = 4.0 * (std::pow(t, 0.25) - std::pow(d, 0.25));
        row.c3 = run(d, -1.0);
        row.c3_exact = std::log(t / d);
        rep.max_abs_error = std::max(
            {rep.max_abs_error, std::fabs(row.c1 - row.c1_exact),
             std::fabs(row.c2 - row.c2_exact),
             std::fabs(row.c3 - row.c3_exact)});
        c1s.push_back(row.c1);
        rep.rows.push_back(row);
    }
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
        const double inc = rep.rows[i + 1].c3 - rep.rows[i].c3;
        const double expected =
            std::log(rep.rows[i].delta / rep.rows[i + 1].delta);
        rep.max_c3_increment_error =
            std::max(rep.max_c3_increment_error, std::fabs(inc - expected));
    }
    if (deltas.size() >= 3) {
        std::vector<double> ds(deltas.begin(), deltas.end());
        rep.c1_extrapolated = quad::power_law_extrapolate(ds, c1s);
    } else {
        rep.c1_extrapolated = c1s.back();
    }
    return rep;
}

void write_csv(std::ostream& os, const SingularIntegralReport& rep) {
    os << "delta,c1,c1_exact,c2,c2_exact,c3,c3_exact\n";
    os.precision(17);
    for (const auto& r : rep.rows)
        os << r.delta << ',' << r.c1 << ',' << r.c1_exact << ',' << r.c2
           << ',' << r.c2_exact << ',' << r.c3 << ',' << r.c3_exact << '\n';
}

StudyAxis study_axis_from_name(const std::string& name) {
    if (name == "dt")
        return StudyAxis::dt;
    if (name == "dx")
        return StudyAxis::dx;
    if (name == "eps")
        return StudyAxis::eps;
    if (name == "r" || name == "R" || name == "wiener")
        return StudyAxis::wiener_components;
    if (name == "layers")
        return StudyAxis::layers;
    throw ConfigError("unknown study axis '" + name +
                      "' (expected dt, dx, eps, r or layers)");
}

void parallel_replicas(std::size_t n, int threads,
                       const std::function<void(std::size_t)>& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0)
        hw = 2;
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                       : static_cast<std::size_t>(hw);
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace itokit::harness
