// scamp: experiment driver for SC-AMP on quantitative group testing and
// pooled data.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scamp.hpp"

namespace fs = std::filesystem;
using namespace scamp;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3 };

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// Flags shared by the sweep commands. Only flags the user passed end up in
// the override object, so file values survive otherwise.
struct Overrides {
    std::string config_path;
    std::optional<std::string> task, algorithm, design, noise_convention, se_mode, output_dir, cov_method;
    std::optional<int> omega, lambda, max_iters, threads, cvx_max_iters, gh_nodes, potential_grid;
    std::optional<double> alpha, sigma2, tol, cvx_tol;
    std::optional<long long> p, p_cap, qmc_points, seed_count;
    std::vector<double> delta, pi, zeta;
    std::vector<std::uint64_t> seeds;
    bool trace = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        app->add_option("--task", task, "qgt or pooled");
        app->add_option("--algorithm", algorithm, "sc-amp, iid-amp, mat-sc-amp, col-sc-amp, lp, cvx");
        app->add_option("--design", design, "sc or iid");
        app->add_option("--omega", omega, "coupling width");
        app->add_option("--lambda", lambda, "coupling length");
        app->add_option("--alpha", alpha, "test inclusion probability");
        app->add_option("-p,--p", p, "number of items");
        app->add_option("-d,--delta", delta, "sampling ratios n/p")->delimiter(',');
        app->add_option("--pi", pi, "prior (one value for qgt, L values for pooled)")->delimiter(',');
        app->add_option("--sigma2", sigma2, "noise level");
        app->add_option("--noise-convention", noise_convention, "paper or rescaled");
        app->add_option("--seeds", seeds, "explicit seed list")->delimiter(',');
        app->add_option("--seed-count", seed_count, "use seeds 0..N-1");
        app->add_option("--max-iters", max_iters, "AMP iteration cap");
        app->add_option("--tol", tol, "AMP stopping tolerance");
        app->add_option("--se-mode", se_mode, "online or precomputed");
        app->add_option("--zeta", zeta, "decision thresholds")->delimiter(',');
        app->add_option("-o,--out", output_dir, "output directory");
        app->add_option("-j,--threads", threads, "worker threads (0 = hardware)");
        app->add_option("--p-cap", p_cap, "largest p for lp/cvx");
        app->add_option("--cvx-max-iters", cvx_max_iters, "cvx iteration cap");
        app->add_option("--cvx-tol", cvx_tol, "cvx gradient-mapping tolerance");
        app->add_option("--cov-method", cov_method, "gauss_hermite or qmc");
        app->add_option("--gh-nodes", gh_nodes, "Gauss-Hermite nodes per axis");
        app->add_option("--qmc-points", qmc_points, "quasi-Monte Carlo points");
        app->add_option("--potential-grid", potential_grid, "grid size for the potential");
        app->add_flag("--trace", trace, "write per-iteration traces");
    }

    Json to_json() const {
        Json j = Json::object();
        auto put = [&](const char* key, const auto& v) {
            if (v) j[key] = *v;
        };
        put("task", task);
        put("algorithm", algorithm);
        put("design", design);
        put("noise_convention", noise_convention);
        put("se_mode", se_mode);
        put("output_dir", output_dir);
        put("cov_method", cov_method);
        put("omega", omega);
        put("lambda", lambda);
        put("max_iters", max_iters);
        put("threads", threads);
        put("cvx_max_iters", cvx_max_iters);
        put("gh_nodes", gh_nodes);
        put("potential_grid", potential_grid);
        put("alpha", alpha);
        put("sigma2", sigma2);
        put("tol", tol);
        put("cvx_tol", cvx_tol);
        put("p", p);
        put("p_cap", p_cap);
        put("qmc_points", qmc_points);
        put("seeds", seed_count);
        if (!delta.empty()) j["delta_grid"] = delta;
        if (!pi.empty()) j["pi"] = pi.size() == 1 ? Json(pi[0]) : Json(pi);
        if (!zeta.empty()) j["zeta_grid"] = zeta;
        if (!seeds.empty()) j["seeds"] = seeds;
        if (trace) j["trace"] = true;
        return j;
    }

    ExperimentConfig resolve(const Json& defaults = Json::object()) const {
        ExperimentConfig cfg;
        apply_config_json(cfg, defaults);
        if (!config_path.empty()) apply_config_json(cfg, Json::parse(read_file(config_path)));
        apply_config_json(cfg, to_json());
        return cfg;
    }
};

void save_with_sidecar(const CsvTable& t, const fs::path& path, const Json& sidecar) {
    t.save(path);
    save_json(sidecar_path(path), sidecar);
    std::cout << "wrote " << path.string() << '\n';
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& prefix) {
    const SimulationOutput out = run_simulation(cfg, warn);
    const fs::path dir = cfg.output_dir;
    const Json side = resolved_config(cfg, out.p);
    save_with_sidecar(simulation_runs_table(out), dir / (prefix + "_runs.csv"), side);
    save_with_sidecar(simulation_summary_table(out), dir / (prefix + "_summary.csv"), side);
    if (cfg.trace) save_with_sidecar(simulation_trace_table(out), dir / (prefix + "_trace.csv"), side);
    int failed = 0;
    for (const auto& r : out.runs) {
        if (!r.ok) {
            ++failed;
            warn("delta=" + format_number(r.delta_requested) + " seed=" + std::to_string(r.seed) + ": " + r.error);
        }
    }
    return failed > 0 ? kNumerical : kOk;
}

int cmd_se(const ExperimentConfig& cfg) {
    const auto pts = run_se_sweep(cfg);
    save_with_sidecar(se_table(cfg, pts), fs::path(cfg.output_dir) / "se.csv", resolved_config(cfg, cfg.p));
    return kOk;
}

int cmd_potential(const ExperimentConfig& cfg) {
    const auto curves = run_potential_sweep(cfg, warn);
    const fs::path dir = cfg.output_dir;
    const Json side = potential_sidecar(cfg, curves);
    save_with_sidecar(potential_curve_table(curves), dir / "potential_curves.csv", side);
    save_with_sidecar(potential_summary_table(curves), dir / "potential_summary.csv", side);
    return kOk;
}

struct DesignArgs {
    int omega = 6;
    int lambda = 40;
    double alpha = 0.5;
    long long p = 2000;
    double delta = 0.5;
    std::uint64_t seed = 0;
    std::string kind = "sc";
    std::string out = "design.csv";
};

int cmd_design(const DesignArgs& a) {
    const DesignKind kind = parse_design(a.kind);
    const BaseMatrix base = kind == DesignKind::sc ? build_base_matrix(a.omega, a.lambda, a.alpha)
                                                   : iid_base_matrix(a.alpha);
    const Dimensions dm = round_dimensions(base, a.delta, a.p);
    const Design d = Design::sample(base, dm.n, dm.p, a.seed, kind);
    dump_design(d, a.out);
    std::cout << "wrote " << a.out << " (n=" << dm.n << ", p=" << dm.p << ")\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatially coupled AMP for quantitative group testing and pooled data"};
    app.require_subcommand(1);

    DesignArgs dargs;
    auto* design = app.add_subcommand("design", "sample a design and dump its nonzero entries");
    design->add_option("--omega", dargs.omega, "coupling width");
    design->add_option("--lambda", dargs.lambda, "coupling length");
    design->add_option("--alpha", dargs.alpha, "test inclusion probability");
    design->add_option("-p,--p", dargs.p, "number of items");
    design->add_option("-d,--delta", dargs.delta, "sampling ratio n/p");
    design->add_option("--seed", dargs.seed, "seed");
    design->add_option("--kind", dargs.kind, "sc or iid");
    design->add_option("-o,--out", dargs.out, "output CSV path");

    Overrides sim, base, se, pot;
    auto* simulate = app.add_subcommand("simulate", "run AMP over delta x seeds");
    sim.attach(simulate);
    auto* baseline = app.add_subcommand("baseline", "run the LP or CVX estimator over delta x seeds");
    base.attach(baseline);
    auto* sesub = app.add_subcommand("se", "state evolution sweep");
    se.attach(sesub);
    auto* potsub = app.add_subcommand("potential", "potential curves and stationary points");
    pot.attach(potsub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*design) return cmd_design(dargs);
        if (*simulate) {
            const ExperimentConfig cfg = sim.resolve();
            if (!is_amp(cfg.algorithm)) throw ConfigError("simulate runs AMP; use the baseline command for lp/cvx");
            return cmd_simulate(cfg, "simulate");
        }
        if (*baseline) {
            const ExperimentConfig cfg = base.resolve(Json{{"algorithm", "lp"}, {"p", 2000}});
            if (is_amp(cfg.algorithm)) throw ConfigError("baseline runs lp or cvx");
            return cmd_simulate(cfg, "baseline");
        }
        if (*sesub) return cmd_se(se.resolve());
        if (*potsub) return cmd_potential(pot.resolve(Json{{"pi", 0.1}}));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
    return kOther;
}
