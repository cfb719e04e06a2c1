#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "scamp/amp.hpp"
#include "scamp/baselines.hpp"
#include "scamp/design.hpp"
#include "scamp/io.hpp"
#include "scamp/matrix_amp.hpp"
#include "scamp/metrics.hpp"
#include "scamp/model.hpp"
#include "scamp/potential.hpp"
#include "scamp/state_evolution.hpp"

namespace scamp {

enum class Task { qgt, pooled };
enum class Algorithm { sc_amp, iid_amp, mat_sc_amp, col_sc_amp, lp, cvx };
/// paper: sigma2 sets Var(Psi_i) = p sigma2 (iid) or p sigma2 / (2C) (sc).
/// rescaled: sigma2 is the variance of the rescaled noise directly.
enum class NoiseConvention { paper, rescaled };

inline const char* to_string(Task t) { return t == Task::qgt ? "qgt" : "pooled"; }

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::sc_amp: return "sc-amp";
        case Algorithm::iid_amp: return "iid-amp";
        case Algorithm::mat_sc_amp: return "mat-sc-amp";
        case Algorithm::col_sc_amp: return "col-sc-amp";
        case Algorithm::lp: return "lp";
        case Algorithm::cvx: return "cvx";
    }
    return "?";
}

struct ExperimentConfig {
    Task task = Task::qgt;
    Algorithm algorithm = Algorithm::sc_amp;
    DesignKind design = DesignKind::sc;
    int omega = 6;
    int lambda = 40;
    double alpha = 0.5;
    Index p = 20000;
    std::vector<double> delta_grid;
    Vector pi = Vector::Constant(1, 0.3);
    double sigma2 = 0.0;
    NoiseConvention noise_convention = NoiseConvention::paper;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int max_iters = 300;
    double tol = 1e-9;
    SeParamMode se_mode = SeParamMode::online_estimate;
    std::vector<double> zeta_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::string output_dir = "out";
    int threads = 0;
    Index p_cap = 2000;
    int cvx_max_iters = 100000;
    double cvx_tol = 1e-8;
    CovExpectation cov_method = CovExpectation::gauss_hermite;
    int gh_nodes = 21;
    Index qmc_points = 1000000;
    int potential_grid = 500;
    bool trace = false;
};

namespace detail {

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys = {
        "task", "algorithm", "design", "omega", "lambda", "alpha", "p", "delta_grid", "pi",
        "sigma2", "noise_convention", "seeds", "max_iters", "tol", "se_mode", "zeta_grid",
        "output_dir", "threads", "p_cap", "cvx_max_iters", "cvx_tol", "cov_method", "gh_nodes",
        "qmc_points", "potential_grid", "trace"};
    return keys;
}

template <class T>
T json_get(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

} // namespace detail

inline Task parse_task(const std::string& s) {
    if (s == "qgt") return Task::qgt;
    if (s == "pooled") return Task::pooled;
    throw ConfigError("unknown task '" + s + "'");
}

inline Algorithm parse_algorithm(const std::string& s) {
    for (Algorithm a : {Algorithm::sc_amp, Algorithm::iid_amp, Algorithm::mat_sc_amp,
                        Algorithm::col_sc_amp, Algorithm::lp, Algorithm::cvx}) {
        if (s == to_string(a)) return a;
    }
    throw ConfigError("unknown algorithm '" + s + "'");
}

inline DesignKind parse_design(const std::string& s) {
    if (s == "sc") return DesignKind::sc;
    if (s == "iid") return DesignKind::iid;
    throw ConfigError("unknown design '" + s + "'");
}

/// Overlays the keys of j onto cfg. Unknown keys are rejected.
inline void apply_config_json(ExperimentConfig& cfg, const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!detail::config_keys().count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
    }
    using detail::json_get;
    bool design_given = false;
    if (j.contains("task")) cfg.task = parse_task(json_get<std::string>(j, "task"));
    if (j.contains("algorithm")) cfg.algorithm = parse_algorithm(json_get<std::string>(j, "algorithm"));
    if (j.contains("design")) {
        cfg.design = parse_design(json_get<std::string>(j, "design"));
        design_given = true;
    }
    if (j.contains("omega")) cfg.omega = json_get<int>(j, "omega");
    if (j.contains("lambda")) cfg.lambda = json_get<int>(j, "lambda");
    if (j.contains("alpha")) cfg.alpha = json_get<double>(j, "alpha");
    if (j.contains("p")) cfg.p = json_get<Index>(j, "p");
    if (j.contains("delta_grid")) cfg.delta_grid = json_get<std::vector<double>>(j, "delta_grid");
    if (j.contains("pi")) {
        if (j.at("pi").is_number()) {
            cfg.pi = Vector::Constant(1, json_get<double>(j, "pi"));
        } else {
            const auto v = json_get<std::vector<double>>(j, "pi");
            cfg.pi = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
        }
    }
    if (j.contains("sigma2")) cfg.sigma2 = json_get<double>(j, "sigma2");
    if (j.contains("noise_convention")) {
        const auto s = json_get<std::string>(j, "noise_convention");
        if (s == "paper") cfg.noise_convention = NoiseConvention::paper;
        else if (s == "rescaled") cfg.noise_convention = NoiseConvention::rescaled;
        else throw ConfigError("unknown noise_convention '" + s + "'");
    }
    if (j.contains("seeds")) {
        if (j.at("seeds").is_number_integer()) {
            const auto count = json_get<long long>(j, "seeds");
            if (count < 1) throw ConfigError("seeds must be a positive count or a list");
            cfg.seeds.clear();
            for (long long s = 0; s < count; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        } else {
            cfg.seeds = json_get<std::vector<std::uint64_t>>(j, "seeds");
        }
    }
    if (j.contains("max_iters")) cfg.max_iters = json_get<int>(j, "max_iters");
    if (j.contains("tol")) cfg.tol = json_get<double>(j, "tol");
    if (j.contains("se_mode")) {
        const auto s = json_get<std::string>(j, "se_mode");
        if (s == "online") cfg.se_mode = SeParamMode::online_estimate;
        else if (s == "precomputed") cfg.se_mode = SeParamMode::precomputed_se;
        else throw ConfigError("unknown se_mode '" + s + "'");
    }
    if (j.contains("zeta_grid")) cfg.zeta_grid = json_get<std::vector<double>>(j, "zeta_grid");
    if (j.contains("output_dir")) cfg.output_dir = json_get<std::string>(j, "output_dir");
    if (j.contains("threads")) cfg.threads = json_get<int>(j, "threads");
    if (j.contains("p_cap")) cfg.p_cap = json_get<Index>(j, "p_cap");
    if (j.contains("cvx_max_iters")) cfg.cvx_max_iters = json_get<int>(j, "cvx_max_iters");
    if (j.contains("cvx_tol")) cfg.cvx_tol = json_get<double>(j, "cvx_tol");
    if (j.contains("cov_method")) {
        const auto s = json_get<std::string>(j, "cov_method");
        if (s == "gauss_hermite") cfg.cov_method = CovExpectation::gauss_hermite;
        else if (s == "qmc") cfg.cov_method = CovExpectation::quasi_monte_carlo;
        else throw ConfigError("unknown cov_method '" + s + "'");
    }
    if (j.contains("gh_nodes")) cfg.gh_nodes = json_get<int>(j, "gh_nodes");
    if (j.contains("qmc_points")) cfg.qmc_points = json_get<Index>(j, "qmc_points");
    if (j.contains("potential_grid")) cfg.potential_grid = json_get<int>(j, "potential_grid");
    if (j.contains("trace")) cfg.trace = json_get<bool>(j, "trace");
    if (!design_given && j.contains("algorithm")) {
        cfg.design = cfg.algorithm == Algorithm::iid_amp ? DesignKind::iid : DesignKind::sc;
    }
}

inline Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["task"] = to_string(cfg.task);
    j["algorithm"] = to_string(cfg.algorithm);
    j["design"] = to_string(cfg.design);
    j["omega"] = cfg.omega;
    j["lambda"] = cfg.lambda;
    j["alpha"] = cfg.alpha;
    j["p"] = cfg.p;
    j["delta_grid"] = cfg.delta_grid;
    if (cfg.pi.size() == 1) j["pi"] = cfg.pi[0];
    else j["pi"] = std::vector<double>(cfg.pi.data(), cfg.pi.data() + cfg.pi.size());
    j["sigma2"] = cfg.sigma2;
    j["noise_convention"] = cfg.noise_convention == NoiseConvention::paper ? "paper" : "rescaled";
    j["seeds"] = cfg.seeds;
    j["max_iters"] = cfg.max_iters;
    j["tol"] = cfg.tol;
    j["se_mode"] = cfg.se_mode == SeParamMode::online_estimate ? "online" : "precomputed";
    j["zeta_grid"] = cfg.zeta_grid;
    j["output_dir"] = cfg.output_dir;
    j["threads"] = cfg.threads;
    j["p_cap"] = cfg.p_cap;
    j["cvx_max_iters"] = cfg.cvx_max_iters;
    j["cvx_tol"] = cfg.cvx_tol;
    j["cov_method"] = cfg.cov_method == CovExpectation::gauss_hermite ? "gauss_hermite" : "qmc";
    j["gh_nodes"] = cfg.gh_nodes;
    j["qmc_points"] = cfg.qmc_points;
    j["potential_grid"] = cfg.potential_grid;
    j["trace"] = cfg.trace;
    return j;
}

inline bool is_amp(Algorithm a) { return a != Algorithm::lp && a != Algorithm::cvx; }

inline BaseMatrix experiment_base(const ExperimentConfig& cfg) {
    return cfg.design == DesignKind::sc ? build_base_matrix(cfg.omega, cfg.lambda, cfg.alpha)
                                        : iid_base_matrix(cfg.alpha);
}

/// Structural checks shared by every command.
inline void validate(const ExperimentConfig& cfg) {
    if (cfg.delta_grid.empty()) throw ConfigError("delta_grid must not be empty");
    for (double d : cfg.delta_grid) {
        if (!(d > 0.0)) throw ConfigError("delta_grid values must be positive");
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");
    if (cfg.p < 2) throw ConfigError("p must be at least 2");
    if (!(cfg.sigma2 >= 0.0)) throw ConfigError("sigma2 must be nonnegative");
    if (cfg.threads < 0) throw ConfigError("threads must be nonnegative");
    for (double z : cfg.zeta_grid) {
        if (!(z >= 0.0 && z <= 1.0)) throw ConfigError("zeta_grid values must lie in [0, 1]");
    }
    AmpConfig amp;
    amp.max_iters = cfg.max_iters;
    amp.tol = cfg.tol;
    validate(amp);
    if (cfg.task == Task::qgt) {
        if (cfg.pi.size() != 1 || !(cfg.pi[0] > 0.0 && cfg.pi[0] < 1.0)) {
            throw ConfigError("qgt needs a scalar pi in (0, 1)");
        }
        if (cfg.algorithm == Algorithm::mat_sc_amp || cfg.algorithm == Algorithm::col_sc_amp) {
            throw ConfigError(std::string(to_string(cfg.algorithm)) + " applies to the pooled task");
        }
    } else {
        check_probability_vector(cfg.pi);
        if (cfg.pi.size() < 2) throw ConfigError("pooled needs at least two categories");
        if (cfg.algorithm != Algorithm::mat_sc_amp && cfg.algorithm != Algorithm::col_sc_amp) {
            throw ConfigError("pooled task supports mat-sc-amp and col-sc-amp only");
        }
    }
    if (cfg.algorithm == Algorithm::iid_amp && cfg.design != DesignKind::iid) {
        throw ConfigError("iid-amp requires the iid design");
    }
    if (cfg.algorithm == Algorithm::sc_amp && cfg.design != DesignKind::sc) {
        throw ConfigError("sc-amp requires the sc design; use iid-amp for the iid design");
    }
    if (cfg.algorithm == Algorithm::cvx && !(cfg.sigma2 > 0.0)) {
        throw ConfigError("cvx needs sigma2 > 0");
    }
    experiment_base(cfg);
}

/// Reads a JSON config file and applies it over defaults.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
    ExperimentConfig cfg;
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    apply_config_json(cfg, j);
    return cfg;
}

/// Raw noise variance for one test under the configured convention.
inline double raw_noise_variance(const ExperimentConfig& cfg, const Design& d) {
    if (cfg.noise_convention == NoiseConvention::rescaled) return cfg.sigma2 * d.scale() * d.scale();
    return d.kind() == DesignKind::iid ? iid_raw_noise_variance(d.cols(), cfg.sigma2)
                                       : sc_raw_noise_variance(d.cols(), d.base().cols(), cfg.sigma2);
}

/// Rescaled noise variance seen by AMP and state evolution for (n, p).
inline double rescaled_noise_variance(const ExperimentConfig& cfg, const BaseMatrix& base, Index n,
                                      Index p) {
    if (cfg.noise_convention == NoiseConvention::rescaled) return cfg.sigma2;
    const double scale2 = static_cast<double>(n) * cfg.alpha * (1.0 - cfg.alpha) /
                          static_cast<double>(base.rows());
    const double raw = cfg.design == DesignKind::iid ? iid_raw_noise_variance(p, cfg.sigma2)
                                                     : sc_raw_noise_variance(p, base.cols(), cfg.sigma2);
    return raw / scale2;
}

/// Runs fn(i) for i in [0, count) on a pool of worker threads. The first
/// exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, hw);
    workers = std::min(workers, std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto body = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Simulation.

struct RunResult {
    double delta_requested = 0.0;
    double delta_actual = 0.0;
    Index n = 0;
    Index p = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    int iterations = 0;
    bool converged = false;
    double correlation = 0.0;
    double quantized_correlation = 0.0;
    double argmax_correlation = std::numeric_limits<double>::quiet_NaN();
    double mse = 0.0;
    double hamming = 0.0;
    bool hamming_bound = true;
    std::vector<double> fpr;
    std::vector<double> fnr;
    std::vector<QgtTraceRow> qgt_trace;
    std::vector<MatrixTraceRow> pooled_trace;
};

namespace detail {

inline void score_qgt(RunResult& out, const Vector& est, const Vector& truth,
                      const std::vector<double>& zetas) {
    const Vector q = quantize(est);
    out.correlation = normalized_sq_correlation(est, truth);
    out.quantized_correlation = normalized_sq_correlation(q, truth);
    out.mse = mse(est, truth);
    out.hamming = hamming_error_rate(q, truth);
    out.hamming_bound = hamming_within_mse_bound(est, q, truth);
    for (double z : zetas) {
        const auto e = fpr_fnr(hard_decision(est, z), truth);
        out.fpr.push_back(e.fpr);
        out.fnr.push_back(e.fnr);
    }
}

inline void score_pooled(RunResult& out, const RowMatrix& est, const RowMatrix& truth) {
    const RowMatrix q = quantize(est, QuantizeMode::threshold_half);
    const RowMatrix a = quantize(est, QuantizeMode::row_argmax);
    out.correlation = normalized_sq_correlation(est, truth);
    out.quantized_correlation = normalized_sq_correlation(q, truth);
    out.argmax_correlation = normalized_sq_correlation(a, truth);
    out.mse = mse(est, truth);
    out.hamming = hamming_error_rate(q, truth);
    out.hamming_bound = out.hamming <= 4.0 * out.mse;
}

} // namespace detail

/// Effective p for a sweep: baselines are capped at p_cap (rounded down to
/// a multiple of C); `warn` receives a message when the cap applies.
inline Index effective_p(const ExperimentConfig& cfg, const std::function<void(const std::string&)>& warn) {
    if (is_amp(cfg.algorithm) || cfg.p <= cfg.p_cap) return cfg.p;
    const Index C = experiment_base(cfg).cols();
    const Index capped = std::max<Index>(C, (cfg.p_cap / C) * C);
    if (warn) warn("p=" + std::to_string(cfg.p) + " exceeds p_cap; using p=" + std::to_string(capped));
    return capped;
}

inline RunResult simulate_point(const ExperimentConfig& cfg, double delta, std::uint64_t seed, Index p) {
    RunResult out;
    out.delta_requested = delta;
    out.seed = seed;
    const BaseMatrix base = experiment_base(cfg);
    const Dimensions dims = round_dimensions(base, delta, p);
    out.delta_actual = dims.delta_actual;
    out.n = dims.n;
    out.p = dims.p;
    try {
        const Design D = Design::sample(base, dims.n, dims.p, seed, cfg.design);
        const double raw_var = raw_noise_variance(cfg, D);
        AmpConfig amp;
        amp.max_iters = cfg.max_iters;
        amp.tol = cfg.tol;
        amp.se_mode = cfg.se_mode;
        if (cfg.task == Task::qgt) {
            const double pi = cfg.pi[0];
            const Vector beta = sample_qgt_signal(dims.p, pi, seed);
            const QgtInstance inst =
                observe_qgt(D, beta, raw_var, NoiseScaling::raw_variance, seed, BlockSumMode::truth, pi);
            Vector est;
            if (is_amp(cfg.algorithm)) {
                std::optional<ScalarSeResult> se;
                QgtAmpOptions opt;
                opt.config = amp;
                if (cfg.se_mode == SeParamMode::precomputed_se) {
                    ScalarSeOptions so;
                    so.k_max = cfg.max_iters;
                    se = iterate_scalar_se(D.base(), dims.delta_actual, pi, inst.sigma2, so);
                    opt.se = &*se;
                }
                if (cfg.trace) opt.truth = &beta;
                auto r = run_sc_amp_qgt(D, inst.yt, pi, inst.sigma2, opt);
                out.iterations = r.iterations;
                out.converged = r.converged;
                out.qgt_trace = std::move(r.trace);
                est = std::move(r.beta_hat);
            } else if (cfg.algorithm == Algorithm::lp) {
                auto r = lp_estimate(D.dense_raw(), inst.y);
                out.iterations = r.iterations;
                out.converged = r.converged;
                est = std::move(r.beta);
            } else {
                CvxOptions co;
                co.max_iters = cfg.cvx_max_iters;
                co.tol = cfg.cvx_tol;
                auto r = cvx_estimate(D.dense_raw(), inst.y, inst.raw_noise_variance, pi, co);
                out.iterations = r.iterations;
                out.converged = r.converged;
                est = std::move(r.beta);
            }
            detail::score_qgt(out, est, beta, cfg.zeta_grid);
        } else {
            const Index L = cfg.pi.size();
            const RowMatrix B = sample_pooled_signal(dims.p, cfg.pi, seed);
            const Matrix raw_cov = raw_var * Matrix::Identity(L, L);
            const PooledInstance inst =
                observe_pooled(D, B, cfg.pi, raw_cov, NoiseScaling::raw_variance, seed);
            RowMatrix est;
            if (cfg.algorithm == Algorithm::mat_sc_amp) {
                std::optional<CovSeResult> se;
                MatrixAmpOptions opt;
                opt.config = amp;
                if (cfg.se_mode == SeParamMode::precomputed_se) {
                    CovSeOptions so;
                    so.k_max = cfg.max_iters;
                    so.keep_trajectory = true;
                    so.method = cfg.cov_method;
                    so.gh_nodes = cfg.gh_nodes;
                    so.qmc_points = cfg.qmc_points;
                    se = iterate_cov_se(D.base(), dims.delta_actual, cfg.pi, inst.noise_cov, so);
                    opt.se = &*se;
                }
                if (cfg.trace) opt.truth = &B;
                auto r = run_matrix_sc_amp(D, inst.Yt, cfg.pi, inst.noise_cov, opt);
                out.iterations = r.iterations;
                out.converged = r.converged;
                out.pooled_trace = std::move(r.trace);
                est = std::move(r.B_hat);
            } else {
                auto r = run_columnwise_sc_amp(D, inst.Yt, cfg.pi, inst.noise_cov.diagonal(), amp);
                for (const auto& e : r.errors) {
                    if (!e.empty()) throw NumericalError(e);
                }
                int iters = 0;
                bool conv = true;
                for (const auto& c : r.columns) {
                    iters = std::max(iters, c.iterations);
                    conv = conv && (c.iterations == 0 || c.converged);
                }
                out.iterations = iters;
                out.converged = conv;
                est = std::move(r.B_hat);
            }
            detail::score_pooled(out, est, B);
        }
        out.ok = true;
    } catch (const NumericalError& e) {
        out.error = e.what();
    }
    return out;
}

struct SimulationOutput {
    ExperimentConfig config;
    Index p = 0;
    std::vector<RunResult> runs;  // delta-major, then seed
};

inline SimulationOutput run_simulation(const ExperimentConfig& cfg,
                                       const std::function<void(const std::string&)>& warn = {}) {
    validate(cfg);
    SimulationOutput out;
    out.config = cfg;
    out.p = effective_p(cfg, warn);
    const std::size_t S = cfg.seeds.size();
    out.runs.resize(cfg.delta_grid.size() * S);
    parallel_for(out.runs.size(), cfg.threads, [&](std::size_t i) {
        out.runs[i] = simulate_point(cfg, cfg.delta_grid[i / S], cfg.seeds[i % S], out.p);
    });
    return out;
}

inline std::string zeta_label(double z) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", z);
    return buf;
}

/// Per-run rows.
inline CsvTable simulation_runs_table(const SimulationOutput& s) {
    std::vector<std::string> h = {"algorithm", "design", "delta", "delta_actual", "n", "p", "seed",
                                  "ok", "iterations", "converged", "correlation",
                                  "quantized_correlation", "argmax_correlation", "mse", "hamming",
                                  "hamming_bound_ok"};
    for (double z : s.config.zeta_grid) h.push_back("fpr@" + zeta_label(z));
    for (double z : s.config.zeta_grid) h.push_back("fnr@" + zeta_label(z));
    h.push_back("error");
    CsvTable t(h);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : s.runs) {
        CsvTable::Row row;
        row.add(to_string(s.config.algorithm)).add(to_string(s.config.design));
        row.add(r.delta_requested).add(r.delta_actual).add(r.n).add(r.p).add(r.seed);
        row.add(r.ok).add(r.iterations).add(r.converged);
        row.add(r.ok ? r.correlation : nan).add(r.ok ? r.quantized_correlation : nan);
        row.add(r.ok ? r.argmax_correlation : nan);
        row.add(r.ok ? r.mse : nan).add(r.ok ? r.hamming : nan).add(r.hamming_bound);
        for (std::size_t z = 0; z < s.config.zeta_grid.size(); ++z) row.add(z < r.fpr.size() ? r.fpr[z] : nan);
        for (std::size_t z = 0; z < s.config.zeta_grid.size(); ++z) row.add(z < r.fnr.size() ? r.fnr[z] : nan);
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        row.add(err);
        t.push(row);
    }
    return t;
}

/// One row per delta: mean and sample standard deviation over successful seeds.
inline CsvTable simulation_summary_table(const SimulationOutput& s) {
    std::vector<std::string> h = {"algorithm", "design", "delta", "delta_actual", "n", "p",
                                  "seeds_ok", "seeds_failed", "zero_error_runs",
                                  "correlation_mean", "correlation_sd",
                                  "quantized_correlation_mean", "quantized_correlation_sd",
                                  "mse_mean", "mse_sd", "hamming_mean", "hamming_sd",
                                  "iterations_mean", "hamming_bound_violations"};
    for (double z : s.config.zeta_grid) {
        h.push_back("fpr_mean@" + zeta_label(z));
        h.push_back("fpr_sd@" + zeta_label(z));
    }
    for (double z : s.config.zeta_grid) {
        h.push_back("fnr_mean@" + zeta_label(z));
        h.push_back("fnr_sd@" + zeta_label(z));
    }
    CsvTable t(h);
    const std::size_t S = s.config.seeds.size();
    for (std::size_t d = 0; d < s.config.delta_grid.size(); ++d) {
        std::vector<double> corr, qcorr, m, ham, iters;
        std::vector<std::vector<double>> fpr(s.config.zeta_grid.size()), fnr(s.config.zeta_grid.size());
        Index failed = 0;
        Index zero = 0;
        Index violations = 0;
        const RunResult& first = s.runs[d * S];
        for (std::size_t k = 0; k < S; ++k) {
            const RunResult& r = s.runs[d * S + k];
            if (!r.ok) {
                ++failed;
                continue;
            }
            corr.push_back(r.correlation);
            qcorr.push_back(r.quantized_correlation);
            m.push_back(r.mse);
            ham.push_back(r.hamming);
            iters.push_back(r.iterations);
            if (r.hamming == 0.0) ++zero;
            if (!r.hamming_bound) ++violations;
            for (std::size_t z = 0; z < r.fpr.size(); ++z) {
                if (!std::isnan(r.fpr[z])) fpr[z].push_back(r.fpr[z]);
                if (!std::isnan(r.fnr[z])) fnr[z].push_back(r.fnr[z]);
            }
        }
        CsvTable::Row row;
        row.add(to_string(s.config.algorithm)).add(to_string(s.config.design));
        row.add(first.delta_requested).add(first.delta_actual).add(first.n).add(first.p);
        row.add(static_cast<Index>(corr.size())).add(failed).add(zero);
        for (const auto* v : {&corr, &qcorr, &m, &ham}) {
            const Summary sm = summarize(*v);
            row.add(sm.mean).add(sm.sd);
        }
        row.add(summarize(iters).mean).add(violations);
        for (const auto& v : fpr) {
            const Summary sm = summarize(v);
            row.add(sm.mean).add(sm.sd);
        }
        for (const auto& v : fnr) {
            const Summary sm = summarize(v);
            row.add(sm.mean).add(sm.sd);
        }
        t.push(row);
    }
    return t;
}

inline CsvTable simulation_trace_table(const SimulationOutput& s) {
    CsvTable t({"delta", "seed", "k", "block", "param", "mse", "correlation"});
    for (const auto& r : s.runs) {
        for (const auto& row : r.qgt_trace) {
            for (Index c = 0; c < row.chi2.size(); ++c) {
                CsvTable::Row x;
                x.add(r.delta_requested).add(r.seed).add(row.k).add(c).add(row.chi2[c]);
                x.add(row.mse).add(row.correlation);
                t.push(x);
            }
        }
        for (const auto& row : r.pooled_trace) {
            for (Index c = 0; c < row.tau_trace.size(); ++c) {
                CsvTable::Row x;
                x.add(r.delta_requested).add(r.seed).add(row.k).add(c).add(row.tau_trace[c]);
                x.add(row.mse).add(row.correlation);
                t.push(x);
            }
        }
    }
    return t;
}

/// Resolved config plus rounded dimensions, for the JSON sidecars.
inline Json resolved_config(const ExperimentConfig& cfg, Index p) {
    Json j = config_to_json(cfg);
    const BaseMatrix base = experiment_base(cfg);
    Json dims = Json::array();
    for (double d : cfg.delta_grid) {
        const Dimensions dm = round_dimensions(base, d, p);
        dims.push_back({{"delta", d}, {"delta_actual", dm.delta_actual}, {"n", dm.n}, {"p", dm.p}});
    }
    j["p_effective"] = p;
    j["dimensions"] = dims;
    return j;
}

// ---------------------------------------------------------------------------
// State evolution sweeps.

struct SePoint {
    double delta = 0.0;
    double delta_actual = 0.0;
    Index n = 0;
    double sigma2 = 0.0;  // rescaled
    int iterations = 0;
    bool converged = false;
    double mse = 0.0;
    double correlation = 0.0;
    double quantized_correlation = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> fpr;
    std::vector<double> fnr;
};

inline std::vector<SePoint> run_se_sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    const BaseMatrix base = experiment_base(cfg);
    std::vector<SePoint> pts(cfg.delta_grid.size());
    parallel_for(pts.size(), cfg.threads, [&](std::size_t i) {
        SePoint& pt = pts[i];
        pt.delta = cfg.delta_grid[i];
        const Dimensions dm = round_dimensions(base, pt.delta, cfg.p);
        pt.delta_actual = dm.delta_actual;
        pt.n = dm.n;
        pt.sigma2 = rescaled_noise_variance(cfg, base, dm.n, dm.p);
        if (cfg.task == Task::qgt) {
            ScalarSeOptions so;
            so.keep_trajectory = false;
            const auto se = iterate_scalar_se(base, pt.delta_actual, cfg.pi[0], pt.sigma2, so);
            const auto pred = se_predict_metrics(se, cfg.zeta_grid);
            pt.iterations = se.iterations;
            pt.converged = se.converged;
            pt.mse = pred.mse;
            pt.correlation = pred.correlation;
            pt.fpr = pred.fpr;
            pt.fnr = pred.fnr;
        } else {
            CovSeOptions so;
            so.method = cfg.cov_method;
            so.gh_nodes = cfg.gh_nodes;
            so.qmc_points = cfg.qmc_points;
            const Index L = cfg.pi.size();
            const auto se = iterate_cov_se(base, pt.delta_actual, cfg.pi,
                                           pt.sigma2 * Matrix::Identity(L, L), so);
            pt.iterations = se.iterations;
            pt.converged = se.converged;
            double tr = 0.0;
            for (const auto& m : se.psi) tr += m.trace();
            pt.mse = tr / static_cast<double>(se.psi.size());
            pt.correlation = se.correlation;
            pt.quantized_correlation = se.quantized_correlation;
        }
    });
    return pts;
}

inline CsvTable se_table(const ExperimentConfig& cfg, const std::vector<SePoint>& pts) {
    std::vector<std::string> h = {"task", "design", "delta", "delta_actual", "n", "p", "omega", "lambda"};
    for (Index l = 0; l < cfg.pi.size(); ++l) h.push_back("pi" + std::to_string(l));
    for (const char* c : {"sigma2", "k_converged", "converged", "mse", "correlation",
                          "quantized_correlation"}) {
        h.push_back(c);
    }
    for (double z : cfg.zeta_grid) h.push_back("fpr@" + zeta_label(z));
    for (double z : cfg.zeta_grid) h.push_back("fnr@" + zeta_label(z));
    h.push_back("n_star_over_p");
    CsvTable t(h);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double ref = cfg.task == Task::qgt ? reference_test_limit(cfg.pi[0], cfg.p)
                                              : reference_test_limit(cfg.pi, cfg.p);
    const BaseMatrix base = experiment_base(cfg);
    for (const auto& pt : pts) {
        CsvTable::Row row;
        row.add(to_string(cfg.task)).add(to_string(cfg.design)).add(pt.delta).add(pt.delta_actual);
        row.add(pt.n).add(cfg.p).add(base.omega).add(base.lambda);
        for (Index l = 0; l < cfg.pi.size(); ++l) row.add(cfg.pi[l]);
        row.add(pt.sigma2).add(pt.iterations).add(pt.converged).add(pt.mse).add(pt.correlation);
        row.add(pt.quantized_correlation);
        for (std::size_t z = 0; z < cfg.zeta_grid.size(); ++z) row.add(z < pt.fpr.size() ? pt.fpr[z] : nan);
        for (std::size_t z = 0; z < cfg.zeta_grid.size(); ++z) row.add(z < pt.fnr.size() ? pt.fnr[z] : nan);
        row.add(ref);
        t.push(row);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Potential curves.

/// Drops repeated delta values (keeping the first) and reports each drop.
inline std::vector<double> dedupe_deltas(const std::vector<double>& deltas,
                                         const std::function<void(const std::string&)>& warn) {
    std::vector<double> out;
    for (double d : deltas) {
        if (std::find(out.begin(), out.end(), d) != out.end()) {
            if (warn) warn("duplicate delta " + format_number(d) + " ignored");
            continue;
        }
        out.push_back(d);
    }
    return out;
}

inline std::vector<PotentialCurve> run_potential_sweep(const ExperimentConfig& cfg,
                                                       const std::function<void(const std::string&)>& warn = {}) {
    validate(cfg);
    if (cfg.task != Task::qgt) throw ConfigError("potential applies to the qgt task");
    const std::vector<double> deltas = dedupe_deltas(cfg.delta_grid, warn);
    const BaseMatrix base = experiment_base(cfg);
    std::vector<PotentialCurve> curves(deltas.size());
    parallel_for(curves.size(), cfg.threads, [&](std::size_t i) {
        const Dimensions dm = round_dimensions(base, deltas[i], cfg.p);
        double s2 = rescaled_noise_variance(cfg, base, dm.n, dm.p);
        if (!(s2 > 0.0)) s2 = kNoiselessSigma * kNoiselessSigma;
        curves[i] = find_argmin_and_stationary(deltas[i], cfg.pi[0], s2, cfg.potential_grid);
    });
    return curves;
}

inline CsvTable potential_curve_table(const std::vector<PotentialCurve>& curves) {
    CsvTable t({"delta", "b", "U"});
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.grid.size(); ++i) {
            CsvTable::Row row;
            row.add(c.delta).add(c.grid[i]).add(c.values[i]);
            t.push(row);
        }
    }
    return t;
}

inline CsvTable potential_summary_table(const std::vector<PotentialCurve>& curves) {
    CsvTable t({"delta", "pi", "sigma2", "argmin_b", "argmin_U", "largest_stationary_b",
                "stationary_count"});
    for (const auto& c : curves) {
        CsvTable::Row row;
        row.add(c.delta).add(c.pi).add(c.sigma2).add(c.argmin_b).add(c.argmin_value);
        row.add(c.largest_stationary_b).add(static_cast<Index>(c.stationary_points.size()));
        t.push(row);
    }
    return t;
}

inline Json potential_sidecar(const ExperimentConfig& cfg, const std::vector<PotentialCurve>& curves) {
    Json j = config_to_json(cfg);
    Json rows = Json::array();
    for (const auto& c : curves) {
        rows.push_back({{"delta", c.delta},
                        {"pi", c.pi},
                        {"sigma2", c.sigma2},
                        {"argminB", c.argmin_b},
                        {"largestStationaryB", c.largest_stationary_b},
                        {"stationaryPoints", c.stationary_points}});
    }
    j["curves"] = rows;
    return j;
}

} // namespace scamp
