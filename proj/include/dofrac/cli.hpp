#pragma once

// Subcommand drivers behind the `dofrac` executable. Each driver reads an
// ExperimentConfig, runs one job per configured weight (in parallel when jobs > 1)
// and writes its tables into the output directory; with several weights every job
// gets its own subdirectory named after the weight.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dofrac/config.hpp"
#include "dofrac/experiments.hpp"
#include "dofrac/output.hpp"

namespace dofrac {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3 };

struct RunOptions {
    std::string subcommand;
    std::string config_path;
    std::optional<std::string> out_dir;  // overrides output.directory
    std::optional<std::uint64_t> seed;   // overrides noise.seed
    int jobs = 1;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"forward", "observe",     "noise",    "bounds",
                                                   "recover", "asymptotics", "gradcheck"};
    return names;
}

namespace detail {

/// Runs task(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

inline fs::path job_dir(const ExperimentConfig& c, const fs::path& out, std::size_t i) {
    return c.weights.size() == 1 ? out : out / c.weights[i].name;
}

inline void write_shifted(const fs::path& path, const ObservationTrace& tr, double g_inf) {
    const ShiftedTrace s = shifted_trace(tr, g_inf);
    CsvTable t({"t", "abs_g_minus_g0", "abs_g_minus_ginf"});
    for (std::size_t n = 0; n < s.t.size(); ++n) t.row().cell(s.t[n]).cell(s.from_start[n]).cell(s.from_limit[n]);
    t.write(path);
}

inline std::string rel(const ExperimentConfig& c, std::size_t i, const std::string& file) {
    return c.weights.size() == 1 ? file : c.weights[i].name + "/" + file;
}

inline void emit_trace_plots(const ExperimentConfig& c, const fs::path& out) {
    std::vector<PlotSeries> small, large;
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
        small.push_back({rel(c, i, "trace_shifted.csv"), c.weights[i].name, "1:2"});
        large.push_back({rel(c, i, "trace_shifted.csv"), c.weights[i].name, "1:3"});
    }
    emit_plot_script(out, PlotKind::SmallTime, small);
    emit_plot_script(out, PlotKind::LargeTime, large);
}

inline void cmd_forward(const ExperimentConfig& c, const fs::path& out, int jobs, bool with_solution) {
    parallel_for(c.weights.size(), jobs, [&](std::size_t i) {
        const ProblemSpec spec = c.problem(i);
        const TraceRun run = run_forward(spec);
        const fs::path dir = job_dir(c, out, i);
        trace_table(run.trace).write(dir / "trace.csv");
        write_shifted(dir / "trace_shifted.csv", run.trace, steady_trace(spec));
        if (with_solution) {
            CsvTable t({"t", "x", "u"});
            for (int n = 0; n <= run.solution.steps(); ++n) {
                for (int k = 0; k < spec.mesh.nodes_count(); ++k) {
                    t.row().cell(spec.grid[n]).cell(spec.mesh[k]).cell(run.solution.u[n][k]);
                }
            }
            t.write(dir / "solution.csv");
        }
    });
    emit_trace_plots(c, out);
}

inline void cmd_noise(const ExperimentConfig& c, const fs::path& out, int jobs) {
    parallel_for(c.weights.size(), jobs, [&](std::size_t i) {
        const fs::path dir = job_dir(c, out, i);
        const ObservationTrace clean = read_trace(dir / "trace.csv");
        trace_table(add_noise(clean, c.eps, c.seed + i)).write(dir / "trace_noisy.csv");
    });
}

inline void cmd_bounds(const ExperimentConfig& c, const fs::path& out, int jobs) {
    std::vector<BoundEstimate> est(c.weights.size());
    parallel_for(c.weights.size(), jobs, [&](std::size_t i) {
        const ProblemSpec spec = c.problem(i);
        const ObservationTrace tr = run_forward(spec).trace;
        const double g_inf = steady_trace(spec);
        const fs::path dir = job_dir(c, out, i);
        trace_table(tr).write(dir / "trace.csv");
        write_shifted(dir / "trace_shifted.csv", tr, g_inf);
        est[i] = estimate_bounds(tr, g_inf, c.windows);
    });
    CsvTable b({"mu_name", "b1_est", "b1_true", "b2_est", "b2_true", "b1_residual", "b2_residual"});
    CsvTable s({"mu_name", "small_time_slope", "large_time_slope"});
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
        const auto& w = c.weights[i];
        b.row().cell(w.name).cell(est[i].lower.b).cell(w.mu.b1()).cell(est[i].upper.b).cell(w.mu.b2());
        b.cell(est[i].lower.relative_residual).cell(est[i].upper.relative_residual);
        s.row().cell(w.name).cell(est[i].small_slope).cell(est[i].large_slope);
    }
    b.write(out / "bounds.csv");
    s.write(out / "slopes.csv");
    emit_trace_plots(c, out);
}

inline void cmd_recover(const ExperimentConfig& c, const fs::path& out, int jobs) {
    parallel_for(c.weights.size(), jobs, [&](std::size_t i) {
        const ProblemSpec spec = c.problem(i);
        CgmOptions opts;
        opts.max_iterations = c.recover.max_iterations;
        opts.tau_dp = c.recover.tau_dp;
        opts.smooth_gradient = c.recover.smooth_gradient;
        opts.conjugate = c.recover.conjugate;
        const RecoveryRun run = run_recovery(spec, c.eps, c.seed + i, c.recover.initial, opts, c.recover.discrepancy);
        const RecoveryState& st = run.state;
        const fs::path dir = job_dir(c, out, i);

        CsvTable it({"k", "J", "residual", "error", "step"});
        for (const auto& e : st.log) it.row().cell(e.k).cell(e.J).cell(e.residual).cell(e.error).cell(e.step);
        it.write(dir / "iterations.csv");

        const std::vector<double>& mu = c.recover.select_best && !st.best_mu.empty() ? st.best_mu : st.mu;
        const std::vector<double> truth = sample_on(spec.quad, spec.mu);
        CsvTable rec({"alpha", "mu"}), tru({"alpha", "mu"});
        for (std::size_t k = 0; k < mu.size(); ++k) {
            rec.row().cell(st.alpha[k]).cell(mu[k]);
            tru.row().cell(st.alpha[k]).cell(truth[k]);
        }
        rec.write(dir / "weight_recovered.csv");
        tru.write(dir / "weight_true.csv");
        trace_table(run.data).write(dir / "trace_noisy.csv");

        CsvTable sum({"mu_name", "eps", "best_index", "best_error", "stop_index", "stop_reason", "delta_est"});
        sum.row().cell(c.weights[i].name).cell(c.eps).cell(st.best_index).cell(st.best_error).cell(st.stop_index);
        sum.cell(to_string(st.stop)).cell(run.delta_est);
        sum.write(dir / "summary.csv");

        emit_plot_script(dir, PlotKind::Recovery,
                         {{"weight_true.csv", "exact", "1:2"}, {"weight_recovered.csv", "recovered", "1:2"}});
        emit_plot_script(dir, PlotKind::ErrorHistory, {{"iterations.csv", "error", "1:4"}});
    });
}

inline void cmd_asymptotics(const ExperimentConfig& c, const fs::path& out, int jobs) {
    parallel_for(c.weights.size(), jobs, [&](std::size_t i) {
        const ProblemSpec spec = c.problem(i);
        const fs::path dir = job_dir(c, out, i);
        CsvTable t({"t", "P", "Q_contour", "P_contour", "predicted"});
        for (const auto& r : asymptotics_table(spec, c.asymptotics.times, c.asymptotics.contour)) {
            t.row().cell(r.t).cell(r.P).cell(r.Q_contour).cell(r.P_contour).cell(r.predicted);
        }
        t.write(dir / "asymptotics.csv");

        CsvTable lim({"b", "large_t_slope", "large_t_observed", "large_t_expected", "small_t_slope", "small_t_observed",
                      "small_t_expected"});
        for (double b : {spec.mu.b1() - 0.1, spec.mu.b1() + 0.1, spec.mu.b2() - 0.1, spec.mu.b2() + 0.1}) {
            if (b == spec.mu.b1() || b == spec.mu.b2()) continue;
            const LimitReport r = check_limits(spec.mu, b);
            lim.row().cell(b).cell(r.large_slope).cell(to_string(r.large_observed)).cell(to_string(r.large_expected));
            lim.cell(r.small_slope).cell(to_string(r.small_observed)).cell(to_string(r.small_expected));
        }
        lim.write(dir / "limits.csv");
    });
}

inline void cmd_gradcheck(const ExperimentConfig& c, const fs::path& out, int jobs) {
    parallel_for(c.weights.size(), jobs, [&](std::size_t i) {
        const ProblemSpec spec = c.problem(i);
        const ObservationTrace data = add_noise(run_forward(spec).trace, c.eps, c.seed + i);
        const std::vector<double> point = sample_on(spec.quad, c.gradcheck.point);
        const auto rows = gradient_check(spec, data, point, c.gradcheck.directions, c.gradcheck.step, c.seed + i);
        CsvTable t({"direction", "adjoint", "finite_difference", "rel_error", "duality", "duality_rel_error"});
        for (const auto& r : rows) {
            t.row().cell(r.direction).cell(r.adjoint).cell(r.finite_difference).cell(r.rel_error);
            t.cell(r.duality).cell(r.duality_rel_error);
        }
        t.write(job_dir(c, out, i) / "gradcheck.csv");
    });
}

}  // namespace detail

/// Executes one subcommand. Throws ConfigError for configuration problems and lets
/// solver/domain errors propagate; `run_cli` maps them to exit codes.
inline void run_subcommand(const RunOptions& o) {
    ExperimentConfig c = load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
    const fs::path out = o.out_dir ? fs::path(*o.out_dir) : fs::path(c.output_dir);
    fs::create_directories(out);
    const std::string& cmd = o.subcommand;
    if (cmd == "forward") {
        detail::cmd_forward(c, out, o.jobs, true);
    } else if (cmd == "observe") {
        detail::cmd_forward(c, out, o.jobs, false);
    } else if (cmd == "noise") {
        detail::cmd_noise(c, out, o.jobs);
    } else if (cmd == "bounds") {
        detail::cmd_bounds(c, out, o.jobs);
    } else if (cmd == "recover") {
        detail::cmd_recover(c, out, o.jobs);
    } else if (cmd == "asymptotics") {
        detail::cmd_asymptotics(c, out, o.jobs);
    } else if (cmd == "gradcheck") {
        detail::cmd_gradcheck(c, out, o.jobs);
    } else {
        throw ConfigError("unknown subcommand " + cmd);
    }
    write_provenance(out, cmd, c.source, c.seed);
}

}  // namespace dofrac
