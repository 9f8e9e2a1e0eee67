// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any of them fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dofrac/asymptotics.hpp"
#include "dofrac/experiments.hpp"
#include "dofrac/fracweights.hpp"
#include "dofrac/inverse.hpp"

using namespace dofrac;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [miss]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < budget_s, "runtime " + fmt("%.2f", secs) + " s < " + fmt("%g", budget_s) + " s");
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
}

// E_{a}(z) by its power series, enough terms for |z| <= 1.
double mittag_leffler_series(double a, double z) {
    double s = 0.0;
    for (int k = 0; k < 80; ++k) s += std::pow(z, k) / std::tgamma(a * k + 1.0);
    return s;
}

ProblemSpec single_mode(int steps) {
    ProblemSpec s;
    s.mesh = Mesh1D::uniform(4);
    s.coeff = {parse("1"), parse("1")};
    s.bc.kind = BoundarySpec::Kind::Neumann;
    s.u0 = parse("1");
    s.mu = WeightDistribution::atoms({0.5}, {1.0});
    s.quad = AlphaQuadrature::discrete({0.5}, {1.0});
    s.grid = TimeGrid::uniform(0.5, steps);
    s.observe = {Side::Left, TraceKind::Dirichlet};
    return s;
}

const std::vector<std::pair<double, double>> kSupports = {{0.2, 0.8}, {0.2, 0.6}, {0.2, 0.4}, {0.4, 0.8}, {0.6, 0.8}};

ProblemSpec source_problem(std::size_t i) {
    ProblemSpec s;
    s.mesh = Mesh1D::uniform(100);
    s.coeff.a = parse("1+sin(3.141592653589793*x)");
    s.f = parse("x*(1-x)*exp(x)");
    s.sigma = parse("1");
    s.mu = WeightDistribution::indicator(kSupports[i].first, kSupports[i].second);
    s.quad = AlphaQuadrature::trapezoid(128);
    s.grid = TimeGrid::geometric(1e-10, 1e5, 40);
    return s;
}

ProblemSpec recovery_problem(int which, int mesh, int steps, int intervals) {
    ProblemSpec s;
    s.mesh = Mesh1D::uniform(mesh);
    s.coeff.a = parse("1+x*(1-x)");
    s.u0 = parse("x*(1-x)*exp(x)");
    s.bc.kind = BoundarySpec::Kind::Neumann;
    s.bc.right = parse("1");
    s.observe = {Side::Left, TraceKind::Dirichlet};
    s.mu = WeightDistribution::expression(parse(which == 1 ? "alpha*(1-alpha)^2*exp(2*alpha)" : "2*min(alpha,1-alpha)"));
    s.quad = AlphaQuadrature::trapezoid(intervals);
    s.grid = TimeGrid::uniform(1.0, steps);
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DOFRAC_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Bound estimates for the five source-driven weights, shared by criteria 5 and 6.
std::vector<BoundEstimate> source_estimates() {
    std::vector<BoundEstimate> est;
    for (std::size_t i = 0; i < kSupports.size(); ++i) {
        const ProblemSpec s = source_problem(i);
        est.push_back(estimate_bounds(run_forward(s).trace, steady_trace(s), BoundWindows{}));
    }
    return est;
}

}  // namespace

int main() {
    criterion(1, "L1 weights reproduce the derivative of t exactly", 1.0, [] {
        Outcome o;
        const TimeGrid u = TimeGrid::uniform(1.0, 64);
        const TimeGrid e = TimeGrid::explicit_nodes(u.nodes());
        double exact_err = 0.0, formula_err = 0.0;
        for (double a : {0.25, 0.5, 0.75}) {
            for (int n = 1; n <= 64; ++n) {
                const auto bu = l1_weights(u, a, n), be = l1_weights(e, a, n);
                double s = 0.0;
                for (int j = 0; j <= n; ++j) {
                    s += bu[j] * u[n - j];
                    formula_err = std::max(formula_err, std::abs(bu[j] - be[j]) / std::abs(bu[0]));
                }
                exact_err = std::max(exact_err, std::abs(s - std::pow(u[n], 1 - a) / std::tgamma(2 - a)));
            }
        }
        o.require(exact_err <= 1e-12, "max |L1 t - t^(1-a)/G(2-a)| = " + fmt("%.2e", exact_err));
        o.require(formula_err <= 1e-13, "nonuniform vs uniform weights " + fmt("%.2e", formula_err));
        return o;
    });

    criterion(2, "single order 1/2 matches the Mittag-Leffler solution", 30.0, [] {
        Outcome o;
        std::vector<double> at_end;
        double sample_err = 0.0, node_err = 0.0;
        for (int N : {1024, 2048, 4096}) {
            const ProblemSpec s = single_mode(N);
            const ObservationTrace tr = observe(step_forward(s), s);
            at_end.push_back(tr.g.back());
            if (N != 4096) continue;
            for (int n = 1; n <= N; ++n) {
                const double ex = mittag_leffler_series(0.5, -std::sqrt(tr.t[n]));
                node_err = std::max(node_err, std::abs(tr.g[n] - ex) / ex);
            }
            for (int k = 1; k <= 10; ++k) {
                const double t = 0.05 * k;
                const int n = static_cast<int>(std::lround(t / 0.5 * N));
                const double ex = mittag_leffler_series(0.5, -std::sqrt(t));
                sample_err = std::max(sample_err, std::abs(tr.g[n] - ex) / ex);
            }
        }
        const double order = std::log2(std::abs(at_end[0] - at_end[1]) / std::abs(at_end[1] - at_end[2]));
        o.require(sample_err <= 1e-3, "N=4096 max rel error at t=0.05k " + fmt("%.2e", sample_err));
        o.detail += "; all nodes incl. initial layer " + fmt("%.2e", node_err);
        o.require(order >= 0.9, "self-convergence order " + fmt("%.3f", order));
        return o;
    });

    criterion(3, "contour integrals reproduce the Hankel values", 5.0, [] {
        Outcome o;
        double hq = 0.0, hp = 0.0;
        for (double a : {0.3, 0.5, 0.8}) {
            const auto mu = WeightDistribution::atoms({a}, {1.0});
            hq = std::max(hq, std::abs(contour_Q(1.0, mu) - 1.0 / std::tgamma(a)));
            hp = std::max(hp, std::abs(contour_P(1.0, mu) - 1.0 / std::tgamma(-a)));
        }
        const double cauchy = std::abs(contour_integral([](cplx p) { return std::exp(p); }, resolve({}, 0.8)));
        const auto mu1 = WeightDistribution::indicator(0.2, 0.8);
        ContourParams d2;
        d2.delta = 2.0;
        double inv = 0.0;
        for (double t : {1e-3, 1e-1, 1.0, 1e1, 1e3}) {
            const double q1 = contour_Q(t, mu1), q2 = contour_Q(t, mu1, d2);
            const double p1 = contour_P(t, mu1), p2 = contour_P(t, mu1, d2);
            inv = std::max({inv, std::abs(q1 - q2) / std::abs(q1), std::abs(p1 - p2) / std::abs(p1)});
        }
        o.require(hq <= 1e-8, "1/G(a) error " + fmt("%.2e", hq));
        o.require(hp <= 1e-8, "1/G(-a) error " + fmt("%.2e", hp));
        o.require(cauchy <= 1e-10, "|int e^p dp| = " + fmt("%.2e", cauchy));
        o.require(inv <= 1e-6, "delta 1 vs 2 relative change " + fmt("%.2e", inv));
        return o;
    });

    criterion(4, "asymptotic factors are sandwiched by P and limits follow the support", 10.0, [] {
        Outcome o;
        double lo = 1e300, hi = 0.0;
        for (std::size_t i : {0u, 1u, 3u}) {
            const auto mu = WeightDistribution::indicator(kSupports[i].first, kSupports[i].second);
            const KernelMoments km(mu);
            for (int k = 0; k <= 12; ++k) {
                const double ts = std::pow(10.0, -3.0 + 0.25 * k);
                const double tl = std::pow(10.0, 0.25 * k);
                const double rq = std::abs(contour_Q(ts, km)) * eval_P(ts, mu);
                const double rp = std::abs(contour_P(tl, km)) / eval_P(tl, mu);
                lo = std::min({lo, rq, rp});
                hi = std::max({hi, rq, rp});
            }
        }
        o.require(lo >= 1e-2 && hi <= 1e2, "ratios in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]");
        const auto mu1 = WeightDistribution::indicator(0.2, 0.8);
        int consistent = 0;
        for (double b : {0.1, 0.3, 0.7, 0.9}) consistent += check_limits(mu1, b).consistent();
        o.require(consistent == 4, std::to_string(consistent) + "/4 limit trends correct");
        return o;
    });

    std::vector<BoundEstimate> est;
    criterion(5, "small- and large-time slopes group the weights by b2 and b1", 300.0, [&] {
        Outcome o;
        est = source_estimates();
        auto spread = [&](std::initializer_list<int> idx, auto get) {
            double a = 1e300, b = -1e300;
            for (int i : idx) {
                a = std::min(a, get(est[i]));
                b = std::max(b, get(est[i]));
            }
            return std::pair{a, b};
        };
        const auto small = [](const BoundEstimate& e) { return e.small_slope; };
        const auto large = [](const BoundEstimate& e) { return e.large_slope; };
        std::string s = "small slopes";
        for (const auto& e : est) s += " " + fmt("%.3f", e.small_slope);
        s += ", large slopes";
        for (const auto& e : est) s += " " + fmt("%.3f", e.large_slope);
        o.detail = s;

        const auto [s_lo, s_hi] = spread({0, 3, 4}, small);
        double s_gap = 1e300;
        for (int i : {1, 2}) s_gap = std::min({s_gap, std::abs(est[i].small_slope - s_lo), std::abs(est[i].small_slope - s_hi)});
        o.require(s_hi - s_lo <= 0.05, "mu1,mu4,mu5 small spread " + fmt("%.3f", s_hi - s_lo));
        o.require(s_gap >= 0.1, "mu2,mu3 small gap " + fmt("%.3f", s_gap));

        const auto [l_lo, l_hi] = spread({0, 1, 2}, large);
        double l_gap = 1e300;
        for (int i : {3, 4}) l_gap = std::min({l_gap, std::abs(est[i].large_slope - l_lo), std::abs(est[i].large_slope - l_hi)});
        o.require(l_hi - l_lo <= 0.05, "mu1,mu2,mu3 large spread " + fmt("%.3f", l_hi - l_lo));
        o.require(l_gap >= 0.1, "mu4,mu5 large gap " + fmt("%.3f", l_gap));
        return o;
    });

    criterion(6, "bound estimates for the source-driven problem", 600.0, [&] {
        Outcome o;
        if (est.empty()) est = source_estimates();
        const double ref_lower[] = {0.30, 0.30, 0.27, 0.48, 0.66};
        const double ref_upper[] = {0.75, 0.55, 0.16, 0.75, 0.76};
        for (int target = 0; target < 2; ++target) {
            const double* ref = target == 0 ? ref_lower : ref_upper;
            std::vector<bool> ok(est.size());
            double worst_ok = 0.0;
            for (std::size_t i = 0; i < est.size(); ++i) {
                const BoundFit& f = target == 0 ? est[i].lower : est[i].upper;
                ok[i] = std::abs(f.b - ref[i]) <= 0.10;
                if (ok[i]) worst_ok = std::max(worst_ok, f.relative_residual);
            }
            for (std::size_t i = 0; i < est.size(); ++i) {
                const BoundFit& f = target == 0 ? est[i].lower : est[i].upper;
                const std::string name = std::string(target == 0 ? "b1" : "b2") + "(mu" + std::to_string(i + 1) + ")";
                const std::string what = name + "=" + fmt("%.3f", f.b) + " vs " + fmt("%.2f", ref[i]) + " res " +
                                         fmt("%.2e", f.relative_residual);
                if (ok[i]) {
                    o.require(true, what);
                } else {
                    // a miss is acceptable only when its fit is visibly worse
                    o.require(f.relative_residual > worst_ok,
                              what + " out of tolerance, flagged by residual > " + fmt("%.2e", worst_ok));
                }
            }
        }
        return o;
    });

    criterion(7, "adjoint gradient against finite differences", 120.0, [] {
        Outcome o;
        const ProblemSpec s = recovery_problem(1, 32, 64, 16);
        const ObservationTrace data = run_forward(s).trace;
        std::vector<double> point = sample_on(s.quad, s.mu);
        for (std::size_t i = 0; i < point.size(); ++i) point[i] = 0.5 * point[i] + 0.05 * std::sin(kPi * s.quad.nodes[i]);
        double fd = 0.0, dual = 0.0;
        for (const auto& r : gradient_check(s, data, point, 5, 1e-4, 7)) {
            fd = std::max(fd, r.rel_error);
            dual = std::max(dual, r.duality_rel_error);
        }
        o.require(fd <= 1e-3, "max relative FD mismatch " + fmt("%.2e", fd));
        o.require(dual <= 1e-8, "max duality mismatch " + fmt("%.2e", dual));
        return o;
    });

    criterion(8, "conjugate gradient recovery of the order weight", 1200.0, [] {
        Outcome o;
        CgmOptions opts;
        opts.max_iterations = 50;
        const Expr initial = parse("sin(3.141592653589793*alpha)/100");
        const std::uint64_t seed = 20240101;
        for (int which : {1, 2}) {
            const ProblemSpec s = recovery_problem(which, 100, 500, 64);
            const std::string tag = which == 1 ? "(i)" : "(ii)";
            const RecoveryRun clean = run_recovery(s, 0.0, seed, initial, opts, false);
            const double bound = which == 1 ? 1e-2 : 6e-2;
            o.require(clean.state.best_error <= bound, tag + " eps=0 best " + fmt("%.3e", clean.state.best_error) + " at k=" +
                                                           std::to_string(clean.state.best_index));
            const RecoveryRun low = run_recovery(s, 1e-2, seed, initial, opts, false);
            o.require(low.state.best_error <= 1e-1, tag + " eps=1e-2 best " + fmt("%.3e", low.state.best_error) + " at k=" +
                                                        std::to_string(low.state.best_index));
            const RecoveryRun high = run_recovery(s, 3e-2, seed, initial, opts, false);
            std::vector<double> err;
            for (const auto& e : high.state.log) err.push_back(e.error);
            const auto turn = semiconvergence_turn(err);
            o.require(turn.has_value(), tag + " eps=3e-2 error " + fmt("%.3e", err.front()) + " -> min " +
                                            fmt("%.3e", high.state.best_error) + " at k=" +
                                            std::to_string(high.state.best_index) + " -> " + fmt("%.3e", err.back()));
        }
        return o;
    });

    criterion(9, "repeated runs write byte-identical CSV files", 300.0, [] {
        Outcome o;
        const fs::path root = fs::temp_directory_path() / "dofrac_acceptance_determinism";
        fs::remove_all(root);
        fs::create_directories(root);
        const fs::path dcfg = root / "dirichlet.json", ncfg = root / "neumann.json";
        std::ofstream(dcfg) << R"cfg({
  "problem": {"mesh": {"elements": 30}, "a": "1+sin(3.141592653589793*x)", "f": "x*(1-x)*exp(x)"},
  "weights": [{"name": "mu1", "mode": "indicator", "b1": 0.2, "b2": 0.8},
              {"name": "mu4", "mode": "indicator", "b1": 0.4, "b2": 0.8}],
  "time": {"kind": "geometric", "t_first": 1e-8, "t_end": 1e5, "per_decade": 10},
  "alpha": {"intervals": 32},
  "noise": {"eps": 0.01, "seed": 11},
  "asymptotics": {"times": {"from": 1e-2, "to": 1e2, "per_decade": 2}}
})cfg";
        std::ofstream(ncfg) << R"cfg({
  "problem": {"mesh": {"elements": 20}, "a": "1+x*(1-x)", "u0": "x*(1-x)*exp(x)",
              "bc": {"kind": "neumann", "left": "0", "right": "1"}},
  "weights": [{"name": "smooth", "mode": "expression", "expression": "alpha*(1-alpha)^2*exp(2*alpha)"}],
  "time": {"kind": "uniform", "T": 1, "steps": 40},
  "alpha": {"intervals": 16},
  "noise": {"eps": 0.01, "seed": 11},
  "recover": {"max_iterations": 8}
})cfg";
        const std::vector<std::pair<std::string, fs::path>> runs = {
            {"forward", dcfg}, {"observe", dcfg}, {"noise", dcfg},      {"bounds", dcfg},
            {"asymptotics", dcfg}, {"recover", ncfg}, {"gradcheck", ncfg},
        };
        int files = 0, mismatched = 0;
        for (const auto& [sub, cfg] : runs) {
            for (const char* rep : {"a", "b"}) {
                const fs::path out = root / rep / (cfg.stem().string());
                const std::string jobs = std::string(rep) == "a" ? "1" : "2";
                if (run_cli(sub + " --config " + cfg.string() + " --out " + out.string() + " --jobs " + jobs) != 0) {
                    o.require(false, sub + " exited with an error");
                    return o;
                }
            }
        }
        for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
            if (e.path().extension() != ".csv") continue;
            const fs::path twin = root / "b" / fs::relative(e.path(), root / "a");
            ++files;
            if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) ++mismatched;
        }
        o.require(files >= 20 && mismatched == 0,
                  std::to_string(files) + " CSV files over 7 subcommands, " + std::to_string(mismatched) + " differ");
        return o;
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
