#pragma once

// Experiment configuration read from JSON. Every section is checked against a fixed
// key set before anything is solved; unknown keys are errors.
//
// {
//   "problem": {
//     "mesh": {"elements": 100, "grading": 1.0},
//     "a": "1+x^2", "q": "0", "u0": "...", "f": "...", "sigma": "1",
//     "bc": {"kind": "dirichlet" | "neumann", "left": "0", "right": "0"}
//   },
//   "weights": [ {"name": "mu1", "mode": "indicator", "b1": 0.2, "b2": 0.8}, ... ],
//   "time":    {"kind": "uniform", "T": 1, "steps": 500}
//            | {"kind": "geometric", "t_first": 1e-10, "t_end": 1e5, "per_decade": 40}
//            | {"kind": "explicit", "nodes": [...]},
//   "alpha":   {"intervals": 128},
//   "observe": {"side": "left" | "right", "trace": "flux" | "value"},
//   "noise":   {"eps": 0, "seed": 1},
//   "recover": {...}, "asymptotics": {...}, "gradcheck": {...},
//   "output":  {"directory": "out"}
// }

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dofrac/asymptotics.hpp"
#include "dofrac/experiments.hpp"
#include "dofrac/error.hpp"
#include "dofrac/expr.hpp"
#include "dofrac/fem1d.hpp"
#include "dofrac/forward.hpp"
#include "dofrac/fracweights.hpp"
#include "dofrac/inverse.hpp"

namespace dofrac {

using json = nlohmann::json;

struct NamedWeight {
    std::string name;
    WeightDistribution mu;
};

struct RecoverConfig {
    int max_iterations = 100;
    double tau_dp = 1.1;
    bool discrepancy = true;
    bool smooth_gradient = true;
    ConjugateRule conjugate = ConjugateRule::Smoothed;
    Expr initial = parse("sin(3.141592653589793*alpha)/100");
    bool select_best = true;  // report the smallest-error iterate instead of the last one
};

struct AsymptoticsConfig {
    std::vector<double> times;
    ContourParams contour;
};

struct GradcheckConfig {
    int directions = 5;
    double step = 1e-4;
    Expr point = parse("sin(3.141592653589793*alpha)/100");
};

struct ExperimentConfig {
    ProblemSpec base;  // everything except the weight
    int alpha_intervals = 128;
    std::vector<NamedWeight> weights;
    double eps = 0.0;
    std::uint64_t seed = 0;
    BoundWindows windows;
    RecoverConfig recover;
    AsymptoticsConfig asymptotics;
    GradcheckConfig gradcheck;
    std::string output_dir = "out";
    json source;  // the parsed document, for provenance hashing

    /// The problem for weight `i`, with a quadrature that matches the weight's mode.
    ProblemSpec problem(std::size_t i) const {
        ProblemSpec s = base;
        s.mu = weights.at(i).mu;
        if (const auto* at = std::get_if<WeightDistribution::Atoms>(&s.mu.mode())) {
            s.quad = AlphaQuadrature::discrete(at->alpha, at->weight);
        } else {
            s.quad = AlphaQuadrature::trapezoid(alpha_intervals);
        }
        return s;
    }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

inline double get_number(const json& j, const char* key, const std::string& where, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return j[key].get<double>();
}

inline int get_int(const json& j, const char* key, const std::string& where, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return j[key].get<int>();
}

inline bool get_bool(const json& j, const char* key, const std::string& where, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
    return j[key].get<bool>();
}

inline std::string get_string(const json& j, const char* key, const std::string& where, std::string fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return j[key].get<std::string>();
}

/// Expression field; must only reference `var`.
inline Expr get_expr(const json& j, const char* key, const std::string& where, const char* fallback, const char* var) {
    const std::string text = get_string(j, key, where, fallback);
    Expr e;
    try {
        e = parse(text);
    } catch (const ParseError& err) {
        throw ConfigError(where + "." + key + ": " + err.what());
    }
    for (const auto& v : e.free_variables()) {
        if (v != var) throw ConfigError(where + "." + key + ": unexpected variable '" + v + "' (only " + var + ")");
    }
    return e;
}

inline std::vector<double> get_numbers(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    std::vector<double> v;
    for (const auto& x : j[key]) {
        if (!x.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

inline NamedWeight parse_weight(const json& j, std::size_t index) {
    const std::string where = "weights[" + std::to_string(index) + "]";
    check_keys(j, {"name", "mode", "expression", "b1", "b2", "values", "alpha", "mass"}, where);
    NamedWeight w{get_string(j, "name", where, "mu" + std::to_string(index + 1)), WeightDistribution::indicator(0, 1)};
    const std::string mode = get_string(j, "mode", where, "");
    const double b1 = get_number(j, "b1", where, 0.0), b2 = get_number(j, "b2", where, 1.0);
    if (mode == "expression") {
        w.mu = WeightDistribution::expression(get_expr(j, "expression", where, "", "alpha"), b1, b2);
    } else if (mode == "indicator") {
        if (!j.contains("b1") || !j.contains("b2")) throw ConfigError(where + ": indicator needs b1 and b2");
        w.mu = WeightDistribution::indicator(b1, b2);
    } else if (mode == "grid") {
        w.mu = WeightDistribution::grid(get_numbers(j, "values", where), b1, b2);
    } else if (mode == "atoms") {
        w.mu = WeightDistribution::atoms(get_numbers(j, "alpha", where), get_numbers(j, "mass", where));
    } else {
        throw ConfigError(where + ".mode: expected expression, indicator, grid or atoms");
    }
    w.mu.validate();
    return w;
}

inline TimeGrid parse_time(const json& j) {
    check_keys(j, {"kind", "T", "steps", "t_first", "t_end", "per_decade", "nodes"}, "time");
    const std::string kind = get_string(j, "kind", "time", "uniform");
    if (kind == "uniform") return TimeGrid::uniform(get_number(j, "T", "time", 1.0), get_int(j, "steps", "time", 100));
    if (kind == "geometric") {
        return TimeGrid::geometric(get_number(j, "t_first", "time", 1e-10), get_number(j, "t_end", "time", 1e5),
                                   get_int(j, "per_decade", "time", 40));
    }
    if (kind == "explicit") return TimeGrid::explicit_nodes(get_numbers(j, "nodes", "time"));
    throw ConfigError("time.kind: expected uniform, geometric or explicit");
}

inline std::vector<double> parse_times(const json& j) {
    if (j.is_array()) {
        std::vector<double> t;
        for (const auto& x : j) {
            if (!x.is_number() || !(x.get<double>() > 0.0)) throw ConfigError("asymptotics.times: expected positive numbers");
            t.push_back(x.get<double>());
        }
        return t;
    }
    check_keys(j, {"from", "to", "per_decade"}, "asymptotics.times");
    const double from = get_number(j, "from", "asymptotics.times", 1e-6);
    const double to = get_number(j, "to", "asymptotics.times", 1e3);
    const int per = get_int(j, "per_decade", "asymptotics.times", 4);
    if (!(from > 0.0 && to > from && per >= 1)) throw ConfigError("asymptotics.times: need 0 < from < to, per_decade >= 1");
    std::vector<double> t;
    const double e0 = std::log10(from), e1 = std::log10(to);
    for (int k = 0;; ++k) {
        const double e = e0 + static_cast<double>(k) / per;
        if (e > e1 + 1e-12) break;
        t.push_back(std::pow(10.0, e));
    }
    return t;
}

inline ExperimentConfig build_config(const json& doc) {
    check_keys(doc, {"problem", "weights", "time", "alpha", "observe", "noise", "recover", "asymptotics", "gradcheck",
                     "output"},
               "config");
    ExperimentConfig c;
    c.source = doc;

    const json problem = doc.value("problem", json::object());
    check_keys(problem, {"mesh", "a", "q", "u0", "f", "sigma", "bc"}, "problem");
    const json mesh = problem.value("mesh", json::object());
    check_keys(mesh, {"elements", "grading"}, "problem.mesh");
    const int elements = get_int(mesh, "elements", "problem.mesh", 64);
    const double grading = get_number(mesh, "grading", "problem.mesh", 1.0);
    c.base.mesh = grading == 1.0 ? Mesh1D::uniform(elements) : Mesh1D::graded(elements, grading);
    c.base.coeff.a = get_expr(problem, "a", "problem", "1", "x");
    c.base.coeff.q = get_expr(problem, "q", "problem", "0", "x");
    c.base.u0 = get_expr(problem, "u0", "problem", "0", "x");
    c.base.f = get_expr(problem, "f", "problem", "0", "x");
    c.base.sigma = get_expr(problem, "sigma", "problem", "1", "t");
    const json bc = problem.value("bc", json::object());
    check_keys(bc, {"kind", "left", "right"}, "problem.bc");
    const std::string kind = get_string(bc, "kind", "problem.bc", "dirichlet");
    if (kind == "dirichlet") {
        c.base.bc.kind = BoundarySpec::Kind::Dirichlet;
    } else if (kind == "neumann") {
        c.base.bc.kind = BoundarySpec::Kind::Neumann;
    } else {
        throw ConfigError("problem.bc.kind: expected dirichlet or neumann");
    }
    c.base.bc.left = get_expr(bc, "left", "problem.bc", "0", "t");
    c.base.bc.right = get_expr(bc, "right", "problem.bc", "0", "t");

    if (!doc.contains("weights") || !doc["weights"].is_array() || doc["weights"].empty()) {
        throw ConfigError("weights: expected a nonempty array");
    }
    for (std::size_t i = 0; i < doc["weights"].size(); ++i) c.weights.push_back(parse_weight(doc["weights"][i], i));
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            if (c.weights[i].name == c.weights[k].name) throw ConfigError("weights: duplicate name " + c.weights[i].name);
        }
    }

    c.base.grid = parse_time(doc.value("time", json::object()));

    const json alpha = doc.value("alpha", json::object());
    check_keys(alpha, {"intervals"}, "alpha");
    c.alpha_intervals = get_int(alpha, "intervals", "alpha", 128);
    if (c.alpha_intervals < 2) throw ConfigError("alpha.intervals: need at least 2");

    const json obs = doc.value("observe", json::object());
    check_keys(obs, {"side", "trace"}, "observe");
    const std::string side = get_string(obs, "side", "observe", "left");
    if (side != "left" && side != "right") throw ConfigError("observe.side: expected left or right");
    c.base.observe.side = side == "left" ? Side::Left : Side::Right;
    const bool dirichlet = c.base.bc.kind == BoundarySpec::Kind::Dirichlet;
    const std::string trace = get_string(obs, "trace", "observe", dirichlet ? "flux" : "value");
    if (trace == "flux") {
        c.base.observe.kind = TraceKind::ConormalFlux;
    } else if (trace == "value") {
        c.base.observe.kind = TraceKind::Dirichlet;
    } else {
        throw ConfigError("observe.trace: expected flux or value");
    }
    try {
        c.base.validate_observation();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("observe: ") + e.what());
    }

    const json noise = doc.value("noise", json::object());
    check_keys(noise, {"eps", "seed"}, "noise");
    c.eps = get_number(noise, "eps", "noise", 0.0);
    if (!(c.eps >= 0.0)) throw ConfigError("noise.eps: must be non-negative");
    if (noise.contains("seed")) {
        if (!noise["seed"].is_number_unsigned()) throw ConfigError("noise.seed: expected a non-negative integer");
        c.seed = noise["seed"].get<std::uint64_t>();
    }

    const json rec = doc.value("recover", json::object());
    check_keys(rec, {"windows", "max_iterations", "tau_dp", "discrepancy", "smooth_gradient", "conjugate", "initial", "select"},
               "recover");
    if (rec.contains("windows")) {
        const json& w = rec["windows"];
        check_keys(w, {"lower", "upper"}, "recover.windows");
        if (w.contains("lower")) {
            const auto v = get_numbers(w, "lower", "recover.windows");
            if (v.size() != 2 || !(v[0] > 0 && v[1] > v[0])) throw ConfigError("recover.windows.lower: expected [t1, t2]");
            c.windows.lower_t1 = v[0];
            c.windows.lower_t2 = v[1];
        }
        if (w.contains("upper")) {
            const auto v = get_numbers(w, "upper", "recover.windows");
            if (v.size() != 2 || !(v[0] > 0 && v[1] > v[0])) throw ConfigError("recover.windows.upper: expected [t1, t2]");
            c.windows.upper_t1 = v[0];
            c.windows.upper_t2 = v[1];
        }
    }
    c.recover.max_iterations = get_int(rec, "max_iterations", "recover", 100);
    if (c.recover.max_iterations < 0) throw ConfigError("recover.max_iterations: must be non-negative");
    c.recover.tau_dp = get_number(rec, "tau_dp", "recover", 1.1);
    c.recover.discrepancy = get_bool(rec, "discrepancy", "recover", true);
    c.recover.smooth_gradient = get_bool(rec, "smooth_gradient", "recover", true);
    const std::string conj = get_string(rec, "conjugate", "recover", "smoothed");
    if (conj == "smoothed") {
        c.recover.conjugate = ConjugateRule::Smoothed;
    } else if (conj == "literal") {
        c.recover.conjugate = ConjugateRule::Literal;
    } else if (conj == "none") {
        c.recover.conjugate = ConjugateRule::None;
    } else {
        throw ConfigError("recover.conjugate: expected smoothed, literal or none");
    }
    c.recover.initial = get_expr(rec, "initial", "recover", "sin(3.141592653589793*alpha)/100", "alpha");
    const std::string select = get_string(rec, "select", "recover", "best");
    if (select != "best" && select != "final") throw ConfigError("recover.select: expected best or final");
    c.recover.select_best = select == "best";

    const json asy = doc.value("asymptotics", json::object());
    check_keys(asy, {"times", "theta", "delta"}, "asymptotics");
    c.asymptotics.times = parse_times(asy.value("times", json::object()));
    if (asy.contains("theta")) c.asymptotics.contour.theta = get_number(asy, "theta", "asymptotics", 0.0);
    c.asymptotics.contour.delta = get_number(asy, "delta", "asymptotics", 1.0);

    const json gc = doc.value("gradcheck", json::object());
    check_keys(gc, {"directions", "step", "point"}, "gradcheck");
    c.gradcheck.directions = get_int(gc, "directions", "gradcheck", 5);
    c.gradcheck.step = get_number(gc, "step", "gradcheck", 1e-4);
    if (c.gradcheck.directions < 1 || !(c.gradcheck.step > 0.0)) throw ConfigError("gradcheck: need directions >= 1, step > 0");
    c.gradcheck.point = get_expr(gc, "point", "gradcheck", "sin(3.141592653589793*alpha)/100", "alpha");

    const json out = doc.value("output", json::object());
    check_keys(out, {"directory"}, "output");
    c.output_dir = get_string(out, "directory", "output", "out");
    return c;
}

}  // namespace detail

/// Parses and validates a configuration document. Library-level domain errors raised
/// while building the problem (bad support, bad mesh, ...) surface as ConfigError.
inline ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    try {
        return detail::build_config(doc);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace dofrac
