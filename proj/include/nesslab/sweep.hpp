#pragma once

// Parameter sweeps over the library: strict JSON configs, an ordered parallel
// map over grid points, CSV rows plus a JSON summary.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "delayed.hpp"
#include "feedback.hpp"
#include "measures.hpp"

#ifndef NESSLAB_VERSION
#define NESSLAB_VERSION "0.1.0"
#endif

namespace nesslab {

using Json = nlohmann::ordered_json;

/// All violations found in a config, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> errs) : Error(join(errs)), errors(std::move(errs)) {}
    std::vector<std::string> errors;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid config:";
        for (const auto& e : v) s += "\n  " + e;
        return s;
    }
};

enum class PointStatus { ok, unstable, unphysical, timeout, error };

inline std::string to_string(PointStatus s) {
    switch (s) {
        case PointStatus::ok: return "ok";
        case PointStatus::unstable: return "unstable";
        case PointStatus::unphysical: return "unphysical";
        case PointStatus::timeout: return "timeout";
        case PointStatus::error: return "error";
    }
    return "error";
}

struct Axis {
    std::string name;
    double start = 0.0;
    double stop = 0.0;
    int count = 1;
    std::vector<double> list;  // explicit values; overrides start/stop when set

    std::vector<double> values() const { return list.empty() ? linspace(start, stop, count) : list; }
};

// ---- experiment table ----

struct ExperimentSpec {
    std::string name;
    std::vector<std::string> axes;   // canonical order, inner axes last
    std::vector<std::string> required_axes;
    std::vector<std::string> inner_axes;
    std::vector<std::string> params;
    std::vector<std::string> truncation;
    std::vector<std::pair<std::string, double>> tolerances;  // defaults
    std::vector<std::string> options;
    std::vector<std::string> echo;   // resolved parameters written after the axes
    std::vector<std::string> metrics;  // columns reported in the summary extrema
};

inline const std::vector<ExperimentSpec>& experiments() {
    static const std::vector<std::string> rabi = {"omega", "Omega", "lambda1", "lambda2", "gamma"};
    static const std::vector<ExperimentSpec> table = {
        {"rabi-entanglement", {"lambda1", "ratio"}, {}, {}, rabi, {"n_max"},
         {{"steady_residual", 1e-8}}, {}, {"lambda1", "lambda2", "gamma"}, {"log_negativity"}},
        {"rabi-photon-dist", {"ratio", "lambda1"}, {}, {}, rabi, {"n_max"},
         {{"steady_residual", 1e-8}}, {}, {"lambda1", "lambda2", "gamma"}, {"excess"}},
        {"rabi-coherences", {"ratio", "lambda1"}, {}, {}, rabi, {"n_max"},
         {{"steady_residual", 1e-8}}, {"levels"}, {"lambda1", "lambda2", "gamma"},
         {"off_parity_norm", "in_parity_max"}},
        {"rabi-wigner", {"ratio", "lambda1", "im", "re"}, {"im", "re"}, {"im", "re"}, rabi, {"n_max"},
         {{"steady_residual", 1e-8}}, {}, {"lambda1", "lambda2", "gamma"}, {"wigner"}},
        {"dicke-stability", {"ratio", "gamma", "lambda1"}, {}, {}, rabi, {}, {}, {},
         {"lambda1", "lambda2", "gamma"}, {"zeta"}},
        {"dicke-entanglement", {"ratio", "gamma", "lambda1"}, {}, {}, rabi, {}, {}, {},
         {"lambda1", "lambda2", "gamma"}, {"log_negativity"}},
        {"feedback-fidelity", {"mu", "n", "alpha", "time"}, {"time"}, {"time"},
         {"omega", "Omega", "lambda1", "lambda2", "gamma", "mu", "eta"}, {"n_max"},
         {{"ode_rtol", 1e-10}, {"ode_atol", 1e-12}}, {"state"}, {"mu", "gamma_eff"}, {"fidelity"}},
        {"delay-stability", {"ratio", "tau"}, {"tau"}, {}, rabi, {}, {{"root_residual", 1e-8}}, {},
         {"lambda1", "lambda2", "gamma"}, {"max_re_root"}},
        {"delay-entanglement", {"ratio", "tau"}, {"tau"}, {}, rabi, {},
         {{"quadrature_abs", 1e-8}, {"root_residual", 1e-8}}, {}, {"lambda1", "lambda2", "gamma"},
         {"log_negativity"}},
    };
    return table;
}

inline const ExperimentSpec* find_experiment(const std::string& name) {
    for (const auto& e : experiments())
        if (e.name == name) return &e;
    return nullptr;
}

namespace detail {

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

/// parameter that a grid axis replaces
inline std::optional<std::string> axis_param(const std::string& axis) {
    if (axis == "lambda1" || axis == "gamma" || axis == "mu") return axis;
    if (axis == "ratio") return std::string("lambda2");
    return std::nullopt;
}

}  // namespace detail

struct SweepConfig {
    std::string experiment;
    std::map<std::string, double> params;
    std::vector<Axis> grid;  // canonical order
    std::map<std::string, int> truncation;
    std::map<std::string, double> tolerances;
    Json options = Json::object();
    std::string output;
    int workers = 1;
    bool deterministic = true;

    const ExperimentSpec& spec() const { return *find_experiment(experiment); }

    const Axis* axis(const std::string& name) const {
        for (const auto& a : grid)
            if (a.name == name) return &a;
        return nullptr;
    }

    std::size_t rows() const {
        std::size_t n = 1;
        for (const auto& a : grid) n *= static_cast<std::size_t>(a.count);
        return n;
    }

    /// Everything that determines the numbers (no output path, no worker count).
    Json physics_json() const {
        Json j;
        j["experiment"] = experiment;
        j["params"] = Json(params);
        Json g = Json::object();
        for (const auto& a : grid) {
            if (a.list.empty())
                g[a.name] = {{"start", a.start}, {"stop", a.stop}, {"count", a.count}};
            else
                g[a.name] = {{"values", a.list}};
        }
        j["grid"] = g;
        if (!truncation.empty()) j["truncation"] = Json(truncation);
        if (!tolerances.empty()) j["tolerances"] = Json(tolerances);
        if (!options.empty()) j["options"] = options;
        return j;
    }

    Json to_json() const {
        Json j = physics_json();
        j["output"] = output;
        j["workers"] = workers;
        j["deterministic"] = deterministic;
        return j;
    }
};

namespace detail {

inline std::string type_name(const Json& v) {
    return v.is_number() ? "number" : v.type_name();
}

inline std::optional<double> get_number(const Json& j, const std::string& where, std::vector<std::string>& err) {
    if (!j.is_number()) {
        err.push_back(where + ": expected a number, got " + type_name(j));
        return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        err.push_back(where + ": not finite");
        return std::nullopt;
    }
    return v;
}

inline std::optional<int> get_int(const Json& j, const std::string& where, std::vector<std::string>& err) {
    if (!j.is_number_integer()) {
        err.push_back(where + ": expected an integer, got " + type_name(j));
        return std::nullopt;
    }
    return j.get<int>();
}

inline void check_object(const Json& j, const std::string& where, const std::vector<std::string>& allowed,
                         std::vector<std::string>& err) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!contains(allowed, it.key())) err.push_back(where + "." + it.key() + ": unknown key");
}

inline void validate_state(const Json& s, std::vector<std::string>& err) {
    if (!s.is_object()) {
        err.push_back("options.state: expected an object");
        return;
    }
    check_object(s, "options.state", {"kind", "n", "alpha"}, err);
    if (!s.contains("kind") || !s["kind"].is_string()) {
        err.push_back("options.state.kind: missing (noon or ecs)");
        return;
    }
    const std::string kind = s["kind"].get<std::string>();
    if (kind == "noon") {
        if (s.contains("alpha")) err.push_back("options.state.alpha: not used by a noon state");
    } else if (kind == "ecs") {
        if (s.contains("n")) err.push_back("options.state.n: not used by an ecs state");
    } else {
        err.push_back("options.state.kind: must be noon or ecs, got " + kind);
    }
    if (s.contains("n"))
        if (auto v = get_int(s["n"], "options.state.n", err); v && *v < 1) err.push_back("options.state.n: must be >= 1");
    if (s.contains("alpha")) get_number(s["alpha"], "options.state.alpha", err);
}

}  // namespace detail

/// Strict parse: unknown keys and every violation are collected, then thrown together.
inline SweepConfig parse_config(const Json& j) {
    std::vector<std::string> err;
    SweepConfig c;
    if (!j.is_object()) throw ConfigError({"config: top level must be an object"});
    detail::check_object(j, "config",
                         {"experiment", "params", "grid", "truncation", "tolerances", "options", "output", "workers",
                          "deterministic"},
                         err);

    const ExperimentSpec* spec = nullptr;
    if (!j.contains("experiment") || !j["experiment"].is_string()) {
        err.push_back("experiment: missing");
    } else {
        c.experiment = j["experiment"].get<std::string>();
        spec = find_experiment(c.experiment);
        if (!spec) err.push_back("experiment: unknown experiment " + c.experiment);
    }
    if (!spec) throw ConfigError(err);

    // grid
    std::vector<std::string> axis_names;
    if (!j.contains("grid") || !j["grid"].is_object()) {
        err.push_back("grid: missing");
    } else {
        const Json& g = j["grid"];
        detail::check_object(g, "grid", spec->axes, err);
        for (const auto& name : spec->axes) {
            if (!g.contains(name)) {
                if (detail::contains(spec->required_axes, name)) err.push_back("grid." + name + ": missing");
                continue;
            }
            axis_names.push_back(name);
            const Json& a = g[name];
            const std::string where = "grid." + name;
            if (!a.is_object()) {
                err.push_back(where + ": expected {start, stop, count} or {values}");
                continue;
            }
            Axis ax{name};
            if (a.contains("values")) {
                detail::check_object(a, where, {"values"}, err);
                if (!a["values"].is_array() || a["values"].empty()) {
                    err.push_back(where + ".values: expected a non-empty array");
                    continue;
                }
                bool good = true;
                for (std::size_t k = 0; k < a["values"].size(); ++k) {
                    auto v = detail::get_number(a["values"][k], where + ".values[" + std::to_string(k) + "]", err);
                    if (!v) good = false;
                    else ax.list.push_back(*v);
                }
                if (!good) continue;
                ax.start = ax.list.front();
                ax.stop = ax.list.back();
                ax.count = static_cast<int>(ax.list.size());
            } else {
                detail::check_object(a, where, {"start", "stop", "count"}, err);
                bool good = true;
                for (const char* k : {"start", "stop", "count"})
                    if (!a.contains(k)) {
                        err.push_back(where + "." + k + ": missing");
                        good = false;
                    }
                if (!good) continue;
                auto s = detail::get_number(a["start"], where + ".start", err);
                auto e = detail::get_number(a["stop"], where + ".stop", err);
                auto n = detail::get_int(a["count"], where + ".count", err);
                if (!s || !e || !n) continue;
                if (*n < 1) {
                    err.push_back(where + ".count: must be >= 1");
                    continue;
                }
                if (*n == 1 && *s != *e) err.push_back(where + ": count 1 needs start == stop");
                ax.start = *s;
                ax.stop = *e;
                ax.count = *n;
            }
            if (name == "n") {
                for (double v : ax.values())
                    if (v != std::round(v) || v < 1.0) {
                        err.push_back(where + ": photon numbers must be integers >= 1");
                        break;
                    }
            }
            if (name == "time" || name == "tau" || name == "gamma" || name == "lambda1" || name == "ratio")
                for (double v : ax.values())
                    if (v < 0.0) {
                        err.push_back(where + ": must be >= 0");
                        break;
                    }
            if (name == "time") {
                const auto vals = ax.values();
                if (!std::is_sorted(vals.begin(), vals.end())) err.push_back(where + ": must be ascending");
            }
            c.grid.push_back(ax);
        }
    }

    // params: everything the experiment uses that no axis replaces
    std::vector<std::string> replaced;
    for (const auto& a : axis_names)
        if (auto p = detail::axis_param(a)) replaced.push_back(*p);
    if (!j.contains("params") || !j["params"].is_object()) {
        err.push_back("params: missing");
    } else {
        const Json& p = j["params"];
        for (auto it = p.begin(); it != p.end(); ++it) {
            if (!detail::contains(spec->params, it.key())) {
                err.push_back("params." + it.key() + ": unknown key");
            } else if (detail::contains(replaced, it.key())) {
                err.push_back("params." + it.key() + ": set by a grid axis, remove it");
            }
        }
        for (const auto& k : spec->params) {
            if (detail::contains(replaced, k)) continue;
            if (!p.contains(k)) {
                err.push_back("params." + k + ": missing");
                continue;
            }
            if (auto v = detail::get_number(p[k], "params." + k, err)) c.params[k] = *v;
        }
        for (const char* k : {"gamma", "lambda1", "lambda2", "eta"})
            if (c.params.count(k) && c.params[k] < 0.0) err.push_back(std::string("params.") + k + ": must be >= 0");
        if (c.params.count("eta") && c.params["eta"] > 1.0) err.push_back("params.eta: must be <= 1");
    }

    // truncation
    if (spec->truncation.empty()) {
        if (j.contains("truncation")) err.push_back("truncation: not used by " + spec->name);
    } else if (!j.contains("truncation") || !j["truncation"].is_object()) {
        err.push_back("truncation: missing");
    } else {
        const Json& t = j["truncation"];
        detail::check_object(t, "truncation", spec->truncation, err);
        for (const auto& k : spec->truncation) {
            if (!t.contains(k)) {
                err.push_back("truncation." + k + ": missing");
                continue;
            }
            if (auto v = detail::get_int(t[k], "truncation." + k, err)) {
                if (*v < 1)
                    err.push_back("truncation." + k + ": must be >= 1");
                else
                    c.truncation[k] = *v;
            }
        }
        if (c.truncation.count("n_max")) {
            const int n = c.truncation["n_max"];
            if (spec->name.rfind("rabi-", 0) == 0 && 2 * (n + 1) > 80)
                err.push_back("truncation.n_max: dense steady-state solve limited to n_max <= 39");
            if (spec->name == "feedback-fidelity" && (n + 1) * (n + 1) > 400)
                err.push_back("truncation.n_max: two-mode evolution limited to n_max <= 19");
        }
    }

    // tolerances
    for (const auto& [k, v] : spec->tolerances) c.tolerances[k] = v;
    if (j.contains("tolerances")) {
        const Json& t = j["tolerances"];
        if (!t.is_object()) {
            err.push_back("tolerances: expected an object");
        } else {
            std::vector<std::string> allowed;
            for (const auto& [k, v] : spec->tolerances) allowed.push_back(k);
            detail::check_object(t, "tolerances", allowed, err);
            for (const auto& k : allowed)
                if (t.contains(k))
                    if (auto v = detail::get_number(t[k], "tolerances." + k, err)) {
                        if (*v <= 0.0)
                            err.push_back("tolerances." + k + ": must be > 0");
                        else
                            c.tolerances[k] = *v;
                    }
        }
    }

    // options
    if (j.contains("options")) {
        const Json& o = j["options"];
        if (!o.is_object()) {
            err.push_back("options: expected an object");
        } else {
            detail::check_object(o, "options", spec->options, err);
            c.options = o;
        }
    }
    if (spec->name == "rabi-coherences" && c.options.contains("levels")) {
        if (auto v = detail::get_int(c.options["levels"], "options.levels", err); v && *v < 1)
            err.push_back("options.levels: must be >= 1");
    }
    if (spec->name == "feedback-fidelity") {
        if (!c.options.contains("state")) {
            err.push_back("options.state: missing");
        } else {
            detail::validate_state(c.options["state"], err);
            const Json& s = c.options["state"];
            const std::string kind = s.value("kind", "");
            if (kind == "noon" && !s.contains("n") && !c.axis("n"))
                err.push_back("options.state.n: missing (or give a grid.n axis)");
            if (kind == "ecs" && !s.contains("alpha") && !c.axis("alpha"))
                err.push_back("options.state.alpha: missing (or give a grid.alpha axis)");
            if (kind == "noon" && c.axis("alpha")) err.push_back("grid.alpha: not used by a noon state");
            if (kind == "ecs" && c.axis("n")) err.push_back("grid.n: not used by an ecs state");
            if (c.axis("n") && s.contains("n")) err.push_back("options.state.n: set by a grid axis, remove it");
            if (c.axis("alpha") && s.contains("alpha"))
                err.push_back("options.state.alpha: set by a grid axis, remove it");
            if (c.truncation.count("n_max")) {
                int top = s.contains("n") && s["n"].is_number_integer() ? s["n"].get<int>() : 0;
                if (const Axis* a = c.axis("n")) {
                    const auto vals = a->values();
                    top = static_cast<int>(*std::max_element(vals.begin(), vals.end()));
                }
                if (top > c.truncation["n_max"]) err.push_back("truncation.n_max: smaller than the NOON photon number");
            }
        }
    }

    if (j.contains("output")) {
        if (!j["output"].is_string() || j["output"].get<std::string>().empty())
            err.push_back("output: expected a non-empty path");
        else
            c.output = j["output"].get<std::string>();
    }
    if (j.contains("workers"))
        if (auto v = detail::get_int(j["workers"], "workers", err)) {
            if (*v < 1)
                err.push_back("workers: must be >= 1");
            else
                c.workers = *v;
        }
    if (j.contains("deterministic")) {
        if (!j["deterministic"].is_boolean() || !j["deterministic"].get<bool>())
            err.push_back("deterministic: output is always deterministic, only true is accepted");
    }
    if (!err.empty()) throw ConfigError(err);
    return c;
}

inline SweepConfig validate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"config: cannot open " + path});
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({std::string("config: ") + e.what()});
    }
    return parse_config(j);
}

// ---- evaluation ----

struct Column {
    std::string name;
    std::string unit;  // "1" dimensionless, "omega" frequency, "1/omega" time, "log2"/"ln" for log quantities
};

struct SweepResult {
    std::vector<Column> columns;  // without the trailing status column
    std::vector<std::vector<double>> rows;
    std::vector<PointStatus> status;
    Json provenance;
    Json groups = Json::array();  // per outer-point diagnostics

    bool all_ok() const {
        return std::all_of(status.begin(), status.end(), [](PointStatus s) { return s == PointStatus::ok; });
    }
    std::optional<std::size_t> column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return i;
        return std::nullopt;
    }
};

namespace detail {

inline std::string axis_unit(const std::string& a) {
    if (a == "lambda1" || a == "gamma") return "omega";
    if (a == "time" || a == "tau") return "1/omega";
    return "1";
}

inline std::vector<Column> output_columns(const SweepConfig& c) {
    const std::string& e = c.experiment;
    std::vector<Column> cols;
    if (e == "rabi-entanglement") {
        cols = {{"log_negativity", "log2"}, {"residual", "1"}, {"tail", "1"}};
    } else if (e == "rabi-photon-dist") {
        cols = {{"mean_n", "1"}, {"variance_n", "1"}, {"excess", "1"}, {"tail", "1"}};
        for (int n = 0; n <= c.truncation.at("n_max"); ++n) cols.push_back({"p_" + std::to_string(n), "1"});
    } else if (e == "rabi-coherences") {
        cols = {{"off_parity_norm", "1"}, {"in_parity_max", "1"}};
        const int levels = std::min(c.options.value("levels", 8), c.truncation.at("n_max"));
        for (int n = 0; n <= levels; ++n)
            for (int m = n + 1; m <= levels; ++m)
                cols.push_back({"c_" + std::to_string(n) + "_" + std::to_string(m), "1"});
    } else if (e == "rabi-wigner") {
        cols = {{"wigner", "1"}};
    } else if (e == "dicke-stability") {
        cols = {{"zeta", "omega"}, {"max_re_eig_N", "omega"}, {"stable", "1"}};
    } else if (e == "dicke-entanglement") {
        cols = {{"log_negativity", "ln"}, {"n_a", "1"}, {"n_b", "1"}, {"zeta", "omega"}};
    } else if (e == "feedback-fidelity") {
        cols = {{"fidelity", "1"}};
    } else if (e == "delay-stability") {
        cols = {{"max_re_root", "omega"}, {"root_count", "1"}, {"stable", "1"}};
    } else if (e == "delay-entanglement") {
        cols = {{"log_negativity", "ln"}, {"baseline", "ln"}, {"uncertainty_margin", "1"}, {"max_re_root", "omega"}};
    }
    return cols;
}

struct Task {
    std::map<std::string, double> at;  // resolved params and outer axis values
    std::vector<std::map<std::string, double>> inner;
};

struct TaskResult {
    std::vector<std::vector<double>> values;  // per inner point, output columns only
    std::vector<PointStatus> status;
    std::map<std::string, double> echo;
    Json group;
};

inline RabiParams rabi_params(const std::map<std::string, double>& at) {
    RabiParams p;
    p.omega = at.at("omega");
    p.Omega = at.at("Omega");
    p.lambda1 = at.at("lambda1");
    p.lambda2 = at.at("lambda2");
    p.gamma = at.at("gamma");
    return p;
}

inline SteadyStateReport rabi_steady(const RabiParams& p, int n_max) {
    const HilbertSpec spec = HilbertSpec::boson_qubit(n_max);
    NullSteadyOptions o;
    o.symmetry = parity_operator(spec).diagonal().real();
    return steady_state_null(build_arm_hamiltonian(p, n_max), {{embed(annihilation(n_max), spec, 0), p.gamma}}, o);
}

/// population of the top Fock level of the field
inline double field_tail(const DensityMatrix& field) {
    const int d = field.dim();
    return field.matrix()(d - 1, d - 1).real();
}

inline TaskResult evaluate(const SweepConfig& c, const Task& t, std::size_t ncols) {
    TaskResult r;
    const std::string& e = c.experiment;
    const std::size_t n_inner = std::max<std::size_t>(t.inner.size(), 1);
    r.values.assign(n_inner, std::vector<double>(ncols, NAN));
    r.status.assign(n_inner, PointStatus::ok);
    std::map<std::string, double> at = t.at;
    if (at.count("lambda1") && at.count("ratio")) at["lambda2"] = at["ratio"] * at["lambda1"];
    if (e == "feedback-fidelity") at["gamma_eff"] = effective_gamma(at.at("gamma"), at.at("mu"), at.at("eta"));
    for (const auto& k : c.spec().echo) r.echo[k] = at.count(k) ? at[k] : NAN;
    auto& v = r.values;

    if (e.rfind("rabi-", 0) == 0) {
        const RabiParams p = rabi_params(at);
        const int n_max = c.truncation.at("n_max");
        const auto rep = rabi_steady(p, n_max);
        if (rep.residual > c.tolerances.at("steady_residual")) {
            r.status.assign(n_inner, PointStatus::timeout);
            return r;
        }
        const DensityMatrix field = partial_trace(rep.rho_ss, n_max + 1, 2, Subsystem::B);
        if (e == "rabi-entanglement") {
            v[0] = {log_negativity_discrete(rep.rho_ss, n_max + 1, 2), rep.residual, field_tail(field)};
        } else if (e == "rabi-photon-dist") {
            const auto s = photon_statistics(field);
            v[0] = {s.mean, s.variance, s.excess, field_tail(field)};
            for (int n = 0; n <= n_max; ++n) v[0].push_back(s.distribution(n));
        } else if (e == "rabi-coherences") {
            const auto dec = parity_decompose(rep.rho_ss, parity_operator(HilbertSpec::boson_qubit(n_max)));
            const auto s = photon_statistics(field);
            double in_parity = 0.0;
            for (int n = 0; n <= n_max; ++n)
                for (int m = n + 2; m <= n_max; m += 2) in_parity = std::max(in_parity, s.coherence(n, m));
            v[0] = {dec.off_block_norm, in_parity};
            const int levels = std::min(c.options.value("levels", 8), n_max);
            for (int n = 0; n <= levels; ++n)
                for (int m = n + 1; m <= levels; ++m) v[0].push_back(s.coherence(n, m));
        } else {  // rabi-wigner
            const auto re = c.axis("re")->values();
            const auto im = c.axis("im")->values();
            const auto w = wigner(field, re, im);
            for (std::size_t i = 0; i < im.size(); ++i)
                for (std::size_t k = 0; k < re.size(); ++k) v[i * re.size() + k] = {w.values(i, k)};
            Json lobes = Json::array();
            for (const auto& pk : wigner_maxima(w))
                lobes.push_back({{"re", pk.alpha.real()}, {"im", pk.alpha.imag()}, {"value", pk.value}});
            r.group = {{"min_wigner", w.values.minCoeff()}, {"integral", wigner_integral(w)},
                       {"truncation_warning", w.truncation_warning}, {"maxima", lobes}};
        }
    } else if (e == "dicke-stability") {
        const auto s = stability_zeta(rabi_params(at));
        v[0] = {s.zeta, s.max_re_eig_N, s.zeta <= kMarginalZeta ? 1.0 : 0.0};
    } else if (e == "dicke-entanglement") {
        const RabiParams p = rabi_params(at);
        const auto s = stability_zeta(p);
        if (!s.stable) {
            v[0][3] = s.zeta;
            r.status[0] = PointStatus::unstable;
            return r;
        }
        const auto g = steady_covariance(p);
        if (!g.is_physical()) {
            r.status[0] = PointStatus::unphysical;
            return r;
        }
        v[0] = {log_negativity_gaussian(g), g.photon_number_a(), g.photon_number_b(), s.zeta};
    } else if (e == "feedback-fidelity") {
        const RabiParams p = rabi_params(at);
        const int n_max = c.truncation.at("n_max");
        const Json& st = c.options["state"];
        KetState psi = st["kind"] == "noon"
                           ? noon_state(at.count("n") ? static_cast<int>(at["n"]) : st["n"].get<int>(), n_max)
                           : entangled_coherent_state(at.count("alpha") ? at["alpha"] : st["alpha"].get<double>(),
                                                      n_max, 1e-6);
        std::vector<double> times;
        for (const auto& in : t.inner) times.push_back(in.at("time"));
        EvolveOptions opt;
        opt.rtol = c.tolerances.at("ode_rtol");
        opt.atol = c.tolerances.at("ode_atol");
        const auto tr = fidelity_trajectory(psi, p, at["gamma_eff"], times, opt);
        for (std::size_t i = 0; i < times.size(); ++i) v[i] = {tr.fidelity[i]};
        r.group = {{"min_fidelity", *std::min_element(tr.fidelity.begin(), tr.fidelity.end())},
                   {"classical_crossing", tr.classical_crossing ? Json(*tr.classical_crossing) : Json(nullptr)}};
    } else if (e == "delay-stability") {
        const RabiParams p = rabi_params(at);
        RootScanOptions o;
        o.residual_tol = c.tolerances.at("root_residual");
        const auto scan = secular_roots(langevin_matrices(p, at.at("tau")), default_root_window(p, at.at("tau")), o);
        v[0] = {scan.max_re, static_cast<double>(scan.roots.size()), scan.max_re < 0.0 ? 1.0 : 0.0};
        if (scan.roots.empty()) r.status[0] = PointStatus::error;
    } else if (e == "delay-entanglement") {
        const RabiParams p = rabi_params(at);
        SpectralCovarianceOptions o;
        o.abs_tol = c.tolerances.at("quadrature_abs");
        const auto d = delayed_negativity(p, at.at("tau"), o);
        v[0] = {d.negativity ? *d.negativity : NAN, d.baseline, d.uncertainty_margin, d.max_re_root};
        if (d.status == DelayStatus::unstable) {
            r.status[0] = PointStatus::unstable;
            v[0][2] = NAN;
        } else if (d.status == DelayStatus::unphysical) {
            r.status[0] = PointStatus::unphysical;
        }
    }
    return r;
}

inline PointStatus status_of(const std::exception& ex) {
    if (dynamic_cast<const TimeoutError*>(&ex) || dynamic_cast<const StiffnessError*>(&ex)) return PointStatus::timeout;
    if (dynamic_cast<const InstabilityError*>(&ex)) return PointStatus::unstable;
    if (dynamic_cast<const InvalidState*>(&ex)) return PointStatus::unphysical;
    return PointStatus::error;
}

/// Runs f(i) for i in [0, n) on up to `workers` threads; each index is claimed once.
template <class F>
void parallel_for(std::size_t n, int workers, const F& f) {
    const int w = static_cast<int>(std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1)));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int k = 0; k < w; ++k)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Evaluates every grid point; rows come out in grid order whatever the worker count.
inline SweepResult run(const SweepConfig& c, std::optional<int> workers = std::nullopt) {
    const ExperimentSpec& spec = c.spec();
    SweepResult out;
    for (const auto& a : c.grid) out.columns.push_back({a.name, detail::axis_unit(a.name)});
    for (const auto& k : spec.echo)
        if (!c.axis(k)) out.columns.push_back({k, k == "mu" ? "1" : "omega"});
    const auto outputs = detail::output_columns(c);
    out.columns.insert(out.columns.end(), outputs.begin(), outputs.end());

    // outer points in grid order, inner points expanded per task
    std::vector<const Axis*> outer, inner;
    for (const auto& a : c.grid) (detail::contains(spec.inner_axes, a.name) ? inner : outer).push_back(&a);
    auto product = [](const std::vector<const Axis*>& axes) {
        std::vector<std::map<std::string, double>> pts(1);
        for (const Axis* a : axes) {
            std::vector<std::map<std::string, double>> next;
            for (const auto& p : pts)
                for (double v : a->values()) {
                    auto q = p;
                    q[a->name] = v;
                    next.push_back(std::move(q));
                }
            pts = std::move(next);
        }
        return pts;
    };
    const auto inner_pts = product(inner);
    std::vector<detail::Task> tasks;
    for (auto& o : product(outer)) {
        detail::Task t;
        t.at = c.params;
        for (const auto& [k, val] : o) t.at[k] = val;
        if (!inner.empty()) t.inner = inner_pts;
        tasks.push_back(std::move(t));
    }

    std::vector<detail::TaskResult> results(tasks.size());
    detail::parallel_for(tasks.size(), workers.value_or(c.workers), [&](std::size_t i) {
        try {
            results[i] = detail::evaluate(c, tasks[i], outputs.size());
        } catch (const std::exception& ex) {
            detail::TaskResult r;
            const std::size_t n = std::max<std::size_t>(tasks[i].inner.size(), 1);
            r.values.assign(n, std::vector<double>(outputs.size(), NAN));
            r.status.assign(n, detail::status_of(ex));
            r.group = {{"error", ex.what()}};
            for (const auto& k : spec.echo) r.echo[k] = tasks[i].at.count(k) ? tasks[i].at.at(k) : NAN;
            if (tasks[i].at.count("ratio") && tasks[i].at.count("lambda1"))
                r.echo["lambda2"] = tasks[i].at.at("ratio") * tasks[i].at.at("lambda1");
            results[i] = std::move(r);
        }
    });

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        const auto& r = results[i];
        const std::size_t n = std::max<std::size_t>(t.inner.size(), 1);
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> row;
            for (const auto& a : c.grid)
                row.push_back(t.inner.empty() || !t.inner[k].count(a.name) ? t.at.at(a.name) : t.inner[k].at(a.name));
            for (const auto& e : spec.echo)
                if (!c.axis(e)) row.push_back(r.echo.at(e));
            row.insert(row.end(), r.values[k].begin(), r.values[k].end());
            out.rows.push_back(std::move(row));
            out.status.push_back(r.status[k]);
        }
        if (!r.group.is_null()) {
            Json g;
            for (const Axis* a : outer) g[a->name] = t.at.at(a->name);
            g.update(r.group);
            out.groups.push_back(g);
        }
    }
    out.provenance = {{"nesslab", NESSLAB_VERSION}, {"config", c.physics_json()}};
    return out;
}

// ---- output ----

/// Shortest-safe round-trip text for a double.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv(std::ostream& os, const SweepResult& r) {
    os << "# nesslab " << r.provenance["nesslab"].get<std::string>() << "\n";
    os << "# config: " << r.provenance["config"].dump() << "\n";
    os << "# units:";
    for (const auto& col : r.columns) os << " " << col.name << "=" << col.unit;
    os << "\n";
    for (const auto& col : r.columns) os << col.name << ",";
    os << "status\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        for (double x : r.rows[i]) os << format_number(x) << ",";
        os << to_string(r.status[i]) << "\n";
    }
}

inline Json summarize(const SweepConfig& c, const SweepResult& r) {
    Json s;
    s["experiment"] = c.experiment;
    s["nesslab"] = NESSLAB_VERSION;
    s["rows"] = r.rows.size();
    Json counts = Json::object();
    for (PointStatus st : {PointStatus::ok, PointStatus::unstable, PointStatus::unphysical, PointStatus::timeout,
                           PointStatus::error})
        counts[to_string(st)] = std::count(r.status.begin(), r.status.end(), st);
    s["status_counts"] = counts;
    Json ext = Json::object();
    for (const auto& m : c.spec().metrics) {
        const auto col = r.column(m);
        if (!col) continue;
        std::optional<std::size_t> imax, imin;
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            const double x = r.rows[i][*col];
            if (r.status[i] != PointStatus::ok || std::isnan(x)) continue;
            if (!imax || x > r.rows[*imax][*col]) imax = i;
            if (!imin || x < r.rows[*imin][*col]) imin = i;
        }
        if (!imax) continue;
        auto where = [&](std::size_t i) {
            Json w = Json::object();
            for (std::size_t k = 0; k < c.grid.size(); ++k) w[c.grid[k].name] = r.rows[i][k];
            return w;
        };
        ext[m] = {{"max", r.rows[*imax][*col]}, {"argmax", where(*imax)},
                  {"min", r.rows[*imin][*col]}, {"argmin", where(*imin)}};
    }
    s["extrema"] = ext;
    if (c.experiment == "dicke-stability" && c.axis("lambda1")) {
        // first unstable lambda1 along each (ratio, gamma) line
        Json b = Json::array();
        const std::size_t l1 = *r.column("lambda1"), st = *r.column("stable");
        const int n = c.axis("lambda1")->count;
        for (std::size_t i = 0; i < r.rows.size(); i += n) {
            Json line = Json::object();
            for (const auto& a : c.grid)
                if (a.name != "lambda1") line[a.name] = r.rows[i][*r.column(a.name)];
            line["first_unstable_lambda1"] = nullptr;
            for (std::size_t k = i; k < i + n; ++k)
                if (r.rows[k][st] == 0.0) {
                    line["first_unstable_lambda1"] = r.rows[k][l1];
                    break;
                }
            b.push_back(line);
        }
        s["boundary"] = b;
    }
    if (!r.groups.empty()) s["groups"] = r.groups;
    s["provenance"] = r.provenance;
    return s;
}

/// <stem>.json next to the CSV
inline std::string summary_path(const std::string& csv) {
    const auto dot = csv.find_last_of('.');
    const auto slash = csv.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return csv + ".json";
    return csv.substr(0, dot) + ".json";
}

inline void write_outputs(const SweepConfig& c, const SweepResult& r, const std::string& csv_path) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw InvalidArgument("cannot write " + csv_path);
    write_csv(csv, r);
    std::ofstream js(summary_path(csv_path), std::ios::binary);
    if (!js) throw InvalidArgument("cannot write " + summary_path(csv_path));
    js << summarize(c, r).dump(2) << "\n";
}

}  // namespace nesslab
