#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <toml.hpp>

#include "gperm/analytic.hpp"
#include "gperm/configuration.hpp"
#include "gperm/errors.hpp"
#include "gperm/geometry.hpp"

namespace grp {

struct EstimateSettings {
    double pair_separation = 0.5;
    double pair_side = 0.4;
    double laplace_height = 0.2;
    int spectrum_k_max = 6;
};

struct RunConfig {
    gperm::ModelParams params;
    std::optional<double> rho;
    std::optional<double> lambda;
    gperm::Box window = gperm::Box::cube(3, 0.0, 2.0);
    std::size_t replicas = 8;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out = "grp_out";
    gperm::GrpOptions grp;
    EstimateSettings estimate;
    std::size_t figures = 3;

    // Total density: given directly, or the loop density at the given fugacity.
    double total_density() const { return rho ? *rho : gperm::total_density(with_lambda(*lambda)).value; }

    gperm::ModelParams with_lambda(double l) const {
        auto p = params;
        p.lambda = l;
        return p;
    }
};

namespace detail {

inline double number(const toml::node_view<const toml::node>& n, const std::string& key) {
    if (auto v = n.value<double>()) return *v;
    throw gperm::ParameterError("'" + key + "' must be a number");
}

inline std::int64_t integer(const toml::node_view<const toml::node>& n, const std::string& key) {
    if (auto v = n.value_exact<std::int64_t>()) return *v;
    throw gperm::ParameterError("'" + key + "' must be an integer");
}

inline std::vector<double> numbers(const toml::node_view<const toml::node>& n, const std::string& key) {
    const auto* arr = n.as_array();
    if (!arr) throw gperm::ParameterError("'" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
        auto v = e.value<double>();
        if (!v) throw gperm::ParameterError("'" + key + "' must be an array of numbers");
        out.push_back(*v);
    }
    return out;
}

inline void check_keys(const toml::table& t, const std::string& where, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : t) {
        bool ok = false;
        for (auto a : allowed) ok = ok || k.str() == a;
        if (!ok) throw gperm::ParameterError("unknown key '" + std::string(k.str()) + "' in " + where);
    }
}

}  // namespace detail

inline RunConfig parse_config(const toml::table& root) {
    using detail::integer;
    using detail::number;
    RunConfig c;
    detail::check_keys(root, "config", {"model", "window", "run", "truncation", "estimate"});
    for (const char* section : {"model", "window", "run", "truncation", "estimate"})
        if (root.contains(section) && !root[section].is_table()) throw gperm::ParameterError(std::string("[") + section + "] must be a table");
    if (const auto* m = root["model"].as_table()) {
        detail::check_keys(*m, "[model]", {"d", "alpha", "rho", "lambda", "series_tol"});
        const auto n = root["model"];
        if (n["d"]) c.params.d = static_cast<int>(integer(n["d"], "d"));
        if (n["alpha"]) c.params.alpha = number(n["alpha"], "alpha");
        if (n["series_tol"]) c.params.series_tol = number(n["series_tol"], "series_tol");
        if (n["rho"]) c.rho = number(n["rho"], "rho");
        if (n["lambda"]) c.lambda = number(n["lambda"], "lambda");
    }
    if (c.rho && c.lambda) throw gperm::ParameterError("give either model.rho or model.lambda, not both");
    if (!c.rho && !c.lambda) c.rho = 1.0;
    if (const auto* w = root["window"].as_table()) {
        detail::check_keys(*w, "[window]", {"lower", "upper"});
        if (!w->contains("lower") || !w->contains("upper")) throw gperm::ParameterError("[window] needs both lower and upper");
        c.window.lower = detail::numbers(root["window"]["lower"], "window.lower");
        c.window.upper = detail::numbers(root["window"]["upper"], "window.upper");
    } else {
        c.window = gperm::Box::cube(c.params.d, 0.0, 2.0);
    }
    if (const auto* r = root["run"].as_table()) {
        detail::check_keys(*r, "[run]", {"replicas", "seed", "threads", "out", "figures"});
        const auto n = root["run"];
        if (n["replicas"]) {
            const auto v = integer(n["replicas"], "replicas");
            if (v < 1) throw gperm::ParameterError("run.replicas must be >= 1");
            c.replicas = static_cast<std::size_t>(v);
        }
        if (n["seed"]) {
            const auto v = integer(n["seed"], "seed");
            if (v < 0) throw gperm::ParameterError("run.seed must be >= 0");
            c.seed = static_cast<std::uint64_t>(v);
        }
        if (n["threads"]) {
            const auto v = integer(n["threads"], "threads");
            if (v < 0) throw gperm::ParameterError("run.threads must be >= 0");
            c.threads = static_cast<unsigned>(v);
        }
        if (n["figures"]) {
            const auto v = integer(n["figures"], "figures");
            if (v < 0) throw gperm::ParameterError("run.figures must be >= 0");
            c.figures = static_cast<std::size_t>(v);
        }
        if (n["out"]) {
            auto v = n["out"].value<std::string>();
            if (!v) throw gperm::ParameterError("run.out must be a string");
            c.out = *v;
        }
    }
    if (const auto* t = root["truncation"].as_table()) {
        detail::check_keys(*t, "[truncation]", {"k_max", "k_max_rel_eps", "escape_bound", "iteration_cap"});
        const auto n = root["truncation"];
        if (n["k_max"]) c.grp.k_max = integer(n["k_max"], "k_max");
        if (n["k_max_rel_eps"]) c.grp.k_max_rel_eps = number(n["k_max_rel_eps"], "k_max_rel_eps");
        if (n["escape_bound"]) c.grp.escape_bound = number(n["escape_bound"], "escape_bound");
        if (n["iteration_cap"]) c.grp.walk.iteration_cap = integer(n["iteration_cap"], "iteration_cap");
    }
    if (const auto* e = root["estimate"].as_table()) {
        detail::check_keys(*e, "[estimate]", {"pair_separation", "pair_side", "laplace_height", "spectrum_k_max"});
        const auto n = root["estimate"];
        if (n["pair_separation"]) c.estimate.pair_separation = number(n["pair_separation"], "pair_separation");
        if (n["pair_side"]) c.estimate.pair_side = number(n["pair_side"], "pair_side");
        if (n["laplace_height"]) c.estimate.laplace_height = number(n["laplace_height"], "laplace_height");
        if (n["spectrum_k_max"]) c.estimate.spectrum_k_max = static_cast<int>(integer(n["spectrum_k_max"], "spectrum_k_max"));
    }
    return c;
}

// Checks every parameter before any sampling starts.
inline void validate(const RunConfig& c) {
    gperm::validate_basic(c.params);
    c.window.validate();
    if (c.window.dim() != c.params.d) throw gperm::ParameterError("window dimension does not match model.d");
    if (c.rho && !(*c.rho > 0.0 && std::isfinite(*c.rho))) throw gperm::ParameterError("model.rho must be positive and finite");
    if (c.lambda) gperm::validate_admissible(c.with_lambda(*c.lambda));
    if (c.rho && c.params.d >= 3) {
        const double rc = gperm::critical_density(c.params.alpha, c.params.d);
        if (*c.rho > rc && !(c.grp.escape_bound > 0.0 && c.grp.escape_bound < 1.0)) throw gperm::ParameterError("truncation.escape_bound must lie in (0, 1)");
    }
    if (c.grp.k_max < 0) throw gperm::ParameterError("truncation.k_max must be >= 0");
    if (!(c.grp.k_max_rel_eps > 0.0 && c.grp.k_max_rel_eps < 1.0)) throw gperm::ParameterError("truncation.k_max_rel_eps must lie in (0, 1)");
    if (c.grp.walk.iteration_cap < 1) throw gperm::ParameterError("truncation.iteration_cap must be >= 1");
    if (!(c.estimate.pair_side > 0.0) || !(c.estimate.pair_separation > c.estimate.pair_side))
        throw gperm::ParameterError("estimate.pair_separation must exceed estimate.pair_side > 0");
    if (!(c.estimate.laplace_height >= 0.0)) throw gperm::ParameterError("estimate.laplace_height must be >= 0");
    if (c.estimate.spectrum_k_max < 1) throw gperm::ParameterError("estimate.spectrum_k_max must be >= 1");
    if (c.out.empty()) throw gperm::ParameterError("output directory must not be empty");
}

inline toml::array to_array(const std::vector<double>& v) {
    toml::array a;
    for (double x : v) a.push_back(x);
    return a;
}

inline toml::table to_toml(const RunConfig& c) {
    toml::table model{{"d", c.params.d}, {"alpha", c.params.alpha}, {"series_tol", c.params.series_tol}};
    if (c.rho) model.insert("rho", *c.rho);
    if (c.lambda) model.insert("lambda", *c.lambda);
    return toml::table{
        {"model", model},
        {"window", toml::table{{"lower", to_array(c.window.lower)}, {"upper", to_array(c.window.upper)}}},
        {"run", toml::table{{"replicas", static_cast<std::int64_t>(c.replicas)},
                            {"seed", static_cast<std::int64_t>(c.seed)},
                            {"threads", static_cast<std::int64_t>(c.threads)},
                            {"figures", static_cast<std::int64_t>(c.figures)},
                            {"out", c.out}}},
        {"truncation", toml::table{{"k_max", c.grp.k_max},
                                   {"k_max_rel_eps", c.grp.k_max_rel_eps},
                                   {"escape_bound", c.grp.escape_bound},
                                   {"iteration_cap", c.grp.walk.iteration_cap}}},
        {"estimate", toml::table{{"pair_separation", c.estimate.pair_separation},
                                 {"pair_side", c.estimate.pair_side},
                                 {"laplace_height", c.estimate.laplace_height},
                                 {"spectrum_k_max", c.estimate.spectrum_k_max}}},
    };
}

}  // namespace grp
