#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "configuration.hpp"
#include "errors.hpp"

namespace gperm {

inline constexpr int kSchemaVersion = 1;

namespace detail {

using nlohmann::json;

inline json points_to_json(const PointList& pts) {
    json a = json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto p = pts[i];
        a.push_back(std::vector<double>(p.begin(), p.end()));
    }
    return a;
}

inline json escape_to_json(const EscapeSummary& e) {
    return {{"iterations", e.iterations}, {"final_distance", e.final_distance}, {"return_bound", e.return_bound}, {"truncated", e.truncated}};
}

class Reader {
public:
    const json& at(const json& node, const std::string& path, const std::string& key) const {
        if (!node.is_object()) fail(path, "expected an object");
        const auto it = node.find(key);
        if (it == node.end()) fail(path + "/" + key, "missing field");
        return *it;
    }

    double number(const json& node, const std::string& path) const {
        if (!node.is_number()) fail(path, "expected a number");
        return node.get<double>();
    }

    template <class Int>
    Int integer(const json& node, const std::string& path) const {
        if (!node.is_number_integer()) fail(path, "expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (node.is_number_unsigned()) return node.get<Int>();
            if (node.get<std::int64_t>() < 0) fail(path, "expected a nonnegative integer");
        }
        return node.get<Int>();
    }

    bool boolean(const json& node, const std::string& path) const {
        if (!node.is_boolean()) fail(path, "expected a boolean");
        return node.get<bool>();
    }

    const json& array(const json& node, const std::string& path) const {
        if (!node.is_array()) fail(path, "expected an array");
        return node;
    }

    Point point(const json& node, const std::string& path, int d) const {
        array(node, path);
        if (node.size() != static_cast<std::size_t>(d)) fail(path, "point has wrong dimension");
        Point p;
        for (std::size_t i = 0; i < node.size(); ++i) p.push_back(number(node[i], path + "/" + std::to_string(i)));
        return p;
    }

    PointList points(const json& node, const std::string& path, int d) const {
        array(node, path);
        PointList out(d);
        for (std::size_t i = 0; i < node.size(); ++i) out.push_back(point(node[i], path + "/" + std::to_string(i), d));
        return out;
    }

    EscapeSummary escape(const json& node, const std::string& path) const {
        EscapeSummary e;
        e.iterations = integer<std::int64_t>(at(node, path, "iterations"), path + "/iterations");
        e.final_distance = number(at(node, path, "final_distance"), path + "/final_distance");
        e.return_bound = number(at(node, path, "return_bound"), path + "/return_bound");
        e.truncated = boolean(at(node, path, "truncated"), path + "/truncated");
        return e;
    }

    [[noreturn]] void fail(const std::string& path, const std::string& what) const {
        throw ParseError(what, path.empty() ? "/" : path);
    }
};

}  // namespace detail

inline nlohmann::json configuration_to_json(const Configuration& c) {
    using nlohmann::json;
    const auto& pv = c.provenance;
    json header = {
        {"schema_version", kSchemaVersion},
        {"d", c.params.d},
        {"alpha", c.params.alpha},
        {"series_tol", c.params.series_tol},
        {"lambda_or_rho", {{"lambda", c.params.lambda}, {"rho", c.rho}, {"beta", c.beta}}},
        {"window", {{"lower", c.window.lower}, {"upper", c.window.upper}}},
        {"seed", pv.seed},
        {"streams", {{"loops", pv.loop_stream}, {"interlacements", pv.interlacement_stream}}},
        {"k_max", pv.k_max},
        {"escape_radius", pv.escape_radius},
        {"bias_bounds",
         {{"loop_tail_density", pv.loop_tail_density}, {"return_bound", pv.return_bound}, {"truncated_trajectories", pv.truncated_trajectories}}},
    };
    json loops = json::array();
    for (const auto& l : c.loops) loops.push_back(detail::points_to_json(l.points));
    json trajs = json::array();
    for (const auto& t : c.trajectories) {
        json ex = json::array();
        for (const auto& [i, s] : t.excursions) ex.push_back({i, s});
        trajs.push_back({{"points", detail::points_to_json(t.points)},
                         {"anchor_index", t.anchor_index},
                         {"s_index", t.s_index()},
                         {"t_index", t.t_index()},
                         {"visits", t.visits},
                         {"truncated", t.truncated()},
                         {"excursions", ex},
                         {"escape", {{"backward", detail::escape_to_json(t.backward)}, {"forward", detail::escape_to_json(t.forward)}}}});
    }
    return {{"header", header}, {"loops", loops}, {"trajectories", trajs}};
}

inline std::string serialize(const Configuration& c) { return configuration_to_json(c).dump() + "\n"; }

inline Configuration configuration_from_json(const nlohmann::json& root) {
    const detail::Reader r;
    Configuration c;
    const auto& h = r.at(root, "", "header");
    const int version = r.integer<int>(r.at(h, "/header", "schema_version"), "/header/schema_version");
    if (version != kSchemaVersion)
        r.fail("/header/schema_version", "unsupported schema version " + std::to_string(version) + " (expected " + std::to_string(kSchemaVersion) + ")");
    c.params.d = r.integer<int>(r.at(h, "/header", "d"), "/header/d");
    if (c.params.d < 1) r.fail("/header/d", "dimension must be >= 1");
    const int d = c.params.d;
    c.params.alpha = r.number(r.at(h, "/header", "alpha"), "/header/alpha");
    c.params.series_tol = r.number(r.at(h, "/header", "series_tol"), "/header/series_tol");
    const auto& lr = r.at(h, "/header", "lambda_or_rho");
    c.params.lambda = r.number(r.at(lr, "/header/lambda_or_rho", "lambda"), "/header/lambda_or_rho/lambda");
    c.rho = r.number(r.at(lr, "/header/lambda_or_rho", "rho"), "/header/lambda_or_rho/rho");
    c.beta = r.number(r.at(lr, "/header/lambda_or_rho", "beta"), "/header/lambda_or_rho/beta");
    const auto& w = r.at(h, "/header", "window");
    c.window.lower = r.point(r.at(w, "/header/window", "lower"), "/header/window/lower", d);
    c.window.upper = r.point(r.at(w, "/header/window", "upper"), "/header/window/upper", d);
    auto& pv = c.provenance;
    pv.seed = r.integer<std::uint64_t>(r.at(h, "/header", "seed"), "/header/seed");
    const auto& st = r.at(h, "/header", "streams");
    pv.loop_stream = r.integer<std::uint64_t>(r.at(st, "/header/streams", "loops"), "/header/streams/loops");
    pv.interlacement_stream = r.integer<std::uint64_t>(r.at(st, "/header/streams", "interlacements"), "/header/streams/interlacements");
    pv.k_max = r.integer<std::int64_t>(r.at(h, "/header", "k_max"), "/header/k_max");
    pv.escape_radius = r.number(r.at(h, "/header", "escape_radius"), "/header/escape_radius");
    const auto& bb = r.at(h, "/header", "bias_bounds");
    pv.loop_tail_density = r.number(r.at(bb, "/header/bias_bounds", "loop_tail_density"), "/header/bias_bounds/loop_tail_density");
    pv.return_bound = r.number(r.at(bb, "/header/bias_bounds", "return_bound"), "/header/bias_bounds/return_bound");
    pv.truncated_trajectories =
        r.integer<std::uint64_t>(r.at(bb, "/header/bias_bounds", "truncated_trajectories"), "/header/bias_bounds/truncated_trajectories");

    const auto& loops = r.array(r.at(root, "", "loops"), "/loops");
    for (std::size_t i = 0; i < loops.size(); ++i) {
        const std::string path = "/loops/" + std::to_string(i);
        auto pts = r.points(loops[i], path, d);
        if (pts.size() == 0) r.fail(path, "empty loop");
        c.loops.emplace_back(std::move(pts));
    }
    const auto& trajs = r.array(r.at(root, "", "trajectories"), "/trajectories");
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const std::string path = "/trajectories/" + std::to_string(i);
        const auto& tj = trajs[i];
        Trajectory t;
        t.points = r.points(r.at(tj, path, "points"), path + "/points", d);
        const std::size_t n = t.points.size();
        if (n == 0) r.fail(path + "/points", "empty trajectory");
        t.anchor_index = r.integer<std::size_t>(r.at(tj, path, "anchor_index"), path + "/anchor_index");
        if (t.anchor_index >= n) r.fail(path + "/anchor_index", "anchor index out of range");
        if (r.integer<std::size_t>(r.at(tj, path, "s_index"), path + "/s_index") != t.s_index()) r.fail(path + "/s_index", "s index must be 0");
        if (r.integer<std::size_t>(r.at(tj, path, "t_index"), path + "/t_index") != t.t_index())
            r.fail(path + "/t_index", "t index must be the last point");
        t.visits = r.integer<std::int64_t>(r.at(tj, path, "visits"), path + "/visits");
        const auto& ex = r.array(r.at(tj, path, "excursions"), path + "/excursions");
        for (std::size_t e = 0; e < ex.size(); ++e) {
            const std::string ep = path + "/excursions/" + std::to_string(e);
            r.array(ex[e], ep);
            if (ex[e].size() != 2) r.fail(ep, "excursion must be [index, steps]");
            const auto idx = r.integer<std::size_t>(ex[e][0], ep + "/0");
            const auto steps = r.integer<std::int64_t>(ex[e][1], ep + "/1");
            if (idx + 1 >= n) r.fail(ep + "/0", "excursion index out of range");
            if (steps < 2) r.fail(ep + "/1", "excursion must span at least 2 steps");
            t.excursions.emplace_back(idx, steps);
        }
        const auto& es = r.at(tj, path, "escape");
        t.backward = r.escape(r.at(es, path + "/escape", "backward"), path + "/escape/backward");
        t.forward = r.escape(r.at(es, path + "/escape", "forward"), path + "/escape/forward");
        if (r.boolean(r.at(tj, path, "truncated"), path + "/truncated") != t.truncated())
            r.fail(path + "/truncated", "truncation flag disagrees with escape summaries");
        c.trajectories.push_back(std::move(t));
    }
    return c;
}

inline Configuration deserialize(std::string_view text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), "byte " + std::to_string(e.byte));
    }
    return configuration_from_json(root);
}

}  // namespace gperm
