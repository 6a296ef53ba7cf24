#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "gperm/configuration.hpp"

namespace grp {

struct Band {
    std::int64_t lo, hi;
    const char* label;
    const char* color;
};

inline const std::vector<Band>& loop_bands() {
    static const std::vector<Band> bands = {{1, 1, "loops, k = 1", "#1f77b4"},
                                            {2, 3, "loops, k = 2-3", "#2ca02c"},
                                            {4, 9, "loops, k = 4-9", "#ff7f0e"},
                                            {10, 99, "loops, k = 10-99", "#9467bd"},
                                            {100, INT64_MAX, "loops, k &#8805; 100", "#d62728"}};
    return bands;
}

inline const char* band_color(std::int64_t k) {
    for (const auto& b : loop_bands())
        if (k >= b.lo && k <= b.hi) return b.color;
    return "#7f7f7f";
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Scatter of the configuration's points, projected on the first two axes (d = 1: one row per element).
inline std::string configuration_svg(const gperm::Configuration& c, const std::string& title) {
    constexpr double size = 640.0, margin = 48.0, legend_w = 190.0;
    const auto& W = c.window;
    const int d = W.dim();
    const double pad0 = 0.25 * (W.upper[0] - W.lower[0]);
    const double x0 = W.lower[0] - pad0, x1 = W.upper[0] + pad0;
    const std::size_t rows = c.loops.size() + c.trajectories.size();
    double y0 = 0.0, y1 = std::max<double>(1.0, static_cast<double>(rows));
    if (d >= 2) {
        const double pad1 = 0.25 * (W.upper[1] - W.lower[1]);
        y0 = W.lower[1] - pad1;
        y1 = W.upper[1] + pad1;
    }
    const double plot = size - 2 * margin;
    auto sx = [&](double x) { return margin + plot * (x - x0) / (x1 - x0); };
    auto sy = [&](double y) { return size - margin - plot * (y - y0) / (y1 - y0); };
    auto inside = [&](double x, double y) { return x >= x0 && x <= x1 && y >= y0 && y <= y1; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(size + legend_w) << "\" height=\"" << num(size + 40) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(margin) << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
    o << "<rect x=\"" << num(margin) << "\" y=\"" << num(margin) << "\" width=\"" << num(plot) << "\" height=\"" << num(plot)
      << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    const double wy0 = d >= 2 ? W.lower[1] : y0, wy1 = d >= 2 ? W.upper[1] : y1;
    o << "<rect x=\"" << num(sx(W.lower[0])) << "\" y=\"" << num(sy(wy1)) << "\" width=\"" << num(sx(W.upper[0]) - sx(W.lower[0]))
      << "\" height=\"" << num(sy(wy0) - sy(wy1)) << "\" fill=\"#f4f4f4\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";

    std::size_t row = 0;
    auto element = [&](const gperm::PointList& pts, const char* color, bool closed) {
        const double yrow = static_cast<double>(row++) + 0.5;
        auto yof = [&](std::size_t i) { return d >= 2 ? pts[i][1] : yrow; };
        if (pts.size() > 1) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-opacity=\"0.35\" stroke-width=\"0.8\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double x = std::clamp(pts[i][0], x0, x1), y = std::clamp(yof(i), y0, y1);
                o << num(sx(x)) << "," << num(sy(y)) << " ";
            }
            if (closed) o << num(sx(std::clamp(pts[0][0], x0, x1))) << "," << num(sy(std::clamp(yof(0), y0, y1)));
            o << "\"/>\n";
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double x = pts[i][0], y = yof(i);
            if (!inside(x, y)) continue;
            o << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"2.2\" fill=\"" << color << "\"/>\n";
        }
    };
    for (const auto& l : c.loops) element(l.points, band_color(static_cast<std::int64_t>(l.length())), true);
    for (const auto& t : c.trajectories) element(t.points, "black", false);

    double ly = margin;
    const double lx = size + 8;
    auto legend = [&](const char* color, const std::string& label) {
        o << "<circle cx=\"" << num(lx) << "\" cy=\"" << num(ly) << "\" r=\"4\" fill=\"" << color << "\"/>";
        o << "<text x=\"" << num(lx + 10) << "\" y=\"" << num(ly + 4) << "\">" << label << "</text>\n";
        ly += 20;
    };
    for (const auto& b : loop_bands()) legend(b.color, b.label);
    legend("black", "interlacement trajectories");
    const auto& pv = c.provenance;
    ly += 10;
    for (const std::string& line :
         {"rho = " + num(c.rho) + ", lambda = " + num(c.params.lambda), "beta = " + num(c.beta), "k_max = " + std::to_string(pv.k_max),
          "loop tail density &#8804; " + [&] {
              char b[32];
              std::snprintf(b, sizeof b, "%.2g", pv.loop_tail_density);
              return std::string(b);
          }(),
          "return bound &#8804; " + [&] {
              char b[32];
              std::snprintf(b, sizeof b, "%.2g", pv.return_bound);
              return std::string(b);
          }(),
          "truncated trajectories: " + std::to_string(pv.truncated_trajectories)}) {
        o << "<text x=\"" << num(lx - 4) << "\" y=\"" << num(ly) << "\">" << line << "</text>\n";
        ly += 18;
    }
    o << "<text x=\"" << num(margin) << "\" y=\"" << num(size - margin + 20) << "\" fill=\"#555555\">"
      << (d >= 2 ? "axes: first two coordinates; dashed box: sampling window" : "horizontal: position; one row per element; dashed box: window")
      << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

}  // namespace grp
