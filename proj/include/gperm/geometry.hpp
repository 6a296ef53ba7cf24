#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace gperm {

using Point = std::vector<double>;
using PointView = std::span<const double>;

inline double squared_distance(PointView x, PointView y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = x[i] - y[i];
        s += t * t;
    }
    return s;
}

// Flat list of d-dimensional points.
struct PointList {
    int dim = 0;
    std::vector<double> coords;

    PointList() = default;
    explicit PointList(int d) : dim(d) {}
    PointList(int d, std::vector<double> c) : dim(d), coords(std::move(c)) {}

    std::size_t size() const { return dim > 0 ? coords.size() / static_cast<std::size_t>(dim) : 0; }
    bool empty() const { return coords.empty(); }
    PointView operator[](std::size_t i) const {
        return PointView(coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    }
    std::span<double> mut(std::size_t i) {
        return std::span<double>(coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    }
    void push_back(PointView p) { coords.insert(coords.end(), p.begin(), p.end()); }
    void append(const PointList& other) { coords.insert(coords.end(), other.coords.begin(), other.coords.end()); }
    bool operator==(const PointList& o) const { return dim == o.dim && coords == o.coords; }
};

// Axis-aligned box [lower, upper) with positive volume.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    Box() = default;
    Box(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

    static Box cube(int d, double lo, double hi) {
        return Box(std::vector<double>(static_cast<std::size_t>(d), lo), std::vector<double>(static_cast<std::size_t>(d), hi));
    }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size()) throw ParameterError("box corners must have equal nonzero dimension");
        for (std::size_t i = 0; i < lower.size(); ++i) {
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
                throw ParameterError("box requires finite lower < upper in every coordinate");
        }
    }

    int dim() const { return static_cast<int>(lower.size()); }

    double volume() const {
        double v = 1.0;
        for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
        return v;
    }

    bool contains(PointView x) const {
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!(x[i] >= lower[i] && x[i] < upper[i])) return false;
        return true;
    }

    bool contains(const Box& inner) const {
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (inner.lower[i] < lower[i] || inner.upper[i] > upper[i]) return false;
        return true;
    }

    bool overlaps(const Box& o) const {
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!(lower[i] < o.upper[i] && o.lower[i] < upper[i])) return false;
        return true;
    }

    Point center() const {
        Point c(lower.size());
        for (std::size_t i = 0; i < lower.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
        return c;
    }

    double circumradius() const {
        double s = 0.0;
        for (std::size_t i = 0; i < lower.size(); ++i) {
            const double h = 0.5 * (upper[i] - lower[i]);
            s += h * h;
        }
        return std::sqrt(s);
    }

    void sample_uniform(RngStream& rng, std::span<double> out) const {
        for (std::size_t i = 0; i < lower.size(); ++i) {
            const double v = rng.uniform(lower[i], upper[i]);
            out[i] = v < upper[i] ? v : std::nextafter(upper[i], lower[i]);
        }
    }

    bool operator==(const Box& o) const { return lower == o.lower && upper == o.upper; }
};

}  // namespace gperm
