#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace gperm {

namespace detail {

inline double expint_series_base(double q, double z) {
    // E_q(z) for q in {1/2, 1}
    if (q == 0.5) return std::sqrt(std::numbers::pi / z) * std::erfc(std::sqrt(z));
    return -std::expint(-z);
}

inline double expint_cf(double q, double z) {
    constexpr double tiny = 1e-300;
    double b = z + q;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (q - 1.0 + i);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        const double del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) return h * std::exp(-z);
    }
    throw NumericError("generalized exponential integral continued fraction did not converge");
}

}  // namespace detail

// Generalized exponential integral E_q(z) = ∫_1^∞ e^{-zt} t^{-q} dt for half-integer or integer q > 0, z > 0.
inline double expint_q(double q, double z) {
    if (!(z > 0.0)) {
        if (z == 0.0 && q > 1.0) return 1.0 / (q - 1.0);
        throw DomainError("expint_q requires z > 0");
    }
    const double frac = q - std::floor(q);
    if (!(frac == 0.0 || frac == 0.5) || q <= 0.0) throw DomainError("expint_q requires positive integer or half-integer order");
    if (z > 1.0) return detail::expint_cf(q, z);
    double base = frac == 0.5 ? 0.5 : 1.0;
    double e = detail::expint_series_base(base, z);
    const double ez = std::exp(-z);
    while (base + 0.5 < q) {
        e = (ez - z * e) / base;
        base += 1.0;
    }
    return e;
}

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss–Legendre nodes and weights on [a, b].
inline QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    if (n < 1) throw ParameterError("quadrature order must be >= 1");
    QuadratureRule r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    const double xm = 0.5 * (b + a);
    const double xl = 0.5 * (b - a);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        if (n == 1) {
            z = 0.0;
            pp = 1.0;
        }
        const double w = n == 1 ? 2.0 : 2.0 / ((1.0 - z * z) * pp * pp);
        r.nodes[static_cast<std::size_t>(i)] = xm - xl * z;
        r.nodes[static_cast<std::size_t>(n - 1 - i)] = xm + xl * z;
        r.weights[static_cast<std::size_t>(i)] = xl * w;
        r.weights[static_cast<std::size_t>(n - 1 - i)] = xl * w;
    }
    return r;
}

// Composite Gauss–Legendre rule: `panels` equal panels of order `order` on [a, b].
inline QuadratureRule composite_gauss_legendre(int order, int panels, double a, double b) {
    QuadratureRule out;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        auto r = gauss_legendre(order, a + p * h, a + (p + 1) * h);
        out.nodes.insert(out.nodes.end(), r.nodes.begin(), r.nodes.end());
        out.weights.insert(out.weights.end(), r.weights.begin(), r.weights.end());
    }
    return out;
}

inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

struct MeanError {
    double mean = 0.0;
    double stderr_ = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

inline MeanError mean_and_stderr(std::span<const double> v) {
    MeanError r;
    r.n = v.size();
    if (v.empty()) return r;
    r.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return r;
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - r.mean) * (v[i] - r.mean);
    r.sd = std::sqrt(pairwise_sum(dev) / static_cast<double>(v.size() - 1));
    r.stderr_ = r.sd / std::sqrt(static_cast<double>(v.size()));
    return r;
}

}  // namespace gperm
