#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "errors.hpp"
#include "geometry.hpp"
#include "numerics.hpp"

namespace gperm {

struct ModelParams {
    int d = 3;
    double alpha = std::numbers::pi;
    double lambda = 0.5;
    double rho = 0.0;
    double series_tol = 1e-12;

    double step_variance() const { return 0.5 / alpha; }
    double prefactor() const { return std::pow(alpha / std::numbers::pi, 0.5 * d); }
    bool operator==(const ModelParams&) const = default;
};

struct KernelValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

inline void validate_basic(const ModelParams& p) {
    if (p.d < 1) throw ParameterError("dimension must be >= 1");
    if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw ParameterError("alpha must be positive and finite");
    if (!(p.series_tol > 0.0)) throw ParameterError("series_tol must be positive");
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) throw ParameterError("lambda must be finite and >= 0");
}

inline void validate_admissible(const ModelParams& p) {
    validate_basic(p);
    if (p.lambda > 1.0) throw DivergenceError("lambda > 1: loop series diverges");
    if (p.lambda == 1.0 && p.d <= 2) throw DivergenceError("lambda = 1 requires d >= 3");
}

inline double gauss_pdf(PointView x, PointView y, double t) {
    if (!(t > 0.0)) throw ParameterError("gauss_pdf requires t > 0");
    const double d = static_cast<double>(x.size());
    return std::pow(2.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-squared_distance(x, y) / (2.0 * t));
}

inline double j_kernel(PointView x, PointView y, int k, const ModelParams& p) {
    validate_basic(p);
    if (k < 1) throw ParameterError("j_kernel requires k >= 1");
    return std::pow(p.lambda, k) * std::pow(p.alpha / (std::numbers::pi * k), 0.5 * p.d) *
           std::exp(-(p.alpha / k) * squared_distance(x, y));
}

inline double loop_density(int k, const ModelParams& p) {
    validate_basic(p);
    if (k < 1) throw ParameterError("loop_density requires k >= 1");
    return p.prefactor() * std::pow(p.lambda, k) * std::pow(static_cast<double>(k), -0.5 * p.d);
}

namespace detail {

inline double inv_kpow(double k, int d) {
    double r = 1.0;
    for (int i = 0; i < d / 2; ++i) r *= k;
    if (d % 2 != 0) r *= std::sqrt(k);
    return 1.0 / r;
}

struct TailIntegral {
    double value = 0.0;
    double error = 0.0;
};

// ∫_X^∞ e^{-cu} u^{-p} e^{-b/u} du via the alternating expansion of e^{-b/u}.
inline TailIntegral tail_integral(double p, double c, double b, double X) {
    TailIntegral out;
    double coef = 1.0;
    double prev_abs = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 400; ++j) {
        const double q = p + j;
        const double g = c > 0.0 ? std::pow(X, 1.0 - q) * expint_q(q, c * X) : std::pow(X, 1.0 - q) / (q - 1.0);
        const double term = coef * g;
        const double a = std::abs(term);
        if (j > p && a <= prev_abs && a <= 1e-18 * std::abs(out.value)) {
            out.error = a;
            return out;
        }
        out.value += term;
        prev_abs = a;
        coef *= -b / (j + 1);
        if (b == 0.0) return out;
    }
    throw NumericError("tail integral expansion did not converge");
}

// S = Σ_{k≥1} e^{-ck} k^{-d/2} e^{-b/k} with certified truncation bound below tol.
inline KernelValue weighted_series(int d, double c, double b, double tol) {
    const double p = 0.5 * d;
    if (c == 0.0 && p <= 1.0) throw DivergenceError("series diverges at lambda = 1 for d <= 2");
    const double geo_ratio = std::exp(-c);
    const double em_start = std::ceil(2.0 * b / p) + 1.0;
    double sum = 0.0;
    double comp = 0.0;
    std::int64_t k = 0;
    std::int64_t checkpoint = 32;
    const std::int64_t k_limit = std::int64_t{1} << 34;
    while (true) {
        while (k < checkpoint) {
            ++k;
            const double kd = static_cast<double>(k);
            const double term = std::exp(-c * kd - b / kd) * inv_kpow(kd, d);
            const double y = term - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        const double K = static_cast<double>(k);
        if (c > 0.0) {
            const double geo = std::exp(-c * (K + 1.0)) * inv_kpow(K + 1.0, d) / (1.0 - geo_ratio);
            if (geo < tol) return {sum, geo};
        }
        if (K >= em_start) {
            const double fK = std::exp(-c * K - b / K) * inv_kpow(K, d);
            const auto lo_int = tail_integral(p, c, b, K);
            const auto hi_int = tail_integral(p, c, b, K + 0.5);
            const double lo = lo_int.value - 0.5 * fK - lo_int.error;
            const double hi = hi_int.value + hi_int.error;
            const double half = 0.5 * (hi - lo);
            if (half < tol) return {sum + 0.5 * (lo + hi), std::max(half, 0.0)};
        }
        if (checkpoint >= k_limit) throw NumericError("series truncation limit reached before tolerance");
        checkpoint *= 2;
    }
}

}  // namespace detail

inline KernelValue k_kernel(PointView x, PointView y, const ModelParams& p) {
    validate_admissible(p);
    if (p.lambda == 0.0) return {0.0, 0.0};
    const double pref = p.prefactor();
    const double c = -std::log(p.lambda);
    const double b = p.alpha * squared_distance(x, y);
    const auto s = detail::weighted_series(p.d, c, b, p.series_tol / pref);
    return {pref * s.value, pref * s.tail_bound};
}

// K_λ as a function of squared distance only.
inline KernelValue k_kernel_r2(double r2, const ModelParams& p) {
    validate_admissible(p);
    if (p.lambda == 0.0) return {0.0, 0.0};
    const double pref = p.prefactor();
    const auto s = detail::weighted_series(p.d, -std::log(p.lambda), p.alpha * r2, p.series_tol / pref);
    return {pref * s.value, pref * s.tail_bound};
}

inline KernelValue total_density(const ModelParams& p) { return k_kernel_r2(0.0, p); }

namespace detail {

inline KernelValue zeta_half(int d) {
    static std::mutex mu;
    static std::map<int, KernelValue> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(d);
    if (it != cache.end()) return it->second;
    constexpr std::int64_t n_terms = 10'000'000;
    double sum = 0.0;
    double comp = 0.0;
    for (std::int64_t k = n_terms; k >= 1; --k) {
        const double y = inv_kpow(static_cast<double>(k), d) - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double p = 0.5 * d;
    const double N = static_cast<double>(n_terms);
    const double lo = std::pow(N, 1.0 - p) / (p - 1.0) - 0.5 * inv_kpow(N, d);
    const double hi = std::pow(N + 0.5, 1.0 - p) / (p - 1.0);
    KernelValue v{sum + 0.5 * (lo + hi), 0.5 * (hi - lo) + 1e-16 * sum};
    cache.emplace(d, v);
    return v;
}

}  // namespace detail

// ρ_c with its truncation bound; value is +infinity for d ≤ 2.
inline KernelValue critical_density_bounded(double alpha, int d) {
    if (d < 1) throw ParameterError("dimension must be >= 1");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (d <= 2) return {std::numeric_limits<double>::infinity(), 0.0};
    const double pref = std::pow(alpha / std::numbers::pi, 0.5 * d);
    const auto z = detail::zeta_half(d);
    return {pref * z.value, pref * z.tail_bound};
}

inline double critical_density(double alpha, int d) { return critical_density_bounded(alpha, d).value; }

inline double fugacity_from_density(double rho, double alpha, int d, double tol = 1e-10) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("density must be positive and finite");
    if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
    ModelParams p;
    p.d = d;
    p.alpha = alpha;
    p.series_tol = std::min(1e-13, 0.05 * tol);
    validate_basic(p);
    auto rho_of = [&](double lam) {
        p.lambda = lam;
        return total_density(p).value;
    };
    double lo = 0.0;
    double hi = 1.0;
    if (d >= 3) {
        const double rc = critical_density(alpha, d);
        if (rho > rc + tol) throw SupercriticalError("density exceeds the critical density; use GRP assembly");
        if (std::abs(rho - rc) <= 0.5 * tol) return 1.0;
    } else {
        hi = 0.5;
        for (int j = 2; rho_of(hi) < rho; ++j) {
            lo = hi;
            if (j > 52) throw NumericError("fugacity bracket could not be established");
            hi = 1.0 - std::ldexp(1.0, -j);
        }
    }
    double best = lo;
    double best_res = std::numeric_limits<double>::infinity();
    while (true) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double r = rho_of(mid);
        const double res = std::abs(r - rho);
        if (res < best_res) {
            best_res = res;
            best = mid;
        }
        if (res < 0.5 * tol) return mid;
        if (r < rho)
            lo = mid;
        else
            hi = mid;
    }
    if (best_res < tol) return best;
    throw NumericError("fugacity bisection could not reach the requested tolerance");
}

}  // namespace gperm
