#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "analytic.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace gperm {

struct SquareMatrix {
    int n = 0;
    std::vector<double> a;

    SquareMatrix() = default;
    explicit SquareMatrix(int order) : n(order), a(static_cast<std::size_t>(order) * static_cast<std::size_t>(order), 0.0) {}
    SquareMatrix(int order, std::vector<double> entries) : n(order), a(std::move(entries)) {
        if (a.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) throw ParameterError("matrix entries do not match order");
    }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }
};

enum class PermanentMethod { naive, ryser };

inline double permanent(const SquareMatrix& m, PermanentMethod method = PermanentMethod::ryser) {
    if (m.n < 1) throw SizeError("permanent requires n >= 1");
    for (double v : m.a)
        if (!std::isfinite(v)) throw ParameterError("matrix entries must be finite");
    const int n = m.n;
    if (method == PermanentMethod::naive) {
        if (n > 10) throw SizeError("naive permanent restricted to n <= 10");
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        long double total = 0.0L;
        do {
            long double prod = 1.0L;
            for (int i = 0; i < n; ++i) prod *= m(i, perm[static_cast<std::size_t>(i)]);
            total += prod;
        } while (std::next_permutation(perm.begin(), perm.end()));
        return static_cast<double>(total);
    }
    if (n > 30) throw SizeError("ryser permanent restricted to n <= 30");
    std::vector<long double> row_sum(static_cast<std::size_t>(n), 0.0L);
    long double total = 0.0L;
    const std::uint64_t count = std::uint64_t{1} << n;
    std::uint64_t gray = 0;
    for (std::uint64_t k = 1; k < count; ++k) {
        const int j = std::countr_zero(k);
        gray ^= std::uint64_t{1} << j;
        const long double sign = (gray >> j) & 1U ? 1.0L : -1.0L;
        long double prod = 1.0L;
        for (int i = 0; i < n; ++i) {
            row_sum[static_cast<std::size_t>(i)] += sign * m(i, j);
            prod *= row_sum[static_cast<std::size_t>(i)];
        }
        total += (std::popcount(gray) % 2 == n % 2) ? prod : -prod;
    }
    return static_cast<double>(total);
}

struct SetPartition {
    std::vector<std::vector<int>> blocks;
};

// Restricted-growth-string enumerator of the set partitions of {0, …, n-1}.
class SetPartitions {
public:
    explicit SetPartitions(int n) : n_(n) {
        if (n < 1 || n > 12) throw SizeError("set partitions restricted to 1 <= n <= 12");
        rgs_.assign(static_cast<std::size_t>(n), 0);
        prefix_max_.assign(static_cast<std::size_t>(n), 0);
    }

    const std::vector<int>& rgs() const { return rgs_; }
    int block_count() const { return prefix_max_.back() + 1; }

    SetPartition current() const {
        SetPartition p;
        p.blocks.resize(static_cast<std::size_t>(block_count()));
        for (int i = 0; i < n_; ++i) p.blocks[static_cast<std::size_t>(rgs_[static_cast<std::size_t>(i)])].push_back(i);
        return p;
    }

    std::vector<int> block_sizes() const {
        std::vector<int> s(static_cast<std::size_t>(block_count()), 0);
        for (int v : rgs_) ++s[static_cast<std::size_t>(v)];
        return s;
    }

    // Advances to the next partition; false once all have been visited.
    bool next() {
        for (int i = n_ - 1; i >= 1; --i) {
            const auto iu = static_cast<std::size_t>(i);
            if (rgs_[iu] <= prefix_max_[iu - 1]) {
                ++rgs_[iu];
                prefix_max_[iu] = std::max(prefix_max_[iu - 1], rgs_[iu]);
                for (int j = i + 1; j < n_; ++j) {
                    rgs_[static_cast<std::size_t>(j)] = 0;
                    prefix_max_[static_cast<std::size_t>(j)] = prefix_max_[iu];
                }
                return true;
            }
        }
        return false;
    }

private:
    int n_;
    std::vector<int> rgs_;
    std::vector<int> prefix_max_;
};

inline std::uint64_t bell_number(int n) {
    if (n < 0 || n > 25) throw SizeError("bell number restricted to 0 <= n <= 25");
    std::vector<std::uint64_t> row{1};
    for (int i = 0; i < n; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (auto v : row) next.push_back(next.back() + v);
        row = std::move(next);
    }
    return row.front();
}

struct ExpFormulaSides {
    double lhs = 0.0;
    double rhs = 0.0;
};

// a[n-1] holds a_n.
inline ExpFormulaSides exp_formula_sides(const std::vector<double>& a, int N) {
    if (N < 1 || N > 12) throw SizeError("exp formula truncation restricted to 1 <= N <= 12");
    if (static_cast<int>(a.size()) < N) throw ParameterError("sequence shorter than truncation order");
    double exponent = 0.0;
    double fact = 1.0;
    for (int n = 1; n <= N; ++n) {
        fact *= n;
        exponent += a[static_cast<std::size_t>(n - 1)] / fact;
    }
    double rhs = 1.0;
    fact = 1.0;
    for (int n = 1; n <= N; ++n) {
        fact *= n;
        SetPartitions parts(n);
        double s = 0.0;
        do {
            double prod = 1.0;
            for (int size : parts.block_sizes()) prod *= a[static_cast<std::size_t>(size - 1)];
            s += prod;
        } while (parts.next());
        rhs += s / fact;
    }
    return {std::exp(exponent), rhs};
}

inline SquareMatrix kernel_matrix(const PointList& pts, const ModelParams& params) {
    const int n = static_cast<int>(pts.size());
    SquareMatrix m(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const double v = k_kernel(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)], params).value;
            m(i, j) = v;
            m(j, i) = v;
        }
    }
    return m;
}

inline double ls_correlation(const PointList& pts, const ModelParams& params) {
    if (pts.size() < 1) throw SizeError("correlation requires at least one point");
    return permanent(kernel_matrix(pts, params), PermanentMethod::ryser);
}

// Block sum over all visiting orders of the chain product; a singleton block contributes beta.
inline double ri_block_sum(const SquareMatrix& K, std::vector<int> block, double beta) {
    std::sort(block.begin(), block.end());
    double total = 0.0;
    do {
        double prod = beta;
        for (std::size_t i = 0; i + 1 < block.size(); ++i) prod *= K(block[i], block[i + 1]);
        total += prod;
    } while (std::next_permutation(block.begin(), block.end()));
    return total;
}

inline double ri_correlation(const PointList& pts, double beta, const ModelParams& params) {
    const int n = static_cast<int>(pts.size());
    if (n < 1 || n > 8) throw SizeError("interlacement correlation restricted to 1 <= n <= 8");
    if (!(beta > 0.0)) throw ParameterError("beta must be positive");
    ModelParams crit = params;
    crit.lambda = 1.0;
    const SquareMatrix K = kernel_matrix(pts, crit);
    SetPartitions parts(n);
    double total = 0.0;
    do {
        double prod = 1.0;
        for (const auto& block : parts.current().blocks) prod *= ri_block_sum(K, block, beta);
        total += prod;
    } while (parts.next());
    return total;
}

}  // namespace gperm
