#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include "errors.hpp"

namespace gperm {

// Philox4x64-10 counter-based generator: key = (seed, stream), counter = block index.
class Philox4x64 {
public:
    using result_type = std::uint64_t;

    Philox4x64(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) {
            ++counter_;
            block_ = block(key_, {counter_, 0, 0, 0});
            pos_ = 0;
        }
        return block_[pos_++];
    }

    static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 2> key,
                                              std::array<std::uint64_t, 4> ctr) {
        constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
        constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
        constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
        constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 p0 = static_cast<unsigned __int128>(m0) * ctr[0];
            const unsigned __int128 p1 = static_cast<unsigned __int128>(m1) * ctr[2];
            const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
            const auto lo0 = static_cast<std::uint64_t>(p0);
            const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
            const auto lo1 = static_cast<std::uint64_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += w0;
            key[1] += w1;
        }
        return ctr;
    }

private:
    std::array<std::uint64_t, 2> key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 4> block_{};
    int pos_ = 4;
};

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Combines hierarchical indices (replica, purpose, object, ...) into one stream id.
inline std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream)
        : seed_(master_seed), stream_(stream), engine_(master_seed, stream) {}

    std::uint64_t master_seed() const { return seed_; }
    std::uint64_t id() const { return stream_; }

    RngStream derive(std::uint64_t sub) const { return RngStream(seed_, stream_id({stream_, sub})); }

    std::uint64_t bits() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) {
        std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
        return dist(engine_);
    }

    double normal() { return normal_(engine_); }

    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0) || !std::isfinite(mean)) throw ParameterError("poisson mean must be finite and >= 0");
        if (mean == 0.0) return 0;
        std::poisson_distribution<std::uint64_t> dist(mean);
        return dist(engine_);
    }

    Philox4x64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    Philox4x64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gperm
