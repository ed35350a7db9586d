#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace rarefind {

// splitmix64 finalizer; used to spread user seeds and to derive sub-stream
// seeds so that (base_seed, tag...) pairs give independent streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return mix64(base); }

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Tags... rest) {
    return derive_seed(mix64(base) ^ tag, rest...);
}

// Seeded generator with the handful of draws the project needs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    double uniform01() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), gen_);
    }

    // Independent child stream; deterministic in (parent seed, tag).
    Rng split(std::uint64_t tag) { return Rng(mix64(state_draw() ^ tag)); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::uint64_t state_draw() { return gen_(); }

    std::mt19937_64 gen_;
};

}  // namespace rarefind
