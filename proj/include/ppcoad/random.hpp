#pragma once

// Seeded random streams. All randomness in a run flows through an Rng derived
// from the master seed by (run index, purpose) so every draw is replayable.

#include <cstdint>
#include <random>
#include <vector>

namespace ppcoad {

/// What a derived stream is used for. Values are part of the seed derivation.
enum class Purpose : std::uint64_t {
    data = 1,       // dataset generation
    split = 2,      // shuffles and split assignment
    score = 3,      // score-model fitting (k-means++ seeding)
    twin = 4,       // twin fitting
    validity = 5,   // synthetic samples for the superuniformity gap
    stream = 6,     // test stream and fresh calibration batches
    synthetic = 7,  // per-step synthetic calibration batches
    acquire = 8,    // Bernoulli acquisition draws
    mask = 9,       // MCAR masks
    graph = 10,     // O-RAN graph
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    /// Counter-based split: independent stream for (master, run, purpose).
    static Rng derive(std::uint64_t master, std::uint64_t run, Purpose purpose, std::uint64_t salt = 0) {
        std::uint64_t s = mix64(master);
        s = mix64(s ^ mix64(run + 0x51ed27d3ULL));
        s = mix64(s ^ mix64(static_cast<std::uint64_t>(purpose) << 32));
        s = mix64(s ^ salt);
        return Rng(s);
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return std::generate_canonical<double, 53>(engine_); }

    double normal(double mean = 0.0, double sd = 1.0) {
        std::normal_distribution<double> dist(mean, sd);
        return dist(engine_);
    }

    /// Returns true with probability p; p >= 1 always succeeds.
    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates with our own index draw so the permutation is pinned.
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ppcoad
