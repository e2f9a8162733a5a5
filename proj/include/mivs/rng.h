#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>

namespace mivs {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b * 0xD1B54A32D192ED03ULL);
    splitmix64(s);
    return splitmix64(s);
}

// xoshiro256** keyed by (seed, stream). Equal keys give equal sequences;
// `split` derives child streams so every task owns an independent generator
// regardless of the order in which tasks are executed.
class Rng {
public:
    using result_type = uint64_t;

    explicit Rng(uint64_t seed = 0, uint64_t stream = 0) : seed_(seed), stream_(stream) {
        uint64_t sm = seed ^ mix64(stream, 0x5851F42D4C957F2DULL);
        for (auto& w : state_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    // Child generator for sub-task `id`; independent of this generator's state.
    Rng split(uint64_t id) const { return Rng(seed_, mix64(stream_, id + 1)); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    size_t index(size_t n) {
        return static_cast<size_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    double normal() { return normal_(*this); }
    double normal(double mean, double sd) { return mean + sd * normal_(*this); }
    bool bernoulli(double p) { return uniform() < p; }
    double gamma(double shape, double scale) {
        std::gamma_distribution<double> g(shape, scale);
        return g(*this);
    }
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    template <class T>
    void shuffle(std::span<T> v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_;
    uint64_t stream_;
    uint64_t state_[4];
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace mivs
