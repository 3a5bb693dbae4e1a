#pragma once

// Seeded randomness. Every stochastic routine takes a root seed and derives
// per-path streams with stream_for(root, index); the split rule is
// splitmix64 over (root ^ golden * (index+1)), so streams are reproducible
// and independent of evaluation order.

#include <cmath>
#include <cstdint>

namespace ergodiag {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** with splitmix64 seeding; uniforms are built directly from the
// top 53 bits so results do not depend on libstdc++ distribution internals.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [0, 1] bounded away from 0, safe inside logs.
    double uniform_positive() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double rate = 1.0) { return -std::log(uniform_positive()) / rate; }

    // Index into a discrete distribution given by nonnegative weights.
    template <typename Weights>
    int categorical(const Weights& w) {
        double total = 0.0;
        for (double p : w) total += p;
        double u = uniform() * total;
        int i = 0;
        const int last = static_cast<int>(w.size()) - 1;
        for (double p : w) {
            if (u < p || i == last) return i;
            u -= p;
            ++i;
        }
        return last;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline RngStream stream_for(std::uint64_t root_seed, std::uint64_t stream_index) {
    std::uint64_t mixed = root_seed ^ (0x9e3779b97f4a7c15ULL * (stream_index + 1));
    return RngStream(mixed);
}

}  // namespace ergodiag
