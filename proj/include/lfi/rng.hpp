#ifndef LFI_RNG_HPP
#define LFI_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace lfi {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// xoshiro256++ seeded through splitmix64.  Streams are addressed by a 64-bit
// key; child streams are derived from (key, name, index) so that workers can
// draw independently and runs replay bit-for-bit from a single master seed.
class Rng {
public:
    explicit Rng(std::uint64_t key) : key_(key) {
        std::uint64_t sm = key;
        for (auto& w : state_) w = splitmix64(sm);
    }

    // Named substream; deterministic in (key, name, index).
    Rng sub(std::string_view name, std::uint64_t index = 0) const {
        std::uint64_t sm = key_ ^ fnv1a64(name);
        std::uint64_t k = splitmix64(sm);
        sm = k + (index + 1) * 0x9e3779b97f4a7c15ull;
        return Rng(splitmix64(sm));
    }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without a cached spare: two uniforms per draw.
    double normal() {
        const double u1 = 1.0 - uniform01(); // in (0,1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mu, double sd) { return mu + sd * normal(); }

    double exponential(double rate) {
        return -std::log(1.0 - uniform01()) / rate;
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for n << 2^64.
        return next_u64() % n;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t key_;
    std::array<std::uint64_t, 4> state_{};
};

} // namespace lfi

#endif
