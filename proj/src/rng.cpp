#include "snnlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace snnlab::rng {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) {
    std::uint64_t state = seed;
    std::uint64_t k = splitmix64(state);
    state ^= a + 0x9e3779b97f4a7c15ULL;
    k ^= splitmix64(state);
    state ^= b + 0xd1b54a32d192ed03ULL;
    k ^= splitmix64(state);
    state ^= c + 0x8cb92ba72f3d8dd7ULL;
    k ^= splitmix64(state);
    return k;
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
}  // namespace

Stream::Stream(std::uint64_t key) {
    // xoshiro256** must not be seeded all-zero; splitmix64 never yields four
    // consecutive zeros from any state.
    for (auto& w : s_) w = splitmix64(key);
}

std::uint64_t Stream::next_u64() {
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

double Stream::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

double Stream::next_normal() {
    // u1 in (0,1] so log(u1) is finite.
    double u1 = 1.0 - next_uniform();
    double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace snnlab::rng
