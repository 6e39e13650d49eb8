#pragma once

#include <cstdint>
#include <string_view>

namespace snnlab::rng {

// Identifier of the frozen random-number pipeline. Stored in checkpoints so a
// model is never silently re-run under a different noise stream.
// Pipeline: splitmix64 for key derivation and state seeding, xoshiro256** for
// the bit stream, 53-bit mantissa mapping for uniforms, Box-Muller (no cached
// spare) for normals.
inline constexpr std::string_view kGeneratorId = "sm64/xs256ss/bm.1";

// One splitmix64 step; advances `state` and returns the next value.
std::uint64_t splitmix64(std::uint64_t& state);

// Mixes up to four words into a stream key. Used to give every
// (seed, sample, timestep, draw) combination its own independent stream,
// regardless of call order.
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0);

// xoshiro256** stream seeded from a single 64-bit key via splitmix64.
class Stream {
public:
    explicit Stream(std::uint64_t key);

    std::uint64_t next_u64();

    // Uniform in [0,1), 53 significant bits.
    double next_uniform();

    // Uniform in [lo,hi).
    double next_uniform(double lo, double hi);

    // Standard normal via Box-Muller. Each call consumes exactly two
    // uniforms; the second Box-Muller output is discarded so that the draw
    // count per call is fixed.
    double next_normal();

private:
    std::uint64_t s_[4];
};

}  // namespace snnlab::rng
