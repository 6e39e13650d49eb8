#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "snnlab/rng.hpp"
#include "snnlab/tensor.hpp"

namespace snnlab {

enum class CodingScheme { direct, poisson, rsc1, rsc2 };

std::string coding_scheme_name(CodingScheme s);
CodingScheme coding_scheme_from_name(const std::string& name);

struct CodingConfig {
    CodingScheme scheme = CodingScheme::direct;
    int T = 8;              // timesteps; poisson runs default to 16
    double sigma2 = 0.0;    // noise variance, rsc only (sigma2 = 0 degenerates to direct)
    std::uint64_t seed = 0;
    void validate() const;
};

// Returns the conventional timestep count for a scheme (direct/rsc 8,
// poisson 16).
int default_timesteps(CodingScheme s);

struct SpikeSequence {
    Tensor frames;       // [T, N, dims...] (or [T, dims...] for single samples)
    bool binary = false; // poisson, or direct coding of an already-binary input
};

// Input coding layer. Encoders are pure given (input, nonce, sample id):
// the noise stream key is derive_key(seed, nonce, sample_id, t), so calls
// are order-independent and safe to issue concurrently.
//
//   direct   every frame equals x
//   poisson  frame[t] ~ Bernoulli(x) elementwise, fresh per timestep
//   rsc1     eps ~ N(0, sigma2*I) drawn once; every frame = clamp(x+eps, 0, 1)
//   rsc2     eps_t ~ N(0, sigma2*I) per timestep; frame[t] = clamp(x+eps_t, 0, 1)
//
// All encoders record on the active tape: direct and rsc propagate exact
// gradients (clamp masks saturated coordinates); poisson uses a
// straight-through identity, the conventional relaxation of the Bernoulli
// draw.
class Coder {
public:
    explicit Coder(CodingConfig cfg);

    const CodingConfig& config() const { return cfg_; }

    // x: [N, dims...] with entries in [0,1]. Sample i uses stream keys for
    // sample id first_sample_id + i. Returns frames [T, N, dims...].
    SpikeSequence encode_batch(const Tensor& x, std::uint64_t nonce = 0,
                               std::int64_t first_sample_id = 0) const;

    // Single sample [dims...] -> frames [T, dims...].
    SpikeSequence encode(const Tensor& x, std::uint64_t nonce = 0,
                         std::int64_t sample_id = 0) const;

private:
    CodingConfig cfg_;
};

// Raw sampling primitives shared with the Monte-Carlo verification harness
// (which needs the unclamped versions of the draws).
namespace sampling {

// out[i] = 1 with probability probs[i], else 0.
void bernoulli_frame(std::span<const double> probs, rng::Stream& stream, std::span<double> out);

// out[i] = mean[i] + sigma * z_i with z_i standard normal. No clamping.
void gaussian_frame(std::span<const double> mean, double sigma, rng::Stream& stream,
                    std::span<double> out);

}  // namespace sampling

}  // namespace snnlab
