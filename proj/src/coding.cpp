#include "snnlab/coding.hpp"

#include <cmath>

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

std::string coding_scheme_name(CodingScheme s) {
    switch (s) {
        case CodingScheme::direct: return "direct";
        case CodingScheme::poisson: return "poisson";
        case CodingScheme::rsc1: return "rsc1";
        case CodingScheme::rsc2: return "rsc2";
    }
    return "?";
}

CodingScheme coding_scheme_from_name(const std::string& name) {
    if (name == "direct") return CodingScheme::direct;
    if (name == "poisson") return CodingScheme::poisson;
    if (name == "rsc1") return CodingScheme::rsc1;
    if (name == "rsc2") return CodingScheme::rsc2;
    throw ContractError("unknown coding scheme '" + name + "'");
}

void CodingConfig::validate() const {
    if (T < 1) throw ContractError("coding T must be >= 1");
    if (sigma2 < 0.0) throw ContractError("coding sigma2 must be >= 0");
}

int default_timesteps(CodingScheme s) { return s == CodingScheme::poisson ? 16 : 8; }

namespace sampling {

void bernoulli_frame(std::span<const double> probs, rng::Stream& stream, std::span<double> out) {
    for (std::size_t i = 0; i < probs.size(); ++i)
        out[i] = stream.next_uniform() < probs[i] ? 1.0 : 0.0;
}

void gaussian_frame(std::span<const double> mean, double sigma, rng::Stream& stream,
                    std::span<double> out) {
    for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] + sigma * stream.next_normal();
}

}  // namespace sampling

namespace {

void check_unit_range(const Tensor& x) {
    for (double v : x.data()) {
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("coder input outside [0,1]: " + std::to_string(v));
    }
}

Shape framed_shape(const Tensor& x, int T) {
    Shape s;
    s.push_back(T);
    s.insert(s.end(), x.shape().begin(), x.shape().end());
    return s;
}

// Bernoulli draws per (sample, timestep) with a straight-through backward:
// the gradient of each frame passes to x unchanged, summed over time.
Tensor poisson_frames(const Tensor& x, const CodingConfig& cfg, std::uint64_t nonce,
                      std::int64_t first_sample_id) {
    const std::int64_t n = x.dim(0);
    const std::int64_t d = x.numel() / n;
    Tensor out(framed_shape(x, cfg.T));
    auto ov = out.data();
    auto xv = x.data();
    for (std::int64_t t = 0; t < cfg.T; ++t) {
        for (std::int64_t i = 0; i < n; ++i) {
            rng::Stream st(rng::derive_key(cfg.seed, nonce,
                                           static_cast<std::uint64_t>(first_sample_id + i),
                                           static_cast<std::uint64_t>(t)));
            sampling::bernoulli_frame(xv.subspan(static_cast<std::size_t>(i * d), static_cast<std::size_t>(d)),
                                      st,
                                      ov.subspan(static_cast<std::size_t>((t * n + i) * d), static_cast<std::size_t>(d)));
        }
    }
    if (Tape::active() && x.requires_grad()) {
        out.set_requires_grad(true);
        auto xi = x.impl();
        auto oi = out.impl();
        const std::int64_t T = cfg.T;
        Tape::record([xi, oi, T]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            if (xi->grad.empty()) xi->grad.assign(xi->data.size(), 0.0);
            const std::int64_t fn = static_cast<std::int64_t>(xi->data.size());
            for (std::int64_t t = 0; t < T; ++t)
                for (std::int64_t i = 0; i < fn; ++i)
                    xi->grad[static_cast<std::size_t>(i)] += oi->grad[static_cast<std::size_t>(t * fn + i)];
        });
    }
    return out;
}

// Gaussian noise tensor for rsc; per-sample stream, one draw (rsc1) or one
// per timestep (rsc2). Plain constant: gradients flow through x only.
Tensor rsc_noise(const Tensor& x, const CodingConfig& cfg, std::uint64_t nonce,
                 std::int64_t first_sample_id, bool per_timestep) {
    const std::int64_t n = x.dim(0);
    const std::int64_t d = x.numel() / n;
    const double sigma = std::sqrt(cfg.sigma2);
    if (!per_timestep) {
        Tensor noise(x.shape());
        auto nv = noise.data();
        for (std::int64_t i = 0; i < n; ++i) {
            rng::Stream st(rng::derive_key(cfg.seed, nonce,
                                           static_cast<std::uint64_t>(first_sample_id + i), 0));
            for (std::int64_t j = 0; j < d; ++j) nv[i * d + j] = sigma * st.next_normal();
        }
        return noise;
    }
    Tensor noise(framed_shape(x, cfg.T));
    auto nv = noise.data();
    for (std::int64_t t = 0; t < cfg.T; ++t)
        for (std::int64_t i = 0; i < n; ++i) {
            rng::Stream st(rng::derive_key(cfg.seed, nonce,
                                           static_cast<std::uint64_t>(first_sample_id + i),
                                           static_cast<std::uint64_t>(t)));
            for (std::int64_t j = 0; j < d; ++j)
                nv[(t * n + i) * d + j] = sigma * st.next_normal();
        }
    return noise;
}

}  // namespace

Coder::Coder(CodingConfig cfg) : cfg_(cfg) { cfg_.validate(); }

SpikeSequence Coder::encode_batch(const Tensor& x, std::uint64_t nonce,
                                  std::int64_t first_sample_id) const {
    if (x.rank() < 2) throw ShapeError("encode_batch expects [N, dims...], got " + shape_str(x.shape()));
    check_unit_range(x);
    SpikeSequence seq;
    switch (cfg_.scheme) {
        case CodingScheme::direct: {
            seq.frames = repeat_time(x, cfg_.T);
            bool bin = true;
            for (double v : x.data())
                if (v != 0.0 && v != 1.0) { bin = false; break; }
            seq.binary = bin;
            break;
        }
        case CodingScheme::poisson:
            seq.frames = poisson_frames(x, cfg_, nonce, first_sample_id);
            seq.binary = true;
            break;
        case CodingScheme::rsc1: {
            Tensor noise = rsc_noise(x, cfg_, nonce, first_sample_id, false);
            seq.frames = repeat_time(clamp(add(x, noise), 0.0, 1.0), cfg_.T);
            seq.binary = false;
            break;
        }
        case CodingScheme::rsc2: {
            Tensor noise = rsc_noise(x, cfg_, nonce, first_sample_id, true);
            seq.frames = clamp(add(repeat_time(x, cfg_.T), noise), 0.0, 1.0);
            seq.binary = false;
            break;
        }
    }
    return seq;
}

SpikeSequence Coder::encode(const Tensor& x, std::uint64_t nonce, std::int64_t sample_id) const {
    Shape batched;
    batched.push_back(1);
    batched.insert(batched.end(), x.shape().begin(), x.shape().end());
    SpikeSequence seq = encode_batch(reshape(x, batched), nonce, sample_id);
    Shape flat;
    flat.push_back(cfg_.T);
    flat.insert(flat.end(), x.shape().begin(), x.shape().end());
    seq.frames = reshape(seq.frames, flat);
    return seq;
}

}  // namespace snnlab
