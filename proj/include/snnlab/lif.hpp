#pragma once

#include "snnlab/tensor.hpp"

namespace snnlab {

struct LifParams {
    double tau = 1.0;        // leak factor, in (0,1]
    double threshold = 1.0;  // firing threshold
    double gamma = 1.0;      // surrogate width
    void validate() const;   // contract error on out-of-range values
};

// Forward spike nonlinearity selector. `hard` is the step function used in
// production; `soft` swaps in the surrogate's antiderivative so the whole
// unrolled network becomes finite-difference checkable.
enum class SpikeMode { hard, soft };

// Per-layer, per-stream membrane state. h is the post-reset potential
// carried between timesteps; u is the last membrane potential, kept around
// for inspection. Both live on the tape, which is what makes gradients flow
// across timesteps.
struct LifState {
    Tensor h;
    Tensor u;
    bool initialized = false;

    void reset() {
        h = Tensor{};
        u = Tensor{};
        initialized = false;
    }
};

// One membrane update:
//   u  = h_prev + input_current
//   s  = step(u - threshold)        (step(0) = 1)
//   h  = tau * u * (1 - s)
// Returns the spikes s. On the backward pass the step derivative is replaced
// by surrogate_gradient(u - threshold, gamma).
Tensor lif_step(const Tensor& input_current, LifState& state, const LifParams& params,
                SpikeMode mode = SpikeMode::hard);

}  // namespace snnlab
