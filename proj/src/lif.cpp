#include "snnlab/lif.hpp"

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

void LifParams::validate() const {
    if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("lif tau must be in (0,1]");
    if (!(threshold > 0.0)) throw ContractError("lif threshold must be positive");
    if (!(gamma > 0.0)) throw ContractError("lif gamma must be positive");
}

Tensor lif_step(const Tensor& input_current, LifState& state, const LifParams& params,
                SpikeMode mode) {
    params.validate();
    if (!state.initialized) {
        state.h = Tensor(input_current.shape());
        state.initialized = true;
    } else if (state.h.shape() != input_current.shape()) {
        throw ShapeError("lif input " + shape_str(input_current.shape()) +
                         " does not match stored state " + shape_str(state.h.shape()));
    }
    Tensor u = add(state.h, input_current);
    Tensor s = mode == SpikeMode::hard ? spike(u, params.threshold, params.gamma)
                                       : spike_soft(u, params.threshold, params.gamma);
    Tensor h = scalar_mul(mul(u, scalar_add(neg(s), 1.0)), params.tau);
    state.u = u;
    state.h = h;
    return s;
}

}  // namespace snnlab
