#include "snnlab/model.hpp"

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

Tensor Model::per_timestep_logits(const Tensor& x, std::uint64_t nonce, bool training) {
    if (ann) return stack_time({net.forward_ann(x, training)});
    auto seq = coder.encode_batch(x, nonce, 0);
    auto state = net.make_state();
    return net.forward(seq.frames, coder.config().T, state, training);
}

Tensor Model::logits(const Tensor& x, std::uint64_t nonce, bool training) {
    return time_mean_logits(per_timestep_logits(x, nonce, training));
}

std::vector<int> Model::predict(const Tensor& x, std::uint64_t nonce) {
    return argmax_rows(logits(x, nonce, false));
}

double model_accuracy(Model& model, const Tensor& x, const std::vector<int>& y,
                      std::uint64_t nonce) {
    if (static_cast<std::int64_t>(y.size()) != x.dim(0))
        throw ContractError("label count does not match batch size");
    const auto pred = model.predict(x, nonce);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (pred[i] == y[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace snnlab
