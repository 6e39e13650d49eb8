#pragma once

#include <cstdint>
#include <vector>

#include "snnlab/coding.hpp"
#include "snnlab/network.hpp"

namespace snnlab {

// A network paired with its input coding. `ann` marks the teacher/baseline
// path: a single clean pass with lif layers acting as ReLU, ignoring T and
// the coder's noise.
struct Model {
    Network net;
    Coder coder;
    bool ann = false;

    Model(Network n, CodingConfig c, bool ann_mode = false)
        : net(std::move(n)), coder(c), ann(ann_mode) {}

    int timesteps() const { return ann ? 1 : coder.config().T; }

    // Per-timestep logits [T, N, k] for a batch under a given noise nonce.
    // ANN models return [1, N, k].
    Tensor per_timestep_logits(const Tensor& x, std::uint64_t nonce, bool training);

    // Time-mean readout [N, k].
    Tensor logits(const Tensor& x, std::uint64_t nonce, bool training);

    std::vector<int> predict(const Tensor& x, std::uint64_t nonce);
};

// Fraction of samples whose prediction under the given noise nonce matches y.
double model_accuracy(Model& model, const Tensor& x, const std::vector<int>& y,
                      std::uint64_t nonce);

}  // namespace snnlab
