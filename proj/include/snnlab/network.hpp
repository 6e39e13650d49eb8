#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnlab/lif.hpp"
#include "snnlab/tensor.hpp"

namespace snnlab {

enum class LayerKind { conv, fc, lif, batchnorm, avgpool, flatten };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind;
    std::int64_t in_ch = 0, out_ch = 0, ksize = 0, stride = 1, padding = 0;  // conv
    std::int64_t in_features = 0, out_features = 0;                          // fc
    std::int64_t features = 0;                                               // batchnorm
    std::int64_t pool = 0, pool_stride = 0;                                  // avgpool

    static LayerSpec make_conv(std::int64_t in_ch, std::int64_t out_ch, std::int64_t ksize,
                               std::int64_t stride = 1, std::int64_t padding = 0);
    static LayerSpec make_fc(std::int64_t in_features, std::int64_t out_features);
    static LayerSpec make_lif();
    static LayerSpec make_batchnorm(std::int64_t features);
    static LayerSpec make_avgpool(std::int64_t pool, std::int64_t pool_stride = 0);
    static LayerSpec make_flatten();
};

// Per-evaluation-stream state: one LifState per lif layer plus the timestep
// counter. Single owner; make one per concurrent stream.
struct NetworkState {
    std::vector<LifState> lif;
    int t = 0;

    void reset() {
        for (auto& s : lif) s.reset();
        t = 0;
    }
};

// A layer stack with learned parameters. Layer shapes are validated at build
// time against `input_shape` (sample shape, no batch dimension). The same
// stack runs in two modes: spiking (lif layers integrate and fire across
// timesteps) and ann (lif layers act as ReLU, no state), which is how the
// distillation teacher reuses the architecture.
class Network {
public:
    Network(Shape input_shape, std::vector<LayerSpec> layers, LifParams lif_params,
            std::uint64_t init_seed);

    const Shape& input_shape() const { return input_shape_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    const LifParams& lif_params() const { return lif_params_; }
    std::int64_t class_count() const { return class_count_; }

    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    // Batch-norm running statistics; persisted with checkpoints, never
    // touched by the optimizer.
    std::vector<Tensor>& buffers() { return buffers_; }
    const std::vector<Tensor>& buffers() const { return buffers_; }

    NetworkState make_state() const;

    SpikeMode spike_mode = SpikeMode::hard;

    // One timestep: frame [N, input_shape...] -> logits [N, classes].
    Tensor step(const Tensor& frame, NetworkState& state, bool training);

    // Unrolled pass over coded input [T, N, input_shape...]. `expected_T`
    // cross-checks the coding config against the sequence; state must be
    // freshly reset. Returns per-timestep logits [T, N, classes].
    Tensor forward(const Tensor& coded, int expected_T, NetworkState& state, bool training);

    // Teacher path: single pass on the raw input, lif layers become ReLU.
    Tensor forward_ann(const Tensor& x, bool training);

private:
    Tensor apply_layer(std::size_t idx, const Tensor& x, NetworkState* state, bool training,
                       bool ann_mode);

    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    LifParams lif_params_;
    std::int64_t class_count_ = 0;
    std::vector<Tensor> params_;
    std::vector<Tensor> buffers_;
    // layer index -> first index into params_/buffers_/lif-state list
    std::vector<int> param_base_;
    std::vector<int> buffer_base_;
    std::vector<int> lif_index_;
    int lif_count_ = 0;
};

// Mean over the time axis of per-timestep logits [T, N, k] -> [N, k]; the
// readout used for predictions, attacks and distillation.
Tensor time_mean_logits(const Tensor& per_timestep_logits);

}  // namespace snnlab
