#include "snnlab/network.hpp"

#include <cmath>

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"
#include "snnlab/rng.hpp"

namespace snnlab {

namespace {
constexpr double kBnEps = 1e-8;
constexpr double kBnMomentum = 0.1;
}  // namespace

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::fc: return "fc";
        case LayerKind::lif: return "lif";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::avgpool: return "avgpool";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "conv") return LayerKind::conv;
    if (name == "fc") return LayerKind::fc;
    if (name == "lif") return LayerKind::lif;
    if (name == "batchnorm") return LayerKind::batchnorm;
    if (name == "avgpool") return LayerKind::avgpool;
    if (name == "flatten") return LayerKind::flatten;
    throw ContractError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::make_conv(std::int64_t in_ch, std::int64_t out_ch, std::int64_t ksize,
                               std::int64_t stride, std::int64_t padding) {
    LayerSpec s{LayerKind::conv};
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.ksize = ksize;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::make_fc(std::int64_t in_features, std::int64_t out_features) {
    LayerSpec s{LayerKind::fc};
    s.in_features = in_features;
    s.out_features = out_features;
    return s;
}

LayerSpec LayerSpec::make_lif() { return LayerSpec{LayerKind::lif}; }

LayerSpec LayerSpec::make_batchnorm(std::int64_t features) {
    LayerSpec s{LayerKind::batchnorm};
    s.features = features;
    return s;
}

LayerSpec LayerSpec::make_avgpool(std::int64_t pool, std::int64_t pool_stride) {
    LayerSpec s{LayerKind::avgpool};
    s.pool = pool;
    s.pool_stride = pool_stride == 0 ? pool : pool_stride;
    return s;
}

LayerSpec LayerSpec::make_flatten() { return LayerSpec{LayerKind::flatten}; }

Network::Network(Shape input_shape, std::vector<LayerSpec> layers, LifParams lif_params,
                 std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), lif_params_(lif_params) {
    lif_params_.validate();

    // Shape walk over the unbatched sample shape; rejects stacks that do not
    // compose before any data is seen.
    Shape cur = input_shape_;
    std::size_t layer_idx = 0;
    for (const auto& l : layers_) {
        const std::string where = "layer " + std::to_string(layer_idx) + " (" + layer_kind_name(l.kind) + ")";
        switch (l.kind) {
            case LayerKind::conv: {
                if (cur.size() != 3 || cur[0] != l.in_ch)
                    throw ShapeError(where + ": expects [" + std::to_string(l.in_ch) + ",H,W], got " + shape_str(cur));
                const auto oh = (cur[1] + 2 * l.padding - l.ksize) / l.stride + 1;
                const auto ow = (cur[2] + 2 * l.padding - l.ksize) / l.stride + 1;
                if (cur[1] + 2 * l.padding < l.ksize || cur[2] + 2 * l.padding < l.ksize || oh <= 0 || ow <= 0)
                    throw ShapeError(where + ": non-positive output for input " + shape_str(cur));
                cur = {l.out_ch, oh, ow};
                break;
            }
            case LayerKind::fc:
                if (cur.size() != 1 || cur[0] != l.in_features)
                    throw ShapeError(where + ": expects [" + std::to_string(l.in_features) + "], got " + shape_str(cur));
                cur = {l.out_features};
                break;
            case LayerKind::lif:
                break;
            case LayerKind::batchnorm: {
                const std::int64_t have = cur.size() == 3 ? cur[0] : (cur.size() == 1 ? cur[0] : -1);
                if (have != l.features)
                    throw ShapeError(where + ": " + std::to_string(l.features) + " features vs input " + shape_str(cur));
                break;
            }
            case LayerKind::avgpool: {
                if (cur.size() != 3) throw ShapeError(where + ": expects [C,H,W], got " + shape_str(cur));
                if (cur[1] < l.pool || cur[2] < l.pool)
                    throw ShapeError(where + ": window larger than input " + shape_str(cur));
                cur = {cur[0], (cur[1] - l.pool) / l.pool_stride + 1, (cur[2] - l.pool) / l.pool_stride + 1};
                break;
            }
            case LayerKind::flatten:
                cur = {shape_numel(cur)};
                break;
        }
        ++layer_idx;
    }
    if (cur.size() != 1)
        throw ShapeError("network must end with a flat class vector, got " + shape_str(cur));
    class_count_ = cur[0];

    // Parameter allocation. Weights: uniform(-1/sqrt(fan_in), +), biases 0,
    // batch-norm gamma 1 / beta 0, running stats (0,1).
    int layer_i = 0;
    for (const auto& l : layers_) {
        param_base_.push_back(static_cast<int>(params_.size()));
        buffer_base_.push_back(static_cast<int>(buffers_.size()));
        lif_index_.push_back(l.kind == LayerKind::lif ? lif_count_++ : -1);
        rng::Stream st(rng::derive_key(init_seed, 0x1a7e5, static_cast<std::uint64_t>(layer_i)));
        switch (l.kind) {
            case LayerKind::conv: {
                const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_ch * l.ksize * l.ksize));
                Tensor k({l.out_ch, l.in_ch, l.ksize, l.ksize});
                for (auto& v : k.data()) v = st.next_uniform(-bound, bound);
                params_.push_back(k.set_requires_grad(true));
                params_.push_back(Tensor::zeros({l.out_ch}, true));
                break;
            }
            case LayerKind::fc: {
                const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_features));
                Tensor w({l.out_features, l.in_features});
                for (auto& v : w.data()) v = st.next_uniform(-bound, bound);
                params_.push_back(w.set_requires_grad(true));
                params_.push_back(Tensor::zeros({l.out_features}, true));
                break;
            }
            case LayerKind::batchnorm:
                params_.push_back(Tensor::full({l.features}, 1.0, true));   // gamma
                params_.push_back(Tensor::zeros({l.features}, true));       // beta
                buffers_.push_back(Tensor::zeros({l.features}));            // running mean
                buffers_.push_back(Tensor::full({l.features}, 1.0));        // running var
                break;
            default:
                break;
        }
        ++layer_i;
    }
}

NetworkState Network::make_state() const {
    NetworkState st;
    st.lif.resize(static_cast<std::size_t>(lif_count_));
    return st;
}

Tensor Network::apply_layer(std::size_t idx, const Tensor& x, NetworkState* state, bool training,
                            bool ann_mode) {
    const LayerSpec& l = layers_[idx];
    const int pb = param_base_[idx];
    switch (l.kind) {
        case LayerKind::conv:
            return conv2d(x, params_[static_cast<std::size_t>(pb)], params_[static_cast<std::size_t>(pb + 1)],
                          static_cast<int>(l.stride), static_cast<int>(l.padding));
        case LayerKind::fc:
            return linear(x, params_[static_cast<std::size_t>(pb)], params_[static_cast<std::size_t>(pb + 1)]);
        case LayerKind::lif: {
            if (ann_mode) return relu(x);
            return lif_step(x, state->lif[static_cast<std::size_t>(lif_index_[idx])], lif_params_,
                            spike_mode);
        }
        case LayerKind::batchnorm: {
            const bool conv_layout = x.rank() == 4;
            if (!conv_layout && x.rank() != 2)
                throw ShapeError("batchnorm expects [N,C,H,W] or [N,F], got " + shape_str(x.shape()));
            const Shape stat_shape = conv_layout ? Shape{l.features, 1, 1} : Shape{l.features};
            Tensor gamma = reshape(params_[static_cast<std::size_t>(pb)], stat_shape);
            Tensor beta = reshape(params_[static_cast<std::size_t>(pb + 1)], stat_shape);
            Tensor& rmean = buffers_[static_cast<std::size_t>(buffer_base_[idx])];
            Tensor& rvar = buffers_[static_cast<std::size_t>(buffer_base_[idx] + 1)];
            if (training) {
                if (x.dim(0) < 2)
                    throw ContractError("batchnorm needs at least 2 samples in training mode");
                const std::vector<int> axes = conv_layout ? std::vector<int>{0, 2, 3} : std::vector<int>{0};
                Tensor mu = mean(x, axes, true);
                Tensor xc = sub(x, mu);
                Tensor var = mean(mul(xc, xc), axes, true);
                Tensor y = add(mul(mul(xc, rsqrt(var, kBnEps)), gamma), beta);
                // running stats track the detached batch statistics
                auto mv = mu.data();
                auto vv = var.data();
                for (std::int64_t c = 0; c < l.features; ++c) {
                    rmean[c] = (1.0 - kBnMomentum) * rmean[c] + kBnMomentum * mv[c];
                    rvar[c] = (1.0 - kBnMomentum) * rvar[c] + kBnMomentum * vv[c];
                }
                return y;
            }
            Tensor rm = reshape(rmean, stat_shape);
            Tensor rv = reshape(rvar, stat_shape);
            return add(mul(mul(sub(x, rm), rsqrt(rv, kBnEps)), gamma), beta);
        }
        case LayerKind::avgpool:
            return avgpool2d(x, static_cast<int>(l.pool), static_cast<int>(l.pool_stride));
        case LayerKind::flatten:
            return reshape(x, {x.dim(0), shape_numel(x.shape()) / x.dim(0)});
    }
    throw ContractError("unreachable layer kind");
}

Tensor Network::step(const Tensor& frame, NetworkState& state, bool training) {
    Shape want;
    want.push_back(frame.rank() > 0 ? frame.dim(0) : 0);
    want.insert(want.end(), input_shape_.begin(), input_shape_.end());
    if (frame.shape() != want) {
        throw ShapeError("frame " + shape_str(frame.shape()) + " does not match network input " +
                         shape_str(input_shape_) + " plus batch");
    }
    Tensor cur = frame;
    for (std::size_t i = 0; i < layers_.size(); ++i) cur = apply_layer(i, cur, &state, training, false);
    ++state.t;
    return cur;
}

Tensor Network::forward(const Tensor& coded, int expected_T, NetworkState& state, bool training) {
    if (coded.rank() < 2) throw ShapeError("coded input must be [T,N,...], got " + shape_str(coded.shape()));
    if (coded.dim(0) != expected_T) {
        throw ContractError("coded input has T=" + std::to_string(coded.dim(0)) +
                            " but the run is configured for T=" + std::to_string(expected_T));
    }
    if (state.t != 0) throw ContractError("network state must be freshly reset before forward");
    std::vector<Tensor> logits;
    logits.reserve(static_cast<std::size_t>(coded.dim(0)));
    for (std::int64_t t = 0; t < coded.dim(0); ++t)
        logits.push_back(step(select_time(coded, t), state, training));
    return stack_time(logits);
}

Tensor Network::forward_ann(const Tensor& x, bool training) {
    Tensor cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) cur = apply_layer(i, cur, nullptr, training, true);
    return cur;
}

Tensor time_mean_logits(const Tensor& per_timestep_logits) {
    if (per_timestep_logits.rank() != 3)
        throw ShapeError("expected [T,N,k] logits, got " + shape_str(per_timestep_logits.shape()));
    return mean(per_timestep_logits, {0}, false);
}

}  // namespace snnlab
