#include "snnlab/train.hpp"

#include <cmath>
#include <numbers>

#include "snnlab/attacks.hpp"
#include "snnlab/error.hpp"
#include "snnlab/losses.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

std::string loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::ce_mean: return "ce_mean";
        case LossMode::presynaptic: return "presynaptic";
        case LossMode::e_rsct: return "e_rsct";
    }
    return "?";
}

LossMode loss_mode_from_name(const std::string& name) {
    if (name == "ce_mean") return LossMode::ce_mean;
    if (name == "presynaptic") return LossMode::presynaptic;
    if (name == "e_rsct") return LossMode::e_rsct;
    throw ContractError("unknown loss mode '" + name + "'");
}

std::string lr_schedule_name(LrSchedule s) {
    return s == LrSchedule::constant ? "constant" : "cosine";
}

LrSchedule lr_schedule_from_name(const std::string& name) {
    if (name == "constant") return LrSchedule::constant;
    if (name == "cosine") return LrSchedule::cosine;
    throw ContractError("unknown lr schedule '" + name + "'");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ContractError("epochs must be >= 0");
    if (batch_size < 2) throw ContractError("batch_size must be >= 2");
    if (learning_rate <= 0.0) throw ContractError("learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ContractError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ContractError("weight_decay must be >= 0");
    if (lambda_kd < 0.0) throw ContractError("lambda_kd must be >= 0");
    if (adv_train && adv_train->epsilon_train < 0.0)
        throw ContractError("epsilon_train must be >= 0");
}

void Sgd::step(std::vector<Tensor>& params, double lr) {
    if (velocity_.empty()) {
        velocity_.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p)
            velocity_[p].assign(static_cast<std::size_t>(params[p].numel()), 0.0);
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].has_grad()) continue;
        auto g = params[p].grad();
        auto theta = params[p].data();
        auto& v = velocity_[p];
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum_ * v[i] + g[i] + weight_decay_ * theta[i];
            theta[i] -= lr * v[i];
        }
    }
}

namespace {

double schedule_lr(const TrainConfig& cfg, int epoch) {
    if (cfg.lr_schedule == LrSchedule::constant) return cfg.learning_rate;
    return cfg.learning_rate * 0.5 *
           (1.0 + std::cos(std::numbers::pi * epoch / std::max(cfg.epochs, 1)));
}

std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, int epoch) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    rng::Stream st(rng::derive_key(seed, 0x0e, static_cast<std::uint64_t>(epoch)));
    for (std::int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(st.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    return idx;
}

}  // namespace

std::vector<EpochMetrics> train(Model& model, const Dataset& data, const TrainConfig& cfg,
                                Model* teacher) {
    cfg.validate();
    if (data.size() == 0) throw ContractError("empty dataset");
    if (cfg.loss_mode == LossMode::e_rsct && teacher == nullptr)
        throw ContractError("e_rsct training needs a teacher model");

    Sgd opt(cfg.momentum, cfg.weight_decay);
    std::vector<EpochMetrics> history;
    const std::int64_t n = data.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = schedule_lr(cfg, epoch);
        const auto order = epoch_order(n, cfg.seed, epoch);
        EpochMetrics em;
        em.epoch = epoch;
        em.lr = lr;
        std::int64_t seen = 0, hits = 0;
        int batches = 0;

        for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
            const std::int64_t stop = std::min<std::int64_t>(start + cfg.batch_size, n);
            if (stop - start < 2) break;  // batch norm cannot standardize a single sample
            std::span<const std::int64_t> idx(order.data() + start,
                                              static_cast<std::size_t>(stop - start));
            Tensor batch = data.gather(idx);
            std::vector<int> y = data.gather_labels(idx);
            const std::uint64_t nonce =
                rng::derive_key(cfg.seed, 0xb, static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(start));

            if (cfg.adv_train && cfg.adv_train->epsilon_train > 0.0) {
                AttackConfig acfg;
                acfg.family = AttackFamily::fgsm;
                acfg.epsilon = cfg.adv_train->epsilon_train;
                acfg.seed = rng::derive_key(cfg.seed, 0xad, static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(start));
                AdversarialBatch adv = fgsm(model, batch, y, acfg);
                if (cfg.adv_train->mix_half) {
                    auto bv = batch.data();
                    auto av = adv.adversarials.data();
                    const std::int64_t row = batch.numel() / batch.dim(0);
                    for (std::int64_t i = batch.dim(0) / 2; i < batch.dim(0); ++i)
                        std::copy(av.begin() + i * row, av.begin() + (i + 1) * row,
                                  bv.begin() + i * row);
                } else {
                    batch = adv.adversarials;
                }
            }

            Tensor teacher_logits;
            if (cfg.loss_mode == LossMode::e_rsct) {
                // the teacher reads the clean batch; only the student sees noise
                teacher_logits = time_mean_logits(
                    teacher->per_timestep_logits(batch, 0, false)).detach();
            }

            Tape tape;
            Tensor per_t = model.per_timestep_logits(batch, nonce, true);
            Tensor readout = time_mean_logits(per_t);
            Tensor loss;
            double kd_part = 0.0, ps_part = 0.0;
            switch (cfg.loss_mode) {
                case LossMode::ce_mean:
                    loss = cross_entropy(readout, y);
                    ps_part = loss.item();
                    break;
                case LossMode::presynaptic:
                    loss = loss_presynaptic(per_t, y);
                    ps_part = loss.item();
                    break;
                case LossMode::e_rsct: {
                    Tensor kd = loss_kd(readout, teacher_logits);
                    Tensor ps = loss_presynaptic(per_t, y);
                    kd_part = kd.item();
                    ps_part = ps.item();
                    loss = add(scalar_mul(kd, cfg.lambda_kd), ps);
                    break;
                }
            }
            if (!all_finite(loss)) throw NumericError("training diverged: non-finite loss");

            for (auto& p : model.net.params()) p.zero_grad();
            tape.backward(loss);
            opt.step(model.net.params(), lr);

            em.loss += loss.item();
            em.loss_kd += kd_part;
            em.loss_ps += ps_part;
            ++batches;

            const auto pred = argmax_rows(readout);
            for (std::size_t i = 0; i < y.size(); ++i)
                if (pred[i] == y[static_cast<std::size_t>(i)]) ++hits;
            seen += stop - start;
        }

        if (batches > 0) {
            em.loss /= batches;
            em.loss_kd /= batches;
            em.loss_ps /= batches;
        }
        em.train_accuracy = seen > 0 ? static_cast<double>(hits) / static_cast<double>(seen) : 0.0;
        history.push_back(em);
    }
    return history;
}

Model train_teacher_ann(Shape input_shape, std::vector<LayerSpec> layers, LifParams lif_params,
                        const Dataset& data, const TrainConfig& cfg, std::uint64_t init_seed) {
    CodingConfig coding;  // ann path ignores coding; keep an explicit echo anyway
    coding.scheme = CodingScheme::direct;
    coding.T = 1;
    Model teacher(Network(std::move(input_shape), std::move(layers), lif_params, init_seed),
                  coding, true);
    TrainConfig tc = cfg;
    tc.loss_mode = LossMode::ce_mean;
    tc.adv_train.reset();
    train(teacher, data, tc);
    for (auto& p : teacher.net.params()) {
        p.set_requires_grad(false);  // frozen from here on
        p.zero_grad();
    }
    return teacher;
}

}  // namespace snnlab
