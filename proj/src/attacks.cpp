#include "snnlab/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

namespace {

// nonce namespaces so distinct draws never collide
constexpr std::uint64_t kFrozenNoise = 0xf0;
constexpr std::uint64_t kEotNoise = 0xe0;
constexpr std::uint64_t kEvalNoise = 0xa0;
constexpr std::uint64_t kRandomStart = 0x50;

std::uint64_t frozen_nonce(const AttackConfig& cfg) {
    return rng::derive_key(cfg.seed, kFrozenNoise);
}

void check_inputs(const Tensor& x, const std::vector<int>& y) {
    if (x.rank() < 2) throw ShapeError("attack input must be [N, dims...]");
    if (static_cast<std::int64_t>(y.size()) != x.dim(0))
        throw ContractError("label count does not match batch size");
    for (double v : x.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("attack input outside [0,1]");
    }
}

std::vector<bool> success_flags(Model& model, const Tensor& adv, const std::vector<int>& y,
                                const AttackConfig& cfg) {
    const auto pred = model.predict(adv, rng::derive_key(cfg.seed, kEvalNoise));
    std::vector<bool> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = pred[i] != y[i];
    return out;
}

// Shared iteration core. fgsm is the steps=1, alpha=epsilon instance, so the
// two paths are bit-identical by construction.
AdversarialBatch iterate_signed_steps(Model& model, const Tensor& x, const std::vector<int>& y,
                                      const AttackConfig& cfg, int steps, double alpha,
                                      bool eot_mode) {
    check_inputs(x, y);
    AdversarialBatch batch;
    batch.originals = x.clone();
    batch.labels = y;

    Tensor cur = x.clone();
    if (cfg.random_start && cfg.epsilon > 0.0) {
        rng::Stream st(rng::derive_key(cfg.seed, kRandomStart));
        auto cv = cur.data();
        for (std::int64_t i = 0; i < cur.numel(); ++i)
            cv[i] = std::clamp(cv[i] + st.next_uniform(-cfg.epsilon, cfg.epsilon), 0.0, 1.0);
    }

    const auto x0 = batch.originals.data();
    for (int k = 0; k < steps; ++k) {
        std::vector<double> g(static_cast<std::size_t>(x.numel()), 0.0);
        const int passes = eot_mode ? cfg.eot_samples : 1;
        for (int j = 0; j < passes; ++j) {
            std::uint64_t nonce = frozen_nonce(cfg);
            if (eot_mode && cfg.eot_fresh_noise) {
                nonce = rng::derive_key(cfg.seed, kEotNoise, static_cast<std::uint64_t>(k),
                                        static_cast<std::uint64_t>(j));
            }
            Tensor grad = input_gradient(model, cur, y, nonce);
            auto gv = grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv[i];
        }
        // ascend the loss: step by the gradient sign, then project
        auto cv = cur.data();
        for (std::int64_t i = 0; i < cur.numel(); ++i) {
            const double gi = g[static_cast<std::size_t>(i)];
            const double s = gi > 0.0 ? 1.0 : (gi < 0.0 ? -1.0 : 0.0);
            double v = cv[i] + alpha * s;
            v = x0[i] + std::clamp(v - x0[i], -cfg.epsilon, cfg.epsilon);
            cv[i] = std::clamp(v, 0.0, 1.0);
        }
    }

    batch.adversarials = cur;
    batch.success = success_flags(model, cur, y, cfg);
    return batch;
}

}  // namespace

std::string attack_family_name(AttackFamily f) {
    switch (f) {
        case AttackFamily::fgsm: return "fgsm";
        case AttackFamily::pgd: return "pgd";
        case AttackFamily::eotpgd: return "eotpgd";
    }
    return "?";
}

AttackFamily attack_family_from_name(const std::string& name) {
    if (name == "fgsm") return AttackFamily::fgsm;
    if (name == "pgd") return AttackFamily::pgd;
    if (name == "eotpgd") return AttackFamily::eotpgd;
    throw ContractError("unknown attack family '" + name + "'");
}

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw ContractError("attack epsilon must be >= 0");
    if (family != AttackFamily::fgsm && alpha <= 0.0)
        throw ContractError("iterative attacks need alpha > 0");
    if (family != AttackFamily::fgsm && steps < 1)
        throw ContractError("iterative attacks need steps >= 1");
    if (family == AttackFamily::eotpgd && eot_samples < 1)
        throw ContractError("eot needs at least one sample");
}

Tensor input_gradient(Model& model, const Tensor& x, const std::vector<int>& y,
                      std::uint64_t nonce) {
    Tensor leaf = x.clone();
    leaf.set_requires_grad(true);
    Tape tape;
    Tensor loss = cross_entropy(model.logits(leaf, nonce, false), y);
    tape.backward(loss);
    Tensor grad(x.shape());
    if (leaf.has_grad()) {
        auto g = leaf.grad();
        std::copy(g.begin(), g.end(), grad.data().begin());
    }
    return grad;
}

AdversarialBatch fgsm(Model& model, const Tensor& x, const std::vector<int>& y,
                      const AttackConfig& cfg) {
    cfg.validate();
    AttackConfig one = cfg;
    one.random_start = false;
    return iterate_signed_steps(model, x, y, one, 1, cfg.epsilon, false);
}

AdversarialBatch pgd(Model& model, const Tensor& x, const std::vector<int>& y,
                     const AttackConfig& cfg) {
    cfg.validate();
    return iterate_signed_steps(model, x, y, cfg, cfg.steps, cfg.alpha, false);
}

AdversarialBatch eot_pgd(Model& model, const Tensor& x, const std::vector<int>& y,
                         const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.eot_samples < 1) throw ContractError("eot needs at least one sample");
    return iterate_signed_steps(model, x, y, cfg, cfg.steps, cfg.alpha, true);
}

AdversarialBatch run_attack(Model& model, const Tensor& x, const std::vector<int>& y,
                            const AttackConfig& cfg) {
    switch (cfg.family) {
        case AttackFamily::fgsm: return fgsm(model, x, y, cfg);
        case AttackFamily::pgd: return pgd(model, x, y, cfg);
        case AttackFamily::eotpgd: return eot_pgd(model, x, y, cfg);
    }
    throw ContractError("unreachable attack family");
}

TransferResult blackbox_transfer(Model& source, Model& target, const Tensor& x,
                                 const std::vector<int>& y, const AttackConfig& cfg) {
    cfg.validate();
    if (source.net.input_shape() != target.net.input_shape() ||
        source.net.class_count() != target.net.class_count()) {
        throw ShapeError("source and target models do not share input shape and class count");
    }
    AdversarialBatch adv = run_attack(source, x, y, cfg);
    TransferResult res;
    res.attack = cfg;
    res.source_coding = coding_scheme_name(source.coder.config().scheme);
    res.target_coding = coding_scheme_name(target.coder.config().scheme);
    const std::uint64_t eval_nonce = rng::derive_key(cfg.seed, kEvalNoise, 1);
    res.target_clean_accuracy = model_accuracy(target, x, y, eval_nonce);
    res.transfer_accuracy = model_accuracy(target, adv.adversarials, y, eval_nonce);
    return res;
}

}  // namespace snnlab
