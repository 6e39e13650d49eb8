#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnlab/model.hpp"

namespace snnlab {

enum class AttackFamily { fgsm, pgd, eotpgd };

std::string attack_family_name(AttackFamily f);
AttackFamily attack_family_from_name(const std::string& name);

struct AttackConfig {
    AttackFamily family = AttackFamily::fgsm;
    double epsilon = 8.0 / 255.0;  // l-inf budget in pixel units
    double alpha = 0.01;           // iterative step size
    int steps = 7;
    int eot_samples = 8;
    bool random_start = false;
    // When false, eot reuses the single frozen noise draw of the plain pgd
    // path; with eot_samples = 1 that collapses eot-pgd to pgd exactly.
    bool eot_fresh_noise = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdversarialBatch {
    Tensor originals;
    Tensor adversarials;
    std::vector<int> labels;
    std::vector<bool> success;  // adversarial misclassified under one fresh noise draw
};

// Gradient of cross-entropy on the time-mean logits w.r.t. the input, under
// one fixed coding-noise draw.
Tensor input_gradient(Model& model, const Tensor& x, const std::vector<int>& y,
                      std::uint64_t nonce);

// x_adv = clamp(x + eps * sign(grad), 0, 1). Equals one pgd step of size eps.
AdversarialBatch fgsm(Model& model, const Tensor& x, const std::vector<int>& y,
                      const AttackConfig& cfg);

// Iterated sign-gradient steps, each followed by projection onto the
// eps-ball around the original and the [0,1] box. Against a stochastic
// coder the whole run holds one frozen noise draw; robust-accuracy
// evaluation redraws, which is what eot exists to defeat.
AdversarialBatch pgd(Model& model, const Tensor& x, const std::vector<int>& y,
                     const AttackConfig& cfg);

// pgd whose per-step gradient averages eot_samples passes, each under a
// fresh coding-noise draw.
AdversarialBatch eot_pgd(Model& model, const Tensor& x, const std::vector<int>& y,
                         const AttackConfig& cfg);

AdversarialBatch run_attack(Model& model, const Tensor& x, const std::vector<int>& y,
                            const AttackConfig& cfg);

struct TransferResult {
    double target_clean_accuracy = 0.0;
    double transfer_accuracy = 0.0;  // target accuracy on source-crafted adversarials
    std::string source_coding, target_coding;
    AttackConfig attack;
};

// Crafts adversarials on `source` and measures them on `target`.
TransferResult blackbox_transfer(Model& source, Model& target, const Tensor& x,
                                 const std::vector<int>& y, const AttackConfig& cfg);

}  // namespace snnlab
