#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snnlab/attacks.hpp"
#include "snnlab/dataset.hpp"
#include "snnlab/model.hpp"

namespace snnlab {

// One point of the accuracy-vs-intensity curve. eta is the attack intensity
// in 1/255 units (eta = 255 * epsilon); accuracy is a fraction in [0,1].
struct QtePoint {
    double eta = 0.0;
    double accuracy = 0.0;
};

// Trapezoid between two intensities: |(eta_b - eta_a) * (A(eta_b) + A(eta_a)) / 2|.
double qte(const QtePoint& a, const QtePoint& b);

// Multi-point composition: sum of adjacent-interval trapezoids.
double qte_curve(std::span<const QtePoint> points);

struct EvalOptions {
    int n_eval_noise = 1;        // fresh noise draws per sample at evaluation
    bool majority_vote = false;  // default aggregates mean logits over draws
    std::uint64_t seed = 0x5eed;
};

// Accuracy under fresh coding noise, aggregated over n_eval_noise draws.
double evaluate_accuracy(Model& model, const Tensor& x, const std::vector<int>& y,
                         const EvalOptions& opts);

struct AttackOutcome {
    std::string name;
    AttackConfig config;
    double accuracy = 0.0;
};

struct RobustnessReport {
    double clean_accuracy = 0.0;
    std::vector<AttackOutcome> attacks;
    std::optional<double> f_qte;  // (0, clean) -> (255*eps, fgsm accuracy)
    std::optional<double> p_qte;
    // config echo
    std::string coding_scheme;
    double sigma2 = 0.0;
    int T = 0;
    int n_eval_noise = 1;
    std::int64_t n_samples = 0;
};

// Clean plus per-attack accuracies; F-QTE/P-QTE from the first fgsm/pgd
// entries when present.
RobustnessReport evaluate(Model& model, const Dataset& data,
                          std::span<const AttackConfig> attacks, const EvalOptions& opts);

struct ChecklistItem {
    int id = 0;
    std::string claim;     // the obfuscation symptom being tested for
    bool pass = false;     // true = symptom absent
    std::string evidence;  // numbers backing the verdict
};

struct ChecklistReport {
    std::array<ChecklistItem, 5> items;
    bool all_pass = false;
    std::vector<QtePoint> sweep;  // pgd accuracy vs intensity, for plotting
};

// The five-symptom gradient-obfuscation screen:
//   (1) the one-step attack must not beat the iterative one
//   (2) the black-box attack must not beat the white-box one
//   (3) a large-budget attack must reach near-chance accuracy
//   (4) accuracy must fall (within tolerance) as the budget grows
//   (5) random in-ball sampling must not find adversarials the gradient
//       attack misses
// `sibling` is an independently trained model of the same architecture used
// to craft the black-box samples.
ChecklistReport obfuscation_checklist(Model& model, Model& sibling, const Dataset& data,
                                      std::uint64_t seed);

}  // namespace snnlab
