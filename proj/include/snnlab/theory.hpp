#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snnlab/coding.hpp"
#include "snnlab/tensor.hpp"

namespace snnlab::theory {

// Small dense matrix for the covariance work (dimensions stay <= 8).
struct Matrix {
    std::int64_t rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), v(static_cast<std::size_t>(r * c), 0.0) {}
    double& at(std::int64_t i, std::int64_t j) { return v[static_cast<std::size_t>(i * cols + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return v[static_cast<std::size_t>(i * cols + j)]; }
    static Matrix identity(std::int64_t n);
};

enum class Regime { poisson_clean, poisson_attacked, rsc_clean, rsc_attacked };

struct CovariancePrediction {
    std::vector<double> mean;  // E[Y]
    Matrix cov;                // Sigma_Y, symmetric by construction
    Regime regime;
};

// Closed-form output moments of Bernoulli-coded input through a linear map.
//   clean:    mean W x,       cov W diag(x(1-x)) W^T
//   attacked: mean W (x+eps), cov W diag(x(1-x) + eps(1-2x) - eps^2) W^T
// Requires x and x+eps inside [0,1] (otherwise the Bernoulli probability is
// invalid).
CovariancePrediction predict_poisson_cov(std::span<const double> x, std::span<const double> eps,
                                         const Matrix& W, bool attacked);

// Gaussian-coded input through a linear map: cov W diag(sigma2) W^T in both
// regimes; mean shifts with the perturbation but the covariance does not.
CovariancePrediction predict_rsc_cov(std::span<const double> sigma2, const Matrix& W,
                                     bool attacked, std::span<const double> x = {},
                                     std::span<const double> eps = {});

enum class SamplerKind { poisson, rsc_unclamped, rsc_clamped };

struct EmpiricalMoments {
    std::vector<double> mean;
    std::vector<double> mean_se;
    Matrix cov;     // unbiased, from the pooled samples
    Matrix cov_se;  // per-entry standard error from the sub-batch spread
    std::int64_t n_samples = 0;
};

// Draws n samples of coded(x + eps), maps them through W and returns sample
// mean and unbiased covariance. Standard errors come from splitting the run
// into n_batches equal sub-samples; accumulation is sum-based, so the result
// is independent of batch order. The rsc samplers draw raw Gaussians
// (`rsc_unclamped` is the one the theorems describe; `rsc_clamped` exists
// for the boundary-distortion diagnostic).
EmpiricalMoments empirical_cov(SamplerKind kind, std::span<const double> x,
                               std::span<const double> eps, std::span<const double> sigma2,
                               const Matrix& W, std::int64_t n_samples, std::uint64_t seed,
                               int n_batches = 20);

struct EquivalenceReport {
    std::vector<double> per_sample_cs;  // cosine similarity of counted samples
    double avg_cs = 0.0;
    int counted = 0;
    int skipped = 0;  // zero-norm flattened means, reported separately
    std::string scheme_a, scheme_b;
    int T_a = 0, T_b = 0;
    double sigma2 = 0.0;
};

// For each image: encode under both schemes, average the frames over time,
// flatten, and take the cosine similarity of the two vectors. Images:
// [N, dims...] in [0,1].
EquivalenceReport equivalence_study(const Tensor& images, CodingScheme scheme_a, int T_a,
                                    CodingScheme scheme_b, int T_b, double sigma2,
                                    std::uint64_t seed);

struct TheoremCheckConfig {
    int trials = 20;
    std::int64_t n_samples = 1'000'000;
    int n_batches = 20;
    int max_dim = 8;
    double tolerance_se = 5.0;  // pass when |deviation| <= tolerance_se * SE
    std::uint64_t seed = 1;
};

struct TheoremCheckEntry {
    std::string check;    // which statement the row verifies
    int trial = 0;
    int dim = 0;
    double max_abs_dev = 0.0;  // worst entrywise |empirical - reference|
    double worst_ratio = 0.0;  // worst |deviation| / (tolerance_se * SE)
    bool informational = false;
    bool pass = true;
};

struct TheoremReport {
    std::vector<TheoremCheckEntry> entries;
    TheoremCheckConfig config;
    bool all_pass = true;
};

// Monte-Carlo verification driver:
//   - Bernoulli output covariance, clean and attacked, vs the closed forms
//   - Gaussian output covariance invariance between clean and attacked runs
//   - Bernoulli attacked-vs-clean covariance gap resolvable at 5 SE whenever
//     every per-coordinate gap |eps(1-2x) - eps^2| >= 0.05
//   - output means in both regimes
//   - informational rows quantifying how much the [0,1] clamp distorts the
//     Gaussian covariance near the domain boundary
TheoremReport run_theorem_checks(const TheoremCheckConfig& cfg);

}  // namespace snnlab::theory
