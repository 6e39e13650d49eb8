#include "snnlab/losses.hpp"

#include "snnlab/error.hpp"
#include "snnlab/network.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

Tensor loss_presynaptic(const Tensor& per_timestep_logits, const std::vector<int>& labels) {
    if (per_timestep_logits.rank() != 3)
        throw ShapeError("expected [T,N,k] logits, got " + shape_str(per_timestep_logits.shape()));
    const std::int64_t T = per_timestep_logits.dim(0);
    Tensor acc;
    for (std::int64_t t = 0; t < T; ++t) {
        Tensor ce = cross_entropy(select_time(per_timestep_logits, t), labels);
        acc = t == 0 ? ce : add(acc, ce);
    }
    return scalar_mul(acc, 1.0 / static_cast<double>(T));
}

Tensor loss_kd(const Tensor& student_logits, const Tensor& teacher_logits) {
    if (student_logits.shape() != teacher_logits.shape())
        throw ShapeError("student logits " + shape_str(student_logits.shape()) +
                         " do not match teacher logits " + shape_str(teacher_logits.shape()));
    return kl_divergence(log_softmax(student_logits, 1), softmax(teacher_logits.detach(), 1));
}

Tensor loss_ersct(const Tensor& student_per_timestep_logits, const Tensor& teacher_logits,
                  const std::vector<int>& labels, double lambda_kd) {
    if (lambda_kd < 0.0) throw ContractError("lambda_kd must be >= 0");
    Tensor kd = loss_kd(time_mean_logits(student_per_timestep_logits), teacher_logits);
    return add(scalar_mul(kd, lambda_kd), loss_presynaptic(student_per_timestep_logits, labels));
}

}  // namespace snnlab
