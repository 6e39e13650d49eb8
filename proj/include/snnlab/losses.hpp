#pragma once

#include <vector>

#include "snnlab/tensor.hpp"

namespace snnlab {

// Per-timestep cross-entropy averaged over time: (1/T) sum_t CE(logits[t], y).
// Degenerates to plain cross-entropy at T = 1.
Tensor loss_presynaptic(const Tensor& per_timestep_logits, const std::vector<int>& labels);

// Distillation term: KL(softmax(teacher) || softmax(student)), batch-averaged,
// computed through log-softmax. The teacher is the target distribution.
Tensor loss_kd(const Tensor& student_logits, const Tensor& teacher_logits);

// Combined objective: lambda_kd * loss_kd + loss_presynaptic. The student's
// time-mean logits feed the distillation term, matching the readout used at
// evaluation time.
Tensor loss_ersct(const Tensor& student_per_timestep_logits, const Tensor& teacher_logits,
                  const std::vector<int>& labels, double lambda_kd);

}  // namespace snnlab
