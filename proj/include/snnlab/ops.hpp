#pragma once

#include <vector>

#include "snnlab/tensor.hpp"

namespace snnlab {

// Elementwise binary ops with NumPy-style (right-aligned) broadcasting.
// Gradients of broadcast operands are reduce-summed back to their shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scalar_mul(const Tensor& a, double s);
Tensor scalar_add(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// sign(0) = 0.
Tensor sign(const Tensor& a);
// Gradient is 1 strictly inside (lo, hi) and 0 outside, boundary included.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor relu(const Tensor& a);
// 1 / sqrt(x + shift); shift folds the usual variance epsilon into the op.
Tensor rsqrt(const Tensor& a, double shift = 0.0);

Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);

Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdims = false);
Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdims = false);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Batch-averaged KL(q || exp(p_log)): (1/N) sum_n sum_j q[n,j] * (log q[n,j] - p_log[n,j]).
// Rows are samples; q rows must be probability vectors. Terms with q == 0
// contribute zero.
Tensor kl_divergence(const Tensor& p_log, const Tensor& q);

// Mean over the batch of -log softmax(logits)[label]. logits: [N,k].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]

// y = x W^T + b. x: [N,in] or [in]; W: [out,in]; b: [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

// Cross-correlation. x: [N,C,H,W]; kernel: [O,C,kh,kw]; bias: [O] or
// undefined. Output spatial size floor((H + 2*padding - kh)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

Tensor avgpool2d(const Tensor& x, int k, int stride);

Tensor reshape(const Tensor& x, Shape shape);

// seq: [T, ...] -> frame t of shape [...].
Tensor select_time(const Tensor& seq, std::int64_t t);
// frames (equal shapes) -> [T, ...].
Tensor stack_time(const std::vector<Tensor>& frames);
// x -> [T, x...], every frame equal to x; gradient sums over frames.
Tensor repeat_time(const Tensor& x, std::int64_t T);

// Surrogate derivative used in place of the step function's on the backward
// pass: (1/gamma^2) * max(gamma - |v|, 0). Peak 1/gamma at v = 0, support
// |v| < gamma, unit integral for any gamma.
double surrogate_gradient(double v, double gamma);

// Spike nonlinearity: forward is the Heaviside step of (u - theta) with
// step(0) = 1; backward substitutes surrogate_gradient(u - theta, gamma).
Tensor spike(const Tensor& u, double theta, double gamma);

// Smooth twin of spike(): forward is the antiderivative of the surrogate
// (a piecewise-quadratic ramp from 0 to 1), so its exact derivative equals
// the surrogate used on the backward pass. Exists so gradient plumbing can
// be checked against finite differences end to end.
Tensor spike_soft(const Tensor& u, double theta, double gamma);

// No-grad helpers.
std::vector<int> argmax_rows(const Tensor& logits);  // [N,k] -> N indices
bool all_finite(const Tensor& x);

}  // namespace snnlab
