#include "snnlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "snnlab/error.hpp"

namespace snnlab {

namespace {

using Impl = std::shared_ptr<TensorImpl>;

std::vector<double>& ensure_grad(const Impl& t) {
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    return t->grad;
}

bool should_record(const Tensor& a) { return Tape::active() && a.requires_grad(); }
bool should_record(const Tensor& a, const Tensor& b) {
    return Tape::active() && (a.requires_grad() || b.requires_grad());
}

// Right-aligned broadcast of two shapes.
Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// Strides of `shape` embedded in a broadcast result of rank out_rank;
// broadcast dimensions get stride 0.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, std::size_t out_rank) {
    std::vector<std::int64_t> strides(out_rank, 0);
    std::int64_t s = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const std::size_t d = shape.size() - 1 - i;
        strides[out_rank - 1 - i] = (shape[d] == 1) ? 0 : s;
        s *= shape[d];
    }
    return strides;
}

// Calls fn(out_flat, a_flat, b_flat) for every element of the broadcast
// result, walking coordinates odometer-style.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, Fn&& fn) {
    const std::size_t r = out.size();
    const std::int64_t n = shape_numel(out);
    std::vector<std::int64_t> coord(r, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        fn(i, ia, ib);
        for (std::size_t k = r; k-- > 0;) {
            ++coord[k];
            ia += sa[k];
            ib += sb[k];
            if (coord[k] < out[k]) break;
            ia -= sa[k] * out[k];
            ib -= sb[k] * out[k];
            coord[k] = 0;
        }
    }
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
    const bool same = a.shape() == b.shape();
    Shape out_shape = same ? a.shape() : broadcast_shape(a.shape(), b.shape());
    Tensor out(out_shape);
    auto ov = out.data();
    auto av = a.data();
    auto bv = b.data();

    auto apply = [kind](double x, double y) {
        switch (kind) {
            case BinKind::Add: return x + y;
            case BinKind::Sub: return x - y;
            default: return x * y;
        }
    };

    std::vector<std::int64_t> sa, sb;
    if (same) {
        for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = apply(av[i], bv[i]);
    } else {
        sa = broadcast_strides(a.shape(), out_shape.size());
        sb = broadcast_strides(b.shape(), out_shape.size());
        for_each_broadcast(out_shape, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
            ov[i] = apply(av[ia], bv[ib]);
        });
    }

    if (should_record(a, b)) {
        out.set_requires_grad(true);
        Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
        Shape os = out_shape;
        Tape::record([ai, bi, oi, os, sa, sb, kind, same]() {
            if (oi->grad.empty()) return;
            const auto& g = oi->grad;
            const bool need_a = ai->requires_grad;
            const bool need_b = bi->requires_grad;
            auto* ga = need_a ? &ensure_grad(ai) : nullptr;
            auto* gb = need_b ? &ensure_grad(bi) : nullptr;
            auto push = [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                switch (kind) {
                    case BinKind::Add:
                        if (need_a) (*ga)[ia] += g[i];
                        if (need_b) (*gb)[ib] += g[i];
                        break;
                    case BinKind::Sub:
                        if (need_a) (*ga)[ia] += g[i];
                        if (need_b) (*gb)[ib] -= g[i];
                        break;
                    case BinKind::Mul:
                        if (need_a) (*ga)[ia] += g[i] * bi->data[ib];
                        if (need_b) (*gb)[ib] += g[i] * ai->data[ia];
                        break;
                }
            };
            if (same) {
                for (std::size_t i = 0; i < g.size(); ++i)
                    push(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i),
                         static_cast<std::int64_t>(i));
            } else {
                for_each_broadcast(os, sa, sb, push);
            }
        });
    }
    return out;
}

// Elementwise unary op with pointwise derivative computed from the input.
template <typename F, typename DF>
Tensor unary_op(const Tensor& a, F&& f, DF&& df) {
    Tensor out(a.shape());
    auto ov = out.data();
    auto av = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) ov[i] = f(av[i]);
    if (should_record(a)) {
        out.set_requires_grad(true);
        Impl ai = a.impl(), oi = out.impl();
        Tape::record([ai, oi, df]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            auto& ga = ensure_grad(ai);
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += oi->grad[i] * df(ai->data[i]);
        });
    }
    return out;
}

std::vector<int> normalize_axes(const std::vector<int>& axes, int rank) {
    std::vector<int> out;
    out.reserve(axes.size());
    for (int ax : axes) {
        int a = ax < 0 ? ax + rank : ax;
        if (a < 0 || a >= rank) {
            throw ShapeError("axis " + std::to_string(ax) + " out of range for rank " +
                             std::to_string(rank));
        }
        out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Flat-index map input -> reduced output (reduced axes pinned to 0).
std::vector<std::int64_t> reduction_map(const Shape& in_shape, const std::vector<int>& axes) {
    const int r = static_cast<int>(in_shape.size());
    std::vector<bool> reduced(r, false);
    for (int a : axes) reduced[static_cast<std::size_t>(a)] = true;
    std::vector<std::int64_t> out_stride(r, 0);
    std::int64_t s = 1;
    for (int i = r - 1; i >= 0; --i) {
        if (!reduced[static_cast<std::size_t>(i)]) {
            out_stride[static_cast<std::size_t>(i)] = s;
            s *= in_shape[static_cast<std::size_t>(i)];
        }
    }
    const std::int64_t n = shape_numel(in_shape);
    std::vector<std::int64_t> map(static_cast<std::size_t>(n));
    std::vector<std::int64_t> coord(static_cast<std::size_t>(r), 0);
    std::int64_t oi = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        map[static_cast<std::size_t>(i)] = oi;
        for (int k = r; k-- > 0;) {
            auto ku = static_cast<std::size_t>(k);
            ++coord[ku];
            oi += out_stride[ku];
            if (coord[ku] < in_shape[ku]) break;
            oi -= out_stride[ku] * in_shape[ku];
            coord[ku] = 0;
        }
    }
    return map;
}

Shape reduced_shape(const Shape& in_shape, const std::vector<int>& axes, bool keepdims) {
    std::vector<bool> reduced(in_shape.size(), false);
    for (int a : axes) reduced[static_cast<std::size_t>(a)] = true;
    Shape out;
    for (std::size_t i = 0; i < in_shape.size(); ++i) {
        if (reduced[i]) {
            if (keepdims) out.push_back(1);
        } else {
            out.push_back(in_shape[i]);
        }
    }
    if (out.empty()) out.push_back(1);
    return out;
}

Tensor reduce_op(const Tensor& x, const std::vector<int>& axes_in, bool keepdims, bool take_mean) {
    const auto axes = normalize_axes(axes_in, x.rank());
    const auto map = reduction_map(x.shape(), axes);
    const Shape out_shape = reduced_shape(x.shape(), axes, keepdims);
    Tensor out(out_shape);
    auto ov = out.data();
    auto xv = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i) ov[map[static_cast<std::size_t>(i)]] += xv[i];
    const double scale = take_mean ? static_cast<double>(out.numel()) / static_cast<double>(x.numel()) : 1.0;
    if (take_mean) {
        for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] *= scale;
    }
    if (should_record(x)) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), oi = out.impl();
        Tape::record([xi, oi, map, scale]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& gx = ensure_grad(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += oi->grad[static_cast<std::size_t>(map[i])] * scale;
        });
    }
    return out;
}

struct AxisView {
    std::int64_t outer, n, inner;
};

AxisView axis_view(const Shape& shape, int axis) {
    const int r = static_cast<int>(shape.size());
    int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
    }
    AxisView v{1, shape[static_cast<std::size_t>(a)], 1};
    for (int i = 0; i < a; ++i) v.outer *= shape[static_cast<std::size_t>(i)];
    for (int i = a + 1; i < r; ++i) v.inner *= shape[static_cast<std::size_t>(i)];
    return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }

Tensor scalar_mul(const Tensor& a, double s) {
    return unary_op(a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor scalar_add(const Tensor& a, double s) {
    return unary_op(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

Tensor sign(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); },
        [](double) { return 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ContractError("clamp bounds out of order");
    return unary_op(
        a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor rsqrt(const Tensor& a, double shift) {
    for (double v : a.data()) {
        if (v + shift <= 0.0) throw DomainError("rsqrt argument not positive");
    }
    return unary_op(
        a, [shift](double x) { return 1.0 / std::sqrt(x + shift); },
        [shift](double x) {
            const double y = 1.0 / std::sqrt(x + shift);
            return -0.5 * y * y * y;
        });
}

Tensor softmax(const Tensor& x, int axis) {
    const AxisView v = axis_view(x.shape(), axis);
    Tensor out(x.shape());
    auto ov = out.data();
    auto xv = x.data();
    for (std::int64_t o = 0; o < v.outer; ++o) {
        for (std::int64_t in = 0; in < v.inner; ++in) {
            const std::int64_t base = o * v.n * v.inner + in;
            double m = xv[base];
            for (std::int64_t j = 1; j < v.n; ++j) m = std::max(m, xv[base + j * v.inner]);
            double z = 0.0;
            for (std::int64_t j = 0; j < v.n; ++j) {
                const double e = std::exp(xv[base + j * v.inner] - m);
                ov[base + j * v.inner] = e;
                z += e;
            }
            for (std::int64_t j = 0; j < v.n; ++j) ov[base + j * v.inner] /= z;
        }
    }
    if (should_record(x)) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), oi = out.impl();
        Tape::record([xi, oi, v]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& gx = ensure_grad(xi);
            const auto& g = oi->grad;
            const auto& s = oi->data;
            for (std::int64_t o = 0; o < v.outer; ++o) {
                for (std::int64_t in = 0; in < v.inner; ++in) {
                    const std::int64_t base = o * v.n * v.inner + in;
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < v.n; ++j) {
                        const auto k = static_cast<std::size_t>(base + j * v.inner);
                        dot += g[k] * s[k];
                    }
                    for (std::int64_t j = 0; j < v.n; ++j) {
                        const auto k = static_cast<std::size_t>(base + j * v.inner);
                        gx[k] += s[k] * (g[k] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor log_softmax(const Tensor& x, int axis) {
    const AxisView v = axis_view(x.shape(), axis);
    Tensor out(x.shape());
    auto ov = out.data();
    auto xv = x.data();
    for (std::int64_t o = 0; o < v.outer; ++o) {
        for (std::int64_t in = 0; in < v.inner; ++in) {
            const std::int64_t base = o * v.n * v.inner + in;
            double m = xv[base];
            for (std::int64_t j = 1; j < v.n; ++j) m = std::max(m, xv[base + j * v.inner]);
            double z = 0.0;
            for (std::int64_t j = 0; j < v.n; ++j) z += std::exp(xv[base + j * v.inner] - m);
            const double lse = m + std::log(z);
            for (std::int64_t j = 0; j < v.n; ++j) ov[base + j * v.inner] = xv[base + j * v.inner] - lse;
        }
    }
    if (should_record(x)) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), oi = out.impl();
        Tape::record([xi, oi, v]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& gx = ensure_grad(xi);
            const auto& g = oi->grad;
            const auto& ls = oi->data;
            for (std::int64_t o = 0; o < v.outer; ++o) {
                for (std::int64_t in = 0; in < v.inner; ++in) {
                    const std::int64_t base = o * v.n * v.inner + in;
                    double gsum = 0.0;
                    for (std::int64_t j = 0; j < v.n; ++j) gsum += g[static_cast<std::size_t>(base + j * v.inner)];
                    for (std::int64_t j = 0; j < v.n; ++j) {
                        const auto k = static_cast<std::size_t>(base + j * v.inner);
                        gx[k] += g[k] - std::exp(ls[k]) * gsum;
                    }
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdims) {
    return reduce_op(x, axes, keepdims, false);
}

Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdims) {
    return reduce_op(x, axes, keepdims, true);
}

Tensor sum_all(const Tensor& x) {
    std::vector<int> axes(static_cast<std::size_t>(x.rank()));
    for (int i = 0; i < x.rank(); ++i) axes[static_cast<std::size_t>(i)] = i;
    return reduce_op(x, axes, false, false);
}

Tensor mean_all(const Tensor& x) {
    std::vector<int> axes(static_cast<std::size_t>(x.rank()));
    for (int i = 0; i < x.rank(); ++i) axes[static_cast<std::size_t>(i)] = i;
    return reduce_op(x, axes, false, true);
}

Tensor kl_divergence(const Tensor& p_log, const Tensor& q) {
    if (p_log.shape() != q.shape() || p_log.rank() != 2) {
        throw ShapeError("kl_divergence expects matching [N,k] inputs, got " +
                         shape_str(p_log.shape()) + " and " + shape_str(q.shape()));
    }
    const std::int64_t n = p_log.dim(0);
    auto pv = p_log.data();
    auto qv = q.data();
    double total = 0.0;
    for (std::int64_t i = 0; i < q.numel(); ++i) {
        if (qv[i] < 0.0) throw DomainError("kl_divergence: q has a negative entry");
        if (qv[i] > 0.0) total += qv[i] * (std::log(qv[i]) - pv[i]);
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    if (should_record(p_log, q)) {
        out.set_requires_grad(true);
        Impl pi = p_log.impl(), qi = q.impl(), oi = out.impl();
        const double inv_n = 1.0 / static_cast<double>(n);
        Tape::record([pi, qi, oi, inv_n]() {
            if (oi->grad.empty()) return;
            const double g = oi->grad[0];
            if (pi->requires_grad) {
                auto& gp = ensure_grad(pi);
                for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += -g * inv_n * qi->data[i];
            }
            if (qi->requires_grad) {
                auto& gq = ensure_grad(qi);
                for (std::size_t i = 0; i < gq.size(); ++i) {
                    if (qi->data[i] > 0.0)
                        gq[i] += g * inv_n * (std::log(qi->data[i]) - pi->data[i] + 1.0);
                }
            }
        });
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy expects [N,k] logits, got " + shape_str(logits.shape()));
    }
    const std::int64_t n = logits.dim(0);
    const std::int64_t k = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n) {
        throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(n) + " rows");
    }
    auto xv = logits.data();
    std::vector<double> probs(static_cast<std::size_t>(n * k));
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= k) throw ContractError("label " + std::to_string(y) + " out of range [0," + std::to_string(k) + ")");
        const std::int64_t base = i * k;
        double m = xv[base];
        for (std::int64_t j = 1; j < k; ++j) m = std::max(m, xv[base + j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            const double e = std::exp(xv[base + j] - m);
            probs[static_cast<std::size_t>(base + j)] = e;
            z += e;
        }
        for (std::int64_t j = 0; j < k; ++j) probs[static_cast<std::size_t>(base + j)] /= z;
        total += m + std::log(z) - xv[base + y];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    if (should_record(logits)) {
        out.set_requires_grad(true);
        Impl xi = logits.impl(), oi = out.impl();
        const double inv_n = 1.0 / static_cast<double>(n);
        Tape::record([xi, oi, probs = std::move(probs), labels, n, k, inv_n]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            const double g = oi->grad[0];
            auto& gx = ensure_grad(xi);
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t base = i * k;
                for (std::int64_t j = 0; j < k; ++j) {
                    double d = probs[static_cast<std::size_t>(base + j)];
                    if (j == labels[static_cast<std::size_t>(i)]) d -= 1.0;
                    gx[static_cast<std::size_t>(base + j)] += g * inv_n * d;
                }
            }
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::int64_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    auto ov = out.data();
    auto av = a.data();
    auto bv = b.data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < kk; ++p) {
            const double aip = av[i * kk + p];
            for (std::int64_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
        }
    if (should_record(a, b)) {
        out.set_requires_grad(true);
        Impl ai = a.impl(), bi = b.impl(), oi = out.impl();
        Tape::record([ai, bi, oi, m, kk, n]() {
            if (oi->grad.empty()) return;
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                auto& ga = ensure_grad(ai);
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < n; ++j) {
                        const double gij = g[static_cast<std::size_t>(i * n + j)];
                        for (std::int64_t p = 0; p < kk; ++p)
                            ga[static_cast<std::size_t>(i * kk + p)] += gij * bi->data[static_cast<std::size_t>(p * n + j)];
                    }
            }
            if (bi->requires_grad) {
                auto& gb = ensure_grad(bi);
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < n; ++j) {
                        const double gij = g[static_cast<std::size_t>(i * n + j)];
                        for (std::int64_t p = 0; p < kk; ++p)
                            gb[static_cast<std::size_t>(p * n + j)] += gij * ai->data[static_cast<std::size_t>(i * kk + p)];
                    }
            }
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (W.rank() != 2) throw ShapeError("linear weight must be [out,in], got " + shape_str(W.shape()));
    const std::int64_t out_f = W.dim(0), in_f = W.dim(1);
    const bool batched = x.rank() == 2;
    if ((batched ? x.dim(1) : x.dim(0)) != in_f || x.rank() > 2) {
        throw ShapeError("linear input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(W.shape()));
    }
    if (b.defined() && (b.rank() != 1 || b.dim(0) != out_f)) {
        throw ShapeError("linear bias " + shape_str(b.shape()) + " does not match weight " +
                         shape_str(W.shape()));
    }
    const std::int64_t n = batched ? x.dim(0) : 1;
    Tensor out(batched ? Shape{n, out_f} : Shape{out_f});
    auto ov = out.data();
    auto xv = x.data();
    auto wv = W.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t o = 0; o < out_f; ++o) {
            double acc = b.defined() ? b.data()[o] : 0.0;
            for (std::int64_t j = 0; j < in_f; ++j) acc += xv[i * in_f + j] * wv[o * in_f + j];
            ov[i * out_f + o] = acc;
        }
    const bool rec = Tape::active() &&
                     (x.requires_grad() || W.requires_grad() || (b.defined() && b.requires_grad()));
    if (rec) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), wi = W.impl(), oi = out.impl();
        Impl bi = b.defined() ? b.impl() : nullptr;
        Tape::record([xi, wi, bi, oi, n, in_f, out_f]() {
            if (oi->grad.empty()) return;
            const auto& g = oi->grad;
            if (xi->requires_grad) {
                auto& gx = ensure_grad(xi);
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t o = 0; o < out_f; ++o) {
                        const double go = g[static_cast<std::size_t>(i * out_f + o)];
                        for (std::int64_t j = 0; j < in_f; ++j)
                            gx[static_cast<std::size_t>(i * in_f + j)] += go * wi->data[static_cast<std::size_t>(o * in_f + j)];
                    }
            }
            if (wi->requires_grad) {
                auto& gw = ensure_grad(wi);
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t o = 0; o < out_f; ++o) {
                        const double go = g[static_cast<std::size_t>(i * out_f + o)];
                        for (std::int64_t j = 0; j < in_f; ++j)
                            gw[static_cast<std::size_t>(o * in_f + j)] += go * xi->data[static_cast<std::size_t>(i * in_f + j)];
                    }
            }
            if (bi && bi->requires_grad) {
                auto& gb = ensure_grad(bi);
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t o = 0; o < out_f; ++o)
                        gb[static_cast<std::size_t>(o)] += g[static_cast<std::size_t>(i * out_f + o)];
            }
        });
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
    if (x.rank() != 4 || kernel.rank() != 4) {
        throw ShapeError("conv2d expects x [N,C,H,W] and kernel [O,C,kh,kw], got " +
                         shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
    }
    if (stride < 1) throw ContractError("conv2d stride must be >= 1");
    if (padding < 0) throw ContractError("conv2d padding must be >= 0");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t O = kernel.dim(0), KC = kernel.dim(1), KH = kernel.dim(2), KW = kernel.dim(3);
    if (C != KC) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) + " vs kernel " +
                         shape_str(kernel.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != O)) {
        throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match kernel " +
                         shape_str(kernel.shape()));
    }
    const std::int64_t OH = (H + 2 * padding - KH) / stride + 1;
    const std::int64_t OW = (W + 2 * padding - KW) / stride + 1;
    if (H + 2 * padding < KH || W + 2 * padding < KW || OH <= 0 || OW <= 0) {
        throw ShapeError("conv2d produces non-positive output size for input " + shape_str(x.shape()) +
                         " with kernel " + shape_str(kernel.shape()));
    }
    Tensor out({N, O, OH, OW});
    auto ov = out.data();
    auto xv = x.data();
    auto kv = kernel.data();
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < O; ++o)
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    double acc = bias.defined() ? bias.data()[o] : 0.0;
                    for (std::int64_t c = 0; c < C; ++c)
                        for (std::int64_t i = 0; i < KH; ++i) {
                            const std::int64_t ih = oh * stride - padding + i;
                            if (ih < 0 || ih >= H) continue;
                            for (std::int64_t j = 0; j < KW; ++j) {
                                const std::int64_t iw = ow * stride - padding + j;
                                if (iw < 0 || iw >= W) continue;
                                acc += xv[((n * C + c) * H + ih) * W + iw] *
                                       kv[((o * C + c) * KH + i) * KW + j];
                            }
                        }
                    ov[((n * O + o) * OH + oh) * OW + ow] = acc;
                }
    const bool rec = Tape::active() && (x.requires_grad() || kernel.requires_grad() ||
                                        (bias.defined() && bias.requires_grad()));
    if (rec) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), ki = kernel.impl(), oi = out.impl();
        Impl bi = bias.defined() ? bias.impl() : nullptr;
        Tape::record([xi, ki, bi, oi, N, C, H, W, O, KH, KW, OH, OW, stride, padding]() {
            if (oi->grad.empty()) return;
            const auto& g = oi->grad;
            const bool nx = xi->requires_grad, nk = ki->requires_grad;
            const bool nb = bi && bi->requires_grad;
            auto* gx = nx ? &ensure_grad(xi) : nullptr;
            auto* gk = nk ? &ensure_grad(ki) : nullptr;
            auto* gb = nb ? &ensure_grad(bi) : nullptr;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t o = 0; o < O; ++o)
                    for (std::int64_t oh = 0; oh < OH; ++oh)
                        for (std::int64_t ow = 0; ow < OW; ++ow) {
                            const double go = g[static_cast<std::size_t>(((n * O + o) * OH + oh) * OW + ow)];
                            if (go == 0.0) continue;
                            if (nb) (*gb)[static_cast<std::size_t>(o)] += go;
                            if (!nx && !nk) continue;
                            for (std::int64_t c = 0; c < C; ++c)
                                for (std::int64_t i = 0; i < KH; ++i) {
                                    const std::int64_t ih = oh * stride - padding + i;
                                    if (ih < 0 || ih >= H) continue;
                                    for (std::int64_t j = 0; j < KW; ++j) {
                                        const std::int64_t iw = ow * stride - padding + j;
                                        if (iw < 0 || iw >= W) continue;
                                        const auto xidx = static_cast<std::size_t>(((n * C + c) * H + ih) * W + iw);
                                        const auto kidx = static_cast<std::size_t>(((o * C + c) * KH + i) * KW + j);
                                        if (nx) (*gx)[xidx] += go * ki->data[kidx];
                                        if (nk) (*gk)[kidx] += go * xi->data[xidx];
                                    }
                                }
                        }
        });
    }
    return out;
}

Tensor avgpool2d(const Tensor& x, int k, int stride) {
    if (x.rank() != 4) throw ShapeError("avgpool2d expects [N,C,H,W], got " + shape_str(x.shape()));
    if (k < 1 || stride < 1) throw ContractError("avgpool2d window and stride must be >= 1");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t OH = (H - k) / stride + 1;
    const std::int64_t OW = (W - k) / stride + 1;
    if (H < k || W < k) throw ShapeError("avgpool2d window larger than input " + shape_str(x.shape()));
    Tensor out({N, C, OH, OW});
    auto ov = out.data();
    auto xv = x.data();
    const double inv = 1.0 / static_cast<double>(k * k);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    double acc = 0.0;
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j)
                            acc += xv[((n * C + c) * H + oh * stride + i) * W + ow * stride + j];
                    ov[((n * C + c) * OH + oh) * OW + ow] = acc * inv;
                }
    if (should_record(x)) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), oi = out.impl();
        Tape::record([xi, oi, N, C, H, W, OH, OW, k, stride, inv]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& gx = ensure_grad(xi);
            const auto& g = oi->grad;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t c = 0; c < C; ++c)
                    for (std::int64_t oh = 0; oh < OH; ++oh)
                        for (std::int64_t ow = 0; ow < OW; ++ow) {
                            const double go = g[static_cast<std::size_t>(((n * C + c) * OH + oh) * OW + ow)] * inv;
                            for (int i = 0; i < k; ++i)
                                for (int j = 0; j < k; ++j)
                                    gx[static_cast<std::size_t>(((n * C + c) * H + oh * stride + i) * W + ow * stride + j)] += go;
                        }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
    if (should_record(x)) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), oi = out.impl();
        Tape::record([xi, oi]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& gx = ensure_grad(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor select_time(const Tensor& seq, std::int64_t t) {
    if (seq.rank() < 2) throw ShapeError("select_time expects rank >= 2, got " + shape_str(seq.shape()));
    const std::int64_t T = seq.dim(0);
    if (t < 0 || t >= T) throw ContractError("timestep " + std::to_string(t) + " out of range [0," + std::to_string(T) + ")");
    Shape fs(seq.shape().begin() + 1, seq.shape().end());
    const std::int64_t fn = shape_numel(fs);
    Tensor out(fs, std::vector<double>(seq.data().begin() + t * fn, seq.data().begin() + (t + 1) * fn));
    if (should_record(seq)) {
        out.set_requires_grad(true);
        Impl si = seq.impl(), oi = out.impl();
        Tape::record([si, oi, t, fn]() {
            if (oi->grad.empty() || !si->requires_grad) return;
            auto& gs = ensure_grad(si);
            for (std::int64_t i = 0; i < fn; ++i) gs[static_cast<std::size_t>(t * fn + i)] += oi->grad[static_cast<std::size_t>(i)];
        });
    }
    return out;
}

Tensor stack_time(const std::vector<Tensor>& frames) {
    if (frames.empty()) throw ContractError("stack_time needs at least one frame");
    const Shape fs = frames[0].shape();
    for (const auto& f : frames) {
        if (f.shape() != fs) throw ShapeError("stack_time frames disagree: " + shape_str(fs) + " vs " + shape_str(f.shape()));
    }
    const std::int64_t T = static_cast<std::int64_t>(frames.size());
    const std::int64_t fn = shape_numel(fs);
    Shape os;
    os.push_back(T);
    os.insert(os.end(), fs.begin(), fs.end());
    Tensor out(os);
    auto ov = out.data();
    bool any_grad = false;
    for (std::int64_t t = 0; t < T; ++t) {
        auto fv = frames[static_cast<std::size_t>(t)].data();
        std::copy(fv.begin(), fv.end(), ov.begin() + t * fn);
        any_grad = any_grad || frames[static_cast<std::size_t>(t)].requires_grad();
    }
    if (Tape::active() && any_grad) {
        out.set_requires_grad(true);
        std::vector<Impl> fis;
        fis.reserve(frames.size());
        for (const auto& f : frames) fis.push_back(f.impl());
        Impl oi = out.impl();
        Tape::record([fis, oi, fn]() {
            if (oi->grad.empty()) return;
            for (std::size_t t = 0; t < fis.size(); ++t) {
                if (!fis[t]->requires_grad) continue;
                auto& gf = ensure_grad(fis[t]);
                for (std::int64_t i = 0; i < fn; ++i)
                    gf[static_cast<std::size_t>(i)] += oi->grad[t * static_cast<std::size_t>(fn) + static_cast<std::size_t>(i)];
            }
        });
    }
    return out;
}

Tensor repeat_time(const Tensor& x, std::int64_t T) {
    if (T < 1) throw ContractError("repeat_time needs T >= 1");
    Shape os;
    os.push_back(T);
    os.insert(os.end(), x.shape().begin(), x.shape().end());
    Tensor out(os);
    auto ov = out.data();
    auto xv = x.data();
    const std::int64_t fn = x.numel();
    for (std::int64_t t = 0; t < T; ++t) std::copy(xv.begin(), xv.end(), ov.begin() + t * fn);
    if (should_record(x)) {
        out.set_requires_grad(true);
        Impl xi = x.impl(), oi = out.impl();
        Tape::record([xi, oi, T, fn]() {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& gx = ensure_grad(xi);
            for (std::int64_t t = 0; t < T; ++t)
                for (std::int64_t i = 0; i < fn; ++i)
                    gx[static_cast<std::size_t>(i)] += oi->grad[static_cast<std::size_t>(t * fn + i)];
        });
    }
    return out;
}

double surrogate_gradient(double v, double gamma) {
    return std::max(gamma - std::abs(v), 0.0) / (gamma * gamma);
}

namespace {

Tensor spike_impl(const Tensor& u, double theta, double gamma, bool soft) {
    if (gamma <= 0.0) throw ContractError("surrogate width gamma must be positive");
    Tensor out(u.shape());
    auto ov = out.data();
    auto uv = u.data();
    for (std::int64_t i = 0; i < u.numel(); ++i) {
        const double v = uv[i] - theta;
        if (!soft) {
            ov[i] = v >= 0.0 ? 1.0 : 0.0;
        } else if (v <= -gamma) {
            ov[i] = 0.0;
        } else if (v < 0.0) {
            ov[i] = (v + gamma) * (v + gamma) / (2.0 * gamma * gamma);
        } else if (v < gamma) {
            ov[i] = 1.0 - (gamma - v) * (gamma - v) / (2.0 * gamma * gamma);
        } else {
            ov[i] = 1.0;
        }
    }
    if (should_record(u)) {
        out.set_requires_grad(true);
        Impl ui = u.impl(), oi = out.impl();
        Tape::record([ui, oi, theta, gamma]() {
            if (oi->grad.empty() || !ui->requires_grad) return;
            auto& gu = ensure_grad(ui);
            for (std::size_t i = 0; i < gu.size(); ++i)
                gu[i] += oi->grad[i] * surrogate_gradient(ui->data[i] - theta, gamma);
        });
    }
    return out;
}

}  // namespace

Tensor spike(const Tensor& u, double theta, double gamma) { return spike_impl(u, theta, gamma, false); }

Tensor spike_soft(const Tensor& u, double theta, double gamma) { return spike_impl(u, theta, gamma, true); }

std::vector<int> argmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("argmax_rows expects [N,k], got " + shape_str(logits.shape()));
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    auto v = logits.data();
    std::vector<int> out(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        int best = 0;
        for (std::int64_t j = 1; j < k; ++j)
            if (v[i * k + j] > v[i * k + best]) best = static_cast<int>(j);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

bool all_finite(const Tensor& x) {
    for (double v : x.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace snnlab
