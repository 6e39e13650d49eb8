#include <doctest.h>

#include <cmath>

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"
#include "snnlab/tensor.hpp"
#include "support.hpp"

using namespace snnlab;
using testsupport::finite_diff_grad;
using testsupport::random_tensor;
using testsupport::rel_err;

namespace {

// Naive cross-correlation reference, written input-centric (scatters each
// input pixel into every output it touches) so it shares no structure with
// the library's output-centric loops.
Tensor conv2d_reference(const Tensor& x, const Tensor& k, int stride, int padding) {
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto O = k.dim(0), KH = k.dim(2), KW = k.dim(3);
    const auto OH = (H + 2 * padding - KH) / stride + 1;
    const auto OW = (W + 2 * padding - KW) / stride + 1;
    Tensor out({N, O, OH, OW});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t ih = 0; ih < H; ++ih)
                for (std::int64_t iw = 0; iw < W; ++iw) {
                    const double xv = x[((n * C + c) * H + ih) * W + iw];
                    for (std::int64_t o = 0; o < O; ++o)
                        for (std::int64_t i = 0; i < KH; ++i)
                            for (std::int64_t j = 0; j < KW; ++j) {
                                const std::int64_t num_h = ih + padding - i;
                                const std::int64_t num_w = iw + padding - j;
                                if (num_h < 0 || num_w < 0) continue;
                                if (num_h % stride || num_w % stride) continue;
                                const std::int64_t oh = num_h / stride;
                                const std::int64_t ow = num_w / stride;
                                if (oh >= OH || ow >= OW) continue;
                                out[((n * O + o) * OH + oh) * OW + ow] +=
                                    xv * k[((o * C + c) * KH + i) * KW + j];
                            }
                }
    return out;
}

}  // namespace

TEST_CASE("linear identity and scalar affine") {
    Tensor x({2}, {1.0, 2.0});
    Tensor W({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor b({2}, {0.0, 0.0});
    auto y = linear(x, W, b);
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 2.0);

    Tensor x2({1}, {0.5});
    Tensor W2({1, 1}, {2.0});
    Tensor b2({1}, {1.0});
    CHECK(linear(x2, W2, b2).item() == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("linear gradient equals column sums of W and matches finite differences") {
    rng::Stream st(7);
    Tensor x = random_tensor({3}, st, -1.0, 1.0, true);
    Tensor W = random_tensor({4, 3}, st, -1.0, 1.0);
    Tensor b = random_tensor({4}, st, -1.0, 1.0);

    Tape tape;
    auto loss = sum_all(linear(x, W, b));
    tape.backward(loss);

    for (int j = 0; j < 3; ++j) {
        double col = 0.0;
        for (int o = 0; o < 4; ++o) col += W[o * 3 + j];
        CHECK(x.grad()[static_cast<std::size_t>(j)] == doctest::Approx(col).epsilon(1e-12));
    }

    auto fd = finite_diff_grad(x, [&]() { return sum_all(linear(x, W, b)).item(); });
    CHECK(rel_err(x.grad(), fd) < 1e-4);
}

TEST_CASE("linear shape mismatch names both shapes") {
    Tensor x({3}, {1, 2, 3});
    Tensor W({2, 2}, {1, 0, 0, 1});
    try {
        linear(x, W, Tensor{});
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("conv2d all-ones sum and identity kernel") {
    Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
    auto y = conv2d(x, k, Tensor{}, 1, 0);
    CHECK(y.numel() == 1);
    CHECK(y.item() == doctest::Approx(9.0));

    rng::Stream st(3);
    Tensor xr = random_tensor({2, 1, 4, 4}, st, 0.0, 1.0);
    Tensor delta({1, 1, 3, 3});
    delta[4] = 1.0;  // center tap
    auto same = conv2d(xr, delta, Tensor{}, 1, 1);
    REQUIRE(same.shape() == xr.shape());
    for (std::int64_t i = 0; i < xr.numel(); ++i) CHECK(same[i] == doctest::Approx(xr[i]).epsilon(1e-15));
}

TEST_CASE("conv2d matches naive reference on random input") {
    rng::Stream st(11);
    Tensor x = random_tensor({1, 2, 5, 5}, st);
    Tensor k = random_tensor({3, 2, 3, 3}, st);
    for (int stride : {1, 2}) {
        for (int padding : {0, 1, 2}) {
            auto got = conv2d(x, k, Tensor{}, stride, padding);
            auto want = conv2d_reference(x, k, stride, padding);
            REQUIRE(got.shape() == want.shape());
            for (std::int64_t i = 0; i < got.numel(); ++i)
                CHECK(std::abs(got[i] - want[i]) < 1e-10);
        }
    }
}

TEST_CASE("conv2d output shape follows the closed-form size formula") {
    rng::Stream st(5);
    for (int H : {5, 7, 9}) {
        for (int kh : {1, 3, 5}) {
            for (int stride : {1, 2, 3}) {
                for (int padding : {0, 1, 2}) {
                    if (H + 2 * padding < kh) continue;
                    Tensor x = random_tensor({1, 1, H, H}, st);
                    Tensor k = random_tensor({2, 1, kh, kh}, st);
                    auto y = conv2d(x, k, Tensor{}, stride, padding);
                    const auto expect = (H + 2 * padding - kh) / stride + 1;
                    CHECK(y.dim(2) == expect);
                    CHECK(y.dim(3) == expect);
                }
            }
        }
    }
}

TEST_CASE("conv2d rejects channel mismatch and vanishing output") {
    Tensor x({1, 2, 4, 4});
    Tensor k({1, 3, 3, 3});
    CHECK_THROWS_AS(conv2d(x, k, Tensor{}, 1, 0), ShapeError);
    Tensor k2({1, 2, 6, 6});
    CHECK_THROWS_AS(conv2d(x, k2, Tensor{}, 1, 0), ShapeError);
}

TEST_CASE("backward of x*x and clamp") {
    Tensor x = Tensor::scalar(3.0, true);
    {
        Tape tape;
        auto loss = mul(x, x);
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
    }
    Tensor v({3}, {-1.0, 0.5, 2.0}, true);
    {
        Tape tape;
        auto loss = sum_all(clamp(v, 0.0, 1.0));
        tape.backward(loss);
        CHECK(v.grad()[0] == 0.0);
        CHECK(v.grad()[1] == 1.0);
        CHECK(v.grad()[2] == 0.0);
    }
}

TEST_CASE("backward requires scalar loss and a fresh tape") {
    Tensor x({2}, {1.0, 2.0}, true);
    Tape tape;
    auto y = scalar_mul(x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
    auto loss = sum_all(y);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("gradients accumulate across multiple uses of a leaf") {
    Tensor x = Tensor::scalar(2.0, true);
    Tape tape;
    auto loss = add(mul(x, x), scalar_mul(x, 3.0));  // x^2 + 3x
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0 * 2.0 + 3.0).epsilon(1e-15));
}

TEST_CASE("three-layer FC net: every parameter gradient matches finite differences") {
    rng::Stream st(21);
    Tensor x = random_tensor({5}, st, -1.0, 1.0);
    Tensor W1 = random_tensor({6, 5}, st, -0.8, 0.8, true);
    Tensor b1 = random_tensor({6}, st, -0.5, 0.5, true);
    Tensor W2 = random_tensor({4, 6}, st, -0.8, 0.8, true);
    Tensor b2 = random_tensor({4}, st, -0.5, 0.5, true);
    Tensor W3 = random_tensor({2, 4}, st, -0.8, 0.8, true);
    Tensor b3 = random_tensor({2}, st, -0.5, 0.5, true);

    auto forward = [&]() {
        auto h1 = relu(linear(x, W1, b1));
        auto h2 = relu(linear(h1, W2, b2));
        return sum_all(mul(linear(h2, W3, b3), linear(h2, W3, b3))).item();
    };

    Tape tape;
    auto h1 = relu(linear(x, W1, b1));
    auto h2 = relu(linear(h1, W2, b2));
    auto out = linear(h2, W3, b3);
    auto loss = sum_all(mul(out, out));
    tape.backward(loss);

    for (Tensor* p : {&W1, &b1, &W2, &b2, &W3, &b3}) {
        auto fd = finite_diff_grad(*p, forward);
        CHECK(rel_err(p->grad(), fd) < 1e-3);
    }
}

TEST_CASE("elementwise conventions") {
    Tensor s({3}, {-2.0, 0.0, 5.0});
    auto sg = sign(s);
    CHECK(sg[0] == -1.0);
    CHECK(sg[1] == 0.0);
    CHECK(sg[2] == 1.0);

    Tensor c({3}, {-0.1, 0.5, 1.3});
    auto cl = clamp(c, 0.0, 1.0);
    CHECK(cl[0] == 0.0);
    CHECK(cl[1] == 0.5);
    CHECK(cl[2] == 1.0);

    Tensor logits({2, 3}, {0.3, -1.0, 0.8, 2.0, 2.0, -0.5});
    auto p = softmax(logits, 1);
    auto pl = log_softmax(logits, 1);
    auto kl = kl_divergence(pl, p);
    CHECK(std::abs(kl.item()) < 1e-12);
}

TEST_CASE("clamp output always lies inside the bounds") {
    rng::Stream st(33);
    for (int trial = 0; trial < 50; ++trial) {
        const double lo = st.next_uniform(-2.0, 0.0);
        const double hi = st.next_uniform(0.0, 2.0);
        Tensor x = random_tensor({17}, st, -4.0, 4.0);
        auto y = clamp(x, lo, hi);
        for (double v : y.data()) {
            CHECK(v >= lo);
            CHECK(v <= hi);
        }
    }
}

TEST_CASE("softmax rows sum to one and broadcasting works both ways") {
    rng::Stream st(13);
    Tensor x = random_tensor({4, 6}, st);
    auto p = softmax(x, -1);
    for (int i = 0; i < 4; ++i) {
        double row = 0.0;
        for (int j = 0; j < 6; ++j) row += p[i * 6 + j];
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }

    Tensor a = random_tensor({3, 4}, st);
    Tensor b = random_tensor({4}, st);
    auto y = add(a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(y[i * 4 + j] == doctest::Approx(a[i * 4 + j] + b[j]).epsilon(1e-15));

    Tensor col = random_tensor({3, 1}, st);
    auto z = mul(a, col);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(z[i * 4 + j] == doctest::Approx(a[i * 4 + j] * col[i]).epsilon(1e-15));
}

TEST_CASE("finite differences agree for the differentiable op suite") {
    rng::Stream st(101);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor({3, 4}, st, -2.0, 2.0, true);
        Tensor b = random_tensor({3, 4}, st, -2.0, 2.0, true);
        Tensor w = random_tensor({2, 12}, st, -1.0, 1.0, true);

        auto forward = [&]() {
            auto u = mul(add(a, b), sub(a, scalar_mul(b, 0.25)));
            auto flat = reshape(u, {12});
            auto lo = linear(flat, w, Tensor{});
            auto sm = log_softmax(lo, 0);
            return mean_all(sm).item();
        };

        Tape tape;
        auto u = mul(add(a, b), sub(a, scalar_mul(b, 0.25)));
        auto flat = reshape(u, {12});
        auto lo = linear(flat, w, Tensor{});
        auto sm = log_softmax(lo, 0);
        tape.backward(mean_all(sm));

        for (Tensor* p : {&a, &b, &w}) {
            auto fd = finite_diff_grad(*p, forward);
            CHECK(rel_err(p->grad(), fd) < 1e-3);
        }
    }
}

TEST_CASE("kl_divergence and cross_entropy match finite differences") {
    rng::Stream st(55);
    Tensor sl = random_tensor({3, 5}, st, -1.5, 1.5, true);
    Tensor tl = random_tensor({3, 5}, st, -1.5, 1.5, true);
    std::vector<int> labels{0, 3, 2};

    auto fwd_kl = [&]() { return kl_divergence(log_softmax(sl, 1), softmax(tl, 1)).item(); };
    {
        Tape tape;
        tape.backward(kl_divergence(log_softmax(sl, 1), softmax(tl, 1)));
        auto fd_s = finite_diff_grad(sl, fwd_kl);
        CHECK(rel_err(sl.grad(), fd_s) < 1e-3);
        auto fd_t = finite_diff_grad(tl, fwd_kl);
        CHECK(rel_err(tl.grad(), fd_t) < 1e-3);
    }
    {
        sl.zero_grad();
        Tape tape;
        tape.backward(cross_entropy(sl, labels));
        auto fd = finite_diff_grad(sl, [&]() { return cross_entropy(sl, labels).item(); });
        CHECK(rel_err(sl.grad(), fd) < 1e-3);
    }
}

TEST_CASE("time ops: repeat, select, stack") {
    rng::Stream st(9);
    Tensor x = random_tensor({2, 3}, st, 0.0, 1.0, true);

    Tape tape;
    auto seq = repeat_time(x, 4);
    REQUIRE(seq.shape() == Shape{4, 2, 3});
    auto f2 = select_time(seq, 2);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(f2[i] == x[i]);
    auto restacked = stack_time({f2, f2});
    tape.backward(sum_all(restacked));
    // two stacked copies of frame 2, each contributing 1 per element
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == 2.0);

    CHECK_THROWS_AS(select_time(seq, 7), ContractError);
}

TEST_CASE("backward is deterministic bit for bit") {
    rng::Stream st(77);
    Tensor x0 = random_tensor({4, 4}, st, -1.0, 1.0);
    Tensor w0 = random_tensor({3, 16}, st, -1.0, 1.0);

    auto run = [&](std::vector<double>& gx, std::vector<double>& gw) {
        Tensor x(x0.shape(), {x0.data().begin(), x0.data().end()}, true);
        Tensor w(w0.shape(), {w0.data().begin(), w0.data().end()}, true);
        Tape tape;
        auto y = linear(reshape(relu(x), {16}), w, Tensor{});
        tape.backward(sum_all(mul(y, y)));
        gx.assign(x.grad().begin(), x.grad().end());
        gw.assign(w.grad().begin(), w.grad().end());
    };
    std::vector<double> gx1, gw1, gx2, gw2;
    run(gx1, gw1);
    run(gx2, gw2);
    CHECK(gx1 == gx2);
    CHECK(gw1 == gw2);
}

TEST_CASE("spike surrogate values and soft twin finite differences") {
    CHECK(surrogate_gradient(0.0, 1.0) == 1.0);
    CHECK(surrogate_gradient(1.0, 1.0) == 0.0);
    CHECK(surrogate_gradient(-1.0, 1.0) == 0.0);
    CHECK(surrogate_gradient(0.5, 1.0) == 0.5);
    CHECK(surrogate_gradient(-0.5, 1.0) == 0.5);

    // hard spike: step at threshold fires, surrogate drives the backward
    Tensor u({3}, {0.2, 1.0, 1.7}, true);
    {
        Tape tape;
        auto s = spike(u, 1.0, 1.0);
        CHECK(s[0] == 0.0);
        CHECK(s[1] == 1.0);  // fires exactly at threshold
        CHECK(s[2] == 1.0);
        tape.backward(sum_all(s));
        CHECK(u.grad()[0] == doctest::Approx(0.2));
        CHECK(u.grad()[1] == doctest::Approx(1.0));
        CHECK(u.grad()[2] == doctest::Approx(0.3));
    }

    // soft twin: forward is the surrogate's antiderivative, so FD matches
    rng::Stream st(19);
    Tensor v = random_tensor({12}, st, -0.9, 2.9, true);
    Tape tape;
    auto s = spike_soft(v, 1.0, 1.0);
    tape.backward(sum_all(s));
    auto fd = finite_diff_grad(v, [&]() { return sum_all(spike_soft(v, 1.0, 1.0)).item(); });
    CHECK(rel_err(v.grad(), fd) < 1e-3);
}

TEST_CASE("surrogate gradient integrates to one for any gamma") {
    for (double gamma : {0.25, 1.0, 2.5}) {
        // trapezoid quadrature over the support
        const int n = 200000;
        const double a = -gamma, b = gamma;
        double acc = 0.5 * (surrogate_gradient(a, gamma) + surrogate_gradient(b, gamma));
        for (int i = 1; i < n; ++i)
            acc += surrogate_gradient(a + (b - a) * i / n, gamma);
        acc *= (b - a) / n;
        CHECK(std::abs(acc - 1.0) < 1e-6);
    }
}
