#include <doctest.h>

#include <cmath>

#include "snnlab/coding.hpp"
#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"
#include "support.hpp"

using namespace snnlab;

namespace {

CodingConfig make_cfg(CodingScheme s, int T, double sigma2 = 0.0, std::uint64_t seed = 42) {
    CodingConfig cfg;
    cfg.scheme = s;
    cfg.T = T;
    cfg.sigma2 = sigma2;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("direct coding repeats the input") {
    Coder coder(make_cfg(CodingScheme::direct, 3));
    auto seq = coder.encode(Tensor({1}, {0.3}));
    REQUIRE(seq.frames.shape() == Shape{3, 1});
    for (int t = 0; t < 3; ++t) CHECK(seq.frames[t] == 0.3);
    CHECK_FALSE(seq.binary);

    Coder one(make_cfg(CodingScheme::direct, 1));
    auto s1 = one.encode(Tensor({2}, {0.9, 0.0}));
    CHECK(s1.frames[0] == 0.9);
    CHECK(s1.frames[1] == 0.0);

    // time-mean equals the input exactly
    Coder c8(make_cfg(CodingScheme::direct, 8));
    Tensor x({4}, {0.1, 0.5, 0.25, 1.0});
    auto m = mean(c8.encode(x).frames, {0}, false);
    for (int i = 0; i < 4; ++i) CHECK(m[i] == doctest::Approx(x[i]).epsilon(1e-15));

    // direct coding of a binary input is flagged binary
    CHECK(c8.encode(Tensor({2}, {0.0, 1.0})).binary);
}

TEST_CASE("coder rejects out-of-range input and bad config") {
    Coder coder(make_cfg(CodingScheme::direct, 2));
    CHECK_THROWS_AS(coder.encode(Tensor({1}, {1.2})), DomainError);
    CHECK_THROWS_AS(coder.encode(Tensor({1}, {-0.1})), DomainError);
    CHECK_THROWS_AS(Coder(make_cfg(CodingScheme::direct, 0)), ContractError);
    CHECK_THROWS_AS(Coder(make_cfg(CodingScheme::rsc1, 4, -0.5)), ContractError);
}

TEST_CASE("poisson coding: degenerate probabilities and moments") {
    Coder coder(make_cfg(CodingScheme::poisson, 64));
    auto seq = coder.encode(Tensor({2}, {0.0, 1.0}));
    CHECK(seq.binary);
    for (int t = 0; t < 64; ++t) {
        CHECK(seq.frames[t * 2 + 0] == 0.0);
        CHECK(seq.frames[t * 2 + 1] == 1.0);
    }

    // time-mean concentrates around the pixel intensity
    Coder big(make_cfg(CodingScheme::poisson, 10000));
    auto s = big.encode(Tensor({1}, {0.5}));
    double m = 0.0;
    for (double v : s.frames.data()) m += v;
    m /= 10000.0;
    CHECK(std::abs(m - 0.5) < 0.02);

    // empirical variance of a Bernoulli(0.2) coordinate: x(1-x) = 0.16
    Coder var_probe(make_cfg(CodingScheme::poisson, 1, 0.0, 7));
    const int n = 100000;
    double mean_acc = 0.0, sq_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        auto draw = var_probe.encode(Tensor({1}, {0.2}), 0, i);
        const double v = draw.frames[0];
        mean_acc += v;
        sq_acc += v * v;
    }
    mean_acc /= n;
    const double var = sq_acc / n - mean_acc * mean_acc;
    CHECK(std::abs(var - 0.16) < 0.005);
}

TEST_CASE("rsc1: zero noise degenerates to direct coding") {
    Tensor x({3}, {0.2, 0.7, 1.0});
    auto direct = Coder(make_cfg(CodingScheme::direct, 5)).encode(x);
    auto rsc = Coder(make_cfg(CodingScheme::rsc1, 5, 0.0)).encode(x);
    for (std::int64_t i = 0; i < direct.frames.numel(); ++i)
        CHECK(rsc.frames[i] == direct.frames[i]);
}

TEST_CASE("rsc1 frames are time-constant; rsc2 frames are not") {
    Tensor x({8});
    for (int i = 0; i < 8; ++i) x[i] = 0.4 + 0.02 * i;

    auto r1 = Coder(make_cfg(CodingScheme::rsc1, 6, 0.05)).encode(x);
    for (int t = 1; t < 6; ++t)
        for (int i = 0; i < 8; ++i) CHECK(r1.frames[t * 8 + i] == r1.frames[i]);

    Coder c2(make_cfg(CodingScheme::rsc2, 2, 0.1));
    for (int trial = 0; trial < 100; ++trial) {
        auto r2 = c2.encode(x, static_cast<std::uint64_t>(trial));
        bool identical = true;
        for (int i = 0; i < 8 && identical; ++i) identical = r2.frames[i] == r2.frames[8 + i];
        CHECK_FALSE(identical);
    }
}

TEST_CASE("rsc1 noise has the configured moments") {
    // sigma2 = 0.01 -> sigma = 0.1; x = 0.5 keeps the clamp 5 sigma away
    Coder coder(make_cfg(CodingScheme::rsc1, 1, 0.01, 9));
    const int n = 100000;
    double acc = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = coder.encode(Tensor({1}, {0.5}), 0, i).frames[0];
        acc += v;
        sq += v * v;
    }
    acc /= n;
    const double sd = std::sqrt(sq / n - acc * acc);
    CHECK(std::abs(acc - 0.5) < 0.002);
    CHECK(std::abs(sd - 0.1) < 0.003);
}

TEST_CASE("rsc2: zero noise degenerates to direct; time-mean converges") {
    Tensor x({2}, {0.35, 0.8});
    auto direct = Coder(make_cfg(CodingScheme::direct, 4)).encode(x);
    auto rsc = Coder(make_cfg(CodingScheme::rsc2, 4, 0.0)).encode(x);
    for (std::int64_t i = 0; i < direct.frames.numel(); ++i)
        CHECK(rsc.frames[i] == direct.frames[i]);

    Coder c(make_cfg(CodingScheme::rsc2, 10000, 0.04, 3));
    auto seq = c.encode(Tensor({1}, {0.5}));
    double m = 0.0;
    for (double v : seq.frames.data()) m += v;
    m /= 10000.0;
    CHECK(std::abs(m - 0.5) < 0.01);
}

TEST_CASE("all coded frames lie in [0,1] for every scheme") {
    rng::Stream rs(64);
    Tensor x({16});
    for (auto& v : x.data()) v = rs.next_uniform(0.0, 1.0);
    for (auto scheme : {CodingScheme::direct, CodingScheme::poisson, CodingScheme::rsc1,
                        CodingScheme::rsc2}) {
        Coder coder(make_cfg(scheme, 12, 0.25, 5));
        auto seq = coder.encode(x);
        for (double v : seq.frames.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("identical seed, config and input give bit-identical sequences") {
    rng::Stream rs(90);
    Tensor x({10});
    for (auto& v : x.data()) v = rs.next_uniform(0.0, 1.0);
    for (auto scheme : {CodingScheme::poisson, CodingScheme::rsc1, CodingScheme::rsc2}) {
        Coder a(make_cfg(scheme, 7, 0.09, 1234));
        Coder b(make_cfg(scheme, 7, 0.09, 1234));
        auto sa = a.encode(x, 5, 17);
        auto sb = b.encode(x, 5, 17);
        for (std::int64_t i = 0; i < sa.frames.numel(); ++i) CHECK(sa.frames[i] == sb.frames[i]);
        // different nonce changes the draw
        auto sc = a.encode(x, 6, 17);
        bool same = true;
        for (std::int64_t i = 0; i < sa.frames.numel() && same; ++i)
            same = sa.frames[i] == sc.frames[i];
        CHECK_FALSE(same);
    }
}

TEST_CASE("expectation matching for interior inputs") {
    // empirical sample mean of coded values converges to x for all schemes
    Tensor x({4}, {0.45, 0.5, 0.55, 0.6});
    const int draws = 20000;
    for (auto scheme : {CodingScheme::poisson, CodingScheme::rsc1, CodingScheme::rsc2}) {
        Coder coder(make_cfg(scheme, 1, 0.01, 77));
        std::vector<double> acc(4, 0.0);
        for (int i = 0; i < draws; ++i) {
            auto seq = coder.encode(x, 0, i);
            for (int j = 0; j < 4; ++j) acc[static_cast<std::size_t>(j)] += seq.frames[j];
        }
        for (int j = 0; j < 4; ++j) {
            const double m = acc[static_cast<std::size_t>(j)] / draws;
            const double sigma = scheme == CodingScheme::poisson
                                     ? std::sqrt(x[j] * (1.0 - x[j]))
                                     : 0.1;
            CHECK(std::abs(m - x[j]) < 5.0 * sigma / std::sqrt(static_cast<double>(draws)));
        }
    }
}

TEST_CASE("gradients flow through the coding layer") {
    Tensor x = Tensor({3}, {0.3, 0.6, 0.9}, true);

    // direct: every frame contributes 1
    {
        Tape tape;
        auto seq = Coder(make_cfg(CodingScheme::direct, 4)).encode(x);
        tape.backward(sum_all(seq.frames));
        for (int i = 0; i < 3; ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == 4.0);
    }
    // poisson: straight-through identity
    {
        x.zero_grad();
        Tape tape;
        auto seq = Coder(make_cfg(CodingScheme::poisson, 4, 0.0, 11)).encode(x);
        tape.backward(sum_all(seq.frames));
        for (int i = 0; i < 3; ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == 4.0);
    }
    // rsc1: clamp masks saturated coordinates
    {
        Tensor y = Tensor({2}, {0.0, 0.5}, true);
        CodingConfig cfg = make_cfg(CodingScheme::rsc1, 3, 0.04, 0);
        // find a nonce whose noise pushes coordinate 0 below zero
        for (std::uint64_t nonce = 0;; ++nonce) {
            Tape tape;
            auto seq = Coder(cfg).encode(y, nonce);
            if (seq.frames[0] == 0.0 && seq.frames[1] > 0.0 && seq.frames[1] < 1.0) {
                tape.backward(sum_all(seq.frames));
                CHECK(y.grad()[0] == 0.0);
                CHECK(y.grad()[1] == 3.0);
                break;
            }
        }
    }
}
