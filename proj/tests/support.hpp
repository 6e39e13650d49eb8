#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "snnlab/rng.hpp"
#include "snnlab/tensor.hpp"

namespace testsupport {

// Central finite differences of a scalar-valued function of x's entries.
// f must read x's current contents and not touch any tape.
inline std::vector<double> finite_diff_grad(snnlab::Tensor& x,
                                            const std::function<double()>& f,
                                            double h = 1e-5) {
    std::vector<double> g(static_cast<std::size_t>(x.numel()));
    auto d = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double keep = d[i];
        d[i] = keep + h;
        const double up = f();
        d[i] = keep - h;
        const double down = f();
        d[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Max-abs deviation normalized by the reference's max-abs entry.
inline double rel_err(std::span<const double> got, std::span<const double> want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        num = std::max(num, std::abs(got[i] - want[i]));
        den = std::max(den, std::abs(want[i]));
    }
    return num / std::max(den, 1e-12);
}

inline snnlab::Tensor random_tensor(snnlab::Shape shape, snnlab::rng::Stream& st,
                                    double lo = -2.0, double hi = 2.0,
                                    bool requires_grad = false) {
    snnlab::Tensor t = snnlab::Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.data()) v = st.next_uniform(lo, hi);
    return t;
}

}  // namespace testsupport
