#include "snnlab/tensor.hpp"

#include <sstream>
#include <utility>

#include "snnlab/error.hpp"

namespace snnlab {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape) {
    for (auto d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    impl_ = std::make_shared<TensorImpl>();
    impl_->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (auto d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t(std::move(shape));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.impl_->data) v = value;
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

std::int64_t Tensor::dim(int i) const {
    const int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) {
        throw ShapeError("axis " + std::to_string(i) + " out of range for shape " +
                         shape_str(impl_->shape));
    }
    return impl_->shape[static_cast<std::size_t>(i)];
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("item() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
}

std::span<const double> Tensor::grad() const {
    if (impl_->grad.empty()) {
        throw ContractError("tensor has no gradient; run Tape::backward first");
    }
    return impl_->grad;
}

void Tensor::zero_grad() const { impl_->grad.clear(); }

void Tensor::accumulate_grad(std::span<const double> g) const {
    if (g.size() != impl_->data.size()) {
        throw ShapeError("gradient size " + std::to_string(g.size()) +
                         " does not match tensor of " + std::to_string(impl_->data.size()));
    }
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
}

Tensor Tensor::clone() const {
    return Tensor(impl_->shape, impl_->data);
}

Tensor Tensor::detach() const {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>();
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    t.impl_->requires_grad = false;
    return t;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_rule) {
    if (g_active_tape) g_active_tape->nodes_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (consumed_) throw ContractError("tape already consumed by a previous backward pass");
    consumed_ = true;
    const double one = 1.0;
    loss.accumulate_grad(std::span<const double>(&one, 1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace snnlab
