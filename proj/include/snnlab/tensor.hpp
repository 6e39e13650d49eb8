#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace snnlab {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until the first accumulation
};

// Dense row-major tensor of 64-bit reals. Tensor is a cheap handle: copies
// share storage, clone() makes a deep copy. All arithmetic lives in ops.hpp
// as free functions that record backward rules on the active Tape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }
    std::int64_t dim(int i) const;  // negative i counts from the back

    std::span<double> data() { return impl_->data; }
    std::span<const double> data() const { return impl_->data; }
    double item() const;  // scalar tensors only
    double& operator[](std::int64_t flat) { return impl_->data[static_cast<std::size_t>(flat)]; }
    double operator[](std::int64_t flat) const { return impl_->data[static_cast<std::size_t>(flat)]; }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool v);

    bool has_grad() const { return !impl_->grad.empty(); }
    // Gradient accumulated by the last backward pass; contract error if none.
    std::span<const double> grad() const;
    void zero_grad() const;
    // Adds g elementwise into the grad buffer, allocating zeros on first use.
    // Mutates the shared storage, like everything reached through the handle.
    void accumulate_grad(std::span<const double> g) const;

    Tensor clone() const;   // deep copy; plain leaf, no grad flag
    Tensor detach() const;  // shares storage, drops the grad flag

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode tape. Constructing a Tape makes it the active tape for the
// current thread; ops record their backward rules onto it whenever an input
// requires grad. A tape and the tensors recorded on it form a single-owner
// unit -- build and run it on one thread. Independent tapes on different
// threads do not interact.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Seeds d(loss)/d(loss) = 1 and replays recorded ops in reverse order,
    // visiting each node exactly once. `loss` must be scalar and the pass
    // can run only once per tape.
    void backward(const Tensor& loss);

    std::size_t size() const { return nodes_.size(); }

    static Tape* active();
    // Records a backward rule if a tape is active; no-op otherwise.
    static void record(std::function<void()> backward_rule);

private:
    std::vector<std::function<void()>> nodes_;
    Tape* prev_;
    bool consumed_ = false;
};

}  // namespace snnlab
