#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace creagen {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl;

// Backward closure for one recorded operation. It reads the gradient stored on
// the output and accumulates into the inputs that require gradients.
struct GradFn {
    std::string name;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty means "no gradient"
    bool requires_grad = false;
    bool backward_done = false;
    std::shared_ptr<GradFn> grad_fn;

    std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of doubles with optional reverse-mode gradient tracking.
///
/// Copies share storage (handle semantics). A tensor produced by an operation on
/// inputs that require gradients records a backward closure; `backward()` on a
/// scalar result populates `grad()` on every reachable tensor that requires it.
///
/// Gradient policy: a second `backward()` on the same loss, or a backward that
/// would reach a leaf whose gradient is still populated, is rejected. Call
/// `zero_grad()` on leaves between steps.
class Tensor {
   public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor ones(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0,
                        bool requires_grad = false);
    static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi,
                          bool requires_grad = false);

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool value);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    /// New leaf sharing no history; the data is copied.
    Tensor detach() const;
    /// Deep copy of data, keeping requires_grad but not history.
    Tensor clone() const;

    void backward() const;

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

   private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    friend Tensor make_result(Shape, std::vector<double>, std::string,
                              std::vector<Tensor>, std::function<void(const detail::TensorImpl&)>);

    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Builds an operation result. The backward closure is recorded only when
/// gradient mode is enabled and at least one input requires gradients.
Tensor make_result(Shape shape, std::vector<double> data, std::string op_name,
                   std::vector<Tensor> inputs,
                   std::function<void(const detail::TensorImpl& out)> backward);

bool grad_enabled();

/// Disables recording for the lifetime of the guard (thread-local).
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

struct RecordEntry {
    std::string op;
    std::vector<const detail::TensorImpl*> inputs;
    const detail::TensorImpl* output = nullptr;
};

/// Operations reachable from `loss`, in topological (producer-first) order.
using ComputationRecord = std::vector<RecordEntry>;
ComputationRecord computation_record(const Tensor& loss);

}  // namespace creagen
