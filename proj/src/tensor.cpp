#include "creagen/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace creagen {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::vector<double>& detail::TensorImpl::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

namespace {
thread_local bool g_grad_mode = true;

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, std::vector<double> data,
                                             bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
    }
    for (auto d : shape) {
        if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension in " + shape_str(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return impl;
}

// Post-order DFS from the root; producers precede consumers.
std::vector<detail::TensorImpl*> topo_order(detail::TensorImpl* root) {
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        const auto* fn = node->grad_fn.get();
        if (fn && next < fn->inputs.size()) {
            auto* child = fn->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }
    return order;
}
}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(new_impl(std::move(shape), std::move(data), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }
Tensor Tensor::ones(Shape shape, bool requires_grad) { return full(std::move(shape), 1.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi, bool requires_grad) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

namespace {
const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& p) {
    if (!p) throw std::logic_error("tensor: use of undefined tensor");
    return *p;
}
}  // namespace

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw std::out_of_range("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }
std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
    checked(impl_);
    return impl_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on " + shape_str(shape()));
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
    checked(impl_);
    if (impl_->grad_fn) throw std::logic_error("tensor: requires_grad can only be changed on leaves");
    impl_->requires_grad = value;
    return *this;
}

bool Tensor::is_leaf() const { return !checked(impl_).grad_fn; }
bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw std::logic_error("tensor: no gradient populated");
    return impl_->grad;
}

void Tensor::zero_grad() {
    checked(impl_);
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data, impl_->requires_grad); }

void Tensor::backward() const {
    checked(impl_);
    if (impl_->data.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(impl_->shape));
    }
    if (!impl_->requires_grad) throw std::logic_error("backward: loss does not require gradients");
    if (impl_->backward_done) {
        throw std::logic_error("backward: already called on this loss; recompute the forward pass");
    }
    auto order = topo_order(impl_.get());
    for (auto* node : order) {
        if (!node->grad_fn && !node->grad.empty()) {
            throw std::logic_error("backward: leaf " + shape_str(node->shape) +
                                   " still holds a gradient; call zero_grad() first");
        }
    }
    for (auto* node : order) {
        if (node->grad_fn) node->grad.assign(node->data.size(), 0.0);
    }
    impl_->grad.assign(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* node = *it;
        if (node->grad_fn) node->grad_fn->backward(*node);
    }
    for (auto* node : order) {
        if (!node->grad_fn) node->ensure_grad();
    }
    impl_->backward_done = true;
}

Tensor make_result(Shape shape, std::vector<double> data, std::string op_name,
                   std::vector<Tensor> inputs,
                   std::function<void(const detail::TensorImpl& out)> backward) {
    auto impl = new_impl(std::move(shape), std::move(data), false);
    if (g_grad_mode) {
        bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.defined() && t.requires_grad(); });
        if (any) {
            auto fn = std::make_shared<detail::GradFn>();
            fn->name = std::move(op_name);
            for (auto& t : inputs) {
                if (t.defined()) fn->inputs.push_back(t.impl());
            }
            fn->backward = std::move(backward);
            impl->grad_fn = std::move(fn);
            impl->requires_grad = true;
        }
    }
    return Tensor(std::move(impl));
}

bool grad_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

ComputationRecord computation_record(const Tensor& loss) {
    ComputationRecord record;
    if (!loss.defined() || !loss.requires_grad()) return record;
    for (auto* node : topo_order(loss.impl().get())) {
        if (!node->grad_fn) continue;
        RecordEntry e;
        e.op = node->grad_fn->name;
        for (auto& in : node->grad_fn->inputs) e.inputs.push_back(in.get());
        e.output = node;
        record.push_back(std::move(e));
    }
    return record;
}

}  // namespace creagen
