#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "creagen/ops.hpp"

namespace creagen {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

bool wants(const ImplPtr& p) { return p && p->requires_grad; }

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
    auto src = a.data();
    std::vector<double> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = fwd(src[i]);
    ImplPtr ai = a.impl();
    return make_result(a.shape(), std::move(out), name, {a}, [ai, deriv](const TensorImpl& o) {
        if (!wants(ai)) return;
        auto& g = ai->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * deriv(ai->data[i], o.data[i]);
    });
}

enum class Bcast { none, a_rows, b_rows };

Bcast broadcast_mode(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return Bcast::none;
    if (a.size() == b.size() + 1 && std::equal(b.begin(), b.end(), a.begin() + 1)) return Bcast::b_rows;
    if (b.size() == a.size() + 1 && std::equal(a.begin(), a.end(), b.begin() + 1)) return Bcast::a_rows;
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                                shape_str(b));
}

// Elementwise binary op. `fwd(x, y)`; `dx(x, y)` and `dy(x, y)` are partials.
template <class Fwd, class Dx, class Dy>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Dx dx, Dy dy) {
    auto mode = broadcast_mode(a.shape(), b.shape(), name);
    const Shape& out_shape = mode == Bcast::a_rows ? b.shape() : a.shape();
    std::size_t n = shape_numel(out_shape);
    std::size_t na = a.numel(), nb = b.numel();
    auto da = a.data(), db = b.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(da[i % na], db[i % nb]);
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_result(out_shape, std::move(out), name, {a, b}, [ai, bi, na, nb, dx, dy](const TensorImpl& o) {
        std::size_t n = o.data.size();
        if (wants(ai)) {
            auto& g = ai->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) g[i % na] += o.grad[i] * dx(ai->data[i % na], bi->data[i % nb]);
        }
        if (wants(bi)) {
            auto& g = bi->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) g[i % nb] += o.grad[i] * dy(ai->data[i % na], bi->data[i % nb]);
        }
    });
}

struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
    if (axis >= s.size()) {
        throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                                    shape_str(s));
    }
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        a, "scale", [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
    return unary(
        a, "add_scalar", [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    ImplPtr ai = a.impl();
    return make_result(std::move(shape), std::move(out), "reshape", {a}, [ai](const TensorImpl& o) {
        if (!wants(ai)) return;
        auto& g = ai->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
}

Tensor flatten(const Tensor& a) {
    if (a.rank() < 1) throw std::invalid_argument("flatten: scalar input");
    std::size_t n = a.dim(0);
    return reshape(a, {n, a.numel() / n});
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range for " + shape_str(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) {
            throw std::invalid_argument("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
        }
        out_shape[axis] += s[axis];
    }
    auto split = split_axis(out_shape, axis, "concat");
    std::vector<double> out(shape_numel(out_shape));
    std::vector<ImplPtr> impls;
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        std::size_t w = p.dim(axis) * split.inner;
        auto src = p.data();
        for (std::size_t o = 0; o < split.outer; ++o) {
            std::copy_n(src.begin() + o * w, w, out.begin() + o * split.n * split.inner + offset);
        }
        offsets.push_back(offset);
        widths.push_back(w);
        impls.push_back(p.impl());
        offset += w;
    }
    std::size_t row = split.n * split.inner;
    std::size_t outer = split.outer;
    return make_result(out_shape, std::move(out), "concat", std::move(inputs),
                       [impls, offsets, widths, row, outer](const TensorImpl& o) {
                           for (std::size_t k = 0; k < impls.size(); ++k) {
                               if (!wants(impls[k])) continue;
                               auto& g = impls[k]->ensure_grad();
                               for (std::size_t r = 0; r < outer; ++r) {
                                   for (std::size_t j = 0; j < widths[k]; ++j) {
                                       g[r * widths[k] + j] += o.grad[r * row + offsets[k] + j];
                                   }
                               }
                           }
                       });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    }
    std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n);
    MapMat(out.data(), m, n).noalias() = ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
    ImplPtr ai = a.impl(), bi = b.impl();
    return make_result({m, n}, std::move(out), "matmul", {a, b}, [ai, bi, m, k, n](const TensorImpl& o) {
        ConstMapMat go(o.grad.data(), m, n);
        if (wants(ai)) {
            MapMat(ai->ensure_grad().data(), m, k).noalias() += go * ConstMapMat(bi->data.data(), k, n).transpose();
        }
        if (wants(bi)) {
            MapMat(bi->ensure_grad().data(), k, n).noalias() += ConstMapMat(ai->data.data(), m, k).transpose() * go;
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
        throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                                    shape_str(weight.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
        throw std::invalid_argument("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                                    shape_str(weight.shape()));
    }
    std::size_t n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    std::vector<double> out(n * out_dim);
    MapMat y(out.data(), n, out_dim);
    y.noalias() = ConstMapMat(x.data().data(), n, in) * ConstMapMat(weight.data().data(), out_dim, in).transpose();
    if (bias.defined()) {
        auto bd = bias.data();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < out_dim; ++c) y(r, c) += bd[c];
    }
    ImplPtr xi = x.impl(), wi = weight.impl(), bi = bias.defined() ? bias.impl() : nullptr;
    return make_result({n, out_dim}, std::move(out), "linear", {x, weight, bias},
                       [xi, wi, bi, n, in, out_dim](const TensorImpl& o) {
                           ConstMapMat go(o.grad.data(), n, out_dim);
                           if (wants(xi)) {
                               MapMat(xi->ensure_grad().data(), n, in).noalias() +=
                                   go * ConstMapMat(wi->data.data(), out_dim, in);
                           }
                           if (wants(wi)) {
                               MapMat(wi->ensure_grad().data(), out_dim, in).noalias() +=
                                   go.transpose() * ConstMapMat(xi->data.data(), n, in);
                           }
                           if (wants(bi)) {
                               auto& g = bi->ensure_grad();
                               for (std::size_t r = 0; r < n; ++r)
                                   for (std::size_t c = 0; c < out_dim; ++c) g[c] += go(r, c);
                           }
                       });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    ImplPtr ai = a.impl();
    return make_result({}, {s}, "sum", {a}, [ai](const TensorImpl& o) {
        if (!wants(ai)) return;
        for (auto& g : ai->ensure_grad()) g += o.grad[0];
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_axis(const Tensor& a, std::size_t axis) {
    auto sp = split_axis(a.shape(), axis, "sum_axis");
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<double> out(sp.outer * sp.inner, 0.0);
    auto src = a.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.n; ++j)
            for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += src[(o * sp.n + j) * sp.inner + i];
    ImplPtr ai = a.impl();
    return make_result(out_shape, std::move(out), "sum_axis", {a}, [ai, sp](const TensorImpl& o) {
        if (!wants(ai)) return;
        auto& g = ai->ensure_grad();
        for (std::size_t oo = 0; oo < sp.outer; ++oo)
            for (std::size_t j = 0; j < sp.n; ++j)
                for (std::size_t i = 0; i < sp.inner; ++i) g[(oo * sp.n + j) * sp.inner + i] += o.grad[oo * sp.inner + i];
    });
}

Tensor abs(const Tensor& a) {
    return unary(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& a) {
    for (double v : a.data()) {
        if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
    }
    return unary(
        a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
    return unary(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor pow(const Tensor& a, double p) {
    if (p != std::floor(p)) {
        for (double v : a.data()) {
            if (!(v > 0.0)) throw std::domain_error("pow: non-integer exponent of non-positive input");
        }
    }
    return unary(
        a, "pow", [p](double x) { return std::pow(x, p); },
        [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Tensor clamp_min(const Tensor& a, double floor) {
    return unary(
        a, "clamp_min", [floor](double x) { return std::max(x, floor); },
        [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, "relu", [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary(
        a, "leaky_relu", [slope](double x) { return x > 0 ? x : slope * x; },
        [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
    return unary(
        a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        a, "sigmoid",
        [](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& a) {
    return unary(
        a, "log_sigmoid", [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::fabs(x))); },
        [](double x, double) {
            // 1 - sigmoid(x) = sigmoid(-x)
            if (x <= 0) return 1.0 / (1.0 + std::exp(x));
            double e = std::exp(-x);
            return e / (1.0 + e);
        });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    auto sp = split_axis(a.shape(), axis, "softmax");
    auto src = a.data();
    std::vector<double> out(src.size());
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
            auto at = [&](std::size_t j) { return (o * sp.n + j) * sp.inner + i; };
            double mx = src[at(0)];
            for (std::size_t j = 1; j < sp.n; ++j) mx = std::max(mx, src[at(j)]);
            double z = 0.0;
            for (std::size_t j = 0; j < sp.n; ++j) z += (out[at(j)] = std::exp(src[at(j)] - mx));
            for (std::size_t j = 0; j < sp.n; ++j) out[at(j)] /= z;
        }
    }
    ImplPtr ai = a.impl();
    return make_result(a.shape(), std::move(out), "softmax", {a}, [ai, sp](const TensorImpl& o) {
        if (!wants(ai)) return;
        auto& g = ai->ensure_grad();
        for (std::size_t oo = 0; oo < sp.outer; ++oo) {
            for (std::size_t i = 0; i < sp.inner; ++i) {
                auto at = [&](std::size_t j) { return (oo * sp.n + j) * sp.inner + i; };
                double dot = 0.0;
                for (std::size_t j = 0; j < sp.n; ++j) dot += o.grad[at(j)] * o.data[at(j)];
                for (std::size_t j = 0; j < sp.n; ++j) g[at(j)] += o.data[at(j)] * (o.grad[at(j)] - dot);
            }
        }
    });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
    auto sp = split_axis(a.shape(), axis, "log_softmax");
    auto src = a.data();
    std::vector<double> out(src.size());
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
            auto at = [&](std::size_t j) { return (o * sp.n + j) * sp.inner + i; };
            double mx = src[at(0)];
            for (std::size_t j = 1; j < sp.n; ++j) mx = std::max(mx, src[at(j)]);
            double z = 0.0;
            for (std::size_t j = 0; j < sp.n; ++j) z += std::exp(src[at(j)] - mx);
            double lz = mx + std::log(z);
            for (std::size_t j = 0; j < sp.n; ++j) out[at(j)] = src[at(j)] - lz;
        }
    }
    ImplPtr ai = a.impl();
    return make_result(a.shape(), std::move(out), "log_softmax", {a}, [ai, sp](const TensorImpl& o) {
        if (!wants(ai)) return;
        auto& g = ai->ensure_grad();
        for (std::size_t oo = 0; oo < sp.outer; ++oo) {
            for (std::size_t i = 0; i < sp.inner; ++i) {
                auto at = [&](std::size_t j) { return (oo * sp.n + j) * sp.inner + i; };
                double gs = 0.0;
                for (std::size_t j = 0; j < sp.n; ++j) gs += o.grad[at(j)];
                for (std::size_t j = 0; j < sp.n; ++j) g[at(j)] += o.grad[at(j)] - std::exp(o.data[at(j)]) * gs;
            }
        }
    });
}

Tensor activate(const Tensor& a, Activation kind) {
    switch (kind) {
        case Activation::identity: return a;
        case Activation::relu: return relu(a);
        case Activation::leaky_relu: return leaky_relu(a, 0.2);
        case Activation::tanh: return tanh(a);
        case Activation::sigmoid: return sigmoid(a);
    }
    throw std::invalid_argument("activate: unknown kind");
}

}  // namespace creagen
