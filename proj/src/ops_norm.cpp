#include <cmath>
#include <initializer_list>
#include <stdexcept>

#include "creagen/ops.hpp"

namespace creagen {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

BatchNormStats BatchNormStats::fresh(std::size_t channels) {
    return {Tensor::zeros({channels}), Tensor::ones({channels})};
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, NormMode mode,
                  bool update_stats, double momentum, double eps) {
    if (x.rank() != 2 && x.rank() != 4) {
        throw std::invalid_argument("batch_norm: input must be [N,C] or [N,C,H,W], got " + shape_str(x.shape()));
    }
    const std::size_t n = x.dim(0), c = x.dim(1);
    const std::size_t hw = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &stats.running_mean, &stats.running_var}) {
        if (t->rank() != 1 || t->dim(0) != c) {
            throw std::invalid_argument("batch_norm: per-channel tensor " + shape_str(t->shape()) +
                                        " does not match input " + shape_str(x.shape()));
        }
    }
    if (mode == NormMode::train && n < 2) {
        throw std::invalid_argument("batch_norm: train mode needs batch size >= 2, got " + std::to_string(n));
    }
    const double m = static_cast<double>(n * hw);
    auto xd = x.data();
    std::vector<double> mu(c), inv_std(c);
    if (mode == NormMode::train) {
        for (std::size_t k = 0; k < c; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < hw; ++j) s += xd[(i * c + k) * hw + j];
            mu[k] = s / m;
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < hw; ++j) {
                    double d = xd[(i * c + k) * hw + j] - mu[k];
                    v += d * d;
                }
            v /= m;
            inv_std[k] = 1.0 / std::sqrt(v + eps);
            if (update_stats) {
                auto rm = stats.running_mean.mutable_data();
                auto rv = stats.running_var.mutable_data();
                rm[k] = (1.0 - momentum) * rm[k] + momentum * mu[k];
                rv[k] = (1.0 - momentum) * rv[k] + momentum * v * m / (m - 1.0);
            }
        }
    } else {
        auto rm = stats.running_mean.data();
        auto rv = stats.running_var.data();
        for (std::size_t k = 0; k < c; ++k) {
            mu[k] = rm[k];
            inv_std[k] = 1.0 / std::sqrt(rv[k] + eps);
        }
    }
    auto gd = gamma.data(), bd = beta.data();
    std::vector<double> xhat(xd.size()), out(xd.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k)
            for (std::size_t j = 0; j < hw; ++j) {
                std::size_t idx = (i * c + k) * hw + j;
                xhat[idx] = (xd[idx] - mu[k]) * inv_std[k];
                out[idx] = gd[k] * xhat[idx] + bd[k];
            }
    ImplPtr xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
    const bool batch_stats = mode == NormMode::train;
    return make_result(x.shape(), std::move(out), "batch_norm", {x, gamma, beta},
                       [xi, gi, bi, xhat = std::move(xhat), inv_std, n, c, hw, m, batch_stats](const TensorImpl& o) {
                           std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t k = 0; k < c; ++k)
                                   for (std::size_t j = 0; j < hw; ++j) {
                                       std::size_t idx = (i * c + k) * hw + j;
                                       sum_g[k] += o.grad[idx];
                                       sum_gx[k] += o.grad[idx] * xhat[idx];
                                   }
                           if (gi->requires_grad) {
                               auto& g = gi->ensure_grad();
                               for (std::size_t k = 0; k < c; ++k) g[k] += sum_gx[k];
                           }
                           if (bi->requires_grad) {
                               auto& g = bi->ensure_grad();
                               for (std::size_t k = 0; k < c; ++k) g[k] += sum_g[k];
                           }
                           if (!xi->requires_grad) return;
                           auto& gx = xi->ensure_grad();
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t k = 0; k < c; ++k) {
                                   double gam = gi->data[k];
                                   for (std::size_t j = 0; j < hw; ++j) {
                                       std::size_t idx = (i * c + k) * hw + j;
                                       if (batch_stats) {
                                           gx[idx] += gam * inv_std[k] *
                                                      (o.grad[idx] - sum_g[k] / m - xhat[idx] * sum_gx[k] / m);
                                       } else {
                                           gx[idx] += gam * inv_std[k] * o.grad[idx];
                                       }
                                   }
                               }
                       });
}

}  // namespace creagen
