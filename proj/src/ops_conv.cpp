#include <Eigen/Core>
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

// Sliding-window geometry over an image of C x H x W producing OH x OW positions.
struct Geometry {
    std::size_t channels, height, width, kernel, stride, pad, out_h, out_w;
    Padding::Mode mode;

    std::size_t rows() const { return channels * kernel * kernel; }
    std::size_t cols() const { return out_h * out_w; }

    // Source index along one axis of length n, or -1 for a zero-padded tap.
    long source(long p, std::size_t n) const {
        if (p >= 0 && p < static_cast<long>(n)) return p;
        if (mode == Padding::Mode::zeros) return -1;
        long last = static_cast<long>(n) - 1;
        return p < 0 ? -p : 2 * last - p;
    }
};

void im2col(const double* img, const Geometry& g, double* col) {
    std::size_t cols = g.cols();
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * cols;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    long iy = g.source(static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad), g.height);
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        long ix = g.source(static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad), g.width);
                        row[oy * g.out_w + ox] =
                            (iy < 0 || ix < 0) ? 0.0 : img[(c * g.height + iy) * g.width + ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im(const double* col, const Geometry& g, double* img) {
    std::size_t cols = g.cols();
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * cols;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    long iy = g.source(static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad), g.height);
                    if (iy < 0) continue;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        long ix = g.source(static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad), g.width);
                        if (ix < 0) continue;
                        img[(c * g.height + iy) * g.width + ix] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

void check_conv_args(const char* op, const Tensor& x, const Tensor& w, const Tensor& b, std::size_t in_axis,
                     std::size_t out_axis, std::size_t stride) {
    if (x.rank() != 4) throw std::invalid_argument(std::string(op) + ": input must be NCHW, got " + shape_str(x.shape()));
    if (w.rank() != 4 || w.dim(2) != w.dim(3)) {
        throw std::invalid_argument(std::string(op) + ": kernel must be square 4-d, got " + shape_str(w.shape()));
    }
    if (w.dim(in_axis) != x.dim(1)) {
        throw std::invalid_argument(std::string(op) + ": kernel " + shape_str(w.shape()) + " does not match input " +
                                    shape_str(x.shape()));
    }
    if (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(out_axis))) {
        throw std::invalid_argument(std::string(op) + ": bias " + shape_str(b.shape()) + " does not match kernel " +
                                    shape_str(w.shape()));
    }
    if (stride == 0) throw std::invalid_argument(std::string(op) + ": stride must be positive");
}

void add_bias(std::vector<double>& out, const Tensor& b, std::size_t n, std::size_t c, std::size_t hw) {
    if (!b.defined()) return;
    auto bd = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k) {
            double* p = out.data() + (i * c + k) * hw;
            for (std::size_t j = 0; j < hw; ++j) p[j] += bd[k];
        }
}

void bias_grad(const ImplPtr& bi, const std::vector<double>& gout, std::size_t n, std::size_t c, std::size_t hw) {
    if (!wants(bi)) return;
    auto& g = bi->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k) {
            const double* p = gout.data() + (i * c + k) * hw;
            double s = 0.0;
            for (std::size_t j = 0; j < hw; ++j) s += p[j];
            g[k] += s;
        }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    long span = static_cast<long>(in + 2 * pad) - static_cast<long>(kernel);
    if (span < 0 || stride == 0) {
        throw std::invalid_argument("conv2d: non-positive output size (in=" + std::to_string(in) +
                                    ", k=" + std::to_string(kernel) + ", pad=" + std::to_string(pad) + ")");
    }
    return static_cast<std::size_t>(span) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                                       std::size_t output_padding) {
    long out = static_cast<long>((in - 1) * stride + kernel + output_padding) - static_cast<long>(2 * pad);
    if (out <= 0) {
        throw std::invalid_argument("conv_transpose2d: non-positive output size (in=" + std::to_string(in) +
                                    ", k=" + std::to_string(kernel) + ", pad=" + std::to_string(pad) + ")");
    }
    return static_cast<std::size_t>(out);
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, Padding padding) {
    check_conv_args("conv2d", x, weight, bias, 1, 0, stride);
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    if (padding.mode == Padding::Mode::reflect && (padding.amount >= h || padding.amount >= w)) {
        throw std::invalid_argument("conv2d: reflect padding " + std::to_string(padding.amount) +
                                    " too large for input " + shape_str(x.shape()));
    }
    Geometry g{cin, h, w, k, stride, padding.amount, conv_output_size(h, k, stride, padding.amount),
               conv_output_size(w, k, stride, padding.amount), padding.mode};
    const std::size_t rows = g.rows(), cols = g.cols();
    std::vector<double> out(n * cout * cols);
    std::vector<double> col(rows * cols);
    ConstMapMat wm(weight.data().data(), cout, rows);
    for (std::size_t i = 0; i < n; ++i) {
        im2col(x.data().data() + i * cin * h * w, g, col.data());
        MapMat(out.data() + i * cout * cols, cout, cols).noalias() = wm * ConstMapMat(col.data(), rows, cols);
    }
    add_bias(out, bias, n, cout, cols);
    ImplPtr xi = x.impl(), wi = weight.impl(), bi = bias.defined() ? bias.impl() : nullptr;
    return make_result({n, cout, g.out_h, g.out_w}, std::move(out), "conv2d", {x, weight, bias},
                       [xi, wi, bi, g, n, cout](const TensorImpl& o) {
                           const std::size_t rows = g.rows(), cols = g.cols();
                           const std::size_t in_sz = g.channels * g.height * g.width;
                           std::vector<double> col(rows * cols);
                           ConstMapMat wm(wi->data.data(), cout, rows);
                           for (std::size_t i = 0; i < n; ++i) {
                               ConstMapMat go(o.grad.data() + i * cout * cols, cout, cols);
                               if (wants(wi)) {
                                   im2col(xi->data.data() + i * in_sz, g, col.data());
                                   MapMat(wi->ensure_grad().data(), cout, rows).noalias() +=
                                       go * ConstMapMat(col.data(), rows, cols).transpose();
                               }
                               if (wants(xi)) {
                                   MapMat(col.data(), rows, cols).noalias() = wm.transpose() * go;
                                   col2im(col.data(), g, xi->ensure_grad().data() + i * in_sz);
                               }
                           }
                           bias_grad(bi, o.grad, n, cout, cols);
                       });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        Padding padding, std::size_t output_padding) {
    check_conv_args("conv_transpose2d", x, weight, bias, 0, 1, stride);
    if (padding.mode != Padding::Mode::zeros) {
        throw std::invalid_argument("conv_transpose2d: only zero padding is supported");
    }
    if (output_padding >= stride) throw std::invalid_argument("conv_transpose2d: output_padding must be < stride");
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cout = weight.dim(1), k = weight.dim(2);
    const std::size_t oh = conv_transpose_output_size(h, k, stride, padding.amount, output_padding);
    const std::size_t ow = conv_transpose_output_size(w, k, stride, padding.amount, output_padding);
    // Geometry of the equivalent forward convolution mapping the output image back onto the input grid.
    Geometry g{cout, oh, ow, k, stride, padding.amount, h, w, Padding::Mode::zeros};
    if (conv_output_size(oh, k, stride, padding.amount) != h || conv_output_size(ow, k, stride, padding.amount) != w) {
        throw std::invalid_argument("conv_transpose2d: inconsistent geometry for input " + shape_str(x.shape()));
    }
    const std::size_t rows = g.rows(), cols = g.cols();
    std::vector<double> out(n * cout * oh * ow, 0.0);
    std::vector<double> col(rows * cols);
    ConstMapMat wm(weight.data().data(), cin, rows);
    for (std::size_t i = 0; i < n; ++i) {
        MapMat(col.data(), rows, cols).noalias() = wm.transpose() * ConstMapMat(x.data().data() + i * cin * cols, cin, cols);
        col2im(col.data(), g, out.data() + i * cout * oh * ow);
    }
    add_bias(out, bias, n, cout, oh * ow);
    ImplPtr xi = x.impl(), wi = weight.impl(), bi = bias.defined() ? bias.impl() : nullptr;
    return make_result({n, cout, oh, ow}, std::move(out), "conv_transpose2d", {x, weight, bias},
                       [xi, wi, bi, g, n, cin](const TensorImpl& o) {
                           const std::size_t rows = g.rows(), cols = g.cols();
                           const std::size_t out_sz = g.channels * g.height * g.width;
                           std::vector<double> col(rows * cols);
                           ConstMapMat wm(wi->data.data(), cin, rows);
                           for (std::size_t i = 0; i < n; ++i) {
                               im2col(o.grad.data() + i * out_sz, g, col.data());
                               ConstMapMat gc(col.data(), rows, cols);
                               if (wants(xi)) {
                                   MapMat(xi->ensure_grad().data() + i * cin * cols, cin, cols).noalias() += wm * gc;
                               }
                               if (wants(wi)) {
                                   MapMat(wi->ensure_grad().data(), cin, rows).noalias() +=
                                       ConstMapMat(xi->data.data() + i * cin * cols, cin, cols) * gc.transpose();
                               }
                           }
                           bias_grad(bi, o.grad, n, g.channels, g.height * g.width);
                       });
}

}  // namespace creagen
