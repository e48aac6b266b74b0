#include "creagen/layers.hpp"

#include <stdexcept>

namespace creagen {

namespace {
void require_rank(const Shape& in, std::size_t rank, const char* layer) {
    if (in.size() != rank) {
        throw std::invalid_argument(std::string(layer) + ": expected rank-" + std::to_string(rank) + " input, got " +
                                    shape_str(in));
    }
}
}  // namespace

Linear::Linear(std::size_t in, std::size_t out, bool with_bias, Initializer& init)
    : weight(init.weight({out, in})) {
    if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Linear::forward(const Tensor& x, const ForwardContext&) { return linear(x, weight, bias); }

Shape Linear::infer_shape(const Shape& in) const {
    require_rank(in, 2, "linear");
    if (in[1] != weight.dim(1)) {
        throw std::invalid_argument("linear: input " + shape_str(in) + " does not match weight " +
                                    shape_str(weight.shape()));
    }
    return {in[0], weight.dim(0)};
}

void Linear::collect(const std::string& prefix, ParameterList& out) {
    out.params.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.params.push_back({prefix + ".bias", bias});
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride_, Padding padding_,
               bool with_bias, Initializer& init)
    : weight(init.weight({out, in, kernel, kernel})), stride(stride_), padding(padding_) {
    if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Conv2d::forward(const Tensor& x, const ForwardContext&) { return conv2d(x, weight, bias, stride, padding); }

Shape Conv2d::infer_shape(const Shape& in) const {
    require_rank(in, 4, "conv");
    if (in[1] != weight.dim(1)) {
        throw std::invalid_argument("conv: input " + shape_str(in) + " does not match kernel " +
                                    shape_str(weight.shape()));
    }
    if (padding.mode == Padding::Mode::reflect && (padding.amount >= in[2] || padding.amount >= in[3])) {
        throw std::invalid_argument("conv: reflect padding too large for input " + shape_str(in));
    }
    const std::size_t k = weight.dim(2);
    return {in[0], weight.dim(0), conv_output_size(in[2], k, stride, padding.amount),
            conv_output_size(in[3], k, stride, padding.amount)};
}

void Conv2d::collect(const std::string& prefix, ParameterList& out) {
    out.params.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.params.push_back({prefix + ".bias", bias});
}

ConvTranspose2d::ConvTranspose2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride_,
                                 std::size_t pad_, std::size_t output_padding_, bool with_bias, Initializer& init)
    : weight(init.weight({in, out, kernel, kernel})), stride(stride_), pad(pad_), output_padding(output_padding_) {
    if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor ConvTranspose2d::forward(const Tensor& x, const ForwardContext&) {
    return conv_transpose2d(x, weight, bias, stride, Padding::zeros(pad), output_padding);
}

Shape ConvTranspose2d::infer_shape(const Shape& in) const {
    require_rank(in, 4, "convT");
    if (in[1] != weight.dim(0)) {
        throw std::invalid_argument("convT: input " + shape_str(in) + " does not match kernel " +
                                    shape_str(weight.shape()));
    }
    const std::size_t k = weight.dim(2);
    return {in[0], weight.dim(1), conv_transpose_output_size(in[2], k, stride, pad, output_padding),
            conv_transpose_output_size(in[3], k, stride, pad, output_padding)};
}

void ConvTranspose2d::collect(const std::string& prefix, ParameterList& out) {
    out.params.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.params.push_back({prefix + ".bias", bias});
}

BatchNorm::BatchNorm(std::size_t channels, Initializer& init)
    : gamma(Tensor::randn({channels}, init.rng, 0.02, false)),
      beta(Tensor::zeros({channels}, true)),
      stats(BatchNormStats::fresh(channels)) {
    for (auto& g : gamma.mutable_data()) g += 1.0;
    gamma.set_requires_grad(true);
}

Tensor BatchNorm::forward(const Tensor& x, const ForwardContext& ctx) {
    return batch_norm(x, gamma, beta, stats, ctx.mode, ctx.update_stats);
}

Shape BatchNorm::infer_shape(const Shape& in) const {
    if ((in.size() != 2 && in.size() != 4) || in[1] != gamma.dim(0)) {
        throw std::invalid_argument("bn: input " + shape_str(in) + " does not match " +
                                    std::to_string(gamma.dim(0)) + " channels");
    }
    return in;
}

void BatchNorm::collect(const std::string& prefix, ParameterList& out) {
    out.params.push_back({prefix + ".gamma", gamma});
    out.params.push_back({prefix + ".beta", beta});
    out.buffers.push_back({prefix + ".running_mean", stats.running_mean});
    out.buffers.push_back({prefix + ".running_var", stats.running_var});
}

Tensor Reshape::forward(const Tensor& x, const ForwardContext&) {
    Shape s{x.dim(0)};
    s.insert(s.end(), tail.begin(), tail.end());
    return reshape(x, s);
}

Shape Reshape::infer_shape(const Shape& in) const {
    Shape s{in.at(0)};
    s.insert(s.end(), tail.begin(), tail.end());
    if (shape_numel(s) != shape_numel(in)) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(in) + " as " + shape_str(s));
    }
    return s;
}

Sequential& Sequential::add(ModulePtr m) {
    layers_.push_back(std::move(m));
    return *this;
}

Tensor Sequential::forward(const Tensor& x, const ForwardContext& ctx) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, ctx);
    return h;
}

Shape Sequential::infer_shape(const Shape& in) const {
    Shape s = in;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            s = layers_[i]->infer_shape(s);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("layer " + std::to_string(i) + " (" + layers_[i]->kind() + "): " + e.what());
        }
    }
    return s;
}

void Sequential::collect(const std::string& prefix, ParameterList& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(prefix + "." + std::to_string(i), out);
}

ResidualBlock::ResidualBlock(std::size_t channels, Initializer& init) {
    append_conv_block(body, channels, channels, 3, 1, Padding::reflect(1), true, Activation::relu, init);
    append_conv_block(body, channels, channels, 3, 1, Padding::reflect(1), true, Activation::identity, init);
}

Tensor ResidualBlock::forward(const Tensor& x, const ForwardContext& ctx) { return add(x, body.forward(x, ctx)); }

Shape ResidualBlock::infer_shape(const Shape& in) const {
    Shape out = body.infer_shape(in);
    if (out != in) throw std::invalid_argument("resblock: body maps " + shape_str(in) + " to " + shape_str(out));
    return out;
}

void ResidualBlock::collect(const std::string& prefix, ParameterList& out) { body.collect(prefix, out); }

void append_conv_block(Sequential& seq, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                       Padding padding, bool norm, Activation act, Initializer& init) {
    seq.emplace<Conv2d>(in, out, kernel, stride, padding, !norm, init);
    if (norm) seq.emplace<BatchNorm>(out, init);
    if (act != Activation::identity) seq.emplace<ActivationLayer>(act);
}

void append_convT_block(Sequential& seq, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                        std::size_t pad, std::size_t output_padding, bool norm, Activation act, Initializer& init) {
    seq.emplace<ConvTranspose2d>(in, out, kernel, stride, pad, output_padding, !norm, init);
    if (norm) seq.emplace<BatchNorm>(out, init);
    if (act != Activation::identity) seq.emplace<ActivationLayer>(act);
}

std::size_t count_parameters(const ParameterList& list) {
    std::size_t n = 0;
    for (const auto& p : list.params) n += p.tensor.numel();
    return n;
}

}  // namespace creagen
