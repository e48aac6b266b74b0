#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "creagen/grad_check.hpp"
#include "creagen/ops.hpp"

namespace creagen {

/// Forward-pass settings shared by every layer of a network.
struct ForwardContext {
    NormMode mode = NormMode::train;
    /// When false, train-mode batch norm uses batch statistics without touching
    /// the running estimates (used when a network only serves as a critic).
    bool update_stats = true;
};

/// Parameter and buffer handles collected from a module tree, in build order.
struct ParameterList {
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> buffers;
};

class Module {
   public:
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& x, const ForwardContext& ctx) = 0;
    /// Output shape for an input shape, rejecting inconsistent chains.
    virtual Shape infer_shape(const Shape& in) const = 0;
    virtual void collect(const std::string& prefix, ParameterList& out) = 0;
    virtual std::string kind() const = 0;
};

using ModulePtr = std::unique_ptr<Module>;

/// N(0, 0.02) weight initializer; batch-norm scales draw from N(1, 0.02).
struct Initializer {
    std::mt19937_64 rng;
    explicit Initializer(std::uint64_t seed) : rng(seed) {}
    Tensor weight(Shape shape) { return Tensor::randn(std::move(shape), rng, 0.02, true); }
};

class Linear : public Module {
   public:
    Linear(std::size_t in, std::size_t out, bool bias, Initializer& init);
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "linear"; }

    Tensor weight, bias;
};

class Conv2d : public Module {
   public:
    Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, Padding padding, bool bias,
           Initializer& init);
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "conv"; }

    Tensor weight, bias;
    std::size_t stride;
    Padding padding;
};

class ConvTranspose2d : public Module {
   public:
    ConvTranspose2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad,
                    std::size_t output_padding, bool bias, Initializer& init);
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "convT"; }

    Tensor weight, bias;
    std::size_t stride, pad, output_padding;
};

class BatchNorm : public Module {
   public:
    BatchNorm(std::size_t channels, Initializer& init);
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "bn"; }

    Tensor gamma, beta;
    BatchNormStats stats;
};

class ActivationLayer : public Module {
   public:
    explicit ActivationLayer(Activation a) : act(a) {}
    Tensor forward(const Tensor& x, const ForwardContext&) override { return activate(x, act); }
    Shape infer_shape(const Shape& in) const override { return in; }
    void collect(const std::string&, ParameterList&) override {}
    std::string kind() const override { return "act"; }

    Activation act;
};

/// Reshapes [N, ...] to [N, tail...].
class Reshape : public Module {
   public:
    explicit Reshape(Shape tail) : tail(std::move(tail)) {}
    Tensor forward(const Tensor& x, const ForwardContext&) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string&, ParameterList&) override {}
    std::string kind() const override { return "reshape"; }

    Shape tail;
};

class Sequential : public Module {
   public:
    Sequential() = default;
    Sequential& add(ModulePtr m);
    template <class M, class... Args>
    Sequential& emplace(Args&&... args) {
        return add(std::make_unique<M>(std::forward<Args>(args)...));
    }

    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    /// Rejects the chain with the index of the first layer that cannot accept its input.
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "sequential"; }

    std::size_t size() const { return layers_.size(); }
    Module& operator[](std::size_t i) { return *layers_[i]; }

   private:
    std::vector<ModulePtr> layers_;
};

/// x + BN(conv3x3(ReLU(BN(conv3x3(x))))), reflect-padded, channel count preserved.
class ResidualBlock : public Module {
   public:
    ResidualBlock(std::size_t channels, Initializer& init);
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "resblock"; }

    Sequential body;
};

// Common blocks.
void append_conv_block(Sequential& seq, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                       Padding padding, bool norm, Activation act, Initializer& init);
void append_convT_block(Sequential& seq, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                        std::size_t pad, std::size_t output_padding, bool norm, Activation act, Initializer& init);

std::size_t count_parameters(const ParameterList& list);

}  // namespace creagen
