#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "creagen/layers.hpp"
#include "json.hpp"

namespace creagen {

enum class Architecture { dcgan, stackgan2, stylegan };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

/// Everything needed to rebuild a generator/discriminator pair.
///
/// Widths are base channel counts. The reference tables use 64; the desk
/// default of 16 scales every layer by 1/4.
struct NetworkSpec {
    Architecture architecture = Architecture::dcgan;
    std::size_t canvas = 64;
    std::size_t latent_dim = 100;
    std::size_t gen_width = 16;
    std::size_t disc_width = 16;
    bool shape_branch = true;
    bool texture_branch = true;
    std::size_t num_shapes = 7;
    std::size_t num_textures = 7;
    std::uint64_t init_seed = 0;

    nlohmann::ordered_json to_json() const;
    static NetworkSpec from_json(const nlohmann::json& j);
    bool operator==(const NetworkSpec&) const = default;
};

struct DiscriminatorOutput {
    Tensor real_fake;       // [N]
    Tensor shape_logits;    // [N, K_s] or undefined
    Tensor texture_logits;  // [N, K_t] or undefined
};

class Generator {
   public:
    virtual ~Generator() = default;
    /// z [N, n_z]; mask [N, 1, S, S] in {-1, +1} for the mask-conditioned
    /// architecture, undefined otherwise. Returns [N, 3, S, S] in [-1, 1].
    virtual Tensor forward(const Tensor& z, const Tensor& mask, const ForwardContext& ctx) = 0;
    virtual bool needs_mask() const { return false; }
    virtual void collect(const std::string& prefix, ParameterList& out) = 0;

    ParameterList parameters(const std::string& prefix = "generator");
};

/// Latent -> fc -> reshape to 4x4 -> (convT k4 s2 p1, BN, ReLU)* -> convT -> tanh.
class DcganGenerator : public Generator {
   public:
    DcganGenerator(std::size_t canvas, std::size_t latent_dim, std::size_t width, Initializer& init);
    Tensor forward(const Tensor& z, const Tensor& mask, const ForwardContext& ctx) override;
    void collect(const std::string& prefix, ParameterList& out) override;

    Sequential net;
};

/// Image [N,3,s,s] -> [N,3,4s,4s]: conv k7 reflect(3), two stride-2 convs,
/// four residual blocks, four stride-2 transposed convs, conv k7 reflect(3), tanh.
class StackGanStage2 : public Module {
   public:
    StackGanStage2(std::size_t width, Initializer& init);
    Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
    Shape infer_shape(const Shape& in) const override;
    void collect(const std::string& prefix, ParameterList& out) override;
    std::string kind() const override { return "stackgan_stage2"; }

    Sequential net;
};

/// Unconditional two-stage generator: DCGAN at S/4 followed by stage 2.
class StackGanGenerator : public Generator {
   public:
    StackGanGenerator(std::size_t canvas, std::size_t latent_dim, std::size_t width, Initializer& init);
    Tensor forward(const Tensor& z, const Tensor& mask, const ForwardContext& ctx) override;
    void collect(const std::string& prefix, ParameterList& out) override;

    DcganGenerator stage1;
    StackGanStage2 stage2;
};

/// Mask branch (three k5 s2 convs) and style branch (fc -> reshape -> three
/// transposed convs) concatenated on channels at S/8, then conv k3 s1, conv k3 s2,
/// conv k3 s1, four k4 s2 transposed convs and a k5 s1 transposed conv to RGB.
class StyleGanGenerator : public Generator {
   public:
    StyleGanGenerator(std::size_t canvas, std::size_t latent_dim, std::size_t width, Initializer& init);
    Tensor forward(const Tensor& z, const Tensor& mask, const ForwardContext& ctx) override;
    bool needs_mask() const override { return true; }
    void collect(const std::string& prefix, ParameterList& out) override;

    std::size_t mask_channels() const { return mask_channels_; }
    std::size_t style_channels() const { return style_channels_; }

    Sequential mask_branch;
    Sequential style_branch;
    Sequential trunk;

   private:
    std::size_t canvas_, mask_channels_, style_channels_;
};

/// conv k4 s2 p1 trunk down to 4x4 with leaky ReLU(0.2) and BN on every conv
/// but the first, then one linear head per output.
class Discriminator {
   public:
    Discriminator(const NetworkSpec& spec, Initializer& init);
    DiscriminatorOutput forward(const Tensor& x, const ForwardContext& ctx);
    ParameterList parameters(const std::string& prefix = "discriminator");

    Sequential trunk;
    std::unique_ptr<Linear> real_fake_head, shape_head, texture_head;
};

std::unique_ptr<Generator> build_generator(const NetworkSpec& spec);
std::unique_ptr<DcganGenerator> build_dcgan_generator(const NetworkSpec& spec);
std::unique_ptr<StackGanStage2> build_stackgan_stage2(const NetworkSpec& spec);
std::unique_ptr<StyleGanGenerator> build_stylegan_generator(const NetworkSpec& spec);
std::unique_ptr<Discriminator> build_discriminator(const NetworkSpec& spec);

/// Samples [n, latent_dim] i.i.d. standard normal.
Tensor sample_latent(std::size_t n, std::size_t latent_dim, std::mt19937_64& rng);

}  // namespace creagen
