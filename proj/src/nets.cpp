#include "creagen/nets.hpp"

#include "creagen/seed.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace creagen {

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::dcgan: return "dcgan";
        case Architecture::stackgan2: return "stackgan2";
        case Architecture::stylegan: return "stylegan";
    }
    return "unknown";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "dcgan") return Architecture::dcgan;
    if (s == "stackgan2") return Architecture::stackgan2;
    if (s == "stylegan") return Architecture::stylegan;
    throw std::invalid_argument("unknown architecture '" + s + "' (expected dcgan, stackgan2 or stylegan)");
}

nlohmann::ordered_json NetworkSpec::to_json() const {
    return {{"architecture", to_string(architecture)},
            {"canvas", canvas},
            {"latent_dim", latent_dim},
            {"gen_width", gen_width},
            {"disc_width", disc_width},
            {"shape_branch", shape_branch},
            {"texture_branch", texture_branch},
            {"num_shapes", num_shapes},
            {"num_textures", num_textures},
            {"init_seed", init_seed}};
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.architecture = architecture_from_string(j.value("architecture", std::string("dcgan")));
    s.canvas = j.value("canvas", s.canvas);
    s.latent_dim = j.value("latent_dim", s.latent_dim);
    s.gen_width = j.value("gen_width", s.gen_width);
    s.disc_width = j.value("disc_width", s.disc_width);
    s.shape_branch = j.value("shape_branch", s.shape_branch);
    s.texture_branch = j.value("texture_branch", s.texture_branch);
    s.num_shapes = j.value("num_shapes", s.num_shapes);
    s.num_textures = j.value("num_textures", s.num_textures);
    s.init_seed = j.value("init_seed", s.init_seed);
    return s;
}

namespace {

std::size_t log2_exact(std::size_t v) { return static_cast<std::size_t>(std::countr_zero(v)); }

void check_canvas(std::size_t canvas, std::size_t lo, const char* what) {
    if (!std::has_single_bit(canvas) || canvas < lo || canvas > 512) {
        throw std::invalid_argument(std::string(what) + ": canvas must be a power of two in [" + std::to_string(lo) +
                                    ", 512], got " + std::to_string(canvas));
    }
}

void check_chain(const Module& m, const Shape& in, const Shape& expected, const char* what) {
    Shape out;
    try {
        out = m.infer_shape(in);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(what) + ": inconsistent layer chain: " + e.what());
    }
    if (out != expected) {
        throw std::invalid_argument(std::string(what) + ": produces " + shape_str(out) + ", declared " +
                                    shape_str(expected));
    }
}

}  // namespace

ParameterList Generator::parameters(const std::string& prefix) {
    ParameterList list;
    collect(prefix, list);
    return list;
}

DcganGenerator::DcganGenerator(std::size_t canvas, std::size_t latent_dim, std::size_t width, Initializer& init) {
    if (!std::has_single_bit(canvas) || canvas < 8) {
        throw std::invalid_argument("dcgan generator: canvas must be a power of two >= 8");
    }
    const std::size_t ups = log2_exact(canvas / 4);
    std::size_t ch = width << (ups - 1);
    net.emplace<Linear>(latent_dim, ch * 16, false, init);
    net.emplace<Reshape>(Shape{ch, 4, 4});
    net.emplace<BatchNorm>(ch, init);
    net.emplace<ActivationLayer>(Activation::relu);
    for (std::size_t i = 0; i + 1 < ups; ++i) {
        append_convT_block(net, ch, ch / 2, 4, 2, 1, 0, true, Activation::relu, init);
        ch /= 2;
    }
    append_convT_block(net, ch, 3, 4, 2, 1, 0, false, Activation::tanh, init);
    check_chain(net, {2, latent_dim}, {2, 3, canvas, canvas}, "dcgan generator");
}

Tensor DcganGenerator::forward(const Tensor& z, const Tensor&, const ForwardContext& ctx) { return net.forward(z, ctx); }

void DcganGenerator::collect(const std::string& prefix, ParameterList& out) { net.collect(prefix, out); }

StackGanStage2::StackGanStage2(std::size_t w, Initializer& init) {
    append_conv_block(net, 3, w, 7, 1, Padding::reflect(3), true, Activation::relu, init);
    append_conv_block(net, w, 2 * w, 3, 2, Padding::zeros(1), true, Activation::relu, init);
    append_conv_block(net, 2 * w, 2 * w, 3, 2, Padding::zeros(1), true, Activation::relu, init);
    for (int i = 0; i < 4; ++i) net.emplace<ResidualBlock>(2 * w, init);
    append_convT_block(net, 2 * w, 4 * w, 3, 2, 1, 1, true, Activation::relu, init);
    append_convT_block(net, 4 * w, 4 * w, 3, 2, 1, 1, true, Activation::relu, init);
    append_convT_block(net, 4 * w, 2 * w, 3, 2, 1, 1, true, Activation::relu, init);
    append_convT_block(net, 2 * w, w, 3, 2, 1, 1, true, Activation::relu, init);
    append_conv_block(net, w, 3, 7, 1, Padding::reflect(3), false, Activation::tanh, init);
}

Tensor StackGanStage2::forward(const Tensor& x, const ForwardContext& ctx) { return net.forward(x, ctx); }

Shape StackGanStage2::infer_shape(const Shape& in) const {
    if (in.size() != 4 || in[2] % 4 != 0 || in[3] % 4 != 0) {
        throw std::invalid_argument("stackgan stage 2: input side must be divisible by 4, got " + shape_str(in));
    }
    return net.infer_shape(in);
}

void StackGanStage2::collect(const std::string& prefix, ParameterList& out) { net.collect(prefix, out); }

StackGanGenerator::StackGanGenerator(std::size_t canvas, std::size_t latent_dim, std::size_t width, Initializer& init)
    : stage1(canvas / 4, latent_dim, width, init), stage2(width, init) {
    check_chain(stage2, {2, 3, canvas / 4, canvas / 4}, {2, 3, canvas, canvas}, "stackgan stage 2");
}

Tensor StackGanGenerator::forward(const Tensor& z, const Tensor& mask, const ForwardContext& ctx) {
    return stage2.forward(stage1.forward(z, mask, ctx), ctx);
}

void StackGanGenerator::collect(const std::string& prefix, ParameterList& out) {
    stage1.collect(prefix + ".stage1", out);
    stage2.collect(prefix + ".stage2", out);
}

StyleGanGenerator::StyleGanGenerator(std::size_t canvas, std::size_t latent_dim, std::size_t w, Initializer& init)
    : canvas_(canvas), mask_channels_(4 * w), style_channels_(w) {
    check_canvas(canvas, 32, "stylegan generator");
    append_conv_block(mask_branch, 1, w, 5, 2, Padding::zeros(2), true, Activation::leaky_relu, init);
    append_conv_block(mask_branch, w, 2 * w, 5, 2, Padding::zeros(2), true, Activation::leaky_relu, init);
    append_conv_block(mask_branch, 2 * w, 4 * w, 5, 2, Padding::zeros(2), true, Activation::leaky_relu, init);

    // The style grid starts at S/64 (4x4 at S=256) and doubles up to S/8; once
    // there, remaining transposed convs keep the size (k3 s1 p1).
    const std::size_t target = canvas / 8;
    std::size_t side = std::max<std::size_t>(1, canvas / 64);
    style_branch.emplace<Linear>(latent_dim, w * side * side, false, init);
    style_branch.emplace<Reshape>(Shape{w, side, side});
    style_branch.emplace<BatchNorm>(w, init);
    style_branch.emplace<ActivationLayer>(Activation::relu);
    for (int i = 0; i < 3; ++i) {
        if (side < target) {
            append_convT_block(style_branch, w, w, 4, 2, 1, 0, true, Activation::relu, init);
            side *= 2;
        } else {
            append_convT_block(style_branch, w, w, 3, 1, 1, 0, true, Activation::relu, init);
        }
    }

    append_conv_block(trunk, 5 * w, 4 * w, 3, 1, Padding::zeros(1), true, Activation::leaky_relu, init);
    append_conv_block(trunk, 4 * w, 8 * w, 3, 2, Padding::zeros(1), true, Activation::leaky_relu, init);
    append_conv_block(trunk, 8 * w, 8 * w, 3, 1, Padding::zeros(1), true, Activation::leaky_relu, init);
    append_convT_block(trunk, 8 * w, 4 * w, 4, 2, 1, 0, true, Activation::relu, init);
    append_convT_block(trunk, 4 * w, 2 * w, 4, 2, 1, 0, true, Activation::relu, init);
    append_convT_block(trunk, 2 * w, 2 * w, 4, 2, 1, 0, true, Activation::relu, init);
    append_convT_block(trunk, 2 * w, w, 4, 2, 1, 0, true, Activation::relu, init);
    append_convT_block(trunk, w, 3, 5, 1, 2, 0, false, Activation::tanh, init);

    Shape mask_out, style_out;
    try {
        mask_out = mask_branch.infer_shape({2, 1, canvas, canvas});
        style_out = style_branch.infer_shape({2, latent_dim});
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("stylegan generator: inconsistent layer chain: ") + e.what());
    }
    if (mask_out[2] != style_out[2] || mask_out[3] != style_out[3]) {
        throw std::invalid_argument("stylegan generator: branch sizes differ at concat: mask " + shape_str(mask_out) +
                                    " vs style " + shape_str(style_out));
    }
    check_chain(trunk, {2, mask_out[1] + style_out[1], mask_out[2], mask_out[3]}, {2, 3, canvas, canvas},
                "stylegan generator");
}

Tensor StyleGanGenerator::forward(const Tensor& z, const Tensor& mask, const ForwardContext& ctx) {
    if (!mask.defined()) throw std::invalid_argument("stylegan generator: a mask input is required");
    if (mask.rank() != 4 || mask.dim(1) != 1 || mask.dim(2) != canvas_ || mask.dim(3) != canvas_) {
        throw std::invalid_argument("stylegan generator: mask must be [N,1," + std::to_string(canvas_) + "," +
                                    std::to_string(canvas_) + "], got " + shape_str(mask.shape()));
    }
    if (mask.dim(0) != z.dim(0)) {
        throw std::invalid_argument("stylegan generator: " + std::to_string(mask.dim(0)) + " masks for " +
                                    std::to_string(z.dim(0)) + " latents");
    }
    std::vector<Tensor> parts{mask_branch.forward(mask, ctx), style_branch.forward(z, ctx)};
    return trunk.forward(concat(parts, 1), ctx);
}

void StyleGanGenerator::collect(const std::string& prefix, ParameterList& out) {
    mask_branch.collect(prefix + ".mask", out);
    style_branch.collect(prefix + ".style", out);
    trunk.collect(prefix + ".trunk", out);
}

Discriminator::Discriminator(const NetworkSpec& spec, Initializer& init) {
    check_canvas(spec.canvas, 16, "discriminator");
    const std::size_t downs = log2_exact(spec.canvas / 4);
    std::size_t in = 3, out = spec.disc_width;
    for (std::size_t i = 0; i < downs; ++i) {
        append_conv_block(trunk, in, out, 4, 2, Padding::zeros(1), i > 0, Activation::leaky_relu, init);
        in = out;
        out *= 2;
    }
    const std::size_t features = in * 16;
    check_chain(trunk, {2, 3, spec.canvas, spec.canvas}, {2, in, 4, 4}, "discriminator");
    real_fake_head = std::make_unique<Linear>(features, 1, true, init);
    if (spec.shape_branch) shape_head = std::make_unique<Linear>(features, spec.num_shapes, true, init);
    if (spec.texture_branch) texture_head = std::make_unique<Linear>(features, spec.num_textures, true, init);
}

DiscriminatorOutput Discriminator::forward(const Tensor& x, const ForwardContext& ctx) {
    Tensor h = flatten(trunk.forward(x, ctx));
    DiscriminatorOutput out;
    out.real_fake = reshape(real_fake_head->forward(h, ctx), {x.dim(0)});
    if (shape_head) out.shape_logits = shape_head->forward(h, ctx);
    if (texture_head) out.texture_logits = texture_head->forward(h, ctx);
    return out;
}

ParameterList Discriminator::parameters(const std::string& prefix) {
    ParameterList list;
    trunk.collect(prefix + ".trunk", list);
    real_fake_head->collect(prefix + ".real_fake", list);
    if (shape_head) shape_head->collect(prefix + ".shape", list);
    if (texture_head) texture_head->collect(prefix + ".texture", list);
    return list;
}

std::unique_ptr<DcganGenerator> build_dcgan_generator(const NetworkSpec& spec) {
    check_canvas(spec.canvas, 16, "dcgan generator");
    Initializer init(spec.init_seed);
    return std::make_unique<DcganGenerator>(spec.canvas, spec.latent_dim, spec.gen_width, init);
}

std::unique_ptr<StackGanStage2> build_stackgan_stage2(const NetworkSpec& spec) {
    check_canvas(spec.canvas, 32, "stackgan stage 2");
    Initializer init(spec.init_seed);
    auto net = std::make_unique<StackGanStage2>(spec.gen_width, init);
    check_chain(*net, {2, 3, spec.canvas / 4, spec.canvas / 4}, {2, 3, spec.canvas, spec.canvas}, "stackgan stage 2");
    return net;
}

std::unique_ptr<StyleGanGenerator> build_stylegan_generator(const NetworkSpec& spec) {
    Initializer init(spec.init_seed);
    return std::make_unique<StyleGanGenerator>(spec.canvas, spec.latent_dim, spec.gen_width, init);
}

std::unique_ptr<Generator> build_generator(const NetworkSpec& spec) {
    switch (spec.architecture) {
        case Architecture::dcgan: return build_dcgan_generator(spec);
        case Architecture::stylegan: return build_stylegan_generator(spec);
        case Architecture::stackgan2: {
            check_canvas(spec.canvas, 32, "stackgan generator");
            Initializer init(spec.init_seed);
            return std::make_unique<StackGanGenerator>(spec.canvas, spec.latent_dim, spec.gen_width, init);
        }
    }
    throw std::invalid_argument("build_generator: unknown architecture");
}

std::unique_ptr<Discriminator> build_discriminator(const NetworkSpec& spec) {
    Initializer init(derive_seed(spec.init_seed, {1}));
    return std::make_unique<Discriminator>(spec, init);
}

Tensor sample_latent(std::size_t n, std::size_t latent_dim, std::mt19937_64& rng) {
    return Tensor::randn({n, latent_dim}, rng);
}

}  // namespace creagen
