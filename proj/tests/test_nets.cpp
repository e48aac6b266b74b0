#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "creagen/checkpoint.hpp"
#include "creagen/nets.hpp"

using namespace creagen;
namespace fs = std::filesystem;

namespace {

NetworkSpec small_spec(Architecture a, std::size_t canvas) {
    NetworkSpec s;
    s.architecture = a;
    s.canvas = canvas;
    s.latent_dim = 10;
    s.gen_width = 4;
    s.disc_width = 4;
    s.init_seed = 5;
    return s;
}

Tensor random_masks(std::size_t n, std::size_t s, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::bernoulli_distribution c(0.5);
    std::vector<double> v(n * s * s);
    for (auto& x : v) x = c(g) ? -1.0 : 1.0;
    return Tensor({n, 1, s, s}, v);
}

std::size_t dcgan_param_oracle(std::size_t canvas, std::size_t nz, std::size_t w) {
    std::size_t ups = 0;
    while ((4u << ups) < canvas) ++ups;
    std::size_t c = w << (ups - 1);
    std::size_t n = nz * c * 16 + 2 * c;
    for (std::size_t i = 0; i + 1 < ups; ++i) {
        n += c * (c / 2) * 16 + 2 * (c / 2);
        c /= 2;
    }
    return n + c * 3 * 16 + 3;
}

std::size_t disc_param_oracle(std::size_t canvas, std::size_t w) {
    std::size_t in = 3, out = w, n = 0;
    for (std::size_t s = canvas, i = 0; s > 4; s /= 2, ++i) {
        n += in * out * 16 + (i == 0 ? out : 2 * out);
        in = out;
        out *= 2;
    }
    const std::size_t f = in * 16;
    return n + (f + 1) + 2 * (f * 7 + 7);
}

}  // namespace

TEST(Nets, DcganShapesAndRange) {
    for (std::size_t canvas : {16u, 32u, 64u}) {
        auto spec = small_spec(Architecture::dcgan, canvas);
        auto g = build_generator(spec);
        std::mt19937_64 rng(1);
        Tensor y = g->forward(sample_latent(3, 10, rng), Tensor(), {});
        ASSERT_EQ(y.shape(), (Shape{3, 3, canvas, canvas}));
        for (double v : y.data()) ASSERT_LE(std::fabs(v), 1.0);
        EXPECT_EQ(count_parameters(g->parameters()), dcgan_param_oracle(canvas, 10, 4)) << canvas;
    }
}

TEST(Nets, DiscriminatorHeadsAndParameters) {
    for (std::size_t canvas : {16u, 32u, 64u}) {
        auto spec = small_spec(Architecture::dcgan, canvas);
        auto d = build_discriminator(spec);
        std::mt19937_64 rng(2);
        auto out = d->forward(Tensor::uniform({3, 3, canvas, canvas}, rng, -1, 1), {});
        EXPECT_EQ(out.real_fake.shape(), (Shape{3}));
        EXPECT_EQ(out.shape_logits.shape(), (Shape{3, 7}));
        EXPECT_EQ(out.texture_logits.shape(), (Shape{3, 7}));
        EXPECT_EQ(count_parameters(d->parameters()), disc_param_oracle(canvas, 4)) << canvas;
    }
}

TEST(Nets, DisabledBranchesHaveNoHead) {
    auto spec = small_spec(Architecture::dcgan, 16);
    spec.shape_branch = false;
    auto d = build_discriminator(spec);
    std::mt19937_64 rng(2);
    auto out = d->forward(Tensor::uniform({2, 3, 16, 16}, rng, -1, 1), {});
    EXPECT_FALSE(out.shape_logits.defined());
    EXPECT_TRUE(out.texture_logits.defined());
}

TEST(Nets, StackGanShapes) {
    for (std::size_t canvas : {32u, 64u}) {
        auto g = build_generator(small_spec(Architecture::stackgan2, canvas));
        std::mt19937_64 rng(3);
        Tensor y = g->forward(sample_latent(2, 10, rng), Tensor(), {});
        EXPECT_EQ(y.shape(), (Shape{2, 3, canvas, canvas}));
    }
    auto s2 = build_stackgan_stage2(small_spec(Architecture::stackgan2, 64));
    EXPECT_EQ(s2->infer_shape({1, 3, 16, 16}), (Shape{1, 3, 64, 64}));
    EXPECT_THROW(s2->infer_shape({1, 3, 6, 6}), std::invalid_argument);
}

TEST(Nets, StyleGanShapesAndMaskValidation) {
    for (std::size_t canvas : {32u, 64u}) {
        auto g = build_generator(small_spec(Architecture::stylegan, canvas));
        EXPECT_TRUE(g->needs_mask());
        std::mt19937_64 rng(4);
        Tensor y = g->forward(sample_latent(2, 10, rng), random_masks(2, canvas, 1), {});
        EXPECT_EQ(y.shape(), (Shape{2, 3, canvas, canvas}));
        EXPECT_THROW(g->forward(sample_latent(2, 10, rng), Tensor(), {}), std::invalid_argument);
        EXPECT_THROW(g->forward(sample_latent(3, 10, rng), random_masks(2, canvas, 1), {}), std::invalid_argument);
    }
    auto g = build_stylegan_generator(small_spec(Architecture::stylegan, 32));
    EXPECT_EQ(g->mask_channels(), 16u);
    EXPECT_EQ(g->style_channels(), 4u);
}

TEST(Nets, CanvasValidation) {
    EXPECT_THROW(build_generator(small_spec(Architecture::stylegan, 16)), std::invalid_argument);
    EXPECT_THROW(build_discriminator(small_spec(Architecture::dcgan, 48)), std::invalid_argument);
    EXPECT_THROW(build_discriminator(small_spec(Architecture::dcgan, 1024)), std::invalid_argument);
}

TEST(Nets, SameSeedSameWeights) {
    auto spec = small_spec(Architecture::dcgan, 32);
    auto a = build_generator(spec), b = build_generator(spec);
    auto pa = a->parameters(), pb = b->parameters();
    ASSERT_EQ(pa.params.size(), pb.params.size());
    for (std::size_t i = 0; i < pa.params.size(); ++i) {
        EXPECT_EQ(pa.params[i].name, pb.params[i].name);
        EXPECT_TRUE(std::equal(pa.params[i].tensor.data().begin(), pa.params[i].tensor.data().end(),
                               pb.params[i].tensor.data().begin()));
    }
    spec.init_seed = 6;
    auto c = build_generator(spec);
    EXPECT_FALSE(std::equal(pa.params[0].tensor.data().begin(), pa.params[0].tensor.data().end(),
                            c->parameters().params[0].tensor.data().begin()));
}

TEST(Nets, ParameterNamesArePrefixed) {
    auto g = build_generator(small_spec(Architecture::stylegan, 32));
    for (const auto& p : g->parameters().params) EXPECT_EQ(p.name.rfind("generator.", 0), 0u) << p.name;
    auto d = build_discriminator(small_spec(Architecture::dcgan, 32));
    for (const auto& p : d->parameters().params) EXPECT_EQ(p.name.rfind("discriminator.", 0), 0u) << p.name;
}

TEST(Nets, SpecJsonRoundTrip) {
    auto s = small_spec(Architecture::stackgan2, 64);
    EXPECT_EQ(NetworkSpec::from_json(s.to_json()), s);
    EXPECT_EQ(architecture_from_string("stylegan"), Architecture::stylegan);
    EXPECT_THROW(architecture_from_string("vae"), std::exception);
}

TEST(Checkpoint, ByteExactRoundTrip) {
    std::mt19937_64 g(6);
    std::vector<NamedTensor> ts{{"a", Tensor::randn({2, 3}, g)}, {"b.c", Tensor::randn({4}, g)},
                                {"s", Tensor::scalar(2.5)}};
    for (auto& t : ts)
        for (auto& v : t.tensor.mutable_data()) v = static_cast<float>(v);
    nlohmann::ordered_json h = {{"format", "test"}, {"n", 3}};
    auto bytes = encode_checkpoint(h, ts);
    ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 8), std::string("CREAGEN\0", 8));
    auto ck = decode_checkpoint(bytes);
    EXPECT_EQ(ck.header, h);
    ASSERT_EQ(ck.tensors.size(), 3u);
    EXPECT_EQ(ck.find("b.c").shape(), (Shape{4}));
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(ck.tensors[i].name, ts[i].name);
        EXPECT_TRUE(std::equal(ck.tensors[i].tensor.data().begin(), ck.tensors[i].tensor.data().end(),
                               ts[i].tensor.data().begin()));
    }
    EXPECT_EQ(encode_checkpoint(ck.header, ck.tensors), bytes);
}

TEST(Checkpoint, LittleEndianLayout) {
    auto bytes = encode_checkpoint({}, {{"x", Tensor({1}, {1.0})}});
    // version 1 right after the magic
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[9], 0);
    // last four bytes hold float 1.0f = 0x3f800000 little-endian
    const std::size_t n = bytes.size();
    EXPECT_EQ(bytes[n - 4], 0x00);
    EXPECT_EQ(bytes[n - 1], 0x3f);
}

TEST(Checkpoint, CorruptInputsRejected) {
    auto bytes = encode_checkpoint({{"k", 1}}, {{"x", Tensor({2}, {1.0, 2.0})}});
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), std::exception);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(decode_checkpoint(truncated), std::exception);
}

TEST(Checkpoint, SaveLoadAndRestore) {
    auto dir = fs::temp_directory_path() / "creagen_ckpt_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto spec = small_spec(Architecture::dcgan, 16);
    auto g = build_generator(spec);
    auto params = g->parameters().params;
    save_checkpoint(dir / "g.bin", spec.to_json(), params);
    auto ck = load_checkpoint(dir / "g.bin");
    spec.init_seed = 99;
    auto h = build_generator(spec);
    auto targets = h->parameters().params;
    restore_tensors(ck, targets);
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t j = 0; j < params[i].tensor.numel(); ++j)
            EXPECT_EQ(targets[i].tensor.data()[j], static_cast<float>(params[i].tensor.data()[j]));
    std::vector<NamedTensor> wrong{{params[0].name, Tensor::zeros({1})}};
    EXPECT_THROW(restore_tensors(ck, wrong), std::exception);
    std::vector<NamedTensor> missing{{"nope", Tensor::zeros({1})}};
    EXPECT_THROW(restore_tensors(ck, missing), std::exception);
    fs::remove_all(dir);
}
