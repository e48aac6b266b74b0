#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "creagen/ops.hpp"
#include "creagen/trainer.hpp"

using namespace creagen;
namespace fs = std::filesystem;

namespace {

const LabeledDataset& tiny_data() {
    static const LabeledDataset ds = generate_dataset({49, 32, 1, 21, 1});
    return ds;
}

TrainConfig tiny_config(Architecture a = Architecture::dcgan) {
    TrainConfig c;
    c.net.architecture = a;
    c.net.canvas = 32;
    c.net.latent_dim = 8;
    c.net.gen_width = 4;
    c.net.disc_width = 4;
    c.net.init_seed = 3;
    c.batch_size = 4;
    c.iterations = 3;
    c.checkpoint_interval = 1;
    c.seed = 17;
    return c;
}

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("creagen_trainer_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

double log_sigmoid_ref(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace

TEST(TrainConfig, JsonRoundTripAndUnknownKeys) {
    auto c = tiny_config();
    c.creativity = CreativityMode::sm;
    c.sm_alpha = 2.0;
    auto back = TrainConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    nlohmann::json j = {{"lamda_Ge", 1.0}};
    try {
        TrainConfig::from_json(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "lamda_Ge");
    }
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"creativity", "huge"}}), ConfigError);
    EXPECT_THROW(TrainConfig::from_json(nlohmann::json{{"iterations", -3}}), ConfigError);
    // Seeds use the full unsigned 64-bit range.
    EXPECT_EQ(TrainConfig::from_json(nlohmann::json{{"seed", 0xFFFFFFFFFFFFFFFFULL}}).seed, 0xFFFFFFFFFFFFFFFFULL);
}

TEST(TrainConfig, ValidationNamesField) {
    auto expect_field = [](TrainConfig c, const std::string& field) {
        try {
            c.validate();
            FAIL() << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    auto c = tiny_config();
    c.lambda_Ge = -1;
    expect_field(c, "lambda_Ge");
    c = tiny_config();
    c.batch_size = 1;
    expect_field(c, "batch_size");
    c = tiny_config();
    c.creativity = CreativityMode::sm;
    c.sm_alpha = 1.0;
    expect_field(c, "sm_alpha");
    c = tiny_config();
    c.creativity = CreativityMode::mce;
    c.creativity_branch = CreativityBranch::shape;
    c.net.shape_branch = false;
    expect_field(c, "creativity_branch");
    EXPECT_NO_THROW(tiny_config().validate());
}

TEST(TrainConfig, Defaults) {
    TrainConfig c;
    EXPECT_EQ(c.lr, 0.002);
    EXPECT_EQ(c.adam_beta1, 0.5);
    EXPECT_EQ(c.batch_size, 64u);
    EXPECT_EQ(c.lambda_Dr, 1.0);
    EXPECT_EQ(c.lambda_Db, 1.0);
}

TEST(Adam, FirstTwoStepsMatchClosedForm) {
    Tensor p({2}, {1.0, -2.0}, true);
    Adam opt({p}, 0.1, 0.5, 0.999, 1e-8);
    const double g1[2] = {0.3, -4.0}, g2[2] = {-0.1, 1.0};
    double ref[2] = {1.0, -2.0};
    double m[2] = {0, 0}, v[2] = {0, 0};
    for (int step = 1; step <= 2; ++step) {
        const double* g = step == 1 ? g1 : g2;
        p.zero_grad();
        sum(p * Tensor({2}, {g[0], g[1]})).backward();
        opt.step();
        for (int i = 0; i < 2; ++i) {
            m[i] = 0.5 * m[i] + 0.5 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(0.5, step)), vh = v[i] / (1 - std::pow(0.999, step));
            ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
            EXPECT_NEAR(p.data()[i], ref[i], 1e-14);
        }
    }
    EXPECT_EQ(opt.steps(), 2u);
}

TEST(Batch, EncodingOfImagesAndMasks) {
    const auto& ds = tiny_data();
    Batch b = make_batch(ds, {0, 1}, true);
    ASSERT_EQ(b.images.shape(), (Shape{2, 3, 32, 32}));
    ASSERT_EQ(b.masks.shape(), (Shape{2, 1, 32, 32}));
    const auto& it = ds.entries[1].item;
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            const std::size_t px = y * 32 + x;
            EXPECT_EQ(b.masks.data()[1024 + px], it.mask[px] ? -1.0 : 1.0);
            EXPECT_NEAR(b.images.data()[3 * 1024 + 1024 + px], it.pixel(y, x, 1) * 2 - 1, 1e-15);
        }
    EXPECT_EQ(b.shape_labels[1], it.shape_label);
}

TEST(Steps, DiscriminatorLossMatchesDirectFormula) {
    auto cfg = tiny_config();
    cfg.lambda_Dr = 0.7;
    cfg.lambda_Db = 1.3;
    GanModel model(cfg.net);
    Batch real = make_batch(tiny_data(), {0, 1, 2, 3}, false);
    std::mt19937_64 rng(1);
    Tensor fake = Tensor::uniform({4, 3, 32, 32}, rng, -1, 1);

    // Oracle on a copy of the same discriminator, before any update.
    GanModel ref(cfg.net);
    ForwardContext ctx{NormMode::train, true};
    auto r = ref.discriminator->forward(real.images, ctx);
    auto f = ref.discriminator->forward(fake, ctx);
    double adv = 0.0, cls = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        adv -= log_sigmoid_ref(r.real_fake.data()[i]) + log_sigmoid_ref(-f.real_fake.data()[i]);
        for (const auto& [logits, labels] :
             {std::pair{r.shape_logits, real.shape_labels}, std::pair{r.texture_logits, real.texture_labels}}) {
            auto row = logits.data().subspan(i * 7, 7);
            double m = row[0], s = 0.0;
            for (double v : row) m = std::max(m, v);
            for (double v : row) s += std::exp(v - m);
            cls -= row[labels[i]] - m - std::log(s);
        }
    }
    std::vector<Tensor> dp;
    for (auto& p : model.disc_params.params) dp.push_back(p.tensor);
    Adam opt(dp, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    auto s = discriminator_step(model, opt, real, fake, cfg);
    EXPECT_NEAR(s.adversarial, 0.7 * adv, 1e-10);
    EXPECT_NEAR(s.classification, 1.3 * cls, 1e-10);
    EXPECT_NEAR(s.total, 0.7 * adv + 1.3 * cls, 1e-10);
    EXPECT_GT(s.grad_norm, 0.0);
}

TEST(Steps, GeneratorStepTouchesOnlyGenerator) {
    auto cfg = tiny_config();
    cfg.creativity = CreativityMode::mce;
    cfg.lambda_Ge = 2.0;
    GanModel model(cfg.net);
    std::vector<double> before;
    for (auto& p : model.disc_params.params)
        before.insert(before.end(), p.tensor.data().begin(), p.tensor.data().end());
    std::vector<Tensor> gp;
    for (auto& p : model.gen_params.params) gp.push_back(p.tensor);
    Adam opt(gp, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    std::mt19937_64 rng(2);
    auto s = generator_step(model, opt, sample_latent(4, 8, rng), Tensor(), cfg);
    EXPECT_GT(s.creativity, 0.0);
    EXPECT_NEAR(s.total, s.adversarial + s.creativity, 1e-10);
    std::vector<double> after;
    for (auto& p : model.disc_params.params)
        after.insert(after.end(), p.tensor.data().begin(), p.tensor.data().end());
    EXPECT_EQ(before, after);
}

TEST(Steps, ReconstructionLossOracle) {
    auto cfg = tiny_config(Architecture::stylegan);
    GanModel model(cfg.net);
    Batch b = make_batch(tiny_data(), {4, 5}, true);
    ForwardContext ctx{NormMode::train, false};
    Tensor out = model.generator->forward(Tensor::zeros({2, 8}), b.masks, ctx);
    double expect = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 1024; ++i)
                expect += std::fabs(out.data()[(n * 3 + c) * 1024 + i] - b.masks.data()[n * 1024 + i]);
    EXPECT_NEAR(reconstruction_loss(*model.generator, b.masks, 8, ctx).item(), expect, 1e-9);
}

TEST(Train, DeterministicLogAndCheckpointRetention) {
    auto cfg = tiny_config();
    cfg.iterations = 6;
    cfg.checkpoint_interval = 1;
    auto d1 = temp_dir("a"), d2 = temp_dir("b");
    auto r1 = train(cfg, tiny_data(), d1);
    auto r2 = train(cfg, tiny_data(), d2);
    EXPECT_EQ(slurp(d1 / "train_log.csv"), slurp(d2 / "train_log.csv"));
    EXPECT_EQ(slurp(d1 / "checkpoints" / "ckpt_000006.bin"), slurp(d2 / "checkpoints" / "ckpt_000006.bin"));
    ASSERT_EQ(r1.checkpoints.size(), 4u);
    EXPECT_EQ(r1.checkpoints.front().filename(), "ckpt_000003.bin");
    EXPECT_FALSE(fs::exists(d1 / "checkpoints" / "ckpt_000002.bin"));
    EXPECT_EQ(r1.log.size(), 6u);
    const std::string log = slurp(d1 / "train_log.csv");
    EXPECT_EQ(log.substr(0, log.find('\n')),
              "iteration,loss_D,D_adversarial,D_classification,grad_norm_D,loss_G,G_adversarial,G_creativity,"
              "G_reconstruction,grad_norm_G");
    EXPECT_TRUE(fs::exists(d1 / "train_timing.csv"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Train, MaskGeneratorNeedsMasks) {
    auto cfg = tiny_config(Architecture::stylegan);
    LabeledDataset nomask = tiny_data();
    nomask.masks_present = false;
    for (auto& e : nomask.entries) e.item.mask.clear();
    EXPECT_THROW(train(cfg, nomask), std::invalid_argument);
}

TEST(Train, CanvasMismatchRejected) {
    auto cfg = tiny_config();
    cfg.net.canvas = 64;
    EXPECT_THROW(train(cfg, tiny_data()), ConfigError);
}

TEST(Train, CheckpointReloadGivesSameSamples) {
    auto cfg = tiny_config(Architecture::stylegan);
    cfg.iterations = 2;
    auto dir = temp_dir("reload");
    GanModel model(cfg.net);
    auto r = train(cfg, tiny_data(), dir, &model);
    auto loaded = load_model(r.checkpoints.back());
    std::vector<std::vector<std::uint8_t>> masks;
    for (std::size_t i = 0; i < 5; ++i) masks.push_back(tiny_data().entries[i].item.mask);
    SampleOptions so;
    so.n = 6;
    so.seed = 4;
    so.masks = &masks;
    // The saved weights are float-rounded, so compare the reloaded model with itself
    // and with a second reload.
    auto a = sample(*loaded, so);
    auto b = sample(*load_model(r.checkpoints.back()), so);
    ASSERT_EQ(a.images.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.images[i].pixels, b.images[i].pixels);
    for (auto m : a.mask_index) EXPECT_LT(m, 5u);
    fs::remove_all(dir);
}

TEST(Sample, SeedControlsOutput) {
    auto cfg = tiny_config();
    GanModel model(cfg.net);
    SampleOptions so;
    so.n = 3;
    so.seed = 1;
    so.chunk = 2;
    auto a = sample(model, so), b = sample(model, so);
    so.seed = 2;
    auto c = sample(model, so);
    EXPECT_EQ(a.images[2].pixels, b.images[2].pixels);
    EXPECT_NE(a.images[0].pixels, c.images[0].pixels);
    EXPECT_EQ(a.images[0].width, 32u);
}

TEST(Sample, BatchStatsLeaveRunningStatsAlone) {
    auto cfg = tiny_config();
    GanModel model(cfg.net);
    std::mt19937_64 rng(3);
    Tensor z = sample_latent(4, cfg.net.latent_dim, rng);
    Tensor before = generate(model, z, {});
    Tensor batch = generate(model, z, {}, true);
    Tensor after = generate(model, z, {});
    for (std::size_t i = 0; i < before.numel(); ++i) ASSERT_EQ(before.data()[i], after.data()[i]);
    double diff = 0.0;
    for (std::size_t i = 0; i < before.numel(); ++i) diff += std::fabs(before.data()[i] - batch.data()[i]);
    EXPECT_GT(diff, 1e-6);

    // Batch statistics couple each output to the rest of its batch.
    Tensor z2 = z.clone();
    for (std::size_t i = cfg.net.latent_dim; i < z2.numel(); ++i) z2.mutable_data()[i] *= 2.0;
    Tensor batch2 = generate(model, z2, {}, true);
    const std::size_t per = batch.numel() / 4;
    double first = 0.0;
    for (std::size_t i = 0; i < per; ++i) first += std::fabs(batch.data()[i] - batch2.data()[i]);
    EXPECT_GT(first, 1e-6);

    SampleOptions so;
    so.n = 3;
    so.seed = 1;
    so.batch_stats = true;
    auto a = sample(model, so), b = sample(model, so);
    EXPECT_EQ(a.images[1].pixels, b.images[1].pixels);
}

TEST(Sample, ImageQuantization) {
    Tensor t({1, 3, 1, 2}, {-1.0, 1.0, 0.0, 2.0, -3.0, 0.5});
    auto img = tensor_to_image(t, 0);
    EXPECT_EQ(img.pixels[0], 0);                                   // -1
    EXPECT_EQ(img.pixels[3], 255);                                 // 1
    EXPECT_EQ(img.pixels[4], 255);                                 // 2, clipped
    EXPECT_EQ(img.pixels[2], 0);                                   // -3, clipped
    EXPECT_EQ(img.pixels[1], 128);                                 // 0 -> 127.5 rounds half away
    EXPECT_EQ(img.pixels[5], 191);                                 // 0.5 -> 191.25
}
