#include "creagen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "creagen/checkpoint.hpp"
#include "creagen/seed.hpp"

namespace creagen {

std::string to_string(CreativityMode m) {
    switch (m) {
        case CreativityMode::none: return "none";
        case CreativityMode::can: return "can";
        case CreativityMode::mce: return "mce";
        case CreativityMode::sm: return "sm";
        case CreativityMode::bhattacharyya: return "bhattacharyya";
    }
    return "unknown";
}

std::string to_string(CreativityBranch b) {
    switch (b) {
        case CreativityBranch::shape: return "shape";
        case CreativityBranch::texture: return "texture";
        case CreativityBranch::shape_texture: return "shape_texture";
    }
    return "unknown";
}

std::string to_string(GeneratorLossForm f) {
    return f == GeneratorLossForm::saturating ? "saturating" : "non_saturating";
}

namespace {

std::string to_string(Reduction r) { return r == Reduction::sum ? "sum" : "mean"; }

template <class E, std::size_t N>
E parse_enum(const nlohmann::json& v, const std::string& field, const E (&options)[N]) {
    if (!v.is_string()) throw ConfigError(field, "expected a string");
    const auto s = v.get<std::string>();
    std::string allowed;
    for (E e : options) {
        if (to_string(e) == s) return e;
        allowed += (allowed.empty() ? "" : ", ") + to_string(e);
    }
    throw ConfigError(field, "unknown value '" + s + "' (expected one of " + allowed + ")");
}

double number(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<double>();
}

std::size_t count(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(field, "expected a non-negative integer");
    if (!v.is_number_unsigned() && v.get<long long>() < 0) throw ConfigError(field, "must be non-negative");
    return v.get<std::size_t>();
}

double reduce_factor(Reduction r, std::size_t n) { return r == Reduction::sum ? 1.0 : 1.0 / static_cast<double>(n); }

double grad_norm(const ParameterList& list) {
    double s = 0.0;
    for (const auto& p : list.params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad()) s += g * g;
    }
    return std::sqrt(s);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Draws batches from the training split by walking seeded permutations.
class BatchSampler {
   public:
    BatchSampler(std::vector<std::size_t> ids, std::uint64_t seed) : ids_(std::move(ids)), seed_(seed) { reshuffle(); }

    std::vector<std::size_t> next(std::size_t n) {
        std::vector<std::size_t> out;
        while (out.size() < n) {
            if (pos_ == perm_.size()) reshuffle();
            out.push_back(perm_[pos_++]);
        }
        return out;
    }

   private:
    void reshuffle() {
        perm_ = ids_;
        std::mt19937_64 rng(derive_seed(seed_, {epoch_++}));
        std::shuffle(perm_.begin(), perm_.end(), rng);
        pos_ = 0;
    }

    std::vector<std::size_t> ids_, perm_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::size_t pos_ = 0;
};

}  // namespace

void TrainConfig::validate() const {
    const std::pair<const char*, double> weights[] = {{"lambda_Dr", lambda_Dr}, {"lambda_Db", lambda_Db},
                                                      {"lambda_Gr", lambda_Gr}, {"lambda_Ge", lambda_Ge},
                                                      {"lambda_rec", lambda_rec}};
    for (auto [name, w] : weights) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError(name, "must be a finite value >= 0");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1", "must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2", "must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be positive");
    if (batch_size < 2) throw ConfigError("batch_size", "must be at least 2 (batch norm needs batch statistics)");
    if (iterations < 1) throw ConfigError("iterations", "must be at least 1");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval", "must be at least 1");
    if (keep_checkpoints < 1) throw ConfigError("keep_checkpoints", "must be at least 1");
    if (creativity != CreativityMode::none) {
        const bool need_shape = creativity_branch != CreativityBranch::texture;
        const bool need_texture = creativity_branch != CreativityBranch::shape;
        if (need_shape && !net.shape_branch) {
            throw ConfigError("creativity_branch", "'" + to_string(creativity_branch) +
                                                       "' needs the discriminator shape head (network.shape_branch)");
        }
        if (need_texture && !net.texture_branch) {
            throw ConfigError("creativity_branch", "'" + to_string(creativity_branch) +
                                                       "' needs the discriminator texture head (network.texture_branch)");
        }
    }
    if (creativity == CreativityMode::sm) {
        try {
            SMParams p(sm_alpha, sm_beta);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("sm_alpha", e.what());
        }
    }
}

Tensor TrainConfig::creativity_loss(const Tensor& logits) const {
    switch (creativity) {
        case CreativityMode::none: return Tensor::scalar(0.0);
        case CreativityMode::can: return can_creativity_loss(logits, reduction);
        case CreativityMode::mce: return mce_creativity_loss(logits, reduction);
        case CreativityMode::sm: return sm_creativity_loss(logits, SMLossKind::general(sm_alpha, sm_beta), reduction);
        case CreativityMode::bhattacharyya:
            return sm_creativity_loss(logits, SMLossKind::bhattacharyya(), reduction);
    }
    throw std::logic_error("creativity_loss: unknown mode");
}

nlohmann::ordered_json TrainConfig::to_json() const {
    return {{"network", net.to_json()},
            {"lambda_Dr", lambda_Dr},
            {"lambda_Db", lambda_Db},
            {"lambda_Gr", lambda_Gr},
            {"lambda_Ge", lambda_Ge},
            {"lambda_rec", lambda_rec},
            {"creativity", to_string(creativity)},
            {"sm_alpha", sm_alpha},
            {"sm_beta", sm_beta},
            {"creativity_branch", to_string(creativity_branch)},
            {"generator_loss", to_string(generator_loss)},
            {"reduction", to_string(reduction)},
            {"lr", lr},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"batch_size", batch_size},
            {"iterations", iterations},
            {"checkpoint_interval", checkpoint_interval},
            {"keep_checkpoints", keep_checkpoints},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train", "expected a JSON object");
    TrainConfig c;
    static const CreativityMode modes[] = {CreativityMode::none, CreativityMode::can, CreativityMode::mce,
                                           CreativityMode::sm, CreativityMode::bhattacharyya};
    static const CreativityBranch branches[] = {CreativityBranch::shape, CreativityBranch::texture,
                                                CreativityBranch::shape_texture};
    static const GeneratorLossForm forms[] = {GeneratorLossForm::saturating, GeneratorLossForm::non_saturating};
    static const Reduction reductions[] = {Reduction::sum, Reduction::mean};
    bool init_seed_given = false;
    for (const auto& [key, v] : j.items()) {
        if (key == "network") {
            if (!v.is_object()) throw ConfigError("network", "expected a JSON object");
            try {
                c.net = NetworkSpec::from_json(v);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("network", e.what());
            } catch (const std::invalid_argument& e) {
                throw ConfigError("network.architecture", e.what());
            }
            init_seed_given = v.contains("init_seed");
        } else if (key == "lambda_Dr") c.lambda_Dr = number(v, key);
        else if (key == "lambda_Db") c.lambda_Db = number(v, key);
        else if (key == "lambda_Gr") c.lambda_Gr = number(v, key);
        else if (key == "lambda_Ge") c.lambda_Ge = number(v, key);
        else if (key == "lambda_rec") c.lambda_rec = number(v, key);
        else if (key == "creativity") c.creativity = parse_enum(v, key, modes);
        else if (key == "sm_alpha") c.sm_alpha = number(v, key);
        else if (key == "sm_beta") c.sm_beta = number(v, key);
        else if (key == "creativity_branch") c.creativity_branch = parse_enum(v, key, branches);
        else if (key == "generator_loss") c.generator_loss = parse_enum(v, key, forms);
        else if (key == "reduction") c.reduction = parse_enum(v, key, reductions);
        else if (key == "lr") c.lr = number(v, key);
        else if (key == "adam_beta1") c.adam_beta1 = number(v, key);
        else if (key == "adam_beta2") c.adam_beta2 = number(v, key);
        else if (key == "adam_eps") c.adam_eps = number(v, key);
        else if (key == "batch_size") c.batch_size = count(v, key);
        else if (key == "iterations") c.iterations = count(v, key);
        else if (key == "checkpoint_interval") c.checkpoint_interval = count(v, key);
        else if (key == "keep_checkpoints") c.keep_checkpoints = count(v, key);
        else if (key == "seed") c.seed = count(v, key);
        else throw ConfigError(key, "unknown training option");
    }
    if (!init_seed_given) c.net.init_seed = derive_seed(c.seed, {0x1417});
    return c;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) continue;
        auto g = params_[i].grad();
        auto w = params_[i].mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
            w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
        }
    }
}

GanModel::GanModel(const NetworkSpec& s)
    : spec(s), generator(build_generator(s)), discriminator(build_discriminator(s)) {
    gen_params = generator->parameters();
    disc_params = discriminator->parameters();
}

std::vector<NamedTensor> GanModel::state() const {
    std::vector<NamedTensor> out;
    for (const auto* list : {&gen_params, &disc_params}) {
        out.insert(out.end(), list->params.begin(), list->params.end());
        out.insert(out.end(), list->buffers.begin(), list->buffers.end());
    }
    return out;
}

void GanModel::zero_grad() {
    for (auto* list : {&gen_params, &disc_params})
        for (auto& p : list->params) p.tensor.zero_grad();
}

Tensor item_to_tensor(const std::vector<const LabeledItem*>& items) {
    if (items.empty()) throw std::invalid_argument("item_to_tensor: empty batch");
    const std::size_t s = items[0]->size, hw = s * s;
    std::vector<double> v(items.size() * 3 * hw);
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i]->size != s) throw std::invalid_argument("item_to_tensor: mixed canvas sizes");
        const auto& rgb = items[i]->rgb;
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < hw; ++p) v[(i * 3 + c) * hw + p] = rgb[p * 3 + c] / 127.5 - 1.0;
    }
    return Tensor({items.size(), 3, s, s}, std::move(v));
}

Tensor masks_to_tensor(const std::vector<const std::vector<std::uint8_t>*>& masks, std::size_t size) {
    const std::size_t hw = size * size;
    std::vector<double> v(masks.size() * hw);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i]->size() != hw) throw std::invalid_argument("masks_to_tensor: mask size does not match canvas");
        for (std::size_t p = 0; p < hw; ++p) v[i * hw + p] = (*masks[i])[p] ? -1.0 : 1.0;
    }
    return Tensor({masks.size(), 1, size, size}, std::move(v));
}

Batch make_batch(const LabeledDataset& data, const std::vector<std::size_t>& ids, bool with_masks) {
    Batch b;
    std::vector<const LabeledItem*> items;
    std::vector<const std::vector<std::uint8_t>*> masks;
    for (auto id : ids) {
        const auto& it = data.entries.at(id).item;
        items.push_back(&it);
        b.shape_labels.push_back(it.shape_label);
        b.texture_labels.push_back(it.texture_label);
        if (with_masks) {
            if (!it.has_mask()) throw std::invalid_argument("make_batch: item " + std::to_string(id) + " has no mask");
            masks.push_back(&it.mask);
        }
    }
    b.images = item_to_tensor(items);
    if (with_masks) b.masks = masks_to_tensor(masks, data.canvas);
    return b;
}

StepLosses discriminator_step(GanModel& model, Adam& opt, const Batch& real, const Tensor& fake,
                              const TrainConfig& config) {
    const std::size_t n = real.images.dim(0);
    if (fake.dim(0) != n) {
        throw std::invalid_argument("discriminator_step: real batch " + std::to_string(n) + " vs fake batch " +
                                    std::to_string(fake.dim(0)));
    }
    auto& d = *model.discriminator;
    const bool classify = config.lambda_Db > 0.0 && (d.shape_head || d.texture_head);
    if (classify && ((d.shape_head && real.shape_labels.size() != n) ||
                     (d.texture_head && real.texture_labels.size() != n))) {
        throw std::invalid_argument("discriminator_step: labels are required when lambda_Db > 0");
    }
    model.zero_grad();
    ForwardContext ctx{NormMode::train, true};
    auto out_r = d.forward(real.images, ctx);
    auto out_f = d.forward(fake.detach(), ctx);
    const double r = reduce_factor(config.reduction, n);
    Tensor adv = scale(neg(sum(log_sigmoid(out_r.real_fake)) + sum(log_sigmoid(neg(out_f.real_fake)))),
                       config.lambda_Dr * r);
    Tensor total = adv;
    StepLosses s;
    if (classify) {
        Tensor cls = Tensor::scalar(0.0);
        if (d.shape_head) cls = cls + classification_loss(out_r.shape_logits, real.shape_labels, config.reduction);
        if (d.texture_head) {
            cls = cls + classification_loss(out_r.texture_logits, real.texture_labels, config.reduction);
        }
        cls = scale(cls, config.lambda_Db);
        s.classification = cls.item();
        total = total + cls;
    }
    s.adversarial = adv.item();
    s.total = total.item();
    if (total.requires_grad()) total.backward();
    s.grad_norm = grad_norm(model.disc_params);
    opt.step();
    return s;
}

Tensor reconstruction_loss(Generator& g, const Tensor& masks, std::size_t latent_dim, const ForwardContext& ctx) {
    const std::size_t n = masks.dim(0);
    Tensor out = g.forward(Tensor::zeros({n, latent_dim}), masks, ctx);
    const Tensor parts[] = {masks, masks, masks};
    return sum(abs(out - concat(parts, 1)));
}

StepLosses generator_step(GanModel& model, Adam& opt, const Tensor& z, const Tensor& masks, const TrainConfig& config) {
    auto& g = *model.generator;
    auto& d = *model.discriminator;
    if (g.needs_mask() && !masks.defined()) throw std::invalid_argument("generator_step: this generator needs masks");
    const std::size_t n = z.dim(0);
    model.zero_grad();
    // Running statistics were already refreshed by this iteration's discriminator step.
    ForwardContext ctx{NormMode::train, false};
    Tensor fake = g.forward(z, masks, ctx);
    auto out = d.forward(fake, ctx);
    const double r = reduce_factor(config.reduction, n);
    Tensor adv = config.generator_loss == GeneratorLossForm::saturating
                     ? scale(sum(log_sigmoid(neg(out.real_fake))), config.lambda_Gr * r)
                     : scale(sum(log_sigmoid(out.real_fake)), -config.lambda_Gr * r);
    Tensor total = adv;
    StepLosses s;
    s.adversarial = adv.item();
    if (config.creativity != CreativityMode::none && config.lambda_Ge > 0.0) {
        Tensor c = Tensor::scalar(0.0);
        if (config.creativity_branch != CreativityBranch::texture) c = c + config.creativity_loss(out.shape_logits);
        if (config.creativity_branch != CreativityBranch::shape) c = c + config.creativity_loss(out.texture_logits);
        c = scale(c, config.lambda_Ge);
        s.creativity = c.item();
        total = total + c;
    }
    if (masks.defined() && config.lambda_rec > 0.0) {
        Tensor rec = scale(reconstruction_loss(g, masks, model.spec.latent_dim, ctx), config.lambda_rec * r);
        s.reconstruction = rec.item();
        total = total + rec;
    }
    s.total = total.item();
    total.backward();
    s.grad_norm = grad_norm(model.gen_params);
    opt.step();
    return s;
}

TrainingDiverged::TrainingDiverged(std::size_t iter, std::string last)
    : std::runtime_error("non-finite loss at iteration " + std::to_string(iter) +
                         (last.empty() ? std::string(" (no checkpoint saved yet)") : "; last checkpoint " + last)),
      iteration(iter),
      last_checkpoint(std::move(last)) {}

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
    std::string out =
        "iteration,loss_D,D_adversarial,D_classification,grad_norm_D,loss_G,G_adversarial,G_creativity,"
        "G_reconstruction,grad_norm_G\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iteration);
        for (double v : {r.d.total, r.d.adversarial, r.d.classification, r.d.grad_norm, r.g.total, r.g.adversarial,
                         r.g.creativity, r.g.reconstruction, r.g.grad_norm}) {
            out += ',';
            out += fmt(v);
        }
        out += '\n';
    }
    return out;
}

nlohmann::ordered_json checkpoint_header(const TrainConfig& config, std::size_t iteration) {
    return {{"format", "creagen-gan"}, {"iteration", iteration}, {"network", config.net.to_json()},
            {"train", config.to_json()}};
}

std::unique_ptr<GanModel> load_model(const std::filesystem::path& checkpoint) {
    auto ck = load_checkpoint(checkpoint);
    if (!ck.header.contains("network")) throw std::runtime_error(checkpoint.string() + ": header lacks 'network'");
    auto model = std::make_unique<GanModel>(NetworkSpec::from_json(ck.header["network"]));
    restore_tensors(ck, model->state());
    return model;
}

TrainResult train(const TrainConfig& config, const LabeledDataset& data, const std::filesystem::path& out_dir,
                  GanModel* external) {
    config.validate();
    if (data.canvas != config.net.canvas) {
        throw ConfigError("network.canvas", "is " + std::to_string(config.net.canvas) + " but the dataset canvas is " +
                                                std::to_string(data.canvas));
    }
    std::unique_ptr<GanModel> owned;
    if (!external) owned = std::make_unique<GanModel>(config.net);
    GanModel& model = external ? *external : *owned;
    const bool masks = model.generator->needs_mask();
    if (masks && !data.masks_present) {
        throw std::invalid_argument("train: the " + to_string(config.net.architecture) +
                                    " generator needs masks and the dataset has none");
    }
    std::vector<std::size_t> train_ids;
    for (std::size_t i = 0; i < data.entries.size(); ++i)
        if (data.entries[i].split == Split::train) train_ids.push_back(i);
    if (train_ids.empty()) throw std::invalid_argument("train: dataset has no training items");

    TrainResult result;
    if (config.creativity != CreativityMode::none && config.lambda_Ge == 0.0) {
        result.warnings.push_back("creativity '" + to_string(config.creativity) +
                                  "' requested with lambda_Ge = 0; the term has no effect");
    }

    auto to_tensors = [](const ParameterList& l) {
        std::vector<Tensor> v;
        for (const auto& p : l.params) v.push_back(p.tensor);
        return v;
    };
    Adam opt_d(to_tensors(model.disc_params), config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
    Adam opt_g(to_tensors(model.gen_params), config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);

    BatchSampler sampler(train_ids, derive_seed(config.seed, {1}));
    std::mt19937_64 zrng(derive_seed(config.seed, {2}));

    const bool write = !out_dir.empty();
    std::filesystem::path ckpt_dir = out_dir / "checkpoints";
    std::ofstream timing;
    if (write) {
        std::filesystem::create_directories(ckpt_dir);
        timing.open(out_dir / "train_timing.csv");
        timing << "iteration,seconds\n";
    }
    auto write_log = [&] {
        if (!write) return;
        std::ofstream f(out_dir / "train_log.csv", std::ios::binary);
        f << train_log_csv(result.log);
    };
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t it = 0; it < config.iterations; ++it) {
        Batch real = make_batch(data, sampler.next(config.batch_size), masks);
        Tensor z = sample_latent(config.batch_size, config.net.latent_dim, zrng);
        Tensor fake;
        {
            NoGradGuard guard;
            fake = model.generator->forward(z, real.masks, {NormMode::train, true});
        }
        TrainLogRow row;
        row.iteration = it;
        row.d = discriminator_step(model, opt_d, real, fake, config);
        row.g = generator_step(model, opt_g, z, real.masks, config);
        result.log.push_back(row);
        if (!std::isfinite(row.d.total) || !std::isfinite(row.g.total)) {
            write_log();
            throw TrainingDiverged(it, result.checkpoints.empty() ? "" : result.checkpoints.back().string());
        }
        if (write) {
            std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
            timing << it << ',' << el.count() << '\n';
            if ((it + 1) % config.checkpoint_interval == 0 || it + 1 == config.iterations) {
                char name[32];
                std::snprintf(name, sizeof name, "ckpt_%06zu.bin", it + 1);
                auto path = ckpt_dir / name;
                save_checkpoint(path, checkpoint_header(config, it + 1), model.state());
                result.checkpoints.push_back(path);
                while (result.checkpoints.size() > config.keep_checkpoints) {
                    std::filesystem::remove(result.checkpoints.front());
                    result.checkpoints.erase(result.checkpoints.begin());
                }
            }
        }
    }
    write_log();
    return result;
}

Tensor generate(GanModel& model, const Tensor& z, const Tensor& masks, bool batch_stats) {
    NoGradGuard guard;
    return model.generator->forward(z, masks, {batch_stats ? NormMode::train : NormMode::eval, false});
}

Image8 tensor_to_image(const Tensor& batch, std::size_t index) {
    const std::size_t c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    Image8 img{w, h, c, std::vector<std::uint8_t>(w * h * c)};
    auto d = batch.data();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < h * w; ++p) {
            double v = std::clamp(d[(index * c + ch) * h * w + p], -1.0, 1.0);
            img.pixels[p * c + ch] = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
        }
    return img;
}

SampleResult sample(GanModel& model, const SampleOptions& opt) {
    const bool need = model.generator->needs_mask();
    if (need && (!opt.masks || opt.masks->empty())) {
        throw std::invalid_argument("sample: the " + to_string(model.spec.architecture) +
                                    " generator needs a pool of masks");
    }
    if (opt.chunk == 0) throw std::invalid_argument("sample: chunk must be positive");
    std::mt19937_64 zrng(derive_seed(opt.seed, {0}));
    std::mt19937_64 mrng(derive_seed(opt.seed, {1}));
    SampleResult res;
    const std::size_t nz = model.spec.latent_dim;
    for (std::size_t done = 0; done < opt.n;) {
        const std::size_t b = std::min(opt.chunk, opt.n - done);
        Tensor z = opt.zero_latent ? Tensor::zeros({b, nz}) : sample_latent(b, nz, zrng);
        Tensor m;
        if (need) {
            std::uniform_int_distribution<std::size_t> pick(0, opt.masks->size() - 1);
            std::vector<const std::vector<std::uint8_t>*> ptrs;
            for (std::size_t i = 0; i < b; ++i) {
                auto k = pick(mrng);
                res.mask_index.push_back(k);
                ptrs.push_back(&(*opt.masks)[k]);
            }
            m = masks_to_tensor(ptrs, model.spec.canvas);
        }
        Tensor out = generate(model, z, m, opt.batch_stats);
        for (std::size_t i = 0; i < b; ++i) res.images.push_back(tensor_to_image(out, i));
        done += b;
    }
    return res;
}

}  // namespace creagen
