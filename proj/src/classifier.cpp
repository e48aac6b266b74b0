#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

#include "creagen/checkpoint.hpp"
#include "creagen/divergence.hpp"
#include "creagen/metrics.hpp"
#include "creagen/seed.hpp"
#include "creagen/trainer.hpp"

namespace creagen {

nlohmann::ordered_json ClassifierSpec::to_json() const {
    return {{"canvas", canvas}, {"width", width}, {"feature_dim", feature_dim}, {"epochs", epochs},
            {"batch_size", batch_size}, {"lr", lr}, {"seed", seed}};
}

ClassifierSpec ClassifierSpec::from_json(const nlohmann::json& j) {
    ClassifierSpec s;
    auto count = [](const nlohmann::json& v, const std::string& key) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError(key, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    };
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "canvas") s.canvas = count(v, key);
            else if (key == "width") s.width = count(v, key);
            else if (key == "feature_dim") s.feature_dim = count(v, key);
            else if (key == "epochs") s.epochs = count(v, key);
            else if (key == "batch_size") s.batch_size = count(v, key);
            else if (key == "lr") s.lr = v.get<double>();
            else if (key == "seed") s.seed = count(v, key);
            else throw ConfigError(key, "unknown classifier option");
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(key, "wrong type");
        }
    }
    return s;
}

ShapeTextureClassifier::ShapeTextureClassifier(const ClassifierSpec& spec) {
    if (!std::has_single_bit(spec.canvas) || spec.canvas < 16) {
        throw std::invalid_argument("classifier: canvas must be a power of two >= 16");
    }
    Initializer init(spec.seed);
    const std::size_t w = spec.width;
    append_conv_block(trunk, 3, w, 4, 2, Padding::zeros(1), true, Activation::relu, init);
    append_conv_block(trunk, w, 2 * w, 4, 2, Padding::zeros(1), true, Activation::relu, init);
    append_conv_block(trunk, 2 * w, 4 * w, 4, 2, Padding::zeros(1), true, Activation::relu, init);
    const std::size_t side = spec.canvas / 8;
    trunk.emplace<Reshape>(Shape{4 * w * side * side});
    trunk.emplace<Linear>(4 * w * side * side, spec.feature_dim, true, init);
    trunk.emplace<ActivationLayer>(Activation::relu);
    shape_head = std::make_unique<Linear>(spec.feature_dim, kNumShapes, true, init);
    texture_head = std::make_unique<Linear>(spec.feature_dim, kNumTextures, true, init);
    trunk.infer_shape({2, 3, spec.canvas, spec.canvas});
}

ShapeTextureClassifier::Output ShapeTextureClassifier::forward(const Tensor& images, const ForwardContext& ctx) {
    Output o;
    o.features = trunk.forward(images, ctx);
    o.shape_logits = shape_head->forward(o.features, ctx);
    o.texture_logits = texture_head->forward(o.features, ctx);
    return o;
}

ParameterList ShapeTextureClassifier::parameters() {
    ParameterList l;
    trunk.collect("classifier.trunk", l);
    shape_head->collect("classifier.shape", l);
    texture_head->collect("classifier.texture", l);
    return l;
}

namespace {

std::vector<NamedTensor> state_of(ShapeTextureClassifier& net) {
    auto l = net.parameters();
    std::vector<NamedTensor> out = l.params;
    out.insert(out.end(), l.buffers.begin(), l.buffers.end());
    return out;
}

ProbMatrix softmax_rows(const Tensor& logits) {
    Tensor p = softmax(logits, 1);
    const std::size_t n = p.dim(0), k = p.dim(1);
    ProbMatrix out(n, std::vector<double>(k));
    auto d = p.data();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(d.begin() + i * k, k, out[i].begin());
    return out;
}

std::vector<double> column_mean(const ProbMatrix& m) {
    std::vector<double> mean(m.empty() ? 0 : m[0].size(), 0.0);
    for (const auto& r : m)
        for (std::size_t j = 0; j < r.size(); ++j) mean[j] += r[j];
    for (auto& v : mean) v /= static_cast<double>(m.size());
    return mean;
}

}  // namespace

Tensor images_to_tensor(const std::vector<Image8>& images, std::size_t begin, std::size_t end) {
    if (begin >= end) throw std::invalid_argument("images_to_tensor: empty range");
    const std::size_t h = images[begin].height, w = images[begin].width, hw = h * w;
    std::vector<double> v((end - begin) * 3 * hw);
    for (std::size_t i = begin; i < end; ++i) {
        const auto& im = images[i];
        if (im.height != h || im.width != w || im.channels != 3) {
            throw std::invalid_argument("images_to_tensor: image " + std::to_string(i) + " is not " +
                                        std::to_string(w) + "x" + std::to_string(h) + " RGB");
        }
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < hw; ++p) v[((i - begin) * 3 + c) * hw + p] = im.pixels[p * 3 + c] / 127.5 - 1.0;
    }
    return Tensor({end - begin, 3, h, w}, std::move(v));
}

ClassifierOutputs classify(ClassifierBundle& bundle, const Tensor& images, std::size_t chunk) {
    if (images.rank() != 4 || images.dim(2) != bundle.spec.canvas || images.dim(3) != bundle.spec.canvas) {
        throw std::invalid_argument("classify: images " + shape_str(images.shape()) + " do not match the " +
                                    std::to_string(bundle.spec.canvas) + "px classifier");
    }
    NoGradGuard guard;
    ClassifierOutputs out;
    const std::size_t n = images.dim(0), per = 3 * images.dim(2) * images.dim(3);
    auto d = images.data();
    for (std::size_t b = 0; b < n; b += chunk) {
        const std::size_t e = std::min(n, b + chunk);
        Tensor x({e - b, 3, images.dim(2), images.dim(3)},
                 std::vector<double>(d.begin() + b * per, d.begin() + e * per));
        auto o = bundle.net->forward(x, {NormMode::eval, false});
        auto s = softmax_rows(o.shape_logits), t = softmax_rows(o.texture_logits);
        out.shape_probs.insert(out.shape_probs.end(), s.begin(), s.end());
        out.texture_probs.insert(out.texture_probs.end(), t.begin(), t.end());
        const std::size_t f = o.features.dim(1);
        auto fd = o.features.data();
        for (std::size_t i = 0; i < e - b; ++i) out.features.emplace_back(fd.begin() + i * f, fd.begin() + (i + 1) * f);
    }
    return out;
}

ClassifierOutputs classify_images(ClassifierBundle& bundle, const std::vector<Image8>& images) {
    ClassifierOutputs out;
    const std::size_t chunk = 256;
    for (std::size_t b = 0; b < images.size(); b += chunk) {
        auto part = classify(bundle, images_to_tensor(images, b, std::min(images.size(), b + chunk)));
        out.shape_probs.insert(out.shape_probs.end(), part.shape_probs.begin(), part.shape_probs.end());
        out.texture_probs.insert(out.texture_probs.end(), part.texture_probs.begin(), part.texture_probs.end());
        out.features.insert(out.features.end(), part.features.begin(), part.features.end());
    }
    return out;
}

ClassifierOutputs classify_items(ClassifierBundle& bundle, const std::vector<const LabeledItem*>& items) {
    ClassifierOutputs out;
    const std::size_t chunk = 256;
    for (std::size_t b = 0; b < items.size(); b += chunk) {
        std::vector<const LabeledItem*> part(items.begin() + b, items.begin() + std::min(items.size(), b + chunk));
        auto o = classify(bundle, item_to_tensor(part));
        out.shape_probs.insert(out.shape_probs.end(), o.shape_probs.begin(), o.shape_probs.end());
        out.texture_probs.insert(out.texture_probs.end(), o.texture_probs.begin(), o.texture_probs.end());
        out.features.insert(out.features.end(), o.features.begin(), o.features.end());
    }
    return out;
}

ClassifierBundle train_classifier(const LabeledDataset& data, const ClassifierSpec& spec_in) {
    ClassifierSpec spec = spec_in;
    spec.canvas = data.canvas;
    if (spec.batch_size < 2) throw ConfigError("classifier.batch_size", "must be at least 2");
    std::vector<std::size_t> train_ids, val_ids;
    for (std::size_t i = 0; i < data.size(); ++i)
        (data.entries[i].split == Split::train ? train_ids : val_ids).push_back(i);
    if (train_ids.size() < 2) throw std::invalid_argument("train_classifier: need at least 2 training items");

    ClassifierBundle b;
    b.spec = spec;
    b.net = std::make_unique<ShapeTextureClassifier>(spec);
    auto params = b.net->parameters();
    std::vector<Tensor> ptensors;
    for (auto& p : params.params) ptensors.push_back(p.tensor);
    Adam opt(ptensors, spec.lr, 0.9, 0.999, 1e-8);

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        auto order = train_ids;
        std::mt19937_64 rng(derive_seed(spec.seed, {0xC1A5, epoch}));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t s = 0; s + 1 < order.size(); s += spec.batch_size) {
            std::vector<std::size_t> ids(order.begin() + s, order.begin() + std::min(order.size(), s + spec.batch_size));
            if (ids.size() < 2) break;
            Batch batch = make_batch(data, ids, false);
            for (auto& p : params.params) p.tensor.zero_grad();
            auto o = b.net->forward(batch.images, {NormMode::train, true});
            Tensor loss = classification_loss(o.shape_logits, batch.shape_labels, Reduction::mean) +
                          classification_loss(o.texture_logits, batch.texture_labels, Reduction::mean);
            loss.backward();
            opt.step();
        }
    }

    // Store at checkpoint precision so a reloaded bundle scores identically.
    for (auto& t : state_of(*b.net))
        for (auto& v : t.tensor.mutable_data()) v = static_cast<float>(v);

    auto items_of = [&](const std::vector<std::size_t>& ids) {
        std::vector<const LabeledItem*> v;
        for (auto id : ids) v.push_back(&data.entries[id].item);
        return v;
    };
    auto tr = classify_items(b, items_of(train_ids));
    b.train_marginal_shape = column_mean(tr.shape_probs);
    b.train_marginal_texture = column_mean(tr.texture_probs);
    if (!val_ids.empty()) {
        auto va = classify_items(b, items_of(val_ids));
        std::size_t ok_s = 0, ok_t = 0;
        for (std::size_t i = 0; i < val_ids.size(); ++i) {
            const auto& it = data.entries[val_ids[i]].item;
            ok_s += argmax(va.shape_probs[i]) == static_cast<std::size_t>(it.shape_label);
            ok_t += argmax(va.texture_probs[i]) == static_cast<std::size_t>(it.texture_label);
        }
        b.val_accuracy_shape = static_cast<double>(ok_s) / static_cast<double>(val_ids.size());
        b.val_accuracy_texture = static_cast<double>(ok_t) / static_cast<double>(val_ids.size());
    }
    if (b.val_accuracy_shape < 0.9 || b.val_accuracy_texture < 0.9) {
        b.warning = "held-out accuracy below 90% (shape " + std::to_string(b.val_accuracy_shape) + ", texture " +
                    std::to_string(b.val_accuracy_texture) + "); confusion-based metrics are unreliable";
    }
    return b;
}

void ClassifierBundle::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json h = {{"format", "creagen-classifier"},
                                {"spec", spec.to_json()},
                                {"train_marginal_shape", train_marginal_shape},
                                {"train_marginal_texture", train_marginal_texture},
                                {"val_accuracy_shape", val_accuracy_shape},
                                {"val_accuracy_texture", val_accuracy_texture},
                                {"warning", warning}};
    save_checkpoint(path, h, state_of(*net));
}

ClassifierBundle ClassifierBundle::load(const std::filesystem::path& path) {
    auto ck = load_checkpoint(path);
    if (ck.header.value("format", "") != "creagen-classifier") {
        throw std::runtime_error(path.string() + ": not a classifier file");
    }
    ClassifierBundle b;
    b.spec = ClassifierSpec::from_json(ck.header["spec"]);
    b.net = std::make_unique<ShapeTextureClassifier>(b.spec);
    restore_tensors(ck, state_of(*b.net));
    b.train_marginal_shape = ck.header["train_marginal_shape"].get<std::vector<double>>();
    b.train_marginal_texture = ck.header["train_marginal_texture"].get<std::vector<double>>();
    b.val_accuracy_shape = ck.header["val_accuracy_shape"].get<double>();
    b.val_accuracy_texture = ck.header["val_accuracy_texture"].get<double>();
    b.warning = ck.header["warning"].get<std::string>();
    return b;
}

}  // namespace creagen
