#include "creagen/gradcheck_suite.hpp"

#include <cstdio>
#include <random>

#include "creagen/divergence.hpp"
#include "creagen/layers.hpp"
#include "creagen/nets.hpp"
#include "creagen/ops.hpp"
#include "creagen/seed.hpp"
#include "creagen/trainer.hpp"

namespace creagen {

namespace {

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}

    Tensor normal(Shape s, double stddev = 1.0) { return Tensor::randn(std::move(s), gen, stddev, true); }
    Tensor fixed(Shape s) { return Tensor::randn(std::move(s), gen, 1.0, false); }
    // Entries with |x| >= margin, keeping finite differences away from kinks.
    Tensor away_from_zero(Shape s, double margin = 0.05) {
        Tensor t = Tensor::randn(std::move(s), gen, 1.0, false);
        for (auto& v : t.mutable_data())
            if (std::fabs(v) < margin) v = v < 0 ? v - margin : v + margin;
        return t.set_requires_grad(true), t;
    }
    Tensor positive(Shape s, double lo = 0.5, double hi = 2.0) {
        return Tensor::uniform(std::move(s), gen, lo, hi, true);
    }
    std::vector<int> labels(std::size_t n, int k) {
        std::uniform_int_distribution<int> d(0, k - 1);
        std::vector<int> v(n);
        for (auto& x : v) x = d(gen);
        return v;
    }
};

GradCheckOptions opts(std::uint64_t seed, double tol, std::size_t max_coords = 0, double eps = 1e-5,
                      double scale_floor = 0.0) {
    GradCheckOptions o;
    o.eps = eps;
    o.scale_floor = scale_floor;
    o.tolerance = tol;
    o.seed = seed;
    o.max_coords = max_coords;
    return o;
}

// Projects an output onto a fixed random direction so every coordinate matters.
Tensor project(const Tensor& out, const Tensor& dir) { return sum(mul(out, dir)); }

using Unary = std::function<Tensor(const Tensor&)>;

GradCheckCase unary(const std::string& name, Unary f, int domain) {
    return {name, "op", 1e-4, [f, domain](std::uint64_t seed, double tol) {
                Rng r(seed);
                Shape s{3, 5};
                Tensor x = domain == 1 ? r.positive(s) : domain == 2 ? r.away_from_zero(s) : r.normal(s);
                Tensor dir = r.fixed(f(x).shape());
                return grad_check([&] { return project(f(x), dir); }, {{"x", x}}, opts(seed, tol));
            }};
}

GradCheckCase loss_case(const std::string& name, std::function<Tensor(const Tensor&)> f) {
    return {name, "loss", 1e-4, [f](std::uint64_t seed, double tol) {
                Rng r(seed);
                Tensor logits = r.normal({4, 7}, 1.5);
                return grad_check([&] { return f(logits); }, {{"logits", logits}}, opts(seed, tol));
            }};
}

GradCheckReport check_module(Module& m, const Tensor& x, Rng& r, std::uint64_t seed, double tol,
                             const ForwardContext& ctx = {}) {
    ParameterList pl;
    m.collect("layer", pl);
    Tensor dir = r.fixed(m.infer_shape(x.shape()));
    std::vector<NamedTensor> pts{{"input", x}};
    pts.insert(pts.end(), pl.params.begin(), pl.params.end());
    return grad_check([&] { return project(m.forward(x, ctx), dir); }, pts, opts(seed, tol));
}

// Spreads weights so activations sit away from ReLU kinks, and moves biases and
// BN shifts off zero. A zero shift feeding a ReLU is exactly on the kink when
// the batch statistics are degenerate (the z = 0 reconstruction pass).
void spread_parameters(ParameterList& pl, Rng& r, double weight_gain) {
    for (auto& p : pl.params) {
        auto d = p.tensor.mutable_data();
        const bool is_gamma = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, "gamma") == 0;
        if (p.tensor.rank() >= 2) {
            for (auto& v : d) v *= weight_gain;
        } else if (is_gamma) {
            std::uniform_real_distribution<double> u(0.5, 1.5);
            for (auto& v : d) v = u(r.gen);
        } else {
            std::normal_distribution<double> n(0.0, 0.5);
            for (auto& v : d) v = n(r.gen);
        }
    }
}

std::vector<GradCheckCase> build_cases() {
    std::vector<GradCheckCase> c;

    // Elementwise and linear operations.
    c.push_back(unary("abs", [](const Tensor& x) { return abs(x); }, 2));
    c.push_back(unary("log", [](const Tensor& x) { return log(x); }, 1));
    c.push_back(unary("exp", [](const Tensor& x) { return exp(x); }, 0));
    c.push_back(unary("pow_2.5", [](const Tensor& x) { return pow(x, 2.5); }, 1));
    c.push_back(unary("pow_3", [](const Tensor& x) { return pow(x, 3.0); }, 0));
    c.push_back(unary("scale", [](const Tensor& x) { return scale(x, -1.7); }, 0));
    c.push_back(unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.3); }, 0));
    c.push_back(unary("neg", [](const Tensor& x) { return neg(x); }, 0));
    c.push_back(unary("clamp_min", [](const Tensor& x) { return clamp_min(x, 0.0); }, 2));
    c.push_back(unary("relu", [](const Tensor& x) { return relu(x); }, 2));
    c.push_back(unary("leaky_relu", [](const Tensor& x) { return leaky_relu(x, 0.2); }, 2));
    c.push_back(unary("tanh", [](const Tensor& x) { return tanh(x); }, 0));
    c.push_back(unary("sigmoid", [](const Tensor& x) { return sigmoid(x); }, 0));
    c.push_back(unary("log_sigmoid", [](const Tensor& x) { return log_sigmoid(x); }, 0));
    c.push_back(unary("softmax", [](const Tensor& x) { return softmax(x, 1); }, 0));
    c.push_back(unary("softmax_axis0", [](const Tensor& x) { return softmax(x, 0); }, 0));
    c.push_back(unary("log_softmax", [](const Tensor& x) { return log_softmax(x, 1); }, 0));
    c.push_back(unary("reshape", [](const Tensor& x) { return reshape(x, {5, 3}); }, 0));
    c.push_back(unary("sum", [](const Tensor& x) { return sum(x); }, 0));
    c.push_back(unary("mean", [](const Tensor& x) { return mean(x); }, 0));
    c.push_back(unary("sum_axis", [](const Tensor& x) { return sum_axis(x, 1); }, 0));

    auto binary = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> f, Shape sa,
                      Shape sb) {
        c.push_back({name, "op", 1e-4, [f, sa, sb](std::uint64_t seed, double tol) {
                         Rng r(seed);
                         Tensor a = r.normal(sa), b = r.normal(sb);
                         Tensor probe = f(a, b);
                         Tensor dir = r.fixed(probe.shape());
                         return grad_check([&] { return project(f(a, b), dir); }, {{"a", a}, {"b", b}},
                                           opts(seed, tol));
                     }});
    };
    binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4}, {3, 4});
    binary("add_broadcast", [](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4}, {4});
    binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, {4}, {3, 4});
    binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, {3, 4}, {3, 4});
    binary("mul_broadcast", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, {2, 3, 4}, {3, 4});
    binary("matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, {3, 4}, {4, 5});
    binary("concat_axis1", [](const Tensor& a, const Tensor& b) {
               const Tensor parts[] = {a, b};
               return concat(parts, 1);
           }, {2, 3, 2}, {2, 1, 2});
    binary("concat_axis0", [](const Tensor& a, const Tensor& b) {
               const Tensor parts[] = {a, b};
               return concat(parts, 0);
           }, {2, 3}, {1, 3});

    c.push_back({"linear", "op", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Tensor x = r.normal({3, 5}), w = r.normal({4, 5}), b = r.normal({4});
                     Tensor dir = r.fixed({3, 4});
                     return grad_check([&] { return project(linear(x, w, b), dir); }, {{"x", x}, {"w", w}, {"b", b}},
                                       opts(seed, tol));
                 }});

    struct ConvGeo {
        std::string name;
        std::size_t cin, cout, k, stride, h;
        Padding pad;
    };
    for (const auto& g : {ConvGeo{"conv2d", 2, 3, 3, 1, 5, Padding::zeros(1)},
                          ConvGeo{"conv2d_stride2", 2, 3, 4, 2, 6, Padding::zeros(1)},
                          ConvGeo{"conv2d_reflect3", 2, 2, 7, 1, 5, Padding::reflect(3)},
                          ConvGeo{"conv2d_reflect1_stride2", 3, 2, 3, 2, 5, Padding::reflect(1)}}) {
        c.push_back({g.name, "op", 1e-4, [g](std::uint64_t seed, double tol) {
                         Rng r(seed);
                         Tensor x = r.normal({2, g.cin, g.h, g.h}), w = r.normal({g.cout, g.cin, g.k, g.k}, 0.5);
                         Tensor b = r.normal({g.cout});
                         Tensor dir = r.fixed(conv2d(x, w, b, g.stride, g.pad).shape());
                         return grad_check([&] { return project(conv2d(x, w, b, g.stride, g.pad), dir); },
                                           {{"x", x}, {"w", w}, {"b", b}}, opts(seed, tol));
                     }});
    }
    struct ConvTGeo {
        std::string name;
        std::size_t cin, cout, k, stride, pad, out_pad, h;
    };
    for (const auto& g : {ConvTGeo{"conv_transpose2d", 3, 2, 4, 2, 1, 0, 3},
                          ConvTGeo{"conv_transpose2d_outpad", 2, 3, 3, 2, 1, 1, 3},
                          ConvTGeo{"conv_transpose2d_stride1", 2, 2, 5, 1, 2, 0, 4}}) {
        c.push_back({g.name, "op", 1e-4, [g](std::uint64_t seed, double tol) {
                         Rng r(seed);
                         Tensor x = r.normal({2, g.cin, g.h, g.h}), w = r.normal({g.cin, g.cout, g.k, g.k}, 0.5);
                         Tensor b = r.normal({g.cout});
                         auto f = [&] {
                             return conv_transpose2d(x, w, b, g.stride, Padding::zeros(g.pad), g.out_pad);
                         };
                         Tensor dir = r.fixed(f().shape());
                         return grad_check([&] { return project(f(), dir); }, {{"x", x}, {"w", w}, {"b", b}},
                                           opts(seed, tol));
                     }});
    }
    for (bool train : {true, false}) {
        for (bool spatial : {true, false}) {
            std::string name = std::string("batch_norm_") + (train ? "train" : "eval") + (spatial ? "_4d" : "_2d");
            c.push_back({name, "op", 1e-4, [train, spatial](std::uint64_t seed, double tol) {
                             Rng r(seed);
                             Shape s = spatial ? Shape{3, 2, 3, 3} : Shape{5, 3};
                             const std::size_t ch = s[1];
                             Tensor x = r.normal(s), gamma = r.positive({ch}), beta = r.normal({ch});
                             BatchNormStats st{Tensor::uniform({ch}, r.gen, -0.5, 0.5),
                                               Tensor::uniform({ch}, r.gen, 0.5, 1.5)};
                             Tensor dir = r.fixed(s);
                             NormMode mode = train ? NormMode::train : NormMode::eval;
                             return grad_check([&] { return project(batch_norm(x, gamma, beta, st, mode), dir); },
                                               {{"x", x}, {"gamma", gamma}, {"beta", beta}}, opts(seed, tol));
                         }});
        }
    }

    // Losses over logits [4, 7].
    c.push_back(loss_case("can_creativity_loss", [](const Tensor& l) { return can_creativity_loss(l); }));
    c.push_back(loss_case("mce_creativity_loss", [](const Tensor& l) { return mce_creativity_loss(l); }));
    c.push_back(loss_case("mce_creativity_loss_mean",
                          [](const Tensor& l) { return mce_creativity_loss(l, Reduction::mean); }));
    for (double a : {0.5, 2.0})
        for (double b : {0.5, 2.0}) {
            char name[64];
            std::snprintf(name, sizeof name, "sm_creativity_loss_a%.1f_b%.1f", a, b);
            c.push_back(loss_case(name, [a, b](const Tensor& l) {
                return sm_creativity_loss(l, SMLossKind::general(a, b));
            }));
        }
    c.push_back(loss_case("sm_creativity_loss_kl", [](const Tensor& l) {
        return sm_creativity_loss(l, SMLossKind::kl());
    }));
    c.push_back(loss_case("sm_creativity_loss_bhattacharyya", [](const Tensor& l) {
        return sm_creativity_loss(l, SMLossKind::bhattacharyya());
    }));
    c.push_back(loss_case("sm_creativity_loss_renyi_2", [](const Tensor& l) {
        return sm_creativity_loss(l, SMLossKind::renyi(2.0));
    }));
    c.push_back(loss_case("sm_creativity_loss_tsallis_0.5", [](const Tensor& l) {
        return sm_creativity_loss(l, SMLossKind::tsallis(0.5));
    }));
    c.push_back({"classification_loss", "loss", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Tensor logits = r.normal({4, 7}, 1.5);
                     auto labels = r.labels(4, 7);
                     return grad_check([&] { return classification_loss(logits, labels); }, {{"logits", logits}},
                                       opts(seed, tol));
                 }});

    // Layers with their parameters.
    c.push_back({"layer_linear", "layer", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Initializer init(seed);
                     Linear m(6, 4, true, init);
                     m.weight.mutable_data()[0] += 0.0;
                     Tensor x = r.normal({3, 6});
                     return check_module(m, x, r, seed, tol);
                 }});
    c.push_back({"layer_conv", "layer", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Initializer init(seed);
                     Conv2d m(2, 3, 4, 2, Padding::zeros(1), true, init);
                     return check_module(m, r.normal({2, 2, 6, 6}), r, seed, tol);
                 }});
    c.push_back({"layer_convT", "layer", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Initializer init(seed);
                     ConvTranspose2d m(3, 2, 4, 2, 1, 0, true, init);
                     return check_module(m, r.normal({2, 3, 3, 3}), r, seed, tol);
                 }});
    c.push_back({"layer_batchnorm", "layer", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Initializer init(seed);
                     BatchNorm m(3, init);
                     return check_module(m, r.normal({4, 3, 2, 2}), r, seed, tol);
                 }});
    for (auto act : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid}) {
        static const char* names[] = {"identity", "relu", "leaky_relu", "tanh", "sigmoid"};
        c.push_back({std::string("layer_act_") + names[static_cast<int>(act)], "layer", 1e-4,
                     [act](std::uint64_t seed, double tol) {
                         Rng r(seed);
                         ActivationLayer m(act);
                         return check_module(m, r.away_from_zero({3, 4}), r, seed, tol);
                     }});
    }
    c.push_back({"layer_reshape", "layer", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Reshape m({2, 6});
                     return check_module(m, r.normal({3, 12}), r, seed, tol);
                 }});
    c.push_back({"layer_residual_block", "layer", 1e-4, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     Initializer init(seed);
                     ResidualBlock m(2, init);
                     // Larger weights keep the BN outputs well spread around the ReLU kink.
                     ParameterList pl;
                     m.collect("b", pl);
                     for (auto& p : pl.params)
                         if (p.tensor.rank() == 4)
                             for (auto& v : p.tensor.mutable_data()) v *= 25.0;
                     return check_module(m, r.normal({3, 2, 4, 4}), r, seed, tol);
                 }});

    // Whole networks on tiny widths, with subsampled coordinates.
    c.push_back({"network_dcgan_discriminator_loss", "network", 1e-3, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     NetworkSpec spec;
                     spec.canvas = 16;
                     spec.disc_width = 2;
                     spec.init_seed = seed;
                     auto d = build_discriminator(spec);
                     auto pl = d->parameters();
                     spread_parameters(pl, r, 10.0);
                     Tensor real = Tensor::uniform({4, 3, 16, 16}, r.gen, -1, 1);
                     Tensor fake = Tensor::uniform({4, 3, 16, 16}, r.gen, -1, 1);
                     auto ls = r.labels(4, 7), lt = r.labels(4, 7);
                     auto f = [&] {
                         auto a = d->forward(real, {});
                         auto b = d->forward(fake, {});
                         return neg(sum(log_sigmoid(a.real_fake)) + sum(log_sigmoid(neg(b.real_fake)))) +
                                classification_loss(a.shape_logits, ls) + classification_loss(a.texture_logits, lt);
                     };
                     return grad_check(f, pl.params, opts(seed, tol, 24));
                 }});
    c.push_back({"network_dcgan_generator", "network", 1e-3, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     NetworkSpec spec;
                     spec.canvas = 16;
                     spec.latent_dim = 8;
                     spec.gen_width = 2;
                     spec.init_seed = seed;
                     auto g = build_dcgan_generator(spec);
                     auto pl = g->parameters();
                     spread_parameters(pl, r, 25.0);
                     Tensor z = r.normal({3, 8});
                     Tensor dir = r.fixed({3, 3, 16, 16});
                     std::vector<NamedTensor> pts{{"z", z}};
                     pts.insert(pts.end(), pl.params.begin(), pl.params.end());
                     return grad_check([&] { return project(g->forward(z, {}, {}), dir); }, pts,
                                       opts(seed, tol, 24));
                 }});
    c.push_back({"network_stackgan_stage2", "network", 1e-3, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     NetworkSpec spec;
                     spec.canvas = 32;
                     spec.gen_width = 2;
                     spec.init_seed = seed;
                     auto s2 = build_stackgan_stage2(spec);
                     ParameterList pl;
                     s2->collect("stage2", pl);
                     spread_parameters(pl, r, 25.0);
                     Tensor x = r.normal({2, 3, 8, 8});
                     Tensor dir = r.fixed({2, 3, 32, 32});
                     std::vector<NamedTensor> pts{{"input", x}};
                     pts.insert(pts.end(), pl.params.begin(), pl.params.end());
                     return grad_check([&] { return project(s2->forward(x, {}), dir); }, pts, opts(seed, tol, 12));
                 }});
    c.push_back({"network_stylegan_reconstruction", "network", 1e-3, [](std::uint64_t seed, double tol) {
                     Rng r(seed);
                     NetworkSpec spec;
                     spec.architecture = Architecture::stylegan;
                     spec.canvas = 32;
                     spec.latent_dim = 8;
                     spec.gen_width = 2;
                     spec.init_seed = seed;
                     auto g = build_stylegan_generator(spec);
                     auto pl = g->parameters();
                     spread_parameters(pl, r, 25.0);
                     std::bernoulli_distribution coin(0.4);
                     std::vector<double> m(2 * 32 * 32);
                     for (auto& v : m) v = coin(r.gen) ? -1.0 : 1.0;
                     Tensor masks({2, 1, 32, 32}, m);
                     return grad_check([&] { return reconstruction_loss(*g, masks, 8, {}); }, pl.params,
                                       opts(seed, tol, 12, 1e-6, 0.1));
                 }});
    return c;
}

}  // namespace

const std::vector<GradCheckCase>& grad_check_cases() {
    static const std::vector<GradCheckCase> cases = build_cases();
    return cases;
}

std::vector<GradCheckOutcome> run_grad_check_suite(std::size_t seeds, std::uint64_t root_seed,
                                                   const std::string& filter, std::size_t network_seeds) {
    std::vector<GradCheckOutcome> out;
    for (const auto& c : grad_check_cases()) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
        const std::size_t n = c.group == "network" ? std::min(seeds, network_seeds) : seeds;
        for (std::size_t s = 0; s < n; ++s) {
            GradCheckOutcome o;
            o.name = c.name;
            o.group = c.group;
            o.seed = derive_seed(root_seed, {s});
            o.tolerance = c.tolerance;
            try {
                auto rep = c.run(o.seed, c.tolerance);
                o.max_rel_error = rep.max_rel_error;
                o.passed = rep.passed;
                auto w = rep.worst(1);
                if (!w.empty()) o.worst_param = w[0].name;
            } catch (const std::exception& e) {
                o.error = e.what();
                o.passed = false;
            }
            out.push_back(o);
        }
    }
    return out;
}

std::string grad_check_csv(const std::vector<GradCheckOutcome>& outcomes) {
    std::string out = "check,group,seed,max_rel_error,tolerance,passed,worst_param,error\n";
    for (const auto& o : outcomes) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6e", o.max_rel_error);
        out += o.name + ',' + o.group + ',' + std::to_string(o.seed) + ',' + buf + ',';
        std::snprintf(buf, sizeof buf, "%g", o.tolerance);
        out += std::string(buf) + ',' + (o.passed ? "1" : "0") + ',' + o.worst_param + ',' + o.error + '\n';
    }
    return out;
}

}  // namespace creagen
