#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "creagen/divergence.hpp"
#include "creagen/ops.hpp"

using namespace creagen;

namespace {

Distribution random_dist(std::size_t k, std::mt19937_64& g) {
    std::gamma_distribution<double> gam(1.0, 1.0);
    std::vector<double> v(k);
    double s = 0.0;
    for (auto& x : v) s += (x = gam(g) + 1e-3);
    for (auto& x : v) x /= s;
    return Distribution(v);
}

// Independent long-double evaluation of the two-parameter form.
long double sm_oracle(const Distribution& p, const Distribution& q, long double a, long double b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::pow((long double)p[i], a) * std::pow((long double)q[i], 1 - a);
    return (std::pow(s, (1 - b) / (1 - a)) - 1) / (b - 1);
}

long double kl_oracle(const Distribution& p, const Distribution& q) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0) s += (long double)p[i] * std::log((long double)p[i] / q[i]);
    return s;
}

std::vector<double> softmax_row(std::span<const double> l) {
    double m = l[0];
    for (double v : l) m = std::max(m, v);
    std::vector<double> e(l.size());
    double s = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) s += (e[i] = std::exp(l[i] - m));
    for (auto& v : e) v /= s;
    return e;
}

}  // namespace

TEST(Distribution, Validation) {
    EXPECT_THROW(Distribution({0.5, 0.6}), std::exception);
    EXPECT_THROW(Distribution({1.0}), std::exception);
    EXPECT_THROW(Distribution({1.2, -0.2}), std::exception);
    EXPECT_NO_THROW(Distribution({0.25, 0.75}));
    auto u = Distribution::uniform(4);
    EXPECT_DOUBLE_EQ(u[3], 0.25);
}

TEST(Divergence, SmMatchesLongDoubleOracle) {
    std::mt19937_64 g(5);
    for (int t = 0; t < 50; ++t) {
        auto p = random_dist(7, g), q = random_dist(7, g);
        for (double a : {0.3, 0.5, 2.0, 3.0})
            for (double b : {0.2, 0.5, 2.0, 4.0}) {
                const double got = sm_divergence(p, q, SMParams(a, b));
                EXPECT_NEAR(got, (double)sm_oracle(p, q, a, b), 1e-12 * std::max(1.0, std::fabs(got)));
            }
    }
}

TEST(Divergence, KlOracleAndSelfZero) {
    std::mt19937_64 g(6);
    auto p = random_dist(5, g), q = random_dist(5, g);
    EXPECT_NEAR(kl_divergence(p, q), (double)kl_oracle(p, q), 1e-14);
    EXPECT_EQ(kl_divergence(p, p), 0.0);
    EXPECT_NEAR(sm_divergence(p, p, SMParams(0.5, 2.0)), 0.0, 1e-15);
}

TEST(Divergence, DisjointSupportIsInfinite) {
    Distribution p({1.0, 0.0}), q({0.0, 1.0});
    EXPECT_TRUE(std::isinf(kl_divergence(p, q)));
}

TEST(Divergence, NamedMembersClosedForms) {
    Distribution p({0.5, 0.5}), q({0.9, 0.1});
    const double bc = std::sqrt(0.45) + std::sqrt(0.05);
    EXPECT_NEAR(bhattacharyya_divergence(p, q), -std::log(bc), 1e-15);
    // Renyi order 2: ln sum p^2 / q.
    EXPECT_NEAR(renyi_divergence(p, q, 2.0), std::log(0.25 / 0.9 + 0.25 / 0.1), 1e-14);
    // Tsallis order 2: (sum p^2/q - 1).
    EXPECT_NEAR(tsallis_divergence(p, q, 2.0), 0.25 / 0.9 + 0.25 / 0.1 - 1.0, 1e-14);
}

TEST(Divergence, ParamValidation) {
    EXPECT_THROW(SMParams(1.0, 0.5), std::exception);
    EXPECT_THROW(SMParams(0.5, 1.0), std::exception);
    EXPECT_THROW(SMParams(-0.5, 0.5), std::exception);
}

TEST(Losses, MceEqualsKlPlusLogK) {
    std::mt19937_64 g(8);
    Tensor logits = Tensor::randn({6, 7}, g, 2.0, true);
    Tensor mce = mce_creativity_loss(logits);
    double kl_sum = 0.0;
    for (std::size_t b = 0; b < 6; ++b) {
        auto row = softmax_row(logits.data().subspan(b * 7, 7));
        kl_sum += kl_divergence(Distribution::uniform(7), Distribution(row)) + std::log(7.0);
    }
    EXPECT_NEAR(mce.item(), kl_sum, 1e-10);
}

TEST(Losses, MceAndKlTagShareGradients) {
    std::mt19937_64 g(9);
    Tensor a = Tensor::randn({4, 7}, g, 1.5, true);
    Tensor b = a.clone();
    mce_creativity_loss(a).backward();
    sm_creativity_loss(b, SMLossKind::kl()).backward();
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.grad()[i], b.grad()[i], 1e-12);
}

TEST(Losses, CanMatchesDirectSum) {
    std::mt19937_64 g(10);
    Tensor l = Tensor::randn({3, 7}, g, 2.0);
    double expect = 0.0;
    for (double v : l.data()) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        expect -= std::log(s) / 7.0 + 6.0 / 7.0 * std::log(1.0 - s);
    }
    EXPECT_NEAR(can_creativity_loss(l).item(), expect, 1e-11);
    EXPECT_NEAR(can_creativity_loss(l, Reduction::mean).item(), expect / 3.0, 1e-11);
}

TEST(Losses, SmLossMatchesPureDivergence) {
    std::mt19937_64 g(11);
    Tensor l = Tensor::randn({3, 7}, g, 1.0);
    for (auto kind : {SMLossKind::general(0.5, 2.0), SMLossKind::renyi(2.0), SMLossKind::tsallis(0.5),
                      SMLossKind::bhattacharyya()}) {
        double expect = 0.0;
        for (std::size_t b = 0; b < 3; ++b) {
            Distribution d(softmax_row(l.data().subspan(b * 7, 7)));
            auto u = Distribution::uniform(7);
            switch (kind.tag) {
                case SMLossKind::Tag::sm: expect += sm_divergence(u, d, SMParams(kind.alpha, kind.beta)); break;
                case SMLossKind::Tag::renyi: expect += renyi_divergence(u, d, kind.alpha); break;
                case SMLossKind::Tag::tsallis: expect += tsallis_divergence(u, d, kind.alpha); break;
                case SMLossKind::Tag::bhattacharyya: expect += bhattacharyya_divergence(u, d); break;
                case SMLossKind::Tag::kl: expect += kl_divergence(u, d); break;
            }
        }
        EXPECT_NEAR(sm_creativity_loss(l, kind).item(), expect, 1e-11) << kind.describe();
    }
}

TEST(Losses, UniformLogitsMinimizeCreativity) {
    Tensor l = Tensor::zeros({2, 7});
    EXPECT_NEAR(mce_creativity_loss(l).item(), 2.0 * std::log(7.0), 1e-12);
    EXPECT_NEAR(sm_creativity_loss(l, SMLossKind::general(2.0, 0.5)).item(), 0.0, 1e-12);
}

TEST(Losses, ClassificationIsNegativeLogLikelihood) {
    Tensor l({2, 3}, {1.0, 2.0, 3.0, 0.0, 0.0, 5.0});
    std::vector<int> y{0, 2};
    auto r0 = softmax_row(l.data().subspan(0, 3)), r1 = softmax_row(l.data().subspan(3, 3));
    EXPECT_NEAR(classification_loss(l, y).item(), -std::log(r0[0]) - std::log(r1[2]), 1e-12);
    std::vector<int> bad{0, 3};
    EXPECT_THROW(classification_loss(l, bad), std::exception);
}
