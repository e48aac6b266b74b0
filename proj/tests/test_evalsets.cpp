#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "creagen/evalsets.hpp"

using namespace creagen;

namespace {

std::vector<ImageMetrics> random_report(std::size_t n, std::uint64_t seed, bool ties = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 2);
    std::uniform_int_distribution<int> coarse(0, 4);
    std::vector<ImageMetrics> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i].id = i;
        r[i].shape_confusion = ties ? coarse(rng) * 0.25 : u(rng);
        r[i].texture_confusion = ties ? coarse(rng) * 0.25 : u(rng);
        r[i].nn_distance = ties ? coarse(rng) : u(rng);
    }
    return r;
}

// Sort every (value, id) pair and take the first `size` ids.
std::vector<std::size_t> oracle_top(const std::vector<ImageMetrics>& r, double ImageMetrics::*field, bool high,
                                    std::size_t size) {
    std::vector<std::pair<double, std::size_t>> v;
    for (const auto& m : r) v.emplace_back(high ? -(m.*field) : m.*field, m.id);
    std::sort(v.begin(), v.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size; ++i) out.push_back(v[i].second);
    return out;
}

}  // namespace

TEST(SelectSets, ExtremeSetsMatchFullSort) {
    for (bool ties : {false, true}) {
        auto r = random_report(300, 4, ties);
        auto s = select_sets(r, 25, 1);
        ASSERT_EQ(s.sets.size(), 8u);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(s.sets[i].first, kSetNames[i]);
        EXPECT_EQ(s.at("high_shape_entropy"), oracle_top(r, &ImageMetrics::shape_confusion, true, 25));
        EXPECT_EQ(s.at("low_shape_entropy"), oracle_top(r, &ImageMetrics::shape_confusion, false, 25));
        EXPECT_EQ(s.at("high_texture_entropy"), oracle_top(r, &ImageMetrics::texture_confusion, true, 25));
        EXPECT_EQ(s.at("low_texture_entropy"), oracle_top(r, &ImageMetrics::texture_confusion, false, 25));
        EXPECT_EQ(s.at("high_nn_distance"), oracle_top(r, &ImageMetrics::nn_distance, true, 25));
        EXPECT_EQ(s.at("low_nn_distance"), oracle_top(r, &ImageMetrics::nn_distance, false, 25));
    }
}

TEST(SelectSets, MixedSetMatchesRankSumOracle) {
    auto r = random_report(200, 8, true);
    auto low_shape = oracle_top(r, &ImageMetrics::shape_confusion, false, 200);
    auto high_nn = oracle_top(r, &ImageMetrics::nn_distance, true, 200);
    std::vector<std::pair<std::size_t, std::size_t>> sum;
    for (std::size_t id = 0; id < 200; ++id) {
        const auto ra = std::find(low_shape.begin(), low_shape.end(), id) - low_shape.begin();
        const auto rb = std::find(high_nn.begin(), high_nn.end(), id) - high_nn.begin();
        sum.emplace_back(static_cast<std::size_t>(ra + rb), id);
    }
    std::sort(sum.begin(), sum.end());
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < 20; ++i) expect.push_back(sum[i].second);
    EXPECT_EQ(select_sets(r, 20, 3).at("mixed_low_shape_entropy_high_nn"), expect);
}

TEST(SelectSets, RandomSetIsDeterministicDistinctAndSeeded) {
    auto r = random_report(100, 1);
    auto a = select_sets(r, 30, 7).at("random");
    EXPECT_EQ(a, select_sets(r, 30, 7).at("random"));
    EXPECT_NE(a, select_sets(r, 30, 8).at("random"));
    EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 30u);
    for (auto id : a) EXPECT_LT(id, 100u);
}

TEST(SelectSets, InvariantToReportOrder) {
    auto r = random_report(120, 2, true);
    auto shuffled = r;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto a = select_sets(r, 12, 5), b = select_sets(shuffled, 12, 5);
    EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(SelectSets, RejectsSmallPopulationAndDuplicates) {
    auto r = random_report(19, 1);
    EXPECT_THROW(select_sets(r, 10, 0), std::invalid_argument);
    EXPECT_NO_THROW(select_sets(random_report(20, 1), 10, 0));
    EXPECT_THROW(select_sets(random_report(20, 1), 0, 0), std::invalid_argument);
    auto d = random_report(20, 1);
    d[3].id = 4;
    EXPECT_THROW(select_sets(d, 5, 0), std::invalid_argument);
}

TEST(RankIds, TiesBrokenByAscendingId) {
    std::vector<std::pair<std::size_t, double>> v = {{5, 1.0}, {2, 1.0}, {9, 3.0}, {1, 0.5}};
    EXPECT_EQ(rank_ids(v, true), (std::vector<std::size_t>{9, 2, 5, 1}));
    EXPECT_EQ(rank_ids(v, false), (std::vector<std::size_t>{1, 2, 5, 9}));
}

TEST(Galleries, OnePngPerSet) {
    auto r = random_report(20, 1);
    auto s = select_sets(r, 4, 0);
    std::vector<Image8> imgs(20, Image8{4, 4, 3, std::vector<std::uint8_t>(48, 100)});
    auto dir = std::filesystem::temp_directory_path() / "creagen_galleries";
    std::filesystem::remove_all(dir);
    write_galleries(s, imgs, dir, 2);
    for (auto n : kSetNames) {
        auto img = read_png(dir / (std::string(n) + ".png"), 3);
        EXPECT_EQ(img.width, 2u * 5u + 1u);   // 1-pixel gutters
        EXPECT_EQ(img.height, 2u * 5u + 1u);
    }
    std::filesystem::remove_all(dir);
}
