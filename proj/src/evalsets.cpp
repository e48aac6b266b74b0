#include "creagen/evalsets.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "creagen/seed.hpp"

namespace creagen {

const std::vector<std::size_t>& SetAssignment::at(std::string_view name) const {
    for (const auto& [n, ids] : sets)
        if (n == name) return ids;
    throw std::out_of_range("no evaluation set named '" + std::string(name) + "'");
}

nlohmann::ordered_json SetAssignment::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [n, ids] : sets) j[n] = ids;
    return j;
}

std::vector<std::size_t> rank_ids(const std::vector<std::pair<std::size_t, double>>& values, bool descending) {
    auto v = values;
    std::sort(v.begin(), v.end(), [descending](const auto& a, const auto& b) {
        if (a.second != b.second) return descending ? a.second > b.second : a.second < b.second;
        return a.first < b.first;
    });
    std::vector<std::size_t> ids;
    ids.reserve(v.size());
    for (const auto& p : v) ids.push_back(p.first);
    return ids;
}

SetAssignment select_sets(const std::vector<ImageMetrics>& report, std::size_t size, std::uint64_t seed) {
    if (size == 0) throw std::invalid_argument("select_sets: size must be positive");
    if (report.size() < 2 * size) {
        throw std::invalid_argument("select_sets: population " + std::to_string(report.size()) +
                                    " is smaller than 2 x size (" + std::to_string(2 * size) + ")");
    }
    std::vector<std::size_t> ids;
    for (const auto& r : report) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw std::invalid_argument("select_sets: duplicate image id in report");
    }

    auto column = [&](auto get) {
        std::vector<std::pair<std::size_t, double>> v;
        for (const auto& r : report) v.emplace_back(r.id, get(r));
        return v;
    };
    auto shape = column([](const ImageMetrics& m) { return m.shape_confusion; });
    auto texture = column([](const ImageMetrics& m) { return m.texture_confusion; });
    auto nn = column([](const ImageMetrics& m) { return m.nn_distance; });

    auto head = [size](std::vector<std::size_t> v) {
        v.resize(size);
        return v;
    };
    SetAssignment out;
    const auto low_shape = rank_ids(shape, false);
    const auto high_nn = rank_ids(nn, true);
    out.sets.emplace_back(std::string(kSetNames[0]), head(rank_ids(shape, true)));
    out.sets.emplace_back(std::string(kSetNames[1]), head(low_shape));
    out.sets.emplace_back(std::string(kSetNames[2]), head(rank_ids(texture, true)));
    out.sets.emplace_back(std::string(kSetNames[3]), head(rank_ids(texture, false)));
    out.sets.emplace_back(std::string(kSetNames[4]), head(high_nn));
    out.sets.emplace_back(std::string(kSetNames[5]), head(rank_ids(nn, false)));

    // Uniform sample without replacement over the id-sorted population.
    auto pool = ids;
    std::mt19937_64 rng(derive_seed(seed, {0x5E7}));
    for (std::size_t i = 0; i < size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    out.sets.emplace_back(std::string(kSetNames[6]), head(pool));

    std::vector<std::pair<std::size_t, double>> summed;
    {
        std::vector<std::size_t> rank_a(ids.back() + 1), rank_b(ids.back() + 1);
        for (std::size_t i = 0; i < low_shape.size(); ++i) rank_a[low_shape[i]] = i;
        for (std::size_t i = 0; i < high_nn.size(); ++i) rank_b[high_nn[i]] = i;
        for (auto id : ids) summed.emplace_back(id, static_cast<double>(rank_a[id] + rank_b[id]));
    }
    out.sets.emplace_back(std::string(kSetNames[7]), head(rank_ids(summed, false)));
    return out;
}

void write_galleries(const SetAssignment& sets, const std::vector<Image8>& images, const std::filesystem::path& dir,
                     std::size_t columns) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, ids] : sets.sets) {
        std::vector<Image8> tiles;
        for (auto id : ids) tiles.push_back(images.at(id));
        write_png(dir / (name + ".png"), tile_images(tiles, columns));
    }
}

}  // namespace creagen
