#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "creagen/image_io.hpp"
#include "creagen/metrics.hpp"
#include "json.hpp"

namespace creagen {

inline constexpr std::array<std::string_view, 8> kSetNames = {
    "high_shape_entropy", "low_shape_entropy", "high_texture_entropy", "low_texture_entropy",
    "high_nn_distance",   "low_nn_distance",   "random",               "mixed_low_shape_entropy_high_nn"};

/// Named id lists in kSetNames order.
struct SetAssignment {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> sets;

    const std::vector<std::size_t>& at(std::string_view name) const;
    nlohmann::ordered_json to_json() const;
};

/// Ids ordered by value, descending or ascending, ties by ascending id.
std::vector<std::size_t> rank_ids(const std::vector<std::pair<std::size_t, double>>& values, bool descending);

/// Builds the eight evaluation sets. The mixed set takes the `size` smallest
/// sums of (rank in ascending shape entropy) + (rank in descending NN distance).
SetAssignment select_sets(const std::vector<ImageMetrics>& report, std::size_t size, std::uint64_t seed);

/// One tiled PNG per set, named <set>.png.
void write_galleries(const SetAssignment& sets, const std::vector<Image8>& images, const std::filesystem::path& dir,
                     std::size_t columns = 10);

}  // namespace creagen
