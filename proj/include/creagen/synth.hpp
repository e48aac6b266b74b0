#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace creagen {

inline constexpr int kNumShapes = 7;
inline constexpr int kNumTextures = 7;

extern const std::array<std::string_view, kNumShapes> kShapeNames;
extern const std::array<std::string_view, kNumTextures> kTextureNames;

/// One garment-like item on a white canvas. Pixels are stored as 8-bit values;
/// `pixel()` returns them on the [0, 1] scale. `mask` is empty when the item was
/// loaded from a source without masks.
struct LabeledItem {
    std::size_t size = 0;
    std::vector<std::uint8_t> rgb;   // size * size * 3, interleaved
    std::vector<std::uint8_t> mask;  // size * size, 0 or 1
    int shape_label = 0;
    int texture_label = 0;

    double pixel(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * size + x) * 3 + c] / 255.0; }
    bool has_mask() const { return !mask.empty(); }
    bool is_background(std::size_t y, std::size_t x) const;
    std::size_t mask_area() const;

    bool operator==(const LabeledItem&) const = default;
};

enum class Split { train, val };

struct DatasetEntry {
    LabeledItem item;
    Split split = Split::train;
    std::size_t base_id = 0;  // id of the un-augmented original (itself for originals)

    bool operator==(const DatasetEntry&) const = default;
};

struct LabeledDataset {
    std::vector<DatasetEntry> entries;  // id == index
    std::size_t canvas = 0;
    std::uint64_t seed = 0;
    bool masks_present = true;

    std::size_t size() const { return entries.size(); }
    bool operator==(const LabeledDataset&) const = default;
};

/// Deterministic rendering of one silhouette family filled with one texture program.
/// `size` must be 32 or 64.
LabeledItem render_item(int shape_class, int texture_class, std::uint64_t style_seed, std::size_t size);

struct JitterParams {
    double scale = 1.0;
    double shift_x = 0.0;  // fraction of canvas
    double shift_y = 0.0;
};

/// Nearest-neighbour resampling of image and mask about the canvas centre.
/// Returns the fraction of silhouette pixels that left the frame through `lost`.
LabeledItem apply_jitter(const LabeledItem& item, const JitterParams& params, double* lost = nullptr);

/// Random scale in [0.9, 1.1] and shift up to +-5% per axis. Draws that push
/// more than 5% of the silhouette off-canvas are redrawn (bounded retries).
LabeledItem jitter(const LabeledItem& item, std::uint64_t seed);

struct SynthOptions {
    std::size_t n_items = 4157;
    std::size_t size = 64;
    /// Copies per original, the original included (1 disables augmentation).
    std::size_t augment_factor = 5;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Balanced over the 7x7 (shape, texture) grid. Every tenth round of 49
/// originals is tagged `val`, together with its augmented copies.
LabeledDataset generate_dataset(const SynthOptions& options);

/// Layout: images/NNNNNN.png, masks/NNNNNN.png, index.csv
/// (id,shape_label,texture_label,split,base_id).
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& dir);
LabeledDataset load_dataset(const std::filesystem::path& dir);

std::string item_file_name(std::size_t id);

}  // namespace creagen
