#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace creagen {

/// 8-bit interleaved raster (1 = gray, 3 = RGB).
struct Image8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const Image8& image);
/// Reads gray or RGB(A) PNGs; output has `channels` 1 or 3 as requested.
Image8 read_png(const std::filesystem::path& path, std::size_t channels);

/// Tiles equally sized images row-major into one canvas with a 1-pixel white gutter.
Image8 tile_images(const std::vector<Image8>& images, std::size_t columns);

}  // namespace creagen
