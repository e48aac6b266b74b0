#include "creagen/image_io.hpp"

#include <png.h>

#include <cstring>
#include <stdexcept>

namespace creagen {

void write_png(const std::filesystem::path& path, const Image8& image) {
    if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("write_png: unsupported channel count");
    if (image.pixels.size() != image.width * image.height * image.channels) {
        throw std::invalid_argument("write_png: pixel buffer does not match dimensions");
    }
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw std::runtime_error("write_png: " + path.string() + ": " + msg);
    }
}

Image8 read_png(const std::filesystem::path& path, std::size_t channels) {
    if (channels != 1 && channels != 3) throw std::invalid_argument("read_png: unsupported channel count");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw std::runtime_error("read_png: " + path.string() + ": " + img.message);
    }
    img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image8 out;
    out.width = img.width;
    out.height = img.height;
    out.channels = channels;
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw std::runtime_error("read_png: " + path.string() + ": " + msg);
    }
    return out;
}

Image8 tile_images(const std::vector<Image8>& images, std::size_t columns) {
    if (images.empty() || columns == 0) throw std::invalid_argument("tile_images: nothing to tile");
    const auto& first = images.front();
    std::size_t rows = (images.size() + columns - 1) / columns;
    Image8 out;
    out.channels = first.channels;
    out.width = columns * (first.width + 1) + 1;
    out.height = rows * (first.height + 1) + 1;
    out.pixels.assign(out.width * out.height * out.channels, 255);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& im = images[i];
        if (im.width != first.width || im.height != first.height || im.channels != first.channels) {
            throw std::invalid_argument("tile_images: images differ in size");
        }
        std::size_t ox = (i % columns) * (first.width + 1) + 1, oy = (i / columns) * (first.height + 1) + 1;
        for (std::size_t y = 0; y < im.height; ++y) {
            std::memcpy(&out.pixels[((oy + y) * out.width + ox) * out.channels], &im.pixels[y * im.width * im.channels],
                        im.width * im.channels);
        }
    }
    return out;
}

}  // namespace creagen
