#pragma once

// Optional PNG read/write on top of libpng. Kept out of raster.hpp so the
// portable-pixmap path stays dependency-free; include this header (and link
// libpng) only where PNG support is wanted. 8-bit gray and RGB only, with
// the same v/255 <-> round(v*255) sample mapping as the pixmap path.

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <vector>

#include <png.h>

#include "infestscope/raster.hpp"

namespace infestscope {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline bool looks_like_png(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) return false;
    unsigned char sig[8] = {};
    const std::size_t got = std::fread(sig, 1, 8, f);
    std::fclose(f);
    return got == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

inline Raster load_png(const std::filesystem::path& path) {
    detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw std::runtime_error("cannot open image file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("malformed PNG file: " + path.string());
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    // normalize every input to 8-bit gray or RGB without alpha
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if ((channels != 1 && channels != 3) || width == 0 || height == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG layout: " + path.string());
    }

    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Raster r;
    r.width = static_cast<int>(width);
    r.height = static_cast<int>(height);
    r.channels = channels;
    r.data.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) r.data[i] = raw[i] / 255.0;
    return r;
}

inline void save_png(const Raster& r, const std::filesystem::path& path) {
    if (!r.valid()) throw std::invalid_argument("cannot save invalid raster");
    detail::FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw std::runtime_error("cannot open output file: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed writing PNG file: " + path.string());
    }

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height),
                 8, r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> raw(r.data.size());
    for (std::size_t i = 0; i < r.data.size(); ++i) {
        const long q = std::lround(r.data[i] * 255.0);
        raw[i] = static_cast<unsigned char>(std::clamp(q, 0L, 255L));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
    for (int y = 0; y < r.height; ++y)
        rows[static_cast<std::size_t>(y)] =
            raw.data() + static_cast<std::size_t>(y) * r.width * r.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Loads either format: PNG by signature, portable pixmap otherwise.
inline Raster load_image_any(const std::filesystem::path& path) {
    if (looks_like_png(path)) return load_png(path);
    return load_image(path);
}

/// Saves by extension: .png via libpng, anything else as P5/P6.
inline void save_image_any(const Raster& r, const std::filesystem::path& path) {
    if (path.extension() == ".png") save_png(r, path);
    else save_image(r, path);
}

}  // namespace infestscope
