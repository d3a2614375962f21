#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "histotile/errors.hpp"
#include "histotile/image.hpp"

namespace histotile {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

// Decode a PNG file into 8-bit RGB. Palette, gray and 16-bit inputs are
// expanded/stripped to RGB8; alpha is dropped.
inline RgbImage read_png(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("read_png: png_create_info_struct failed");
    }

    std::vector<std::uint8_t> data;
    std::vector<png_bytep> rows;
    int width = 0, height = 0;
    bool ok = false;

    if (!setjmp(png_jmpbuf(png))) {
        png_init_io(png, fp.get());
        png_read_info(png, info);

        width = static_cast<int>(png_get_image_width(png, info));
        height = static_cast<int>(png_get_image_height(png, info));
        png_byte color_type = png_get_color_type(png, info);
        png_byte bit_depth = png_get_bit_depth(png, info);

        if (bit_depth == 16) png_set_strip_16(png);
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
            png_set_strip_alpha(png);
        png_read_update_info(png, info);

        data.resize(static_cast<std::size_t>(width) * height * 3);
        rows.resize(height);
        for (int y = 0; y < height; ++y)
            rows[y] = data.data() + static_cast<std::size_t>(y) * width * 3;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
        ok = true;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) throw IoError("read_png: failed to decode " + path);

    RgbImage img(width, height);
    img.pixels = std::move(data);
    return img;
}

// Encode as 8-bit RGB PNG. Default compression settings and no timestamp
// chunk, so identical pixel data yields byte-identical files.
inline void write_png(const RgbImage& img, const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("write_png: cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("write_png: png_create_info_struct failed");
    }

    std::vector<png_bytep> rows(img.height);
    bool ok = false;
    if (!setjmp(png_jmpbuf(png))) {
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < img.height; ++y)
            rows[y] = const_cast<png_bytep>(
                img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        ok = true;
    }
    png_destroy_write_struct(&png, &info);
    if (!ok) throw IoError("write_png: failed to encode " + path);
}

} // namespace histotile
