#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "histotile/errors.hpp"

namespace histotile {

// 8-bit RGB image, row-major, channels interleaved (r,g,b per pixel).
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // size = width * height * 3

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h) {
        if (w < 1 || h < 1)
            throw DimensionError("RgbImage: dimensions must be >= 1, got " +
                                 std::to_string(w) + "x" + std::to_string(h));
        pixels.assign(static_cast<std::size_t>(w) * h * 3, fill);
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool operator==(const RgbImage& o) const = default;
};

// Real-valued 3-plane image (planar layout: plane index 0..2, then row-major).
// Used for the decorrelated l-alpha-beta representation.
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<double> values; // size = 3 * width * height, planar

    LabImage() = default;
    LabImage(int w, int h) : width(w), height(h) {
        if (w < 1 || h < 1)
            throw DimensionError("LabImage: dimensions must be >= 1, got " +
                                 std::to_string(w) + "x" + std::to_string(h));
        values.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }

    double* plane(int c) { return values.data() + c * pixel_count(); }
    const double* plane(int c) const { return values.data() + c * pixel_count(); }

    double& at(int x, int y, int c) {
        return values[c * pixel_count() + static_cast<std::size_t>(y) * width + x];
    }
    double at(int x, int y, int c) const {
        return values[c * pixel_count() + static_cast<std::size_t>(y) * width + x];
    }
};

// Crop a w x h window anchored at (x, y). The window must lie inside the image.
inline RgbImage crop(const RgbImage& img, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w < 1 || h < 1 ||
        x + w > img.width || y + h > img.height)
        throw DimensionError("crop: window " + std::to_string(w) + "x" +
                             std::to_string(h) + " at (" + std::to_string(x) +
                             "," + std::to_string(y) + ") exceeds image " +
                             std::to_string(img.width) + "x" +
                             std::to_string(img.height));
    RgbImage out(w, h);
    for (int row = 0; row < h; ++row) {
        const std::uint8_t* src =
            img.pixels.data() + ((static_cast<std::size_t>(y) + row) * img.width + x) * 3;
        std::uint8_t* dst = out.pixels.data() + static_cast<std::size_t>(row) * w * 3;
        std::copy(src, src + static_cast<std::size_t>(w) * 3, dst);
    }
    return out;
}

// Bilinear sample of one channel at a fractional position, pixel-center
// convention, coordinates clamped to the image border.
inline double sample_bilinear(const RgbImage& img, double x, double y, int c) {
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0;
    double fy = y - y0;
    int x1 = clampi(x0 + 1, 0, img.width - 1);
    int y1 = clampi(y0 + 1, 0, img.height - 1);
    x0 = clampi(x0, 0, img.width - 1);
    y0 = clampi(y0, 0, img.height - 1);
    double v00 = img.at(x0, y0, c);
    double v10 = img.at(x1, y0, c);
    double v01 = img.at(x0, y1, c);
    double v11 = img.at(x1, y1, c);
    return v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) +
           v01 * (1 - fx) * fy + v11 * fx * fy;
}

} // namespace histotile
