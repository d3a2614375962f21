#pragma once

#include <filesystem>
#include <string>

#include "histotile/image.hpp"
#include "histotile/labels.hpp"
#include "histotile/png_io.hpp"
#include "histotile/rng.hpp"

namespace histotile {

// Synthetic two-tone test images. Every class mixes the same two tones
// 50/50, so per-image channel statistics are nearly identical across classes
// and class identity survives stain normalization; what differs is the
// spatial arrangement:
//   normal    fine checkerboard (cell 2)
//   benign    vertical stripes (width 8)
//   in_situ   horizontal stripes (width 8)
//   invasive  coarse checkerboard (cell 8)
// A small seeded per-pixel perturbation keeps channel variance non-degenerate
// and makes images within a class distinct.
inline RgbImage make_fixture_image(ClassLabel label, int index, int size,
                                   std::uint64_t seed) {
    constexpr int tone_a[3] = {96, 64, 128};
    constexpr int tone_b[3] = {176, 144, 208};
    Xorshift64Star rng(derive_seed(seed, 7001 + 16 * static_cast<int>(label) + index));
    RgbImage img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            bool use_a = false;
            switch (label) {
                case ClassLabel::normal:   use_a = ((x / 2) + (y / 2)) % 2 == 0; break;
                case ClassLabel::benign:   use_a = (x / 8) % 2 == 0; break;
                case ClassLabel::in_situ:  use_a = (y / 8) % 2 == 0; break;
                case ClassLabel::invasive: use_a = ((x / 8) + (y / 8)) % 2 == 0; break;
            }
            for (int c = 0; c < 3; ++c) {
                int base = use_a ? tone_a[c] : tone_b[c];
                int noise = static_cast<int>(rng.next_below(11)) - 5;
                int v = std::clamp(base + noise, 0, 255);
                img.at(x, y, c) = static_cast<std::uint8_t>(v);
            }
        }
    }
    return img;
}

// Writes images_per_class PNGs per class under dir/<class name>/, named
// <class>_<index>.png. Returns the number of files written.
inline int write_fixture(const std::string& dir, int images_per_class, int size,
                         std::uint64_t seed) {
    namespace fs = std::filesystem;
    int written = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto label = static_cast<ClassLabel>(c);
        fs::path class_dir = fs::path(dir) / kClassNames[c];
        fs::create_directories(class_dir);
        for (int i = 0; i < images_per_class; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%02d.png", kClassNames[c], i);
            write_png(make_fixture_image(label, i, size, seed),
                      (class_dir / name).string());
            ++written;
        }
    }
    return written;
}

} // namespace histotile
