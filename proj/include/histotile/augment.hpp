#pragma once

#include <vector>

#include "histotile/errors.hpp"
#include "histotile/labels.hpp"
#include "histotile/tiling.hpp"

namespace histotile {

namespace detail {

// Source coordinates for output pixel (x, y) under each isometry of the
// square. Rotations are counter-clockwise.
inline void aug_source_coords(AugTag tag, int n, int x, int y, int& sx, int& sy) {
    switch (tag) {
        case AugTag::identity: sx = x; sy = y; break;
        case AugTag::rot90:    sx = n - 1 - y; sy = x; break;
        case AugTag::rot180:   sx = n - 1 - x; sy = n - 1 - y; break;
        case AugTag::rot270:   sx = y; sy = n - 1 - x; break;
        case AugTag::hflip:    sx = n - 1 - x; sy = y; break;
        case AugTag::vflip:    sx = x; sy = n - 1 - y; break;
    }
}

} // namespace detail

// Transform a square pixel grid by the named isometry.
inline RgbImage apply_isometry(const RgbImage& img, AugTag tag) {
    if (img.width != img.height)
        throw DimensionError("apply_isometry: patch must be square, got " +
                             std::to_string(img.width) + "x" +
                             std::to_string(img.height));
    if (tag == AugTag::identity) return img;
    const int n = img.width;
    RgbImage out(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            int sx, sy;
            detail::aug_source_coords(tag, n, x, y, sx, sy);
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

// Augmented copy of a patch: pixels transformed, provenance updated with the
// tag, label and anchor preserved.
inline Patch apply(const Patch& patch, AugTag tag) {
    Patch out;
    out.image_id = patch.image_id;
    out.anchor = patch.anchor;
    out.pixels = apply_isometry(patch.pixels, tag);
    out.label = patch.label;
    out.augmentation = tag;
    return out;
}

// Expands every input patch into its six variants (identity plus the three
// rotations and two flips), in input order then fixed tag order.
inline std::vector<Patch> augment_all(const std::vector<Patch>& patches) {
    std::vector<Patch> out;
    out.reserve(patches.size() * kNumAugTags);
    for (const Patch& p : patches)
        for (int t = 0; t < kNumAugTags; ++t)
            out.push_back(apply(p, static_cast<AugTag>(t)));
    return out;
}

} // namespace histotile
