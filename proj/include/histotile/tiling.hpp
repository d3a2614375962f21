#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "histotile/errors.hpp"
#include "histotile/image.hpp"
#include "histotile/labels.hpp"

namespace histotile {

// Patch grid parameters. stride() is round(patch_size * (1 - overlap)).
struct GridSpec {
    int patch_size = 512;
    double overlap_fraction = 0.5;
    bool edge_anchor = true;

    int stride() const {
        return static_cast<int>(
            std::lround(patch_size * (1.0 - overlap_fraction)));
    }

    void validate() const {
        if (patch_size < 1)
            throw ConfigError("GridSpec: patch_size must be >= 1");
        if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
            throw ConfigError("GridSpec: overlap_fraction must be in [0,1)");
        if (stride() < 1)
            throw ConfigError("GridSpec: stride rounds to zero (patch_size " +
                              std::to_string(patch_size) + ", overlap " +
                              std::to_string(overlap_fraction) + ")");
    }
};

struct Anchor {
    int x = 0;
    int y = 0;
    bool operator==(const Anchor&) const = default;
};

// A square crop with provenance and the label inherited from its source image.
struct Patch {
    std::string image_id;
    Anchor anchor;
    RgbImage pixels;
    ClassLabel label = ClassLabel::normal;
    AugTag augmentation = AugTag::identity;
};

namespace detail {

inline std::vector<int> axis_anchors(int dim, int patch, int stride, bool edge) {
    std::vector<int> anchors;
    int last = (dim - patch) / stride; // floor; dim >= patch checked by caller
    anchors.reserve(static_cast<std::size_t>(last) + 2);
    for (int i = 0; i <= last; ++i) anchors.push_back(i * stride);
    if (edge && (dim - patch) % stride != 0) anchors.push_back(dim - patch);
    return anchors;
}

} // namespace detail

// Anchor positions for a patch grid over a width x height image, row-major.
// Anchors sit at multiples of the stride; with edge_anchor on, one extra
// anchor per axis is appended at dim - patch_size when the grid would
// otherwise leave a strip at the far edge uncovered.
inline std::vector<Anchor> compute_grid(int width, int height, const GridSpec& spec) {
    spec.validate();
    if (width < spec.patch_size || height < spec.patch_size)
        throw DimensionError("compute_grid: image " + std::to_string(width) +
                             "x" + std::to_string(height) +
                             " is smaller than patch size " +
                             std::to_string(spec.patch_size));
    const int stride = spec.stride();
    auto xs = detail::axis_anchors(width, spec.patch_size, stride, spec.edge_anchor);
    auto ys = detail::axis_anchors(height, spec.patch_size, stride, spec.edge_anchor);
    std::vector<Anchor> anchors;
    anchors.reserve(xs.size() * ys.size());
    for (int y : ys)
        for (int x : xs) anchors.push_back({x, y});
    return anchors;
}

// One patch per grid anchor, pixel content equal to the crop, label copied
// from the source image. Raw patches carry the identity augmentation tag.
inline std::vector<Patch> extract_patches(const RgbImage& img,
                                          const std::string& image_id,
                                          ClassLabel label,
                                          const GridSpec& spec) {
    auto anchors = compute_grid(img.width, img.height, spec);
    std::vector<Patch> patches;
    patches.reserve(anchors.size());
    for (const Anchor& a : anchors) {
        Patch p;
        p.image_id = image_id;
        p.anchor = a;
        p.pixels = crop(img, a.x, a.y, spec.patch_size, spec.patch_size);
        p.label = label;
        p.augmentation = AugTag::identity;
        patches.push_back(std::move(p));
    }
    return patches;
}

} // namespace histotile
