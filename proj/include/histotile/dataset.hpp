#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "histotile/errors.hpp"
#include "histotile/labels.hpp"
#include "histotile/rng.hpp"

namespace histotile {

class EmptyClassError : public Error {
public:
    explicit EmptyClassError(const std::string& msg) : Error(msg) {}
};

// One manifest line. Image-level records carry no anchor/aug; patch-level
// records point back at their source image through `id` plus the anchor and
// augmentation tag.
struct ManifestRecord {
    std::string id;
    std::string path;
    ClassLabel label = ClassLabel::normal;
    SplitKind split = SplitKind::unassigned;
    std::optional<int> anchor_x;
    std::optional<int> anchor_y;
    std::optional<AugTag> aug;

    bool operator==(const ManifestRecord&) const = default;
};

using Manifest = std::vector<ManifestRecord>;

struct Split {
    std::uint64_t seed = 0;
    std::map<std::string, SplitKind> assignment;
};

inline nlohmann::json record_to_json(const ManifestRecord& r) {
    nlohmann::json j{{"id", r.id}, {"path", r.path}, {"label", to_string(r.label)}};
    if (r.split != SplitKind::unassigned) j["split"] = to_string(r.split);
    if (r.anchor_x) j["anchor_x"] = *r.anchor_x;
    if (r.anchor_y) j["anchor_y"] = *r.anchor_y;
    if (r.aug) j["aug"] = to_string(*r.aug);
    return j;
}

inline ManifestRecord record_from_json(const nlohmann::json& j) {
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.label = class_from_string(j.at("label").get<std::string>());
    if (j.contains("split")) r.split = split_from_string(j["split"].get<std::string>());
    if (j.contains("anchor_x")) r.anchor_x = j["anchor_x"].get<int>();
    if (j.contains("anchor_y")) r.anchor_y = j["anchor_y"].get<int>();
    if (j.contains("aug")) r.aug = aug_from_string(j["aug"].get<std::string>());
    return r;
}

// UTF-8, one JSON object per line. Parse failures report the 1-based line.
inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open " + path);
    Manifest manifest;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            manifest.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const Error& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return manifest;
}

inline void save_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_manifest: cannot open " + path + " for writing");
    for (const auto& r : manifest) out << record_to_json(r).dump() << "\n";
}

inline void validate_unique_ids(const Manifest& manifest) {
    std::set<std::string> seen;
    for (const auto& r : manifest)
        if (!seen.insert(r.id).second)
            throw Error("manifest: duplicate image id \"" + r.id + "\"");
}

inline std::array<int, kNumClasses> class_histogram(const Manifest& manifest) {
    std::array<int, kNumClasses> hist{};
    for (const auto& r : manifest) ++hist[static_cast<int>(r.label)];
    return hist;
}

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;

    void validate() const {
        if (train < 0 || validation < 0 || test < 0)
            throw ConfigError("split ratios must be non-negative");
        if (std::abs(train + validation + test - 1.0) > 1e-9)
            throw ConfigError("split ratios must sum to 1");
    }
};

// Stratified split: image ids of each class are sorted, shuffled by an
// xorshift64* stream seeded from (seed, class code), then allocated floor
// counts per split with the remainder going to train.
inline Split make_split(const Manifest& manifest, const SplitRatios& ratios,
                        std::uint64_t seed) {
    ratios.validate();
    validate_unique_ids(manifest);

    std::array<std::vector<std::string>, kNumClasses> per_class;
    for (const auto& r : manifest)
        per_class[static_cast<int>(r.label)].push_back(r.id);

    Split split;
    split.seed = seed;
    for (int c = 0; c < kNumClasses; ++c) {
        auto& ids = per_class[c];
        if (ids.empty())
            throw EmptyClassError("make_split: class \"" +
                                  std::string(kClassNames[c]) + "\" has no images");
        std::sort(ids.begin(), ids.end());
        Xorshift64Star rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        shuffle(ids, rng);

        const auto n = ids.size();
        auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n));
        auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * n));
        auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n));
        n_train += n - (n_train + n_val + n_test); // remainder to train

        for (std::size_t i = 0; i < n; ++i) {
            SplitKind kind = i < n_train ? SplitKind::train
                           : i < n_train + n_val ? SplitKind::validation
                                                 : SplitKind::test;
            split.assignment[ids[i]] = kind;
        }
    }
    return split;
}

// Stamp split assignments onto image-level records.
inline void apply_split(Manifest& manifest, const Split& split) {
    for (auto& r : manifest) {
        auto it = split.assignment.find(r.id);
        if (it == split.assignment.end())
            throw Error("apply_split: no assignment for image \"" + r.id + "\"");
        r.split = it->second;
    }
}

} // namespace histotile
