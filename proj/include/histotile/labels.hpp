#pragma once

#include <array>
#include <string>

#include "histotile/errors.hpp"

namespace histotile {

// The four tissue classes, fixed integer codes 0..3.
enum class ClassLabel : int {
    normal = 0,
    benign = 1,
    in_situ = 2,
    invasive = 3,
};

inline constexpr int kNumClasses = 4;

inline constexpr std::array<const char*, kNumClasses> kClassNames{
    "normal", "benign", "in_situ", "invasive"};

inline const char* to_string(ClassLabel label) {
    return kClassNames[static_cast<int>(label)];
}

inline ClassLabel class_from_string(const std::string& name) {
    for (int i = 0; i < kNumClasses; ++i)
        if (name == kClassNames[i]) return static_cast<ClassLabel>(i);
    throw ParseError("unknown class label \"" + name + "\"");
}

enum class SplitKind : int {
    unassigned = -1,
    train = 0,
    validation = 1,
    test = 2,
};

inline const char* to_string(SplitKind s) {
    switch (s) {
        case SplitKind::train: return "train";
        case SplitKind::validation: return "validation";
        case SplitKind::test: return "test";
        default: return "unassigned";
    }
}

inline SplitKind split_from_string(const std::string& name) {
    if (name == "train") return SplitKind::train;
    if (name == "validation") return SplitKind::validation;
    if (name == "test") return SplitKind::test;
    throw ParseError("unknown split \"" + name + "\"");
}

// The six augmentation variants. Order here is the fixed emission order.
enum class AugTag : int {
    identity = 0,
    rot90 = 1,
    rot180 = 2,
    rot270 = 3,
    hflip = 4,
    vflip = 5,
};

inline constexpr int kNumAugTags = 6;

inline constexpr std::array<const char*, kNumAugTags> kAugNames{
    "identity", "rot90", "rot180", "rot270", "hflip", "vflip"};

inline const char* to_string(AugTag tag) {
    return kAugNames[static_cast<int>(tag)];
}

inline AugTag aug_from_string(const std::string& name) {
    for (int i = 0; i < kNumAugTags; ++i)
        if (name == kAugNames[i]) return static_cast<AugTag>(i);
    throw ParseError("unknown augmentation tag \"" + name + "\"");
}

} // namespace histotile
