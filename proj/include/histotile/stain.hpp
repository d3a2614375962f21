#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "histotile/errors.hpp"
#include "histotile/image.hpp"

namespace histotile {

// Floor applied to standard deviations so constant channels never divide by zero.
inline constexpr double kStdFloor = 1e-6;
// LMS values are floored here before the log so zero pixels stay finite.
inline constexpr double kLogFloor = 1.0 / 255.0;

using Mat3 = std::array<std::array<double, 3>, 3>;

namespace detail {

constexpr Mat3 row_normalize(Mat3 m) {
    for (auto& row : m) {
        double s = row[0] + row[1] + row[2];
        for (auto& v : row) v /= s;
    }
    return m;
}

constexpr Mat3 invert3(const Mat3& m) {
    double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                 m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                 m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    Mat3 inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

constexpr double kInvSqrt3 = 0.5773502691896257645091488;
constexpr double kInvSqrt6 = 0.4082482904638630163662140;
constexpr double kInvSqrt2 = 0.7071067811865475244008444;

// Reinhard color-transfer RGB->LMS matrix, each row normalized to unit sum so
// achromatic inputs map to exactly equal LMS components (and therefore to
// alpha = beta = 0).
inline constexpr Mat3 kRgbToLms = row_normalize(Mat3{{
    {0.3811, 0.5783, 0.0402},
    {0.1967, 0.7244, 0.0782},
    {0.0241, 0.1288, 0.8444},
}});

inline constexpr Mat3 kLmsToRgb = invert3(kRgbToLms);

// log10(LMS) -> l-alpha-beta decorrelation and its exact algebraic inverse.
inline constexpr Mat3 kLogLmsToLab{{
    {kInvSqrt3, kInvSqrt3, kInvSqrt3},
    {kInvSqrt6, kInvSqrt6, -2.0 * kInvSqrt6},
    {kInvSqrt2, -kInvSqrt2, 0.0},
}};

inline constexpr Mat3 kLabToLogLms{{
    {kInvSqrt3, kInvSqrt6, kInvSqrt2},
    {kInvSqrt3, kInvSqrt6, -kInvSqrt2},
    {kInvSqrt3, -2.0 * kInvSqrt6, 0.0},
}};

inline std::array<double, 3> mul3(const Mat3& m, const std::array<double, 3>& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

} // namespace detail

// Per-channel mean and standard deviation in l-alpha-beta space; the matching
// target of the Reinhard transfer.
struct LabStats {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> std{kStdFloor, kStdFloor, kStdFloor};
};

// RGB -> LMS -> log10 -> l-alpha-beta, per pixel. RGB channels are taken in
// their native [0,255] range; LMS is floored at kLogFloor before the log.
inline LabImage rgb_to_lab(const RgbImage& img) {
    LabImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    double* l = out.plane(0);
    double* a = out.plane(1);
    double* b = out.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 3> rgb{static_cast<double>(img.pixels[i * 3 + 0]),
                                  static_cast<double>(img.pixels[i * 3 + 1]),
                                  static_cast<double>(img.pixels[i * 3 + 2])};
        auto lms = detail::mul3(detail::kRgbToLms, rgb);
        for (auto& v : lms) v = std::log10(std::max(v, kLogFloor));
        auto lab = detail::mul3(detail::kLogLmsToLab, lms);
        l[i] = lab[0];
        a[i] = lab[1];
        b[i] = lab[2];
    }
    return out;
}

// Inverse chain: l-alpha-beta -> log10 LMS -> LMS -> RGB, then clamp to
// [0,255] and round half away from zero.
inline RgbImage lab_to_rgb(const LabImage& img) {
    RgbImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    const double* l = img.plane(0);
    const double* a = img.plane(1);
    const double* b = img.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        auto log_lms = detail::mul3(detail::kLabToLogLms, {l[i], a[i], b[i]});
        std::array<double, 3> lms{std::pow(10.0, log_lms[0]),
                                  std::pow(10.0, log_lms[1]),
                                  std::pow(10.0, log_lms[2])};
        auto rgb = detail::mul3(detail::kLmsToRgb, lms);
        for (int c = 0; c < 3; ++c) {
            double v = std::clamp(rgb[c], 0.0, 255.0);
            out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::round(v));
        }
    }
    return out;
}

// Population (divide-by-N) mean and standard deviation per channel, two-pass.
inline LabStats channel_stats(const LabImage& img) {
    const std::size_t n = img.pixel_count();
    if (n == 0) throw DimensionError("channel_stats: empty image");
    LabStats stats;
    for (int c = 0; c < 3; ++c) {
        const double* p = img.plane(c);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += p[i];
        double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = p[i] - mean;
            sq += d * d;
        }
        double sd = std::sqrt(sq / static_cast<double>(n));
        stats.mean[c] = mean;
        stats.std[c] = std::max(sd, kStdFloor);
    }
    return stats;
}

// Reinhard statistic matching: shift/scale each l-alpha-beta channel of the
// source so its stats equal the target's, then convert back to RGB.
inline RgbImage normalize_stains(const RgbImage& source, const LabStats& target) {
    LabImage lab = rgb_to_lab(source);
    LabStats src = channel_stats(lab);
    const std::size_t n = lab.pixel_count();
    for (int c = 0; c < 3; ++c) {
        double scale = target.std[c] / src.std[c];
        double* p = lab.plane(c);
        for (std::size_t i = 0; i < n; ++i)
            p[i] = (p[i] - src.mean[c]) * scale + target.mean[c];
    }
    return lab_to_rgb(lab);
}

inline nlohmann::json stats_to_json(const LabStats& s) {
    return nlohmann::json{{"mean", {s.mean[0], s.mean[1], s.mean[2]}},
                          {"std", {s.std[0], s.std[1], s.std[2]}}};
}

inline LabStats stats_from_json(const nlohmann::json& j) {
    LabStats s;
    try {
        for (int c = 0; c < 3; ++c) {
            s.mean[c] = j.at("mean").at(c).get<double>();
            s.std[c] = std::max(j.at("std").at(c).get<double>(), kStdFloor);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("stats_from_json: ") + e.what());
    }
    for (int c = 0; c < 3; ++c)
        if (!std::isfinite(s.mean[c]) || !std::isfinite(s.std[c]))
            throw ParseError("stats_from_json: non-finite value");
    return s;
}

inline void save_stats(const LabStats& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_stats: cannot open " + path);
    out << stats_to_json(s).dump() << "\n";
}

inline LabStats load_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_stats: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_stats: " + path + ": " + e.what());
    }
    return stats_from_json(j);
}

} // namespace histotile
