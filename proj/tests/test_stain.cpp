#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "histotile/rng.hpp"
#include "histotile/stain.hpp"

using namespace histotile;

namespace {

// Independent straight-line computation of the forward chain for one pixel:
// raw color-transfer matrix, rows normalized to unit sum, log10, then the
// fixed decorrelation. Kept free of any library code on purpose.
std::array<double, 3> oracle_rgb_to_lab(double r, double g, double b) {
    const double raw[3][3] = {{0.3811, 0.5783, 0.0402},
                              {0.1967, 0.7244, 0.0782},
                              {0.0241, 0.1288, 0.8444}};
    double lms[3];
    for (int i = 0; i < 3; ++i) {
        double row_sum = raw[i][0] + raw[i][1] + raw[i][2];
        lms[i] = (raw[i][0] * r + raw[i][1] * g + raw[i][2] * b) / row_sum;
        lms[i] = std::log10(std::max(lms[i], 1.0 / 255.0));
    }
    const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0), s2 = std::sqrt(2.0);
    return {(lms[0] + lms[1] + lms[2]) / s3,
            (lms[0] + lms[1] - 2.0 * lms[2]) / s6,
            (lms[0] - lms[1]) / s2};
}

RgbImage random_image(int w, int h, int lo, int hi, std::uint64_t seed) {
    Xorshift64Star rng(seed);
    RgbImage img(w, h);
    for (auto& p : img.pixels)
        p = static_cast<std::uint8_t>(lo + rng.next_below(hi - lo + 1));
    return img;
}

} // namespace

TEST_CASE("rgb_to_lab matches the scalar oracle on a single pixel") {
    RgbImage img(1, 1);
    img.at(0, 0, 0) = 200;
    img.at(0, 0, 1) = 30;
    img.at(0, 0, 2) = 90;
    LabImage lab = rgb_to_lab(img);
    auto expected = oracle_rgb_to_lab(200, 30, 90);
    CHECK(lab.at(0, 0, 0) == Catch::Approx(expected[0]).margin(1e-12));
    CHECK(lab.at(0, 0, 1) == Catch::Approx(expected[1]).margin(1e-12));
    CHECK(lab.at(0, 0, 2) == Catch::Approx(expected[2]).margin(1e-12));
}

TEST_CASE("achromatic input has zero chroma planes") {
    RgbImage gray(6, 4, 128);
    LabImage lab = rgb_to_lab(gray);
    for (std::size_t i = 0; i < lab.pixel_count(); ++i) {
        CHECK(std::abs(lab.plane(1)[i]) < 1e-9);
        CHECK(std::abs(lab.plane(2)[i]) < 1e-9);
    }
}

TEST_CASE("round trip is within one 8-bit step for channels >= 1") {
    for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
        RgbImage img = random_image(9, 7, 1, 255, seed);
        RgbImage back = lab_to_rgb(rgb_to_lab(img));
        REQUIRE(back.width == img.width);
        REQUIRE(back.height == img.height);
        int max_dev = 0;
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            max_dev = std::max(max_dev, std::abs(int(img.pixels[i]) - int(back.pixels[i])));
        CHECK(max_dev <= 1);
    }
}

TEST_CASE("zero lab planes invert to the oracle's fixed gray") {
    // l = a = b = 0 means log10(LMS) = 0, i.e. LMS = (1,1,1); with unit row
    // sums the inverse maps that back to RGB (1,1,1).
    LabImage lab(3, 2);
    RgbImage rgb = lab_to_rgb(lab);
    for (auto v : rgb.pixels) CHECK(int(v) == 1);
}

TEST_CASE("out-of-gamut inverse clamps to 255") {
    LabImage lab(1, 1);
    lab.at(0, 0, 0) = 10.0; // far above the l of pure white
    RgbImage rgb = lab_to_rgb(lab);
    CHECK(int(rgb.at(0, 0, 0)) == 255);
    CHECK(int(rgb.at(0, 0, 1)) == 255);
    CHECK(int(rgb.at(0, 0, 2)) == 255);
}

TEST_CASE("channel_stats of a constant image floors the deviation") {
    LabImage lab(4, 4);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < lab.pixel_count(); ++i)
            lab.plane(c)[i] = 0.5 + c;
    LabStats stats = channel_stats(lab);
    for (int c = 0; c < 3; ++c) {
        CHECK(stats.mean[c] == Catch::Approx(0.5 + c));
        CHECK(stats.std[c] == kStdFloor);
    }
}

TEST_CASE("channel_stats uses the population convention") {
    LabImage lab(2, 1);
    lab.plane(0)[0] = 1.0;
    lab.plane(0)[1] = 3.0;
    LabStats stats = channel_stats(lab);
    CHECK(stats.mean[0] == Catch::Approx(2.0));
    CHECK(stats.std[0] == Catch::Approx(1.0));
}

TEST_CASE("channel_stats matches a two-pass oracle on a random image") {
    RgbImage img = random_image(8, 8, 0, 255, 99);
    LabImage lab = rgb_to_lab(img);
    LabStats stats = channel_stats(lab);
    for (int c = 0; c < 3; ++c) {
        const double* p = lab.plane(c);
        double mean = 0.0;
        for (std::size_t i = 0; i < 64; ++i) mean += p[i];
        mean /= 64.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 64; ++i) var += (p[i] - mean) * (p[i] - mean);
        var /= 64.0;
        CHECK(stats.mean[c] == Catch::Approx(mean).margin(1e-9));
        CHECK(stats.std[c] == Catch::Approx(std::sqrt(var)).margin(1e-9));
    }
}

TEST_CASE("self-normalization reproduces the round-tripped source") {
    RgbImage img = random_image(12, 12, 20, 235, 7);
    LabStats self = channel_stats(rgb_to_lab(img));
    RgbImage normalized = normalize_stains(img, self);
    RgbImage round_tripped = lab_to_rgb(rgb_to_lab(img));
    REQUIRE(normalized.pixels.size() == round_tripped.pixels.size());
    for (std::size_t i = 0; i < normalized.pixels.size(); ++i)
        CHECK(std::abs(int(normalized.pixels[i]) - int(img.pixels[i])) <= 1);
    CHECK(normalized.pixels == round_tripped.pixels);
}

TEST_CASE("normalized output statistics match the target") {
    RgbImage source = random_image(16, 16, 30, 225, 21);
    RgbImage target_img = random_image(12, 12, 40, 215, 22);
    LabStats target = channel_stats(rgb_to_lab(target_img));
    RgbImage out = normalize_stains(source, target);
    LabStats got = channel_stats(rgb_to_lab(out));
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(got.mean[c] - target.mean[c]) <= 0.05);
        CHECK(std::abs(got.std[c] - target.std[c]) <= 0.05);
    }
}

TEST_CASE("constant input stays constant under normalization") {
    RgbImage gray(5, 5, 128);
    RgbImage target_img = random_image(8, 8, 30, 220, 31);
    RgbImage out = normalize_stains(gray, channel_stats(rgb_to_lab(target_img)));
    for (std::size_t i = 3; i < out.pixels.size(); ++i)
        CHECK(out.pixels[i] == out.pixels[i % 3]);
}

TEST_CASE("stain transforms are deterministic") {
    RgbImage img = random_image(10, 6, 5, 250, 42);
    RgbImage target_img = random_image(8, 8, 30, 220, 43);
    LabStats target = channel_stats(rgb_to_lab(target_img));
    RgbImage a = normalize_stains(img, target);
    RgbImage b = normalize_stains(img, target);
    CHECK(a.pixels == b.pixels);
}

TEST_CASE("stats serialize as a six-number JSON object") {
    LabStats s;
    s.mean = {1.5, -0.25, 0.125};
    s.std = {0.5, 0.75, 1.25};
    nlohmann::json j = stats_to_json(s);
    CHECK(j.dump() == R"({"mean":[1.5,-0.25,0.125],"std":[0.5,0.75,1.25]})");
    LabStats back = stats_from_json(j);
    for (int c = 0; c < 3; ++c) {
        CHECK(back.mean[c] == s.mean[c]);
        CHECK(back.std[c] == s.std[c]);
    }
    CHECK_THROWS_AS(stats_from_json(nlohmann::json{{"mean", {1, 2, 3}}}), ParseError);
}
