#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "histotile/errors.hpp"
#include "histotile/labels.hpp"
#include "histotile/records.hpp"

namespace histotile {

// Image-level decision combined from patch predictions.
struct ImagePrediction {
    std::string image_id;
    ClassLabel label = ClassLabel::normal;
    std::array<int, kNumClasses> vote_histogram{};
    std::array<double, kNumClasses> mean_probs{};
    int n_patches = 0;
};

// Majority vote over one image's patch records. The label is the class with
// the most patch votes; ties go to the highest mean probability among the
// tied classes, then to the lowest class code. Callers pass identity
// (non-augmented) records only.
inline ImagePrediction majority_vote(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw Error("majority_vote: no records");
    ImagePrediction out;
    out.image_id = records[0].image_id;
    for (const auto& r : records) {
        if (r.image_id != out.image_id)
            throw Error("majority_vote: mixed image ids \"" + out.image_id +
                        "\" and \"" + r.image_id + "\"");
        ++out.vote_histogram[static_cast<int>(r.predicted)];
        for (int k = 0; k < kNumClasses; ++k) out.mean_probs[k] += r.probs[k];
    }
    out.n_patches = static_cast<int>(records.size());
    for (auto& p : out.mean_probs) p /= static_cast<double>(out.n_patches);

    int best = 0;
    for (int k = 1; k < kNumClasses; ++k) {
        if (out.vote_histogram[k] > out.vote_histogram[best] ||
            (out.vote_histogram[k] == out.vote_histogram[best] &&
             out.mean_probs[k] > out.mean_probs[best]))
            best = k;
    }
    out.label = static_cast<ClassLabel>(best);
    return out;
}

// Group records by image id (identity-augmentation records only, ids in
// lexicographic order) and vote each group.
inline std::vector<ImagePrediction> aggregate_images(
    const std::vector<PredictionRecord>& records) {
    std::map<std::string, std::vector<PredictionRecord>> by_image;
    for (const auto& r : records)
        if (r.aug == AugTag::identity) by_image[r.image_id].push_back(r);
    if (by_image.empty())
        throw Error("aggregate_images: no identity-augmentation records");
    std::vector<ImagePrediction> out;
    out.reserve(by_image.size());
    for (const auto& [id, group] : by_image) out.push_back(majority_vote(group));
    return out;
}

inline constexpr const char* kImagePredictionCsvHeader =
    "image_id,pred_label,n_patches,votes_0,votes_1,votes_2,votes_3,"
    "mean_p_0,mean_p_1,mean_p_2,mean_p_3";

inline void save_image_predictions(const std::vector<ImagePrediction>& preds,
                                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_image_predictions: cannot open " + path);
    out << kImagePredictionCsvHeader << "\n";
    for (const auto& p : preds) {
        out << p.image_id << ',' << to_string(p.label) << ',' << p.n_patches;
        for (int v : p.vote_histogram) out << ',' << v;
        for (double m : p.mean_probs) out << ',' << detail::format_prob(m);
        out << "\n";
    }
}

inline std::vector<ImagePrediction> load_image_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_image_predictions: cannot open " + path);
    std::vector<ImagePrediction> preds;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (line_no == 1 && !fields.empty() && fields[0] == "image_id") continue;
        const std::string ctx = path + ":" + std::to_string(line_no);
        if (fields.size() != 11)
            throw ParseError(ctx + ": expected 11 fields, got " +
                             std::to_string(fields.size()));
        ImagePrediction p;
        p.image_id = fields[0];
        try {
            p.label = class_from_string(fields[1]);
        } catch (const Error& e) {
            throw ParseError(ctx + ": " + e.what());
        }
        p.n_patches = detail::parse_int(fields[2], ctx);
        for (int k = 0; k < kNumClasses; ++k)
            p.vote_histogram[k] = detail::parse_int(fields[3 + k], ctx);
        for (int k = 0; k < kNumClasses; ++k)
            p.mean_probs[k] = detail::parse_double(fields[7 + k], ctx);
        preds.push_back(std::move(p));
    }
    return preds;
}

} // namespace histotile
