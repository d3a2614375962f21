#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "histotile/errors.hpp"
#include "histotile/labels.hpp"

namespace histotile {

// Per-patch probability vector plus provenance; the interchange unit between
// the classifier and evaluation. Externally produced predictions enter the
// pipeline through the same CSV shape.
struct PredictionRecord {
    std::string image_id;
    int anchor_x = 0;
    int anchor_y = 0;
    AugTag aug = AugTag::identity;
    std::array<double, kNumClasses> probs{};
    ClassLabel predicted = ClassLabel::normal;

    bool operator==(const PredictionRecord&) const = default;
};

inline constexpr const char* kPredictionCsvHeader =
    "image_id,anchor_x,anchor_y,aug,p_normal,p_benign,p_insitu,p_invasive,pred_label";

namespace detail {

inline std::string format_prob(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": bad number \"" + s + "\"");
    }
}

inline int parse_int(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": bad integer \"" + s + "\"");
    }
}

} // namespace detail

inline void save_predictions(const std::vector<PredictionRecord>& records,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_predictions: cannot open " + path + " for writing");
    out << kPredictionCsvHeader << "\n";
    for (const auto& r : records) {
        out << r.image_id << ',' << r.anchor_x << ',' << r.anchor_y << ','
            << to_string(r.aug);
        for (double p : r.probs) out << ',' << detail::format_prob(p);
        out << ',' << to_string(r.predicted) << "\n";
    }
}

// Reads the prediction CSV. A leading header row is detected by its first
// field. Probability vectors must be non-negative and sum to 1 within 1e-6.
inline std::vector<PredictionRecord> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_predictions: cannot open " + path);
    std::vector<PredictionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (line_no == 1 && !fields.empty() && fields[0] == "image_id") continue;
        const std::string ctx = path + ":" + std::to_string(line_no);
        if (fields.size() != 9)
            throw ParseError(ctx + ": expected 9 fields, got " +
                             std::to_string(fields.size()));
        PredictionRecord r;
        r.image_id = fields[0];
        r.anchor_x = detail::parse_int(fields[1], ctx);
        r.anchor_y = detail::parse_int(fields[2], ctx);
        try {
            r.aug = aug_from_string(fields[3]);
            r.predicted = class_from_string(fields[8]);
        } catch (const Error& e) {
            throw ParseError(ctx + ": " + e.what());
        }
        double sum = 0.0;
        for (int k = 0; k < kNumClasses; ++k) {
            r.probs[k] = detail::parse_double(fields[4 + k], ctx);
            if (r.probs[k] < 0.0)
                throw ParseError(ctx + ": negative probability");
            sum += r.probs[k];
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw ParseError(ctx + ": probabilities sum to " +
                             std::to_string(sum) + ", expected 1");
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace histotile
