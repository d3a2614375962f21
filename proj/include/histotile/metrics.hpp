#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "histotile/errors.hpp"
#include "histotile/labels.hpp"
#include "histotile/records.hpp"

namespace histotile {

class MissingClassError : public Error {
public:
    explicit MissingClassError(const std::string& msg) : Error(msg) {}
};

// Fraction of positions where predicted equals truth.
inline double accuracy(const std::vector<ClassLabel>& predicted,
                       const std::vector<ClassLabel>& truth) {
    if (predicted.size() != truth.size())
        throw ShapeMismatchError("accuracy: " + std::to_string(predicted.size()) +
                                 " predictions vs " + std::to_string(truth.size()) +
                                 " labels");
    if (predicted.empty()) throw Error("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

// (FPR, TPR) points from (0,0) to (1,1), thresholds descending. Tied scores
// are collapsed into a single threshold step so the trapezoidal area equals
// the pairwise-concordance statistic exactly.
struct RocCurve {
    std::vector<RocPoint> points;
};

inline RocCurve roc_curve(const std::vector<double>& scores,
                          const std::vector<bool>& positives) {
    if (scores.size() != positives.size())
        throw ShapeMismatchError("roc_curve: score/label size mismatch");
    std::size_t n_pos = 0;
    for (bool b : positives) n_pos += b ? 1 : 0;
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw Error("roc_curve: need at least one positive and one negative");

    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < idx.size()) {
        const double threshold = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == threshold) {
            if (positives[idx[i]]) ++tp; else ++fp;
            ++i;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos),
                                threshold});
    }
    return curve;
}

// Trapezoidal integral of TPR over FPR.
inline double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

struct ClassReport {
    RocCurve roc;
    double auc = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

struct OneVsRestReport {
    std::array<ClassReport, kNumClasses> per_class;
};

// Per-class one-vs-rest ROC/AUC from probability scores, plus sensitivity
// (TPR) and specificity (1 - FPR) of the argmax decision rule. All four
// classes must be present in truth.
inline OneVsRestReport one_vs_rest_report(
    const std::vector<std::array<double, kNumClasses>>& scores,
    const std::vector<ClassLabel>& predicted,
    const std::vector<ClassLabel>& truth) {
    if (scores.size() != truth.size() || predicted.size() != truth.size())
        throw ShapeMismatchError("one_vs_rest_report: size mismatch");
    if (truth.empty()) throw Error("one_vs_rest_report: empty input");

    std::array<int, kNumClasses> counts{};
    for (ClassLabel t : truth) ++counts[static_cast<int>(t)];
    for (int c = 0; c < kNumClasses; ++c)
        if (counts[c] == 0)
            throw MissingClassError("one_vs_rest_report: class \"" +
                                    std::string(kClassNames[c]) +
                                    "\" absent from truth");

    OneVsRestReport report;
    for (int c = 0; c < kNumClasses; ++c) {
        std::vector<double> class_scores(truth.size());
        std::vector<bool> positives(truth.size());
        int tp = 0, fn = 0, fp = 0, tn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            class_scores[i] = scores[i][c];
            const bool is_pos = truth[i] == static_cast<ClassLabel>(c);
            positives[i] = is_pos;
            const bool pred_pos = predicted[i] == static_cast<ClassLabel>(c);
            if (is_pos) (pred_pos ? tp : fn)++;
            else (pred_pos ? fp : tn)++;
        }
        ClassReport& r = report.per_class[c];
        r.roc = roc_curve(class_scores, positives);
        r.auc = auc(r.roc);
        r.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
        r.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    }
    return report;
}

// ROC point CSV, one row per threshold step, suitable for plotting.
inline void save_roc_csv(const RocCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_roc_csv: cannot open " + path);
    out << "fpr,tpr,threshold\n";
    for (const auto& p : curve.points)
        out << detail::format_prob(p.fpr) << ',' << detail::format_prob(p.tpr)
            << ',' << detail::format_prob(p.threshold) << "\n";
}

} // namespace histotile
