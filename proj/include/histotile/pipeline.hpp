#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "histotile/aggregate.hpp"
#include "histotile/augment.hpp"
#include "histotile/dataset.hpp"
#include "histotile/errors.hpp"
#include "histotile/metrics.hpp"
#include "histotile/net.hpp"
#include "histotile/parallel.hpp"
#include "histotile/params_io.hpp"
#include "histotile/png_io.hpp"
#include "histotile/records.hpp"
#include "histotile/stain.hpp"
#include "histotile/tiling.hpp"
#include "histotile/train.hpp"

namespace histotile {

// Stage seed salts. Only splitting and training consume randomness; both
// streams derive from the single top-level seed.
inline constexpr std::uint64_t kSaltSplit = 1;
inline constexpr std::uint64_t kSaltTrain = 2;

// Everything the CLI stages need. JSON config file fields use the same names
// as the members; CLI flags override individual fields.
struct PipelineConfig {
    std::string input_dir;
    std::string work_dir;
    std::string target_image;
    std::string target_stats; // path to a precomputed stats JSON
    GridSpec grid;
    SplitRatios ratios;
    std::uint64_t seed = 0;
    bool augment_validation = true;
    bool skip_normalization = false;
    ModelConfig model;

    void validate_work_dir() const {
        if (work_dir.empty()) throw ConfigError("work_dir is required");
    }
};

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    try {
        if (j.contains("input_dir")) cfg.input_dir = j["input_dir"].get<std::string>();
        if (j.contains("work_dir")) cfg.work_dir = j["work_dir"].get<std::string>();
        if (j.contains("target_image")) cfg.target_image = j["target_image"].get<std::string>();
        if (j.contains("target_stats")) cfg.target_stats = j["target_stats"].get<std::string>();
        if (j.contains("patch_size")) cfg.grid.patch_size = j["patch_size"].get<int>();
        if (j.contains("overlap")) cfg.grid.overlap_fraction = j["overlap"].get<double>();
        if (j.contains("edge_anchor")) cfg.grid.edge_anchor = j["edge_anchor"].get<bool>();
        if (j.contains("ratios")) {
            const auto& r = j["ratios"];
            cfg.ratios.train = r.at(0).get<double>();
            cfg.ratios.validation = r.at(1).get<double>();
            cfg.ratios.test = r.at(2).get<double>();
        }
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("augment_validation"))
            cfg.augment_validation = j["augment_validation"].get<bool>();
        if (j.contains("skip_normalization"))
            cfg.skip_normalization = j["skip_normalization"].get<bool>();
        if (j.contains("input_size")) cfg.model.input_size = j["input_size"].get<int>();
        if (j.contains("widths")) cfg.model.widths = j["widths"].get<std::vector<int>>();
        if (j.contains("blocks_per_stage"))
            cfg.model.blocks_per_stage = j["blocks_per_stage"].get<int>();
        if (j.contains("learning_rate"))
            cfg.model.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("momentum")) cfg.model.momentum = j["momentum"].get<double>();
        if (j.contains("nesterov")) cfg.model.nesterov = j["nesterov"].get<bool>();
        if (j.contains("batch_size")) cfg.model.batch_size = j["batch_size"].get<int>();
        if (j.contains("epochs")) cfg.model.max_epochs = j["epochs"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return pipeline_config_from_json(j);
}

namespace detail {

namespace fs = std::filesystem;

inline std::string join_under(const std::string& dir, const std::string& rel) {
    return (fs::path(dir) / rel).string();
}

// Manifest paths are either absolute (external inputs) or relative to the
// work dir (artifacts written by a stage).
inline std::string resolve_path(const std::string& work_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return p;
    return (fs::path(work_dir) / path).string();
}

inline std::string images_manifest_path(const PipelineConfig& cfg) {
    return join_under(cfg.work_dir, "images.jsonl");
}
inline std::string patches_manifest_path(const PipelineConfig& cfg) {
    return join_under(cfg.work_dir, "patches.jsonl");
}
inline std::string augmented_manifest_path(const PipelineConfig& cfg) {
    return join_under(cfg.work_dir, "augmented.jsonl");
}

inline ModelConfig model_config_for_run(const PipelineConfig& cfg) {
    ModelConfig m = cfg.model;
    m.seed = derive_seed(cfg.seed, kSaltTrain);
    return m;
}

inline std::string patch_file_name(const ManifestRecord& r) {
    std::string name = r.id + "_" + std::to_string(*r.anchor_x) + "_" +
                       std::to_string(*r.anchor_y);
    if (r.aug && *r.aug != AugTag::identity)
        name += std::string("_") + to_string(*r.aug);
    return name + ".png";
}

} // namespace detail

// Scan input_dir/<class>/*.png into an image-level manifest, ids taken from
// file stems, records ordered by class code then id.
inline Manifest scan_input_dir(const std::string& input_dir) {
    namespace fs = std::filesystem;
    if (input_dir.empty()) throw ConfigError("input_dir is required");
    if (!fs::is_directory(input_dir))
        throw IoError("input dir " + input_dir + " does not exist");
    Manifest manifest;
    for (int c = 0; c < kNumClasses; ++c) {
        fs::path class_dir = fs::path(input_dir) / kClassNames[c];
        if (!fs::is_directory(class_dir)) continue;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(class_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            ManifestRecord r;
            r.id = f.stem().string();
            r.path = fs::absolute(f).string();
            r.label = static_cast<ClassLabel>(c);
            manifest.push_back(std::move(r));
        }
    }
    if (manifest.empty())
        throw IoError("no class images found under " + input_dir +
                      " (expected <dir>/{normal,benign,in_situ,invasive}/*.png)");
    validate_unique_ids(manifest);
    return manifest;
}

// Stain-normalize every input image against the target statistics and write
// the normalized copies plus the image manifest into the work dir.
inline void stage_normalize(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    namespace fs = std::filesystem;
    Manifest manifest = scan_input_dir(cfg.input_dir);

    LabStats target;
    if (!cfg.target_stats.empty()) {
        target = load_stats(cfg.target_stats);
    } else if (!cfg.target_image.empty()) {
        target = channel_stats(rgb_to_lab(read_png(cfg.target_image)));
    } else {
        throw ConfigError("normalize: target_image or target_stats is required");
    }

    fs::create_directories(fs::path(cfg.work_dir) / "normalized");
    save_stats(target, detail::join_under(cfg.work_dir, "target_stats.json"));

    parallel_for(manifest.size(), [&](std::size_t i) {
        RgbImage img = read_png(manifest[i].path);
        RgbImage normalized = normalize_stains(img, target);
        const std::string rel = "normalized/" + manifest[i].id + ".png";
        write_png(normalized, detail::join_under(cfg.work_dir, rel));
        manifest[i].path = rel;
    });
    save_manifest(manifest, detail::images_manifest_path(cfg));
}

// Assign stratified train/validation/test splits to the image manifest.
// Without a prior normalize stage (skip_normalization), the manifest is
// built directly from the input directory.
inline void stage_split(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    namespace fs = std::filesystem;
    const std::string manifest_path = detail::images_manifest_path(cfg);
    Manifest manifest;
    if (fs::exists(manifest_path)) {
        manifest = load_manifest(manifest_path);
    } else if (cfg.skip_normalization) {
        fs::create_directories(cfg.work_dir);
        manifest = scan_input_dir(cfg.input_dir);
    } else {
        throw Error("split: " + manifest_path + " not found; run normalize first");
    }
    Split split = make_split(manifest, cfg.ratios, derive_seed(cfg.seed, kSaltSplit));
    apply_split(manifest, split);
    save_manifest(manifest, manifest_path);
}

// Tile every image on the patch grid and write patch files plus the patch
// manifest. Patches inherit the image's label and split.
inline void stage_tile(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    namespace fs = std::filesystem;
    Manifest images = load_manifest(detail::images_manifest_path(cfg));
    for (const auto& r : images)
        if (r.split == SplitKind::unassigned)
            throw Error("tile: image \"" + r.id + "\" has no split; run split first");

    fs::create_directories(fs::path(cfg.work_dir) / "patches");
    std::vector<Manifest> per_image(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        const auto& rec = images[i];
        RgbImage img = read_png(detail::resolve_path(cfg.work_dir, rec.path));
        auto patches = extract_patches(img, rec.id, rec.label, cfg.grid);
        for (const auto& p : patches) {
            ManifestRecord pr;
            pr.id = rec.id;
            pr.label = rec.label;
            pr.split = rec.split;
            pr.anchor_x = p.anchor.x;
            pr.anchor_y = p.anchor.y;
            pr.aug = AugTag::identity;
            pr.path = "patches/" + detail::patch_file_name(pr);
            write_png(p.pixels, detail::join_under(cfg.work_dir, pr.path));
            per_image[i].push_back(std::move(pr));
        }
    });
    Manifest patches;
    for (auto& m : per_image)
        patches.insert(patches.end(), m.begin(), m.end());
    save_manifest(patches, detail::patches_manifest_path(cfg));
}

// Expand train (and by default validation) patches into their six isometry
// variants. Test patches pass through untouched.
inline void stage_augment(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    Manifest patches = load_manifest(detail::patches_manifest_path(cfg));
    std::vector<Manifest> expanded(patches.size());
    parallel_for(patches.size(), [&](std::size_t i) {
        const auto& rec = patches[i];
        expanded[i].push_back(rec);
        const bool augment = rec.split == SplitKind::train ||
                             (rec.split == SplitKind::validation && cfg.augment_validation);
        if (!augment) return;
        RgbImage img = read_png(detail::resolve_path(cfg.work_dir, rec.path));
        for (int t = 1; t < kNumAugTags; ++t) {
            ManifestRecord ar = rec;
            ar.aug = static_cast<AugTag>(t);
            ar.path = "patches/" + detail::patch_file_name(ar);
            write_png(apply_isometry(img, static_cast<AugTag>(t)),
                      detail::join_under(cfg.work_dir, ar.path));
            expanded[i].push_back(std::move(ar));
        }
    });
    Manifest augmented;
    for (auto& m : expanded)
        augmented.insert(augmented.end(), m.begin(), m.end());
    save_manifest(augmented, detail::augmented_manifest_path(cfg));
}

namespace detail {

inline std::vector<Patch> load_patches_for_split(const PipelineConfig& cfg,
                                                 const Manifest& records,
                                                 SplitKind split) {
    std::vector<const ManifestRecord*> selected;
    for (const auto& r : records)
        if (r.split == split) selected.push_back(&r);
    std::vector<Patch> patches(selected.size());
    parallel_for(selected.size(), [&](std::size_t i) {
        const auto& r = *selected[i];
        Patch p;
        p.image_id = r.id;
        p.anchor = {r.anchor_x.value_or(0), r.anchor_y.value_or(0)};
        p.pixels = read_png(resolve_path(cfg.work_dir, r.path));
        p.label = r.label;
        p.augmentation = r.aug.value_or(AugTag::identity);
        patches[i] = std::move(p);
    });
    return patches;
}

} // namespace detail

// Train on the train split (augmented manifest when present) and write the
// parameter file plus per-epoch metrics.
inline void stage_train(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    namespace fs = std::filesystem;
    const std::string source = fs::exists(detail::augmented_manifest_path(cfg))
                                   ? detail::augmented_manifest_path(cfg)
                                   : detail::patches_manifest_path(cfg);
    Manifest records = load_manifest(source);
    auto train_patches = detail::load_patches_for_split(cfg, records, SplitKind::train);
    auto val_patches = detail::load_patches_for_split(cfg, records, SplitKind::validation);

    TrainResult result = train(train_patches, val_patches, detail::model_config_for_run(cfg));
    save_params(result.params, detail::join_under(cfg.work_dir, "params.bin"));

    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& m : result.metrics) {
        nlohmann::json e{{"epoch", m.epoch},
                         {"train_loss", m.train_loss},
                         {"train_accuracy", m.train_accuracy}};
        if (m.val_loss) e["val_loss"] = *m.val_loss;
        if (m.val_accuracy) e["val_accuracy"] = *m.val_accuracy;
        epochs.push_back(std::move(e));
    }
    nlohmann::json metrics{{"best_epoch", result.best_epoch}, {"epochs", std::move(epochs)}};
    std::ofstream out(detail::join_under(cfg.work_dir, "train_metrics.json"));
    if (!out) throw IoError("train: cannot write train_metrics.json");
    out << metrics.dump(2) << "\n";
}

// Predict the identity patches of one split (test by default) with the
// trained parameters and write the prediction CSV.
inline void stage_predict(const PipelineConfig& cfg, SplitKind split = SplitKind::test) {
    cfg.validate_work_dir();
    Manifest records = load_manifest(detail::patches_manifest_path(cfg));
    auto patches = detail::load_patches_for_split(cfg, records, split);
    if (patches.empty())
        throw Error("predict: no patches in split \"" + std::string(to_string(split)) + "\"");
    Params params = load_params(detail::join_under(cfg.work_dir, "params.bin"));
    auto preds = predict(params, detail::model_config_for_run(cfg), patches);
    save_predictions(preds, detail::join_under(cfg.work_dir, "predictions.csv"));
}

// Validate an externally produced prediction CSV and install it as this
// work dir's predictions file.
inline void stage_ingest(const PipelineConfig& cfg, const std::string& csv_path) {
    cfg.validate_work_dir();
    std::filesystem::create_directories(cfg.work_dir);
    auto records = load_predictions(csv_path);
    if (records.empty()) throw Error("ingest-predictions: " + csv_path + " has no records");
    save_predictions(records, detail::join_under(cfg.work_dir, "predictions.csv"));
}

// Majority-vote the patch predictions into image-level labels.
inline void stage_aggregate(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    auto records = load_predictions(detail::join_under(cfg.work_dir, "predictions.csv"));
    auto image_preds = aggregate_images(records);
    save_image_predictions(image_preds, detail::join_under(cfg.work_dir, "image_predictions.csv"));
}

// Patch-wise and image-wise accuracy plus per-class one-vs-rest ROC/AUC,
// written as report.json and per-class ROC point CSVs.
inline void stage_evaluate(const PipelineConfig& cfg) {
    cfg.validate_work_dir();
    Manifest images = load_manifest(detail::images_manifest_path(cfg));
    std::map<std::string, ClassLabel> truth;
    for (const auto& r : images) truth[r.id] = r.label;
    auto lookup = [&](const std::string& id) {
        auto it = truth.find(id);
        if (it == truth.end())
            throw Error("evaluate: prediction for unknown image \"" + id + "\"");
        return it->second;
    };

    auto records = load_predictions(detail::join_under(cfg.work_dir, "predictions.csv"));
    if (records.empty()) throw Error("evaluate: predictions.csv has no records");
    std::vector<ClassLabel> patch_pred, patch_truth;
    patch_pred.reserve(records.size());
    for (const auto& r : records) {
        patch_pred.push_back(r.predicted);
        patch_truth.push_back(lookup(r.image_id));
    }
    const double patch_acc = accuracy(patch_pred, patch_truth);

    auto image_preds =
        load_image_predictions(detail::join_under(cfg.work_dir, "image_predictions.csv"));
    if (image_preds.empty()) throw Error("evaluate: image_predictions.csv has no records");
    std::vector<ClassLabel> img_pred, img_truth;
    std::vector<std::array<double, kNumClasses>> img_scores;
    for (const auto& p : image_preds) {
        img_pred.push_back(p.label);
        img_truth.push_back(lookup(p.image_id));
        img_scores.push_back(p.mean_probs);
    }
    const double image_acc = accuracy(img_pred, img_truth);
    OneVsRestReport ovr = one_vs_rest_report(img_scores, img_pred, img_truth);

    nlohmann::json per_class;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& r = ovr.per_class[c];
        per_class[kClassNames[c]] = {{"auc", r.auc},
                                     {"sensitivity", r.sensitivity},
                                     {"specificity", r.specificity}};
        save_roc_csv(r.roc, detail::join_under(
                                cfg.work_dir,
                                "roc_" + std::string(kClassNames[c]) + ".csv"));
    }
    nlohmann::json report{{"patch_accuracy", patch_acc},
                          {"image_accuracy", image_acc},
                          {"n_patches", records.size()},
                          {"n_images", image_preds.size()},
                          {"per_class", std::move(per_class)}};
    std::ofstream out(detail::join_under(cfg.work_dir, "report.json"));
    if (!out) throw IoError("evaluate: cannot write report.json");
    out << report.dump(2) << "\n";
}

// The full chain. Equivalent to running the stages individually in this
// order.
inline void run_all(const PipelineConfig& cfg) {
    if (!cfg.skip_normalization) stage_normalize(cfg);
    stage_split(cfg);
    stage_tile(cfg);
    stage_augment(cfg);
    stage_train(cfg);
    stage_predict(cfg);
    stage_aggregate(cfg);
    stage_evaluate(cfg);
}

} // namespace histotile
