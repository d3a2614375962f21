// Command-line front end for the histology patch classification pipeline.
// Each subcommand drives one pipeline stage against a work directory;
// run-all chains every stage. Configuration comes from an optional JSON
// config file with per-field CLI overrides.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "histotile/labels.hpp"
#include "histotile/pipeline.hpp"

namespace {

struct Flags {
    std::string config;
    std::string input_dir;
    std::string work_dir;
    std::string target_image;
    std::string target_stats;
    std::string ratios;
    std::string widths;
    std::string split = "test";
    std::string input;
    std::uint64_t seed = 0;
    int patch_size = 512;
    int epochs = 100;
    int batch_size = 32;
    int input_size = 64;
    int blocks = 1;
    double overlap = 0.5;
    double lr = 0.0001;
    double momentum = 0.9;
    bool edge_anchor = true;
    bool augment_validation = true;
    bool skip_normalization = false;
    bool nesterov = true;
};

std::vector<double> parse_double_list(const std::string& s, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw histotile::ConfigError(std::string(flag) + ": bad number \"" + item + "\"");
        }
    }
    return out;
}

void add_pipeline_options(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON config file; flags override its fields");
    sub->add_option("--input-dir", f.input_dir,
                    "input images, one subdirectory per class name");
    sub->add_option("--work-dir", f.work_dir, "directory for all pipeline artifacts");
    sub->add_option("--seed", f.seed, "top-level seed; all stage randomness derives from it");
    sub->add_option("--patch-size", f.patch_size, "square patch edge in pixels");
    sub->add_option("--overlap", f.overlap, "patch overlap fraction in [0,1)");
    sub->add_flag("--edge-anchor,!--no-edge-anchor", f.edge_anchor,
                  "append an edge anchor when the grid leaves a remainder strip");
    sub->add_option("--ratios", f.ratios, "train,validation,test fractions, e.g. 0.6,0.2,0.2");
    sub->add_option("--target-image", f.target_image,
                    "reference image whose stain statistics are the matching target");
    sub->add_option("--target-stats", f.target_stats, "precomputed target stats JSON");
    sub->add_flag("--augment-validation,!--no-augment-validation", f.augment_validation,
                  "also augment validation patches");
    sub->add_flag("--skip-normalization", f.skip_normalization,
                  "feed raw images to the pipeline");
    sub->add_option("--epochs", f.epochs, "training epoch budget");
    sub->add_option("--lr", f.lr, "learning rate");
    sub->add_option("--momentum", f.momentum, "momentum coefficient");
    sub->add_flag("--nesterov,!--no-nesterov", f.nesterov, "Nesterov momentum update");
    sub->add_option("--batch-size", f.batch_size, "mini-batch size");
    sub->add_option("--input-size", f.input_size, "network input resolution (patches are downscaled)");
    sub->add_option("--widths", f.widths, "channel widths per stage, e.g. 8,16,32");
    sub->add_option("--blocks", f.blocks, "residual blocks per stage");
}

histotile::PipelineConfig build_config(CLI::App* sub, const Flags& f) {
    histotile::PipelineConfig cfg;
    if (sub->count("--config")) cfg = histotile::load_pipeline_config(f.config);
    if (sub->count("--input-dir")) cfg.input_dir = f.input_dir;
    if (sub->count("--work-dir")) cfg.work_dir = f.work_dir;
    if (sub->count("--seed")) cfg.seed = f.seed;
    if (sub->count("--patch-size")) cfg.grid.patch_size = f.patch_size;
    if (sub->count("--overlap")) cfg.grid.overlap_fraction = f.overlap;
    if (sub->count("--edge-anchor") || sub->count("--no-edge-anchor"))
        cfg.grid.edge_anchor = f.edge_anchor;
    if (sub->count("--ratios")) {
        auto r = parse_double_list(f.ratios, "--ratios");
        if (r.size() != 3)
            throw histotile::ConfigError("--ratios: expected three comma-separated values");
        cfg.ratios = {r[0], r[1], r[2]};
    }
    if (sub->count("--target-image")) cfg.target_image = f.target_image;
    if (sub->count("--target-stats")) cfg.target_stats = f.target_stats;
    if (sub->count("--augment-validation") || sub->count("--no-augment-validation"))
        cfg.augment_validation = f.augment_validation;
    if (sub->count("--skip-normalization")) cfg.skip_normalization = true;
    if (sub->count("--epochs")) cfg.model.max_epochs = f.epochs;
    if (sub->count("--lr")) cfg.model.learning_rate = f.lr;
    if (sub->count("--momentum")) cfg.model.momentum = f.momentum;
    if (sub->count("--nesterov") || sub->count("--no-nesterov"))
        cfg.model.nesterov = f.nesterov;
    if (sub->count("--batch-size")) cfg.model.batch_size = f.batch_size;
    if (sub->count("--input-size")) cfg.model.input_size = f.input_size;
    if (sub->count("--widths")) {
        auto w = parse_double_list(f.widths, "--widths");
        cfg.model.widths.clear();
        for (double v : w) cfg.model.widths.push_back(static_cast<int>(v));
    }
    if (sub->count("--blocks")) cfg.model.blocks_per_stage = f.blocks;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"histotile: stain normalization, tiling, augmentation, patch "
                 "classification and evaluation for histology images"};
    app.require_subcommand(1);

    Flags flags;
    struct Stage {
        const char* name;
        CLI::App* sub;
    };
    std::vector<Stage> stages;
    for (const char* name : {"normalize", "tile", "augment", "split", "train",
                             "predict", "ingest-predictions", "aggregate",
                             "evaluate", "run-all"}) {
        CLI::App* sub = app.add_subcommand(name);
        add_pipeline_options(sub, flags);
        stages.push_back({name, sub});
    }
    CLI::App* predict_sub = app.get_subcommand("predict");
    predict_sub->add_option("--split", flags.split, "split to predict (train|validation|test)");
    CLI::App* ingest_sub = app.get_subcommand("ingest-predictions");
    ingest_sub->add_option("--input", flags.input, "prediction CSV to ingest")->required();

    CLI11_PARSE(app, argc, argv);

    const char* active = nullptr;
    try {
        for (const auto& stage : stages) {
            if (!stage.sub->parsed()) continue;
            active = stage.name;
            histotile::PipelineConfig cfg = build_config(stage.sub, flags);
            const std::string name = stage.name;
            if (name == "normalize") histotile::stage_normalize(cfg);
            else if (name == "tile") histotile::stage_tile(cfg);
            else if (name == "augment") histotile::stage_augment(cfg);
            else if (name == "split") histotile::stage_split(cfg);
            else if (name == "train") histotile::stage_train(cfg);
            else if (name == "predict")
                histotile::stage_predict(cfg, histotile::split_from_string(flags.split));
            else if (name == "ingest-predictions") histotile::stage_ingest(cfg, flags.input);
            else if (name == "aggregate") histotile::stage_aggregate(cfg);
            else if (name == "evaluate") histotile::stage_evaluate(cfg);
            else if (name == "run-all") histotile::run_all(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << (active ? active : "cli") << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
