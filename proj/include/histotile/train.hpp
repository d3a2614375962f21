#pragma once

#include <optional>
#include <vector>

#include "histotile/net.hpp"
#include "histotile/optimizer.hpp"
#include "histotile/parallel.hpp"
#include "histotile/records.hpp"
#include "histotile/rng.hpp"
#include "histotile/tiling.hpp"

namespace histotile {

struct EpochMetrics {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
};

struct TrainResult {
    Params params;
    std::vector<EpochMetrics> metrics;
    int best_epoch = 0; // 0 when no epochs ran
};

namespace detail {

inline void eval_set(const Params& params, const ModelConfig& cfg,
                     const NetLayout& layout, const std::vector<Tensor>& inputs,
                     const std::vector<ClassLabel>& labels, double& loss_out,
                     double& acc_out) {
    double total = 0.0;
    int correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto probs = forward_sample(params, cfg, layout, inputs[i], nullptr);
        total += -std::log(std::max(probs[static_cast<int>(labels[i])], kProbFloor));
        if (argmax_label(probs) == labels[i]) ++correct;
    }
    loss_out = total / static_cast<double>(inputs.size());
    acc_out = static_cast<double>(correct) / static_cast<double>(inputs.size());
}

} // namespace detail

// Fixed-budget training loop: max_epochs epochs of shuffled mini-batches,
// deterministic for a given config seed (init stream salt 0, epoch e shuffle
// stream salt e). Per-epoch train loss/accuracy are accumulated over the
// batches as consumed; validation metrics come from a full pass after each
// epoch. Returns the parameters of the epoch with the best validation
// accuracy (first such epoch on ties), or the final parameters when no
// validation set is given.
inline TrainResult train(const std::vector<Patch>& train_patches,
                         const std::vector<Patch>& val_patches,
                         const ModelConfig& cfg) {
    cfg.validate();
    if (train_patches.empty()) throw Error("train: empty training set");

    auto layout = detail::make_layout(cfg);

    auto to_inputs = [&](const std::vector<Patch>& patches,
                         std::vector<Tensor>& inputs,
                         std::vector<ClassLabel>& labels) {
        inputs.resize(patches.size());
        labels.resize(patches.size());
        parallel_for(patches.size(), [&](std::size_t i) {
            inputs[i] = patch_to_input(patches[i].pixels, cfg.input_size);
            labels[i] = patches[i].label;
        });
    };

    std::vector<Tensor> train_in, val_in;
    std::vector<ClassLabel> train_lab, val_lab;
    to_inputs(train_patches, train_in, train_lab);
    to_inputs(val_patches, val_in, val_lab);

    TrainResult result;
    result.params = init_params(cfg);
    Params velocity = result.params.zeros_like();
    Params best = result.params;
    double best_val_acc = -1.0;

    std::vector<std::size_t> order(train_in.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Xorshift64Star rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        shuffle(order, rng);

        double epoch_loss = 0.0;
        int epoch_correct = 0;
        std::size_t seen = 0;
        Params grads = result.params.zeros_like();
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Tensor> batch_in;
            std::vector<ClassLabel> batch_lab;
            batch_in.reserve(end - start);
            batch_lab.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch_in.push_back(train_in[order[i]]);
                batch_lab.push_back(train_lab[order[i]]);
            }
            for (auto& t : grads.tensors) t.value.fill(0.0);
            int correct = 0;
            double loss = batch_loss_and_grads(result.params, cfg, batch_in,
                                               batch_lab, grads, &correct);
            epoch_loss += loss * static_cast<double>(end - start);
            epoch_correct += correct;
            seen += end - start;
            sgd_step(result.params, grads, velocity, cfg.learning_rate,
                     cfg.momentum, cfg.nesterov);
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = epoch_loss / static_cast<double>(seen);
        m.train_accuracy = static_cast<double>(epoch_correct) / static_cast<double>(seen);
        if (!val_in.empty()) {
            double vl = 0.0, va = 0.0;
            detail::eval_set(result.params, cfg, layout, val_in, val_lab, vl, va);
            m.val_loss = vl;
            m.val_accuracy = va;
            if (va > best_val_acc) {
                best_val_acc = va;
                best = result.params;
                result.best_epoch = epoch;
            }
        } else {
            best = result.params;
            result.best_epoch = epoch;
        }
        result.metrics.push_back(m);
    }

    result.params = std::move(best);
    return result;
}

// One record per patch: probabilities, argmax label (ties to the lowest class
// code) and provenance. Patches are processed independently, so the output is
// invariant to batching and to the worker thread count.
inline std::vector<PredictionRecord> predict(const Params& params,
                                             const ModelConfig& cfg,
                                             const std::vector<Patch>& patches) {
    cfg.validate();
    auto layout = detail::make_layout(cfg);
    std::vector<PredictionRecord> records(patches.size());
    parallel_for(patches.size(), [&](std::size_t i) {
        Tensor input = patch_to_input(patches[i].pixels, cfg.input_size);
        auto probs = forward_sample(params, cfg, layout, input, nullptr);
        PredictionRecord& r = records[i];
        r.image_id = patches[i].image_id;
        r.anchor_x = patches[i].anchor.x;
        r.anchor_y = patches[i].anchor.y;
        r.aug = patches[i].augmentation;
        r.probs = probs;
        r.predicted = argmax_label(probs);
    });
    return records;
}

} // namespace histotile
