#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "curator/classifier/model.hpp"
#include "curator/classifier/optim.hpp"

namespace curator {

struct TrainConfig {
    double learning_rate = 2e-5;
    double weight_decay = 1e-4;
    int epochs = 50;
    int early_stop_patience = 10;
    double warmup_fraction = 0.10;
    double grad_clip_max_norm = 1.0;
    int batch_size = 32;
    double val_fraction = 0.20;
    std::uint64_t seed = 0;
    double decision_threshold = 0.5;
    double head_dropout = 0.3;
    AdamWConstants adam;
    ModelShape shape;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

/// Linear warmup from 0 over the first round(warmup_fraction * total_steps)
/// steps, then cosine decay from the peak towards 0 at total_steps.
double lr_at_step(const TrainConfig& cfg, std::int64_t step, std::int64_t total_steps);

std::int64_t warmup_steps(const TrainConfig& cfg, std::int64_t total_steps);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Seeded split stratified by label: each class contributes
/// round(val_fraction * n_class) examples to validation, clamped so both
/// sides keep at least one example of each class. Throws ValidationError if a
/// class has fewer than two examples.
Split stratified_split(std::span<const LabeledExample> examples, double val_fraction,
                       std::uint64_t seed);

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
    double learning_rate = 0.0;  // at the last step of the epoch

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
    bool stopped_early = false;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::int64_t total_steps = 0;

    const EpochStats& best() const { return epochs.at(static_cast<std::size_t>(best_epoch - 1)); }
    friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
    PreferenceModel model;  // best-F1 snapshot
    TrainReport report;
};

/// Returns the validation F1 for a model after `epoch`; replaces the built-in
/// evaluation (used to exercise the early-stopping rule in isolation).
using ValidationOverride =
    std::function<double(const PreferenceModel&, std::span<const LabeledExample> val, int epoch)>;

/// Full training run: stratified split, shuffled mini-batches, global-norm
/// clipping, AdamW with the warmup+cosine schedule, per-epoch validation F1,
/// best-snapshot retention and early stopping. Pure function of
/// (examples, cfg).
TrainResult train(std::span<const LabeledExample> examples, const TrainConfig& cfg,
                  const ValidationOverride& validation = {});

/// Confusion counts of the model on examples at the given threshold.
ConfusionCounts evaluate(const PreferenceModel& m, std::span<const LabeledExample> examples,
                         double threshold);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const TrainReport& r);
void from_json(const nlohmann::json& j, TrainReport& r);

}  // namespace curator
