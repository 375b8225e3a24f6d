#include "curator/classifier/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "curator/errors.hpp"
#include "curator/hashing.hpp"
#include "curator/random.hpp"

namespace curator {

using nlohmann::json;

void validate(const TrainConfig& c) {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(c.learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(c.weight_decay >= 0.0) || !std::isfinite(c.weight_decay))
        throw ConfigError("weight_decay must be nonnegative");
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (c.early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(c.warmup_fraction >= 0.0 && c.warmup_fraction < 1.0))
        throw ConfigError("warmup_fraction must lie in [0, 1)");
    if (!positive(c.grad_clip_max_norm)) throw ConfigError("grad_clip_max_norm must be positive");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0))
        throw ConfigError("val_fraction must lie in (0, 1)");
    if (!(c.decision_threshold >= 0.0 && c.decision_threshold < 1.0))
        throw ConfigError("decision_threshold must lie in [0, 1)");
    if (!(c.head_dropout >= 0.0 && c.head_dropout < 1.0))
        throw ConfigError("head_dropout must lie in [0, 1)");
}

std::int64_t warmup_steps(const TrainConfig& cfg, std::int64_t total_steps) {
    return static_cast<std::int64_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));
}

double lr_at_step(const TrainConfig& cfg, std::int64_t step, std::int64_t total_steps) {
    if (total_steps < 1) throw ValidationError("total_steps must be >= 1");
    step = std::clamp<std::int64_t>(step, 0, total_steps);
    const std::int64_t warm = warmup_steps(cfg, total_steps);
    if (step < warm) return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warm);
    const double progress =
        static_cast<double>(step - warm) / static_cast<double>(std::max<std::int64_t>(1, total_steps - warm));
    return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Split stratified_split(std::span<const LabeledExample> examples, double val_fraction,
                       std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < examples.size(); ++i)
        by_class[examples[i].label == Label::accept ? 1 : 0].push_back(i);
    if (by_class[0].empty() || by_class[1].empty())
        throw ValidationError("cannot early-stop on F1 with one class: need both accept and reject labels");
    for (const auto& cls : by_class) {
        if (cls.size() < 2)
            throw ValidationError("need at least two examples of each label to split train/validation");
    }

    std::mt19937_64 rng(mix64(seed ^ 0x5311'7ea1ULL));
    Split s;
    for (auto& cls : by_class) {
        deterministic_shuffle(cls, rng);
        const auto n = static_cast<std::int64_t>(cls.size());
        const std::int64_t n_val =
            std::clamp<std::int64_t>(std::llround(val_fraction * static_cast<double>(n)), 1, n - 1);
        s.val.insert(s.val.end(), cls.begin(), cls.begin() + n_val);
        s.train.insert(s.train.end(), cls.begin() + n_val, cls.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    return s;
}

ConfusionCounts evaluate(const PreferenceModel& m, std::span<const LabeledExample> examples,
                         double threshold) {
    std::vector<Label> preds;
    std::vector<Label> labels;
    preds.reserve(examples.size());
    labels.reserve(examples.size());
    for (const LabeledExample& ex : examples) {
        preds.push_back(predict(m, ex.features, threshold).label);
        labels.push_back(ex.label);
    }
    return confusion(preds, labels);
}

TrainResult train(std::span<const LabeledExample> examples, const TrainConfig& cfg,
                  const ValidationOverride& validation) {
    validate(cfg);
    if (examples.empty()) throw ValidationError("no training examples");

    const Split split = stratified_split(examples, cfg.val_fraction, cfg.seed);
    std::vector<LabeledExample> train_set;
    std::vector<LabeledExample> val_set;
    for (std::size_t i : split.train) train_set.push_back(examples[i]);
    for (std::size_t i : split.val) val_set.push_back(examples[i]);

    const FeatureBundle& f0 = examples.front().features;
    const ModelDims dims = make_dims(static_cast<int>(f0.global_features.dim()),
                                     static_cast<int>(f0.spatial_features.dim()), cfg.shape);
    PreferenceModel model = init_model(dims, cfg.seed);
    AdamWState opt(model.size());

    std::mt19937_64 shuffle_rng(mix64(cfg.seed ^ 0xba7c'4e11ULL));
    std::mt19937_64 dropout_rng(mix64(cfg.seed ^ 0xd209'0a7eULL));
    const Dropout dropout{cfg.head_dropout, &dropout_rng};

    const auto n_train = static_cast<std::int64_t>(train_set.size());
    const std::int64_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

    TrainResult result{model, {}};
    result.report.n_train = train_set.size();
    result.report.n_val = val_set.size();
    result.report.total_steps = total_steps;

    double best_f1 = -std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::int64_t step = 0;
    std::vector<std::size_t> order(train_set.size());
    std::vector<LabeledExample> batch;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        deterministic_shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        double lr = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);

            LossAndGradients lg = loss_and_gradients(model, batch, dropout);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            clip_global_norm(lg.gradients, cfg.grad_clip_max_norm);
            lr = lr_at_step(cfg, step, total_steps);
            adamw_step(model.mutable_params(), lg.gradients, opt, lr, cfg.weight_decay, cfg.adam,
                       model.layout());
            ++step;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n_train);
        stats.learning_rate = lr;
        if (validation) {
            stats.val_f1 = validation(model, val_set, epoch);
        } else {
            const auto m = precision_recall_f1(evaluate(model, val_set, cfg.decision_threshold));
            stats.val_precision = m.precision;
            stats.val_recall = m.recall;
            stats.val_f1 = m.f1;
        }
        result.report.epochs.push_back(stats);

        // Strict improvement only: ties keep the earlier epoch.
        if (stats.val_f1 > best_f1) {
            best_f1 = stats.val_f1;
            result.report.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            result.report.stopped_early = true;
            break;
        }
    }
    return result;
}

void to_json(json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate},
         {"weight_decay", c.weight_decay},
         {"epochs", c.epochs},
         {"early_stop_patience", c.early_stop_patience},
         {"warmup_fraction", c.warmup_fraction},
         {"grad_clip_max_norm", c.grad_clip_max_norm},
         {"batch_size", c.batch_size},
         {"val_fraction", c.val_fraction},
         {"seed", c.seed},
         {"decision_threshold", c.decision_threshold},
         {"head_dropout", c.head_dropout},
         {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
         {"shape",
          {{"gate_hidden_global", c.shape.gate_hidden_global},
           {"gate_hidden_spatial", c.shape.gate_hidden_spatial},
           {"fusion_dim", c.shape.fusion_dim},
           {"head_hidden1", c.shape.head_hidden1},
           {"head_hidden2", c.shape.head_hidden2},
           {"gate_init_open", c.shape.gate_init_open}}}};
}

void from_json(const json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.grad_clip_max_norm = j.value("grad_clip_max_norm", c.grad_clip_max_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.seed = j.value("seed", c.seed);
    c.decision_threshold = j.value("decision_threshold", c.decision_threshold);
    c.head_dropout = j.value("head_dropout", c.head_dropout);
    if (j.contains("adam")) {
        const json& a = j.at("adam");
        c.adam.beta1 = a.value("beta1", c.adam.beta1);
        c.adam.beta2 = a.value("beta2", c.adam.beta2);
        c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    if (j.contains("shape")) {
        const json& s = j.at("shape");
        c.shape.gate_hidden_global = s.value("gate_hidden_global", c.shape.gate_hidden_global);
        c.shape.gate_hidden_spatial = s.value("gate_hidden_spatial", c.shape.gate_hidden_spatial);
        c.shape.fusion_dim = s.value("fusion_dim", c.shape.fusion_dim);
        c.shape.head_hidden1 = s.value("head_hidden1", c.shape.head_hidden1);
        c.shape.head_hidden2 = s.value("head_hidden2", c.shape.head_hidden2);
        c.shape.gate_init_open = s.value("gate_init_open", c.shape.gate_init_open);
    }
    validate(c);
}

void to_json(json& j, const TrainReport& r) {
    json epochs = json::array();
    for (const EpochStats& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_precision", e.val_precision},
                          {"val_recall", e.val_recall},
                          {"val_f1", e.val_f1},
                          {"learning_rate", e.learning_rate}});
    }
    j = {{"epochs", epochs},           {"best_epoch", r.best_epoch}, {"stopped_early", r.stopped_early},
         {"n_train", r.n_train},       {"n_val", r.n_val},           {"total_steps", r.total_steps}};
}

void from_json(const json& j, TrainReport& r) {
    r = TrainReport{};
    for (const json& e : j.at("epochs")) {
        r.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                            e.at("val_precision").get<double>(), e.at("val_recall").get<double>(),
                            e.at("val_f1").get<double>(), e.at("learning_rate").get<double>()});
    }
    r.best_epoch = j.at("best_epoch").get<int>();
    r.stopped_early = j.at("stopped_early").get<bool>();
    r.n_train = j.at("n_train").get<std::size_t>();
    r.n_val = j.at("n_val").get<std::size_t>();
    r.total_steps = j.value("total_steps", std::int64_t{0});
}

}  // namespace curator
