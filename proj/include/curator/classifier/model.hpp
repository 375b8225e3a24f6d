#pragma once

// Preference head over two frozen feature channels.
//
//   gate_c  = sigmoid(W2_c relu(W1_c x_c + b1_c) + b2_c)       per channel c
//   z       = concat(gate_g * x_g, gate_s * x_s)
//   fused   = relu(Wf z + bf)
//   h1      = relu(H1 fused + c1)      (dropout in training)
//   h2      = relu(H2 h1 + c2)         (dropout in training)
//   p       = sigmoid(H3 h2 + c3)
//
// All parameters live in one flat vector; ParamBlock records where each
// weight matrix / bias sits so optimizers and checkpoints stay generic.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "curator/backends.hpp"
#include "curator/metrics.hpp"

namespace curator {

struct ModelDims {
    int global_dim = 0;
    int spatial_dim = 0;
    int gate_hidden_global = 0;
    int gate_hidden_spatial = 0;
    int fusion_input_dim = 0;  // must equal global_dim + spatial_dim
    int fusion_dim = 512;
    int head_hidden1 = 512;
    int head_hidden2 = 128;
    /// Initial sigmoid-gate opening; sets the gate output bias to logit(value).
    double gate_init_open = 0.88;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Layer widths that are not determined by the feature dims. Zero gate
/// hidden width means "channel dim / 4".
struct ModelShape {
    int gate_hidden_global = 0;
    int gate_hidden_spatial = 0;
    int fusion_dim = 512;
    int head_hidden1 = 512;
    int head_hidden2 = 128;
    double gate_init_open = 0.88;

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

ModelDims make_dims(int global_dim, int spatial_dim, const ModelShape& shape = {});

/// Throws ValidationError on non-positive or mutually inconsistent widths.
void validate(const ModelDims& d);

struct ParamBlock {
    std::string name;
    int rows = 0;
    int cols = 0;  // 1 for biases
    std::size_t offset = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * cols; }
    friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

std::vector<ParamBlock> param_layout(const ModelDims& d);

/// Name of the block containing flat index i.
const std::string& block_name_at(std::span<const ParamBlock> layout, std::size_t i);

struct LabeledExample {
    FeatureBundle features;
    Label label = Label::reject;
    std::string candidate_id;
};

class PreferenceModel {
public:
    PreferenceModel() = default;
    /// Wraps existing parameters; throws ValidationError if the count does
    /// not match the dims.
    PreferenceModel(ModelDims dims, std::uint64_t seed, std::vector<double> params);

    const ModelDims& dims() const noexcept { return dims_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<ParamBlock>& layout() const noexcept { return layout_; }
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> mutable_params() noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }

    std::span<const double> block(const std::string& name) const;
    std::span<double> mutable_block(const std::string& name);

    friend bool operator==(const PreferenceModel&, const PreferenceModel&) = default;

private:
    ModelDims dims_;
    std::uint64_t seed_ = 0;
    std::vector<ParamBlock> layout_;
    std::vector<double> params_;
};

/// Deterministic from (dims, seed). Weights and biases ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)); gate output biases start at logit(gate_init_open).
PreferenceModel init_model(const ModelDims& dims, std::uint64_t seed);

/// Accept probability in (0, 1). Evaluation mode (no dropout).
double forward(const PreferenceModel& m, const FeatureBundle& f);

/// Sigmoid gate values for each channel, for inspection.
struct GateValues {
    std::vector<double> global;
    std::vector<double> spatial;
};
GateValues attention_gates(const PreferenceModel& m, const FeatureBundle& f);

struct Prediction {
    Label label = Label::reject;
    double probability = 0.0;
};

/// Accept iff probability > threshold.
Prediction predict(const PreferenceModel& m, const FeatureBundle& f, double threshold);

/// Training-mode dropout applied after each head hidden layer.
struct Dropout {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;
};

struct LossAndGradients {
    double loss = 0.0;
    std::vector<double> gradients;  // same layout as the model parameters
};

/// Mean binary cross-entropy over the batch and its exact gradient.
/// Probabilities are clamped to [1e-12, 1 - 1e-12] inside the log.
LossAndGradients loss_and_gradients(const PreferenceModel& m,
                                    std::span<const LabeledExample> batch,
                                    Dropout dropout = {});

}  // namespace curator
