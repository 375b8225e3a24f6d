#pragma once

// Finite-difference gradient check of the full preference model, shared by
// the unit tests and the acceptance binary.

#include <algorithm>
#include <random>
#include <vector>

#include "curator/classifier/model.hpp"
#include "oracles.hpp"

namespace curator::grad_check {

inline ModelShape tiny_shape() {
    ModelShape s;
    s.fusion_dim = 8;
    s.head_hidden1 = 8;
    s.head_hidden2 = 8;
    return s;
}

inline LabeledExample random_example(std::mt19937_64& rng, int g, int s) {
    std::normal_distribution<double> n;
    std::vector<double> gv(static_cast<std::size_t>(g)), sv(static_cast<std::size_t>(s));
    for (auto& v : gv) v = n(rng);
    for (auto& v : sv) v = n(rng);
    LabeledExample ex;
    ex.features.global_features = EmbeddingVector(gv);
    ex.features.spatial_features = EmbeddingVector(sv);
    ex.label = rng() % 2 ? Label::accept : Label::reject;
    return ex;
}

struct GradCheck {
    double worst = 0.0;
    int kinks = 0;  // coordinates skipped because a ReLU crosses zero within the step
    std::size_t checked = 0;
};

/// Gates, fusion and head at dims 4/4/8 on a batch of six random examples,
/// step 1e-5.
inline GradCheck check_gradients(std::uint64_t seed, double dropout_rate) {
    const ModelDims dims = make_dims(4, 4, tiny_shape());
    const PreferenceModel model = init_model(dims, seed);
    std::mt19937_64 data_rng(seed + 1000);
    std::vector<LabeledExample> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(random_example(data_rng, 4, 4));

    const std::mt19937_64 mask_rng(seed * 31 + 7);
    auto loss_at = [&](const std::vector<double>& p) {
        std::mt19937_64 r = mask_rng;  // same dropout mask on every evaluation
        const PreferenceModel m(dims, seed, p);
        return loss_and_gradients(m, batch, {dropout_rate, &r}).loss;
    };
    std::mt19937_64 r = mask_rng;
    const LossAndGradients lg = loss_and_gradients(model, batch, {dropout_rate, &r});
    const std::vector<double> p(model.params().begin(), model.params().end());

    GradCheck out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (oracle::kink_within(loss_at, p, i, 1e-5)) {
            ++out.kinks;
            continue;
        }
        const double numeric = oracle::central_difference(loss_at, p, i, 1e-5);
        out.worst = std::max(out.worst, oracle::relative_error(lg.gradients[i], numeric));
        ++out.checked;
    }
    return out;
}

}  // namespace curator::grad_check
