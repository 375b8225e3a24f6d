#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "curator/classifier/model.hpp"

namespace curator {

struct AdamWConstants {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    friend bool operator==(const AdamWConstants&, const AdamWConstants&) = default;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One AdamW update. Weight decay is decoupled (p -= lr*wd*p) and applied
/// before the bias-corrected adaptive step. Throws NumericError naming the
/// parameter block if any gradient is non-finite; nothing is modified then.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, double weight_decay, const AdamWConstants& k = {},
                std::span<const ParamBlock> layout = {});

/// Scales grads so their global L2 norm is at most max_norm. Returns the norm
/// before clipping.
double clip_global_norm(std::span<double> grads, double max_norm);

}  // namespace curator
