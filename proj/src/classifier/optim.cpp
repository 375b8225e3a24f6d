#include "curator/classifier/optim.hpp"

#include <cmath>

#include "curator/embedding.hpp"
#include "curator/errors.hpp"

namespace curator {

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, double weight_decay, const AdamWConstants& k,
                std::span<const ParamBlock> layout) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ValidationError("adamw: parameter, gradient and state sizes differ");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            const std::string where =
                layout.empty() ? "index " + std::to_string(i) : "block " + block_name_at(layout, i);
            throw NumericError("non-finite gradient in " + where);
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(k.beta1, t);
    const double bc2 = 1.0 - std::pow(k.beta2, t);
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = k.beta1 * state.m[i] + (1.0 - k.beta1) * g;
        state.v[i] = k.beta2 * state.v[i] + (1.0 - k.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + k.epsilon);
    }
}

double clip_global_norm(std::span<double> grads, double max_norm) {
    if (!(max_norm > 0.0)) throw ValidationError("max_norm must be positive");
    const double norm = l2_norm(grads);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& g : grads) g *= scale;
    }
    return norm;
}

}  // namespace curator
