#include "curator/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "curator/errors.hpp"

namespace curator {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("embedding vector must be non-empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw ValidationError("embedding component " + std::to_string(i) + " is not finite");
    }
}

double l2_norm(std::span<const double> u) {
    // Scaled accumulation avoids overflow for large components.
    double scale = 0.0;
    for (double x : u) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return 0.0;
    double sum = 0.0;
    for (double x : u) {
        const double r = x / scale;
        sum += r * r;
    }
    return scale * std::sqrt(sum);
}

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw ValidationError("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                              std::to_string(v.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim())
        throw ValidationError("dimension mismatch: " + std::to_string(u.dim()) + " vs " +
                              std::to_string(v.dim()));
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0)
        throw DomainError("cosine similarity undefined for a zero-norm embedding");
    const double c = dot(u.values(), v.values()) / (nu * nv);
    return std::clamp(c, -1.0, 1.0);
}

}  // namespace curator
