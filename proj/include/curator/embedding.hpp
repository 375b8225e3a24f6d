#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace curator {

/// Finite, non-empty vector of doubles (sentence embeddings, pooled features).
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    /// Throws ValidationError on empty input or non-finite components.
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<double> values_;
};

double l2_norm(std::span<const double> u);
inline double l2_norm(const EmbeddingVector& u) { return l2_norm(u.values()); }

double dot(std::span<const double> u, std::span<const double> v);

/// dot(u, v) / (|u| |v|), clamped to [-1, 1].
/// Throws ValidationError on dimension mismatch and DomainError on a zero vector.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace curator
