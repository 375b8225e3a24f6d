#pragma once

// Two-Gaussian feature datasets for trainer tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "curator/classifier/model.hpp"

namespace curator::synthetic {

struct TwoGaussians {
    std::vector<LabeledExample> examples;
    std::vector<double> direction;  // concatenated (global, spatial) unit direction
    double separation = 0.0;        // distance between the class means
};

/// Class means at +/- separation/2 along a random unit direction, isotropic
/// unit noise. Labels alternate so classes are balanced. The direction depends
/// only on direction_seed, so draws with different sample_seed share means.
inline TwoGaussians two_gaussians(int n, int global_dim, int spatial_dim, double separation,
                                  unsigned direction_seed, unsigned sample_seed = 0) {
    std::mt19937_64 rng(direction_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = global_dim + spatial_dim;
    TwoGaussians out;
    out.separation = separation;
    out.direction.resize(static_cast<std::size_t>(d));
    double norm = 0.0;
    for (double& v : out.direction) {
        v = normal(rng);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : out.direction) v /= norm;
    rng.seed(direction_seed * 1000003ULL + sample_seed + 1);
    normal.reset();

    for (int i = 0; i < n; ++i) {
        const bool accept = i % 2 == 0;
        const double sign = accept ? 0.5 : -0.5;
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) x[k] = sign * separation * out.direction[k] + normal(rng);
        LabeledExample ex;
        ex.features.global_features = EmbeddingVector({x.begin(), x.begin() + global_dim});
        ex.features.spatial_features = EmbeddingVector({x.begin() + global_dim, x.end()});
        ex.label = accept ? Label::accept : Label::reject;
        ex.candidate_id = "syn-" + std::to_string(i);
        out.examples.push_back(std::move(ex));
    }
    return out;
}

/// The hand-threshold separability oracle: project onto the known mean
/// direction and accept when the projection is positive.
inline Label threshold_oracle(const TwoGaussians& data, const FeatureBundle& f) {
    double proj = 0.0;
    std::size_t k = 0;
    for (double v : f.global_features.values()) proj += v * data.direction[k++];
    for (double v : f.spatial_features.values()) proj += v * data.direction[k++];
    return proj > 0.0 ? Label::accept : Label::reject;
}

}  // namespace curator::synthetic
