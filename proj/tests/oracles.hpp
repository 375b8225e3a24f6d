#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "curator/geometry.hpp"

namespace curator::oracle {

/// IoU by counting unit pixel cells [x, x+1) x [y, y+1) covered by integer
/// boxes on a bounded grid.
inline double raster_iou(const Box& a, const Box& b, int grid) {
    auto covers = [](const Box& r, int x, int y) {
        return x >= r.x_min && x < r.x_max && y >= r.y_min && y < r.y_max;
    };
    long inter = 0;
    long uni = 0;
    for (int y = 0; y < grid; ++y) {
        for (int x = 0; x < grid; ++x) {
            const bool ia = covers(a, x, y);
            const bool ib = covers(b, x, y);
            inter += ia && ib;
            uni += ia || ib;
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Cosine schedule evaluated straight from its closed form with long double
/// arithmetic: warmup ramp then 0.5 (1 + cos(pi t)).
inline double schedule_closed_form(double peak, long step, long warmup, long total) {
    if (step < warmup) return static_cast<double>((long double)peak * step / warmup);
    const long double progress = (long double)(step - warmup) / (long double)(total - warmup);
    return static_cast<double>((long double)peak * 0.5L *
                               (1.0L + std::cos(std::numbers::pi_v<long double> * progress)));
}

/// Central finite difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

/// True when the one-sided differences at x disagree by more than `tol`
/// relative, i.e. f has a kink (a ReLU crossing zero) within h of x along i.
/// Central differences are meaningless at such points.
inline bool kink_within(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double> x, std::size_t i, double h, double tol = 1e-2) {
    const double x0 = x[i];
    const double mid = f(x);
    x[i] = x0 + h;
    const double fwd = (f(x) - mid) / h;
    x[i] = x0 - h;
    const double bwd = (mid - f(x)) / h;
    return std::abs(fwd - bwd) > tol * std::max({std::abs(fwd), std::abs(bwd), 1e-6});
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps gradients that are
/// numerically zero from producing meaningless ratios.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace curator::oracle
