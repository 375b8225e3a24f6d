#include "curator/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "curator/errors.hpp"
#include "curator/random.hpp"

namespace curator {

namespace {

std::string describe(const Box& b) {
    std::ostringstream os;
    os << "[" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << "]";
    return os.str();
}

}  // namespace

bool Box::valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
}

bool Box::contains(const Box& inner) const noexcept {
    return inner.x_min >= x_min && inner.y_min >= y_min && inner.x_max <= x_max &&
           inner.y_max <= y_max;
}

void validate(const Box& b) {
    if (!b.valid()) throw ValidationError("invalid box " + describe(b));
}

void validate(const ImageDims& d) {
    if (d.width < 1 || d.height < 1)
        throw ValidationError("image dims must be positive, got " + std::to_string(d.width) +
                              "x" + std::to_string(d.height));
}

void validate(const RoiSpec& spec) {
    validate(spec.roi);
    if (!(spec.mask_width > 0.0) || !(spec.mask_height > 0.0) ||
        !std::isfinite(spec.mask_width) || !std::isfinite(spec.mask_height))
        throw ValidationError("mask size must be positive");
    if (spec.mask_width > spec.roi.width() || spec.mask_height > spec.roi.height())
        throw ValidationError("mask larger than ROI " + describe(spec.roi));
}

double iou(const Box& a, const Box& b) {
    validate(a);
    validate(b);
    const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Box sample_mask_box(const RoiSpec& spec, std::uint64_t seed) {
    validate(spec);
    std::mt19937_64 rng(seed);
    const double slack_x = spec.roi.width() - spec.mask_width;
    const double slack_y = spec.roi.height() - spec.mask_height;
    const auto positions_x = static_cast<std::uint64_t>(std::floor(slack_x)) + 1;
    const auto positions_y = static_cast<std::uint64_t>(std::floor(slack_y)) + 1;
    const double ox = static_cast<double>(uniform_below(rng, positions_x));
    const double oy = static_cast<double>(uniform_below(rng, positions_y));
    const double x0 = spec.roi.x_min + ox;
    const double y0 = spec.roi.y_min + oy;
    return {x0, y0, x0 + spec.mask_width, y0 + spec.mask_height};
}

Box expand_and_crop(const Box& b, double expand_ratio, const ImageDims& dims) {
    validate(b);
    validate(dims);
    if (!(expand_ratio >= 0.0) || !std::isfinite(expand_ratio))
        throw ValidationError("expand ratio must be a nonnegative finite number");
    // Margin form of symmetric growth; exact identity at ratio 0.
    const double grow_x = 0.5 * b.width() * expand_ratio;
    const double grow_y = 0.5 * b.height() * expand_ratio;
    const double w = dims.width;
    const double h = dims.height;
    return {std::clamp(b.x_min - grow_x, 0.0, w), std::clamp(b.y_min - grow_y, 0.0, h),
            std::clamp(b.x_max + grow_x, 0.0, w), std::clamp(b.y_max + grow_y, 0.0, h)};
}

}  // namespace curator
