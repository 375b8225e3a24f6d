#pragma once

#include <cstdint>

namespace curator {

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    bool valid() const noexcept;
    bool contains(const Box& inner) const noexcept;

    friend bool operator==(const Box&, const Box&) = default;
};

/// Throws ValidationError unless min <= max on both axes and all finite.
void validate(const Box& b);

struct ImageDims {
    int width = 0;
    int height = 0;

    Box bounds() const noexcept { return {0.0, 0.0, double(width), double(height)}; }
    friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

void validate(const ImageDims& d);

/// Region where inpainting masks may be placed plus the expected object size.
struct RoiSpec {
    Box roi;
    double mask_width = 0.0;
    double mask_height = 0.0;

    friend bool operator==(const RoiSpec&, const RoiSpec&) = default;
};

void validate(const RoiSpec& spec);

/// Intersection over union. Zero when the union has zero area.
double iou(const Box& a, const Box& b);

/// Places a mask of exactly (mask_width x mask_height) inside the ROI.
/// Top-left offsets are drawn uniformly over the integer pixel positions that
/// keep the mask inside; the same seed always yields the same box.
Box sample_mask_box(const RoiSpec& spec, std::uint64_t seed);

/// Grows `b` about its center so each side scales by (1 + expand_ratio), then
/// clamps the result to the image.
Box expand_and_crop(const Box& b, double expand_ratio, const ImageDims& dims);

}  // namespace curator
