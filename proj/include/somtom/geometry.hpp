#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "somtom/errors.hpp"

namespace somtom {

/// 2D point in normalized image coordinates. x is a fraction of the image
/// width and y a fraction of the image height; points produced by
/// normalization lie in [0,1]x[0,1]. Projective transforms may move a point
/// outside the unit square; such points are kept as-is (detectable via
/// in_unit_square) rather than clamped.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    static Point2 from_pixels(double px, double py, int width, int height);

    bool operator==(const Point2&) const = default;
};

bool in_unit_square(const Point2& p, double eps = 0.0);

/// Axis-aligned box in normalized coordinates: top-left corner (x, y) plus
/// extents (w, h), all fractions of the image size.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Point2 top_left() const { return {x, y}; }
    Point2 center() const { return {x + w / 2.0, y + h / 2.0}; }

    bool contains(const Point2& p) const {
        return p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h;
    }

    bool operator==(const BBox&) const = default;
};

/// Throws ValidationError unless w,h > 0 and the box fits in the unit square
/// (with a 1e-9 slack on the far edges).
void validate_bbox(const BBox& b);

/// One coordinate mapped to one of 256 uniform bins.
struct QuantizedCoord {
    int bin = 0;  // in [0, 255]

    bool operator==(const QuantizedCoord&) const = default;
};

inline constexpr int kQuantBins = 256;

/// floor(v * 256) clamped to 255, per axis. Inputs outside [0,1] raise a
/// ValidationError naming the offending coordinate.
std::pair<QuantizedCoord, QuantizedCoord> quantize(const Point2& p);

/// Inverse of quantize, returning bin centers: (bin + 0.5) / 256.
Point2 dequantize(QuantizedCoord qx, QuantizedCoord qy);

/// Path of one tracked point: one position per frame plus a per-frame
/// occlusion flag. seed_index identifies the grid cell the point was seeded
/// from.
struct Trace {
    std::vector<Point2> points;
    std::vector<bool> occluded;
    int seed_index = 0;

    std::size_t length() const { return points.size(); }

    bool operator==(const Trace&) const = default;
};

/// Throws ValidationError unless points/occluded lengths match, length >= 2
/// and seed_index >= 0.
void validate_trace(const Trace& t);

struct ImageDims {
    int width = 0;
    int height = 0;
};

/// Mean Euclidean pixel displacement between adjacent steps. A step is
/// skipped when either of its endpoints is occluded; if every step is
/// occluded the magnitude is 0. Length < 2 raises ValidationError.
double trace_motion_magnitude(const Trace& t, ImageDims dims);

}  // namespace somtom
