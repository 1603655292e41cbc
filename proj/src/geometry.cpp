#include "somtom/geometry.hpp"

#include <cmath>

namespace somtom {

Point2 Point2::from_pixels(double px, double py, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ValidationError("from_pixels: image dimensions must be positive");
    }
    return {px / width, py / height};
}

bool in_unit_square(const Point2& p, double eps) {
    return p.x >= -eps && p.x <= 1.0 + eps && p.y >= -eps && p.y <= 1.0 + eps;
}

void validate_bbox(const BBox& b) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
        throw ValidationError("bbox: extents must be positive");
    }
    if (b.x < 0.0 || b.y < 0.0 || b.x + b.w > 1.0 + 1e-9 || b.y + b.h > 1.0 + 1e-9) {
        throw ValidationError("bbox: box exceeds the unit square");
    }
}

namespace {

int quantize_axis(double v, const char* axis) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(std::string("quantize: coordinate ") + axis +
                              " = " + std::to_string(v) + " outside [0,1]");
    }
    int bin = static_cast<int>(std::floor(v * kQuantBins));
    return bin > kQuantBins - 1 ? kQuantBins - 1 : bin;
}

}  // namespace

std::pair<QuantizedCoord, QuantizedCoord> quantize(const Point2& p) {
    return {QuantizedCoord{quantize_axis(p.x, "x")}, QuantizedCoord{quantize_axis(p.y, "y")}};
}

Point2 dequantize(QuantizedCoord qx, QuantizedCoord qy) {
    for (int bin : {qx.bin, qy.bin}) {
        if (bin < 0 || bin > kQuantBins - 1) {
            throw ValidationError("dequantize: bin " + std::to_string(bin) + " outside [0,255]");
        }
    }
    return {(qx.bin + 0.5) / kQuantBins, (qy.bin + 0.5) / kQuantBins};
}

void validate_trace(const Trace& t) {
    if (t.points.size() != t.occluded.size()) {
        throw ValidationError("trace: points and occluded lengths differ");
    }
    if (t.points.size() < 2) {
        throw ValidationError("trace: length must be >= 2");
    }
    if (t.seed_index < 0) {
        throw ValidationError("trace: seed_index must be non-negative");
    }
}

double trace_motion_magnitude(const Trace& t, ImageDims dims) {
    validate_trace(t);
    double sum = 0.0;
    int steps = 0;
    for (std::size_t i = 0; i + 1 < t.points.size(); ++i) {
        if (t.occluded[i] || t.occluded[i + 1]) continue;
        const double dx = (t.points[i + 1].x - t.points[i].x) * dims.width;
        const double dy = (t.points[i + 1].y - t.points[i].y) * dims.height;
        sum += std::hypot(dx, dy);
        ++steps;
    }
    return steps == 0 ? 0.0 : sum / steps;
}

}  // namespace somtom
