#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "somtom/geometry.hpp"
#include "somtom/raster.hpp"

namespace somtom {

/// A mark target is either a point or a box, always in the original
/// (un-marked) normalized coordinates.
using MarkTarget = std::variant<Point2, BBox>;

/// Numbered mark dictionary overlaid on one frame. Overlay producers emit
/// consecutive labels starting at 1; slices of an overlay keep their original
/// labels.
struct MarkSet {
    std::map<int, MarkTarget> entries;
    std::string image_ref;

    std::size_t size() const { return entries.size(); }
    bool contains(int label) const { return entries.count(label) != 0; }

    /// Throws ValidationError unless labels are exactly 1..K.
    void require_consecutive() const;
};

enum class Corner { TL, TR, BL, BR };

const char* corner_name(Corner c);

/// Integer pixel rectangle (x, y, w, h).
struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool operator==(const PixelRect&) const = default;
};

struct LabelPlacement {
    int label = 0;
    PixelRect text_box;
    Corner corner = Corner::TL;
    bool degraded = false;  // fallback clamp was needed
};

struct CornerChoice {
    Corner corner = Corner::TL;
    double anchor_x = 0.0;  // pixel coordinates of the chosen box corner
    double anchor_y = 0.0;
    bool degraded = false;
};

/// Picks the box corner whose anchor is farthest (max-min Euclidean pixel
/// distance) from every previously drawn box. Corners whose label box of
/// size (mark_w, mark_h) would leave the image are excluded first; ties and
/// the empty-drawn case resolve in TL, TR, BL, BR order. When every corner
/// is excluded the result falls back to TL with degraded = true.
CornerChoice find_optimal_corner(const BBox& box, const std::vector<BBox>& drawn, ImageDims dims,
                                 int mark_w, int mark_h);

/// Label box size in pixels for a digit string: glyphs are 8x12 at scale
/// max(1, round(min(H, W) / 512)) with a 2*scale pad on every side.
/// Returns (height, width).
std::pair<int, int> get_mark_size(const std::string& text, ImageDims dims);

struct SomResult {
    Raster image;
    MarkSet marks;
    std::vector<LabelPlacement> placements;
};

/// Overlays numbered boxes: each box gets an outline, and its label is
/// rendered at the corner farthest from the boxes drawn before it. Marks map
/// labels 1..K to the input boxes in input order. Deterministic.
SomResult apply_som(const Raster& img, const std::vector<BBox>& boxes);

/// Overlays numbered point marks: a filled disc per point with its label
/// offset toward the image interior. Marks map labels 1..K to the input
/// points. `first_label` lets a caller continue an existing numbering.
SomResult apply_som_points(const Raster& img, const std::vector<Point2>& points,
                           int first_label = 1);

}  // namespace somtom
