#include "somtom/som.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace somtom {

void MarkSet::require_consecutive() const {
    int expect = 1;
    for (const auto& [label, target] : entries) {
        if (label != expect) {
            throw ValidationError("markset: labels must be consecutive from 1, found " +
                                  std::to_string(label) + " where " + std::to_string(expect) +
                                  " was expected");
        }
        ++expect;
    }
}

const char* corner_name(Corner c) {
    switch (c) {
        case Corner::TL: return "TL";
        case Corner::TR: return "TR";
        case Corner::BL: return "BL";
        case Corner::BR: return "BR";
    }
    return "TL";
}

namespace {

// 8x12 digit glyphs, one byte per row, MSB = leftmost column.
constexpr std::uint8_t kDigitFont[10][12] = {
    {0x3C, 0x66, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x66, 0x66, 0x66, 0x3C, 0x00},  // 0
    {0x18, 0x38, 0x78, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // 1
    {0x3C, 0x66, 0x66, 0x06, 0x06, 0x0C, 0x18, 0x30, 0x60, 0x60, 0x7E, 0x00},  // 2
    {0x3C, 0x66, 0x66, 0x06, 0x06, 0x1C, 0x06, 0x06, 0x66, 0x66, 0x3C, 0x00},  // 3
    {0x0C, 0x1C, 0x3C, 0x6C, 0x6C, 0x7E, 0x0C, 0x0C, 0x0C, 0x0C, 0x0C, 0x00},  // 4
    {0x7E, 0x60, 0x60, 0x60, 0x7C, 0x06, 0x06, 0x06, 0x66, 0x66, 0x3C, 0x00},  // 5
    {0x3C, 0x66, 0x60, 0x60, 0x7C, 0x66, 0x66, 0x66, 0x66, 0x66, 0x3C, 0x00},  // 6
    {0x7E, 0x06, 0x06, 0x0C, 0x0C, 0x18, 0x18, 0x30, 0x30, 0x30, 0x30, 0x00},  // 7
    {0x3C, 0x66, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x66, 0x66, 0x66, 0x3C, 0x00},  // 8
    {0x3C, 0x66, 0x66, 0x66, 0x66, 0x3E, 0x06, 0x06, 0x06, 0x66, 0x3C, 0x00},  // 9
};

constexpr int kGlyphW = 8;
constexpr int kGlyphH = 12;

constexpr std::uint8_t kPalette[10][3] = {
    {230, 25, 75}, {60, 120, 180}, {60, 160, 60},  {145, 30, 180}, {245, 130, 48},
    {0, 128, 128}, {220, 60, 140}, {128, 100, 0},  {70, 70, 220},  {160, 60, 30},
};

int mark_scale(ImageDims dims) {
    const int s = static_cast<int>(std::lround(std::min(dims.width, dims.height) / 512.0));
    return std::max(1, s);
}

void fill_rect(Raster& img, int x, int y, int w, int h, const std::uint8_t rgb[3]) {
    const int x0 = std::max(0, x);
    const int y0 = std::max(0, y);
    const int x1 = std::min(img.width, x + w);
    const int y1 = std::min(img.height, y + h);
    for (int py = y0; py < y1; ++py) {
        for (int px = x0; px < x1; ++px) {
            img.set(px, py, rgb[0], rgb[1], rgb[2]);
        }
    }
}

void draw_rect_outline(Raster& img, const PixelRect& r, int thickness, const std::uint8_t rgb[3]) {
    fill_rect(img, r.x, r.y, r.w, thickness, rgb);
    fill_rect(img, r.x, r.y + r.h - thickness, r.w, thickness, rgb);
    fill_rect(img, r.x, r.y, thickness, r.h, rgb);
    fill_rect(img, r.x + r.w - thickness, r.y, thickness, r.h, rgb);
}

void draw_disc(Raster& img, double cx, double cy, double radius, const std::uint8_t rgb[3]) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
    const double r2 = radius * radius;
    for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
            const double dx = px + 0.5 - cx;
            const double dy = py + 0.5 - cy;
            if (dx * dx + dy * dy <= r2) img.set(px, py, rgb[0], rgb[1], rgb[2]);
        }
    }
}

void draw_text(Raster& img, int x, int y, const std::string& text, int scale,
               const std::uint8_t rgb[3]) {
    int cx = x;
    for (char ch : text) {
        const int d = ch - '0';
        for (int row = 0; row < kGlyphH; ++row) {
            const std::uint8_t bits = kDigitFont[d][row];
            for (int col = 0; col < kGlyphW; ++col) {
                if (bits & (0x80u >> col)) {
                    fill_rect(img, cx + col * scale, y + row * scale, scale, scale, rgb);
                }
            }
        }
        cx += kGlyphW * scale;
    }
}

PixelRect to_pixel_rect(const BBox& b, ImageDims dims) {
    const int x0 = static_cast<int>(std::lround(b.x * dims.width));
    const int y0 = static_cast<int>(std::lround(b.y * dims.height));
    const int x1 = static_cast<int>(std::lround((b.x + b.w) * dims.width));
    const int y1 = static_cast<int>(std::lround((b.y + b.h) * dims.height));
    return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

// Distance from a pixel point to a solid box, 0 when inside.
double point_box_distance(double px, double py, const BBox& b, ImageDims dims) {
    const double bx0 = b.x * dims.width;
    const double by0 = b.y * dims.height;
    const double bx1 = (b.x + b.w) * dims.width;
    const double by1 = (b.y + b.h) * dims.height;
    const double dx = std::max({bx0 - px, px - bx1, 0.0});
    const double dy = std::max({by0 - py, py - by1, 0.0});
    return std::hypot(dx, dy);
}

struct CornerCandidate {
    Corner corner;
    double ax, ay;      // anchor (box corner) in pixels
    PixelRect label;    // label box grown toward the box interior
};

std::array<CornerCandidate, 4> corner_candidates(const BBox& b, ImageDims dims, int mark_w,
                                                 int mark_h) {
    const double x0 = b.x * dims.width;
    const double y0 = b.y * dims.height;
    const double x1 = (b.x + b.w) * dims.width;
    const double y1 = (b.y + b.h) * dims.height;
    const int ix0 = static_cast<int>(std::lround(x0));
    const int iy0 = static_cast<int>(std::lround(y0));
    const int ix1 = static_cast<int>(std::lround(x1));
    const int iy1 = static_cast<int>(std::lround(y1));
    return {{
        {Corner::TL, x0, y0, {ix0, iy0, mark_w, mark_h}},
        {Corner::TR, x1, y0, {ix1 - mark_w, iy0, mark_w, mark_h}},
        {Corner::BL, x0, y1, {ix0, iy1 - mark_h, mark_w, mark_h}},
        {Corner::BR, x1, y1, {ix1 - mark_w, iy1 - mark_h, mark_w, mark_h}},
    }};
}

bool rect_inside_image(const PixelRect& r, ImageDims dims) {
    return r.x >= 0 && r.y >= 0 && r.x + r.w <= dims.width && r.y + r.h <= dims.height;
}

PixelRect clamp_rect_into_image(PixelRect r, ImageDims dims) {
    r.x = std::clamp(r.x, 0, std::max(0, dims.width - r.w));
    r.y = std::clamp(r.y, 0, std::max(0, dims.height - r.h));
    r.w = std::min(r.w, dims.width);
    r.h = std::min(r.h, dims.height);
    return r;
}

}  // namespace

CornerChoice find_optimal_corner(const BBox& box, const std::vector<BBox>& drawn, ImageDims dims,
                                 int mark_w, int mark_h) {
    const auto candidates = corner_candidates(box, dims, mark_w, mark_h);

    CornerChoice best;
    double best_score = -1.0;
    bool any_valid = false;
    for (const CornerCandidate& cand : candidates) {
        if (!rect_inside_image(cand.label, dims)) continue;
        double score = std::numeric_limits<double>::infinity();
        for (const BBox& d : drawn) {
            score = std::min(score, point_box_distance(cand.ax, cand.ay, d, dims));
        }
        if (!any_valid || score > best_score) {
            any_valid = true;
            best_score = score;
            best = {cand.corner, cand.ax, cand.ay, false};
        }
    }
    if (!any_valid) {
        return {Corner::TL, candidates[0].ax, candidates[0].ay, true};
    }
    return best;
}

std::pair<int, int> get_mark_size(const std::string& text, ImageDims dims) {
    if (text.empty()) throw ValidationError("get_mark_size: empty text");
    for (char ch : text) {
        if (ch < '0' || ch > '9') {
            throw ValidationError("get_mark_size: label text must be digits, got '" + text + "'");
        }
    }
    const int scale = mark_scale(dims);
    const int pad = 2 * scale;
    const int m_h = kGlyphH * scale + 2 * pad;
    const int m_w = static_cast<int>(text.size()) * kGlyphW * scale + 2 * pad;
    return {m_h, m_w};
}

SomResult apply_som(const Raster& img, const std::vector<BBox>& boxes) {
    validate_raster(img);
    const ImageDims dims{img.width, img.height};
    for (const BBox& b : boxes) validate_bbox(b);

    SomResult out;
    out.image = img;
    if (boxes.empty()) return out;

    const int scale = mark_scale(dims);
    const int pad = 2 * scale;
    constexpr std::uint8_t kWhite[3] = {255, 255, 255};

    std::vector<BBox> drawn;
    drawn.reserve(boxes.size());
    for (std::size_t idx = 0; idx < boxes.size(); ++idx) {
        const BBox& b = boxes[idx];
        const int label = static_cast<int>(idx) + 1;
        const std::string text = std::to_string(label);
        const std::uint8_t* color = kPalette[idx % 10];

        draw_rect_outline(out.image, to_pixel_rect(b, dims), 2 * scale, color);

        const auto [m_h, m_w] = get_mark_size(text, dims);
        const CornerChoice choice = find_optimal_corner(b, drawn, dims, m_w, m_h);

        PixelRect label_box{0, 0, m_w, m_h};
        const auto candidates = corner_candidates(b, dims, m_w, m_h);
        for (const auto& cand : candidates) {
            if (cand.corner == choice.corner) label_box = cand.label;
        }
        if (choice.degraded) label_box = clamp_rect_into_image(label_box, dims);

        fill_rect(out.image, label_box.x, label_box.y, label_box.w, label_box.h, color);
        draw_text(out.image, label_box.x + pad, label_box.y + pad, text, scale, kWhite);

        out.marks.entries[label] = b;
        out.placements.push_back({label, label_box, choice.corner, choice.degraded});
        drawn.push_back(b);
    }
    return out;
}

SomResult apply_som_points(const Raster& img, const std::vector<Point2>& points, int first_label) {
    validate_raster(img);
    const ImageDims dims{img.width, img.height};
    for (const Point2& p : points) {
        if (!in_unit_square(p)) {
            throw ValidationError("apply_som_points: point outside the unit square");
        }
    }

    SomResult out;
    out.image = img;

    const int scale = mark_scale(dims);
    const int pad = 2 * scale;
    const double radius = 3.0 * scale;
    constexpr std::uint8_t kWhite[3] = {255, 255, 255};

    for (std::size_t idx = 0; idx < points.size(); ++idx) {
        const Point2& p = points[idx];
        const int label = first_label + static_cast<int>(idx);
        const std::string text = std::to_string(label);
        const std::uint8_t* color = kPalette[(label - 1) % 10];

        const double cx = p.x * dims.width;
        const double cy = p.y * dims.height;
        draw_disc(out.image, cx, cy, radius, color);

        const auto [m_h, m_w] = get_mark_size(text, dims);
        // Offset the label toward the image interior so it never exits.
        const double gap = radius + scale;
        PixelRect label_box;
        label_box.w = m_w;
        label_box.h = m_h;
        label_box.x = static_cast<int>(std::lround(p.x <= 0.5 ? cx + gap : cx - gap - m_w));
        label_box.y = static_cast<int>(std::lround(p.y <= 0.5 ? cy + gap : cy - gap - m_h));
        label_box = clamp_rect_into_image(label_box, dims);

        Corner corner;
        if (p.x <= 0.5) {
            corner = p.y <= 0.5 ? Corner::TL : Corner::BL;
        } else {
            corner = p.y <= 0.5 ? Corner::TR : Corner::BR;
        }

        fill_rect(out.image, label_box.x, label_box.y, label_box.w, label_box.h, color);
        draw_text(out.image, label_box.x + pad, label_box.y + pad, text, scale, kWhite);

        out.marks.entries[label] = p;
        out.placements.push_back({label, label_box, corner, false});
    }
    return out;
}

}  // namespace somtom
