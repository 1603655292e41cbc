#include "somtom/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace somtom {

PrecisionReport trace_precision_report(const std::vector<Trace>& traces,
                                       const std::vector<BoxAnnotation>& annotations,
                                       double horizon_s, double fps) {
    if (!(fps > 0.0)) throw ValidationError("precision: fps must be positive");
    if (horizon_s < 0.0) throw ValidationError("precision: horizon must be >= 0");
    const int h = static_cast<int>(std::lround(horizon_s * fps));
    for (const Trace& t : traces) {
        validate_trace(t);
        if (static_cast<std::size_t>(h) + 1 > t.points.size()) {
            throw ValidationError("precision: horizon " + std::to_string(h) +
                                  " frames exceeds trace length " +
                                  std::to_string(t.points.size()) + " - 1");
        }
    }

    std::vector<const BoxAnnotation*> start_boxes;
    std::map<std::string, const BBox*> horizon_boxes;
    for (const BoxAnnotation& a : annotations) {
        if (!a.visible) continue;
        if (a.frame_index == 0) start_boxes.push_back(&a);
        if (a.frame_index == h) horizon_boxes.emplace(a.object_id, &a.box);
    }

    PrecisionReport rep;
    rep.horizon_frames = h;
    for (const Trace& t : traces) {
        if (t.occluded[0]) continue;
        const BoxAnnotation* owner = nullptr;
        for (const BoxAnnotation* a : start_boxes) {
            if (a->box.contains(t.points[0])) {
                owner = a;
                break;
            }
        }
        if (!owner) continue;
        ++rep.n_traces;
        if (t.occluded[h]) continue;
        const auto it = horizon_boxes.find(owner->object_id);
        if (it != horizon_boxes.end() && it->second->contains(t.points[h])) ++rep.hits;
    }
    if (rep.n_traces == 0) {
        throw UndefinedMetricError("precision: no trace starts inside an annotated box");
    }
    rep.precision = static_cast<double>(rep.hits) / rep.n_traces;
    return rep;
}

void validate_scene(const SyntheticScene& scene) {
    if (scene.canvas.width <= 0 || scene.canvas.height <= 0) {
        throw ValidationError("scene: canvas must be positive");
    }
    if (scene.frames < 2) throw ValidationError("scene: need at least 2 frames");
    if (!(scene.fps > 0.0)) throw ValidationError("scene: fps must be positive");
    if (scene.gt_grid < 2) throw ValidationError("scene: gt_grid must be >= 2");
    if (scene.canvas.width < scene.gt_grid || scene.canvas.height < scene.gt_grid) {
        throw ValidationError("scene: canvas smaller than the seed grid");
    }
    if (!scene.camera.empty() && scene.camera.size() != static_cast<std::size_t>(scene.frames)) {
        throw ValidationError("scene: camera poses must cover every frame");
    }
    for (const CameraPose& c : scene.camera) {
        if (!(c.zoom > 0.0)) throw ValidationError("scene: zoom must be positive");
    }
    std::set<std::string> ids;
    for (const ObjectSpec& o : scene.objects) {
        if (o.object_id.empty()) throw ValidationError("scene: object without id");
        if (!ids.insert(o.object_id).second) {
            throw ValidationError("scene: duplicate object id " + o.object_id);
        }
        if (!(o.size_px > 0.0)) throw ValidationError("scene: object size must be positive");
        if (o.centers_px.size() != static_cast<std::size_t>(scene.frames)) {
            throw ValidationError("scene: object " + o.object_id +
                                  " must have a pose for every frame");
        }
    }
}

namespace {

inline std::uint64_t hash_u64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    const std::uint64_t h = hash_u64(
        seed ^ hash_u64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ull ^
                        static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4Full));
    return (h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y, double cell) {
    const double fx = x / cell;
    const double fy = y / cell;
    const auto ix = static_cast<std::int64_t>(std::floor(fx));
    const auto iy = static_cast<std::int64_t>(std::floor(fy));
    const double tx = smoothstep(fx - ix);
    const double ty = smoothstep(fy - iy);
    const double v00 = lattice(seed, ix, iy);
    const double v10 = lattice(seed, ix + 1, iy);
    const double v01 = lattice(seed, ix, iy + 1);
    const double v11 = lattice(seed, ix + 1, iy + 1);
    const double top = v00 + tx * (v10 - v00);
    const double bot = v01 + tx * (v11 - v01);
    return top + ty * (bot - top);
}

// Two-octave value noise; mid-gray band keeps gradients available for
// trackers without saturating.
double texture_value(std::uint64_t seed, double x, double y) {
    return 0.65 * value_noise(seed, x, y, 9.0) +
           0.35 * value_noise(seed ^ 0x5bf0363577fabc11ull, x, y, 3.0);
}

std::uint8_t shade(double v) {
    const long s = std::lround(40.0 + std::clamp(v, 0.0, 1.0) * 175.0);
    return static_cast<std::uint8_t>(std::clamp(s, 0L, 255L));
}

struct Shader {
    std::uint64_t seed;

    void rgb(double x, double y, std::uint8_t* out) const {
        const double base = texture_value(seed, x, y);
        const double wash = value_noise(seed ^ 0x7c6e2abf1135ull, x, y, 33.0);
        out[0] = shade(0.8 * base + 0.2 * wash);
        out[1] = shade(base);
        out[2] = shade(0.8 * base + 0.2 * (1.0 - wash));
    }
};

bool object_contains(const ObjectSpec& o, double cx, double cy, double wx, double wy) {
    const double half = o.size_px / 2.0;
    if (o.shape == ObjectSpec::Shape::Square) {
        return std::abs(wx - cx) <= half && std::abs(wy - cy) <= half;
    }
    const double dx = wx - cx;
    const double dy = wy - cy;
    return dx * dx + dy * dy <= half * half;
}

}  // namespace

RenderedScene render_scene(const SyntheticScene& scene) {
    validate_scene(scene);
    const int w = scene.canvas.width;
    const int hgt = scene.canvas.height;
    const auto camera_at = [&](int f) {
        return scene.camera.empty() ? CameraPose{} : scene.camera[f];
    };

    RenderedScene out;
    out.seq.fps = scene.fps;
    out.seq.frames.reserve(scene.frames);

    const Shader background{scene.background_seed ^ 0xB0C5D4E3F2A19887ull};
    std::vector<Shader> obj_shaders;
    obj_shaders.reserve(scene.objects.size());
    for (const ObjectSpec& o : scene.objects) obj_shaders.push_back({hash_u64(o.texture_seed)});

    for (int f = 0; f < scene.frames; ++f) {
        const CameraPose cam = camera_at(f);
        Raster frame = Raster::filled(w, hgt, 0, 0, 0);
        for (int py = 0; py < hgt; ++py) {
            for (int px = 0; px < w; ++px) {
                const double wx = (px + 0.5) / cam.zoom + cam.pan_x;
                const double wy = (py + 0.5) / cam.zoom + cam.pan_y;
                std::uint8_t rgb[3];
                bool hit = false;
                for (int oi = static_cast<int>(scene.objects.size()) - 1; oi >= 0; --oi) {
                    const ObjectSpec& o = scene.objects[oi];
                    const Point2 c = o.centers_px[f];
                    if (object_contains(o, c.x, c.y, wx, wy)) {
                        obj_shaders[oi].rgb(wx - c.x, wy - c.y, rgb);
                        hit = true;
                        break;
                    }
                }
                if (!hit) background.rgb(wx, wy, rgb);
                frame.set(px, py, rgb[0], rgb[1], rgb[2]);
            }
        }
        out.seq.frames.push_back(std::move(frame));
    }

    // Ground-truth traces for the seed grid of the first frame.
    const CameraPose cam0 = camera_at(0);
    const std::vector<Point2> seeds = seed_grid(w, hgt, scene.gt_grid);
    out.gt_traces.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const double sx0 = seeds[i].x * w;
        const double sy0 = seeds[i].y * hgt;
        const double wx0 = sx0 / cam0.zoom + cam0.pan_x;
        const double wy0 = sy0 / cam0.zoom + cam0.pan_y;

        int owner = -1;  // -1 = background
        for (int oi = static_cast<int>(scene.objects.size()) - 1; oi >= 0; --oi) {
            const ObjectSpec& o = scene.objects[oi];
            if (object_contains(o, o.centers_px[0].x, o.centers_px[0].y, wx0, wy0)) {
                owner = oi;
                break;
            }
        }

        Trace t;
        t.seed_index = static_cast<int>(i);
        t.points.reserve(scene.frames);
        t.occluded.reserve(scene.frames);
        for (int f = 0; f < scene.frames; ++f) {
            double wx = wx0;
            double wy = wy0;
            if (owner >= 0) {
                const ObjectSpec& o = scene.objects[owner];
                wx = o.centers_px[f].x + (wx0 - o.centers_px[0].x);
                wy = o.centers_px[f].y + (wy0 - o.centers_px[0].y);
            }
            const CameraPose cam = camera_at(f);
            const Point2 n{(wx - cam.pan_x) * cam.zoom / w, (wy - cam.pan_y) * cam.zoom / hgt};

            bool occ = !in_unit_square(n);
            for (int oi = static_cast<int>(scene.objects.size()) - 1; oi > owner && !occ; --oi) {
                const ObjectSpec& o = scene.objects[oi];
                occ = object_contains(o, o.centers_px[f].x, o.centers_px[f].y, wx, wy);
            }
            t.points.push_back(n);
            t.occluded.push_back(occ);
        }
        out.gt_traces.push_back(std::move(t));
    }

    // Per-frame object boxes in normalized screen coordinates, clipped.
    for (const ObjectSpec& o : scene.objects) {
        for (int f = 0; f < scene.frames; ++f) {
            const CameraPose cam = camera_at(f);
            const double half = o.size_px / 2.0 * cam.zoom;
            const double scx = (o.centers_px[f].x - cam.pan_x) * cam.zoom;
            const double scy = (o.centers_px[f].y - cam.pan_y) * cam.zoom;
            const double x0 = std::max(0.0, (scx - half) / w);
            const double y0 = std::max(0.0, (scy - half) / hgt);
            const double x1 = std::min(1.0, (scx + half) / w);
            const double y1 = std::min(1.0, (scy + half) / hgt);

            BoxAnnotation a;
            a.frame_index = f;
            a.object_id = o.object_id;
            if (x1 > x0 && y1 > y0) {
                a.box = {x0, y0, x1 - x0, y1 - y0};
            } else {
                a.visible = false;
            }
            out.annotations.push_back(std::move(a));
        }
    }
    return out;
}

}  // namespace somtom
