#include "somtom/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "somtom/json_io.hpp"

namespace somtom {

void validate_sequence(const FrameSequence& seq) {
    if (seq.frames.size() < 2) {
        throw ValidationError("sequence: need at least 2 frames");
    }
    if (!(seq.fps > 0.0)) {
        throw ValidationError("sequence: fps must be positive");
    }
    const int w = seq.frames[0].width;
    const int h = seq.frames[0].height;
    if (w <= 0 || h <= 0) {
        throw ValidationError("sequence: frames must be non-empty");
    }
    for (const Raster& f : seq.frames) {
        if (f.width != w || f.height != h) {
            throw ValidationError("sequence: frame dimensions differ");
        }
        if (f.pixels.size() != 3 * static_cast<std::size_t>(w) * h) {
            throw ValidationError("sequence: frame buffer size mismatch");
        }
    }
}

void validate_tracker_config(const TrackerConfig& cfg) {
    if (cfg.grid_size < 2) throw ConfigError("tracker: grid_size must be >= 2");
    if (cfg.pyramid_levels < 1) throw ConfigError("tracker: pyramid_levels must be >= 1");
    if (cfg.window < 3 || cfg.window % 2 == 0) {
        throw ConfigError("tracker: window must be odd and >= 3");
    }
    if (cfg.max_iters < 1) throw ConfigError("tracker: max_iters must be >= 1");
    if (!(cfg.fb_threshold > 0.0)) throw ConfigError("tracker: fb_threshold must be positive");
}

std::vector<Point2> seed_grid(int width, int height, int s) {
    if (s < 2) throw ValidationError("seed_grid: s must be >= 2");
    if (width < s || height < s) {
        throw ValidationError("seed_grid: image smaller than the grid");
    }
    std::vector<Point2> seeds;
    seeds.reserve(static_cast<std::size_t>(s) * s);
    for (int row = 0; row < s; ++row) {
        for (int col = 0; col < s; ++col) {
            seeds.push_back({(col + 0.5) / s, (row + 0.5) / s});
        }
    }
    return seeds;
}

namespace {

struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> v;

    float at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

// Bilinear sample in pixel-index coordinates (integer (i,j) = pixel center),
// borders clamped.
inline float sample(const FloatImage& im, float x, float y) {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    const float tx = x - x0;
    const float ty = y - y0;
    const int xa = std::clamp(x0, 0, im.width - 1);
    const int xb = std::clamp(x0 + 1, 0, im.width - 1);
    const int ya = std::clamp(y0, 0, im.height - 1);
    const int yb = std::clamp(y0 + 1, 0, im.height - 1);
    const float top = im.at(xa, ya) + tx * (im.at(xb, ya) - im.at(xa, ya));
    const float bot = im.at(xa, yb) + tx * (im.at(xb, yb) - im.at(xa, yb));
    return top + ty * (bot - top);
}

// Bilinear samples of im at (bx + j, by + i), row-major into out. All taps
// share one fractional offset, so the fully-interior case runs without
// per-tap clamping; the border case defers to sample().
void sample_patch(const FloatImage& im, float bx, float by, int w, int h, float* out) {
    const int x0 = static_cast<int>(std::floor(bx));
    const int y0 = static_cast<int>(std::floor(by));
    if (x0 >= 0 && y0 >= 0 && x0 + w < im.width && y0 + h < im.height) {
        const float tx = bx - x0;
        const float ty = by - y0;
        for (int i = 0; i < h; ++i) {
            const float* ra = &im.v[static_cast<std::size_t>(y0 + i) * im.width + x0];
            const float* rb = ra + im.width;
            float* o = out + static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) {
                const float top = ra[j] + tx * (ra[j + 1] - ra[j]);
                const float bot = rb[j] + tx * (rb[j + 1] - rb[j]);
                o[j] = top + ty * (bot - top);
            }
        }
        return;
    }
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            out[static_cast<std::size_t>(i) * w + j] =
                sample(im, bx + static_cast<float>(j), by + static_cast<float>(i));
        }
    }
}

FloatImage to_float(const GrayImage& img) {
    FloatImage out;
    out.width = img.width;
    out.height = img.height;
    out.v.assign(img.pixels.begin(), img.pixels.end());
    return out;
}

// 5-tap binomial blur [1 4 6 4 1]/16, separable, then decimation by 2.
FloatImage downsample(const FloatImage& in) {
    static const float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    FloatImage blurred;
    blurred.width = in.width;
    blurred.height = in.height;
    blurred.v.resize(in.v.size());
    std::vector<float> tmp(in.v.size());
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            float acc = 0.f;
            for (int t = -2; t <= 2; ++t) {
                acc += k[t + 2] * in.at(std::clamp(x + t, 0, in.width - 1), y);
            }
            tmp[static_cast<std::size_t>(y) * in.width + x] = acc;
        }
    }
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            float acc = 0.f;
            for (int t = -2; t <= 2; ++t) {
                acc += k[t + 2] * tmp[static_cast<std::size_t>(std::clamp(y + t, 0, in.height - 1)) * in.width + x];
            }
            blurred.v[static_cast<std::size_t>(y) * in.width + x] = acc;
        }
    }
    FloatImage out;
    out.width = (in.width + 1) / 2;
    out.height = (in.height + 1) / 2;
    out.v.resize(static_cast<std::size_t>(out.width) * out.height);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            out.v[static_cast<std::size_t>(y) * out.width + x] = blurred.at(2 * x, 2 * y);
        }
    }
    return out;
}

using Pyramid = std::vector<FloatImage>;

Pyramid build_pyramid(const GrayImage& img, int levels) {
    Pyramid pyr;
    pyr.push_back(to_float(img));
    for (int l = 1; l < levels; ++l) {
        const FloatImage& prev = pyr.back();
        if (prev.width < 4 || prev.height < 4) break;
        pyr.push_back(downsample(prev));
    }
    return pyr;
}

struct Vec2f {
    float x = 0.f;
    float y = 0.f;
};

// Iterative translation-only flow of one point from pyramid a to pyramid b.
// Input and output are level-0 pixel-index coordinates.
Vec2f lk_point(const Pyramid& a, const Pyramid& b, Vec2f p, const TrackerConfig& cfg) {
    const int r = cfg.window / 2;
    const int area = cfg.window * cfg.window;
    const int ew = cfg.window + 2;  // window plus one pixel each side for gradients
    std::vector<float> epatch(static_cast<std::size_t>(ew) * ew);
    std::vector<float> patch(area), gx(area), gy(area), cur(area);

    Vec2f g{0.f, 0.f};  // displacement guess propagated across levels
    for (int level = static_cast<int>(a.size()) - 1; level >= 0; --level) {
        const FloatImage& ia = a[level];
        const FloatImage& ib = b[level];
        const float scale = 1.f / static_cast<float>(1 << level);
        const Vec2f pl{p.x * scale, p.y * scale};

        sample_patch(ia, pl.x - static_cast<float>(r + 1), pl.y - static_cast<float>(r + 1),
                     ew, ew, epatch.data());
        float gxx = 0.f, gxy = 0.f, gyy = 0.f;
        int idx = 0;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx, ++idx) {
                const int e = (dy + r + 1) * ew + (dx + r + 1);
                patch[idx] = epatch[e];
                const float ix = 0.5f * (epatch[e + 1] - epatch[e - 1]);
                const float iy = 0.5f * (epatch[e + ew] - epatch[e - ew]);
                gx[idx] = ix;
                gy[idx] = iy;
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
            }
        }

        const float tr = gxx + gyy;
        const float min_eig = 0.5f * (tr - std::sqrt((gxx - gyy) * (gxx - gyy) + 4.f * gxy * gxy));
        const float det = gxx * gyy - gxy * gxy;
        Vec2f nu{0.f, 0.f};
        if (min_eig > 1e-4f * area && std::abs(det) > 1e-12f) {
            const float inv00 = gyy / det;
            const float inv01 = -gxy / det;
            const float inv11 = gxx / det;
            for (int iter = 0; iter < cfg.max_iters; ++iter) {
                sample_patch(ib, pl.x + g.x * scale + nu.x - static_cast<float>(r),
                             pl.y + g.y * scale + nu.y - static_cast<float>(r),
                             cfg.window, cfg.window, cur.data());
                float bx = 0.f, by = 0.f;
                for (idx = 0; idx < area; ++idx) {
                    const float d = cur[idx] - patch[idx];
                    bx += d * gx[idx];
                    by += d * gy[idx];
                }
                const float ux = -(inv00 * bx + inv01 * by);
                const float uy = -(inv01 * bx + inv11 * by);
                nu.x += ux;
                nu.y += uy;
                if (ux * ux + uy * uy < 0.0001f) break;  // 0.01 px
            }
        }
        // g stays in level-0 units; nu was solved in level units
        g.x = (g.x * scale + nu.x) / scale;
        g.y = (g.y * scale + nu.y) / scale;
    }
    return {p.x + g.x, p.y + g.y};
}

struct PixelPoint {
    Vec2f pos;       // level-0 pixel-index coordinates
    bool exited = false;
};

bool in_frame(const Vec2f& p, int width, int height) {
    // normalized [0,1] bounds expressed in pixel-index coordinates
    return p.x >= -0.5f && p.x <= width - 0.5f && p.y >= -0.5f && p.y <= height - 0.5f;
}

std::vector<Trace> track_window(const std::vector<GrayImage>& frames, int grid_size,
                                const TrackerConfig& cfg) {
    const int w = frames[0].width;
    const int h = frames[0].height;
    const std::vector<Point2> seeds = seed_grid(w, h, grid_size);
    const std::size_t n_frames = frames.size();

    std::vector<Trace> traces(seeds.size());
    std::vector<PixelPoint> state(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        traces[i].seed_index = static_cast<int>(i);
        traces[i].points.reserve(n_frames);
        traces[i].occluded.reserve(n_frames);
        traces[i].points.push_back(seeds[i]);
        traces[i].occluded.push_back(false);
        state[i].pos = {static_cast<float>(seeds[i].x * w - 0.5), static_cast<float>(seeds[i].y * h - 0.5)};
    }

    Pyramid prev = build_pyramid(frames[0], cfg.pyramid_levels);
    for (std::size_t f = 1; f < n_frames; ++f) {
        Pyramid cur = build_pyramid(frames[f], cfg.pyramid_levels);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (state[i].exited) {
                traces[i].points.push_back(traces[i].points.back());
                traces[i].occluded.push_back(true);
                continue;
            }
            const Vec2f fwd = lk_point(prev, cur, state[i].pos, cfg);
            bool occluded = false;
            if (!in_frame(fwd, w, h)) {
                state[i].exited = true;
                occluded = true;
            } else {
                const Vec2f back = lk_point(cur, prev, fwd, cfg);
                const float ex = back.x - state[i].pos.x;
                const float ey = back.y - state[i].pos.y;
                occluded = ex * ex + ey * ey >
                           static_cast<float>(cfg.fb_threshold * cfg.fb_threshold);
            }
            Vec2f stored{std::clamp(fwd.x, -0.5f, w - 0.5f), std::clamp(fwd.y, -0.5f, h - 0.5f)};
            state[i].pos = stored;
            traces[i].points.push_back(
                {std::clamp((stored.x + 0.5) / w, 0.0, 1.0), std::clamp((stored.y + 0.5) / h, 0.0, 1.0)});
            traces[i].occluded.push_back(occluded);
        }
        prev = std::move(cur);
    }
    return traces;
}

constexpr std::size_t kTrackingWindowFrames = 64;

}  // namespace

PyramidalLkTracker::PyramidalLkTracker(TrackerConfig cfg) : cfg_(cfg) {
    validate_tracker_config(cfg_);
}

std::vector<Trace> PyramidalLkTracker::track(const FrameSequence& seq) const {
    return track(seq, cfg_.grid_size);
}

std::vector<Trace> PyramidalLkTracker::track(const FrameSequence& seq, int grid_size) const {
    validate_sequence(seq);
    TrackerConfig cfg = cfg_;
    cfg.grid_size = grid_size;
    validate_tracker_config(cfg);

    const std::size_t n = seq.frames.size();
    std::vector<GrayImage> gray;
    gray.reserve(n);
    for (const Raster& f : seq.frames) gray.push_back(to_gray(f));

    if (n <= kTrackingWindowFrames) {
        return track_window(gray, grid_size, cfg);
    }

    // Long clips: consecutive windows share one boundary frame; each window
    // re-seeds the grid and contributes the frames after its start.
    std::vector<Trace> stitched;
    std::size_t start = 0;
    while (true) {
        const std::size_t len = std::min(kTrackingWindowFrames, n - start);
        std::vector<GrayImage> slice(gray.begin() + start, gray.begin() + start + len);
        std::vector<Trace> part = track_window(slice, grid_size, cfg);
        if (start == 0) {
            stitched = std::move(part);
        } else {
            for (std::size_t i = 0; i < stitched.size(); ++i) {
                for (std::size_t f = 1; f < len; ++f) {
                    stitched[i].points.push_back(part[i].points[f]);
                    stitched[i].occluded.push_back(part[i].occluded[f]);
                }
            }
        }
        if (start + len >= n) break;
        start += kTrackingWindowFrames - 1;
    }
    return stitched;
}

ExternalTraceSource::ExternalTraceSource(std::vector<Trace> traces) : traces_(std::move(traces)) {
    if (traces_.empty()) throw ValidationError("external traces: empty set");
    const std::size_t len = traces_.front().length();
    for (const Trace& t : traces_) {
        validate_trace(t);
        if (t.length() != len) throw ValidationError("external traces: lengths differ");
    }
}

std::vector<Trace> ExternalTraceSource::track(const FrameSequence& seq, int grid_size) const {
    const std::size_t expected = static_cast<std::size_t>(grid_size) * grid_size;
    if (traces_.size() != expected) {
        throw ValidationError("external traces: have " + std::to_string(traces_.size()) +
                              " traces, grid needs " + std::to_string(expected));
    }
    if (!seq.frames.empty() && traces_.front().length() != seq.frames.size()) {
        throw ValidationError("external traces: length does not match frame count");
    }
    return traces_;
}

std::vector<Trace> load_external_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("traces: cannot open " + path.string());

    std::vector<Trace> traces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            Trace t = j.get<Trace>();
            validate_trace(t);
            traces.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("traces: line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ParseError("traces: line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (traces.empty()) throw ValidationError("traces: file holds no traces");
    const std::size_t len = traces.front().length();
    for (const Trace& t : traces) {
        if (t.length() != len) {
            throw ValidationError("traces: mixed lengths (" + std::to_string(len) + " vs " +
                                  std::to_string(t.length()) + ")");
        }
    }
    return traces;
}

void save_traces(const std::filesystem::path& path, const std::vector<Trace>& traces) {
    std::ofstream out(path);
    if (!out) throw Error("traces: cannot write " + path.string());
    for (const Trace& t : traces) {
        out << nlohmann::json(t).dump() << "\n";
    }
}

FrameSequence load_frame_sequence(const std::filesystem::path& dir) {
    FrameSequence seq;
    const auto files = list_frame_files(dir);
    if (files.size() < 2) {
        throw ValidationError("frames: need at least 2 frames in " + dir.string());
    }
    seq.frames.reserve(files.size());
    for (const auto& f : files) seq.frames.push_back(read_frame_rgb(f));

    const auto meta = dir / "metadata.json";
    if (std::filesystem::exists(meta)) {
        std::ifstream in(meta);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("frames: bad metadata.json: " + std::string(e.what()));
        }
        if (j.contains("fps")) seq.fps = j.at("fps").get<double>();
    }
    validate_sequence(seq);
    return seq;
}

}  // namespace somtom
