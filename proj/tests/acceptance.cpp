// Acceptance gate: one self-contained check per release criterion, each
// printed as a PASS/FAIL line with its runtime. Exit code is the number of
// failed criteria, so CI can gate on the binary alone.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "somtom/codec.hpp"
#include "somtom/evalkit.hpp"
#include "somtom/geometry.hpp"
#include "somtom/homography.hpp"
#include "somtom/raster.hpp"
#include "somtom/segmentation.hpp"
#include "somtom/som.hpp"
#include "somtom/tom.hpp"
#include "somtom/tracking.hpp"

using namespace somtom;

namespace {

struct Rng {
    std::mt19937_64 g;
    explicit Rng(std::uint64_t s) : g(s) {}
    double uniform() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int below(int n) { return static_cast<int>(g() % static_cast<std::uint64_t>(n)); }
};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.empty() ? 0.0 : v[v.size() / 2];
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

bool c1_quantize_round_trip(std::string& note) {
    Rng rng(11);
    const double half_bin = 0.5 / kQuantBins;
    for (int i = 0; i < 1000000; ++i) {
        const Point2 p{rng.uniform(), rng.uniform()};
        const auto [qx, qy] = quantize(p);
        const Point2 back = dequantize(qx, qy);
        if (std::abs(back.x - p.x) > half_bin + 1e-12 ||
            std::abs(back.y - p.y) > half_bin + 1e-12) {
            note = fmt("round-trip error %.3g at trial", std::abs(back.x - p.x));
            return false;
        }
    }
    for (int b = 0; b < kQuantBins; ++b) {
        const auto [qx, qy] = quantize(dequantize({b}, {b}));
        if (qx.bin != b || qy.bin != b) {
            note = fmt("bin %g not a fixed point", static_cast<double>(b));
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 2

Homography random_projective(Rng& rng) {
    const double ang = rng.uniform(-0.5, 0.5);
    const double sc = rng.uniform(0.8, 1.25);
    Homography h;
    h.m << sc * std::cos(ang), -sc * std::sin(ang), rng.uniform(-0.3, 0.3),
        sc * std::sin(ang), sc * std::cos(ang), rng.uniform(-0.3, 0.3),
        rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 1.0;
    return h;
}

double max_entry_diff(const Homography& a, const Homography& b) {
    const Eigen::Matrix3d am = a.m / a.m(2, 2);
    const Eigen::Matrix3d bm = b.m / b.m(2, 2);
    return (am - bm).cwiseAbs().maxCoeff();
}

bool c2_homography_recovery(std::string& note) {
    const int trials = 200;
    int exact_sets = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(4200 + t);
        const Homography truth = random_projective(rng);

        Correspondences c;
        for (int i = 0; i < 20; ++i) {
            const Point2 s{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
            c.src.push_back(s);
            c.dst.push_back(apply(truth, s));
        }

        const DltResult dlt = estimate_dlt(c);
        if (max_entry_diff(dlt.h, truth) > 1e-6) {
            note = fmt("clean fit off by %.3g at trial %g", max_entry_diff(dlt.h, truth),
                       static_cast<double>(t));
            return false;
        }

        std::vector<bool> planted(20, false);
        for (int k = 0; k < 4;) {
            const int idx = rng.below(20);
            if (planted[idx]) continue;
            planted[idx] = true;
            const double ang = rng.uniform(0.0, 6.283185307179586);
            const double mag = rng.uniform(0.05, 0.15);
            c.dst[idx].x += mag * std::cos(ang);
            c.dst[idx].y += mag * std::sin(ang);
            ++k;
        }

        const RansacResult rr =
            estimate_ransac(c, ImageDims{1000, 1000}, RansacConfig{3.0, 500, 900 + t});
        bool set_ok = max_entry_diff(rr.h, truth) <= 1e-5;
        for (int i = 0; i < 20 && set_ok; ++i) set_ok = rr.inlier_mask[i] == !planted[i];
        if (set_ok) ++exact_sets;
    }
    note = fmt("exact inlier sets %g/200", static_cast<double>(exact_sets));
    return exact_sets >= 195;
}

// ---------------------------------------------------------------- criterion 3

bool c3_pan_removal_f1(std::string& note) {
    const int canvas = 256;
    const double half = 24.0;
    const ImageDims dims{canvas, canvas};

    for (int s = 0; s < 50; ++s) {
        Rng rng(7000 + s);
        const int frames = 12;
        const double theta = rng.uniform(0.0, 6.283185307179586);
        const double dx = std::cos(theta);
        const double dy = std::sin(theta);
        const double pan = rng.uniform(2.5, 10.0);
        const double obj = rng.uniform(4.5, 7.5);  // world speed, along the pan axis
        const double drift = (obj - pan) * (frames - 1);

        // Nudge the object until no seed sits within 1 px of a frame-0 edge,
        // so expected membership is unambiguous.
        const auto clear_of_edges = [&](double c) {
            for (int i = 0; i < 15; ++i) {
                const double sp = (i + 0.5) / 15.0 * canvas;
                if (std::abs(sp - (c - half)) < 1.0 || std::abs(sp - (c + half)) < 1.0)
                    return false;
            }
            return true;
        };
        double cx = canvas / 2.0 - dx * drift / 2.0 + 0.37;
        double cy = canvas / 2.0 - dy * drift / 2.0 + 0.59;
        while (!clear_of_edges(cx)) cx += 0.41;
        while (!clear_of_edges(cy)) cy += 0.41;

        SyntheticScene scene;
        scene.canvas = dims;
        scene.frames = frames;
        scene.background_seed = 300 + s;
        ObjectSpec o;
        o.object_id = "obj";
        o.size_px = 2.0 * half;
        o.texture_seed = 1000 + s;
        for (int f = 0; f < frames; ++f) {
            o.centers_px.push_back({cx + obj * f * dx, cy + obj * f * dy});
            scene.camera.push_back({pan * f * dx, pan * f * dy, 1.0});
        }
        scene.objects.push_back(o);

        const RenderedScene r = render_scene(scene);

        std::set<int> expected;
        for (int row = 0; row < 15; ++row)
            for (int col = 0; col < 15; ++col) {
                const double sx = (col + 0.5) / 15.0 * canvas;
                const double sy = (row + 0.5) / 15.0 * canvas;
                if (std::abs(sx - cx) <= half && std::abs(sy - cy) <= half)
                    expected.insert(row * 15 + col);
            }
        if (expected.empty()) {
            note = fmt("scene %g produced no object seeds", static_cast<double>(s));
            return false;
        }

        const StabilizeResult stab =
            stabilize_traces(r.gt_traces, dims, RansacConfig{3.0, 500, 77 + s});

        std::vector<double> bg_motion;
        for (const Trace& t : stab.traces)
            if (!expected.count(t.seed_index)) bg_motion.push_back(trace_motion_magnitude(t, dims));
        const double med = median_of(bg_motion);
        if (med >= 0.3) {
            note = fmt("scene %g residual background motion %.3g px/frame",
                       static_cast<double>(s), med);
            return false;
        }

        TomConfig cfg;
        const TraceClasses cls = classify_traces(stab.traces, dims, cfg);
        std::set<int> got;
        for (int idx : cls.foreground) got.insert(stab.traces[idx].seed_index);
        if (got != expected) {
            int tp = 0;
            for (int g : got) tp += expected.count(g) ? 1 : 0;
            const double prec = got.empty() ? 0.0 : static_cast<double>(tp) / got.size();
            const double rec = static_cast<double>(tp) / expected.size();
            note = fmt("scene precision %.3f recall %.3f (not 1.0)", prec, rec);
            return false;
        }
    }
    note = "50/50 scenes at F1 = 1.0";
    return true;
}

// ---------------------------------------------------------------- criterion 4

Raster textured_frame(int w, int h, double ox, double oy) {
    Raster img = Raster::filled(w, h, 0, 0, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = 127.5 + 45.0 * std::sin(0.31 * (x + ox)) * std::cos(0.27 * (y + oy)) +
                             35.0 * std::sin(0.11 * (x + ox) + 0.23 * (y + oy));
            const auto g = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            img.set(x, y, g, g, g);
        }
    return img;
}

bool equal_results(const TomResult& a, const TomResult& b) {
    return a.k == b.k && a.fg_marks.entries == b.fg_marks.entries &&
           a.bg_marks.entries == b.bg_marks.entries && a.fg_traces == b.fg_traces &&
           a.marked_first_frame.pixels == b.marked_first_frame.pixels;
}

bool c4_clustering_structure(std::string& note) {
    // Seed count contract of the real tracker.
    FrameSequence seq;
    seq.fps = 24.0;
    for (int f = 0; f < 6; ++f) seq.frames.push_back(textured_frame(96, 96, 1.2 * f, 0.8 * f));
    const PyramidalLkTracker tracker;
    const std::vector<Trace> tracked = tracker.track(seq, 15);
    if (tracked.size() != 225) {
        note = fmt("tracker seeded %g traces, want 225", static_cast<double>(tracked.size()));
        return false;
    }
    for (const Trace& t : tracked)
        if (t.length() != 6) {
            note = "tracked trace length != frame count";
            return false;
        }

    // Structural bounds over a synthetic-trace corpus.
    for (int c = 0; c < 100; ++c) {
        Rng rng(9100 + c);
        const int frames = 8 + rng.below(9);
        const int r0 = rng.below(13);
        const int rh = 1 + rng.below(3);
        const int c0 = rng.below(13);
        const int cw = 1 + rng.below(3);
        const double theta = rng.uniform(0.0, 6.283185307179586);
        const double speed = rng.uniform(3.0, 8.0);

        std::set<int> movers;
        for (int r = r0; r < r0 + rh; ++r)
            for (int cc = c0; cc < c0 + cw; ++cc) movers.insert(r * 15 + cc);

        std::vector<Trace> traces(225);
        for (int i = 0; i < 225; ++i) {
            Trace& t = traces[i];
            t.seed_index = i;
            const double sx = ((i % 15) + 0.5) / 15.0;
            const double sy = ((i / 15) + 0.5) / 15.0;
            const bool moving = movers.count(i) != 0;
            for (int f = 0; f < frames; ++f) {
                const double jx = rng.uniform(-0.3, 0.3) / 64.0;
                const double jy = rng.uniform(-0.3, 0.3) / 64.0;
                const double mx = moving ? speed * f * std::cos(theta) / 64.0 : 0.0;
                const double my = moving ? speed * f * std::sin(theta) / 64.0 : 0.0;
                t.points.push_back({sx + mx + jx, sy + my + jy});
                t.occluded.push_back(false);
            }
        }
        // Partially occlude a few traces (kept) and fully enough to drop four.
        for (int n = 0; n < 12; ++n) {
            Trace& t = traces[rng.below(225)];
            const int run = static_cast<int>(frames * 0.3);
            for (int f = 0; f < run; ++f) t.occluded[f] = true;
        }
        int dropped_planted = 0;
        while (dropped_planted < 4) {
            const int idx = rng.below(225);
            if (movers.count(idx)) continue;
            Trace& t = traces[idx];
            const int run = (frames * 7 + 9) / 10;
            bool fresh = false;
            for (int f = 0; f < run; ++f) {
                if (!t.occluded[f]) fresh = true;
                t.occluded[f] = true;
            }
            if (fresh) ++dropped_planted;
        }

        FrameSequence clip;
        clip.fps = 24.0;
        for (int f = 0; f < frames; ++f) clip.frames.push_back(Raster::filled(64, 64, 80, 80, 80));

        TomConfig cfg;
        cfg.seed = 5000 + c;
        cfg.deterministic_selection = (c % 2 == 0);

        const TomResult r1 = run_tom_with_traces(clip, traces, cfg);
        const TomResult r2 = run_tom_with_traces(clip, traces, cfg);

        const int mf = r1.diagnostics.foreground_total;
        const int kmax = std::min(cfg.max_fg_clusters, mf);
        if (r1.k < 1 || r1.k > kmax) {
            note = fmt("clip %g: k=%g outside [1,%g]", static_cast<double>(c),
                       static_cast<double>(r1.k), static_cast<double>(kmax));
            return false;
        }
        if (static_cast<int>(r1.fg_traces.size()) != r1.k ||
            static_cast<int>(r1.fg_marks.size()) != r1.k) {
            note = fmt("clip %g: fg selection size != k", static_cast<double>(c));
            return false;
        }
        const int bg_expect =
            std::min(2 * r1.k, r1.diagnostics.background_total);
        if (static_cast<int>(r1.bg_marks.size()) != bg_expect) {
            note = fmt("clip %g: bg marks %g, want %g", static_cast<double>(c),
                       static_cast<double>(r1.bg_marks.size()), static_cast<double>(bg_expect));
            return false;
        }
        for (const Trace& t : r1.fg_traces)
            if (!movers.count(t.seed_index)) {
                note = fmt("clip %g: selected trace is not a mover", static_cast<double>(c));
                return false;
            }
        if (!equal_results(r1, r2)) {
            note = fmt("clip %g: rerun differs under fixed seed", static_cast<double>(c));
            return false;
        }
    }
    note = "100 clips structurally conformant";
    return true;
}

// ---------------------------------------------------------------- criterion 5

bool c5_mark_placement(std::string& note) {
    for (int img = 0; img < 500; ++img) {
        Rng rng(2600 + img);
        const int w = 260 + (img * 7) % 81;
        const int h = 200 + (img * 11) % 81;
        const ImageDims dims{w, h};
        const Raster base = Raster::filled(w, h, 30, 60, 90);

        const int n = 1 + rng.below(8);
        std::vector<BBox> boxes;
        for (int i = 0; i < n; ++i) {
            BBox b;
            b.w = rng.uniform(0.1, 0.35);
            b.h = rng.uniform(0.1, 0.35);
            b.x = rng.uniform(0.01, 0.99 - b.w);
            b.y = rng.uniform(0.01, 0.99 - b.h);
            boxes.push_back(b);
        }

        const SomResult res = apply_som(base, boxes);
        if (static_cast<int>(res.marks.size()) != n ||
            static_cast<int>(res.placements.size()) != n) {
            note = fmt("image %g: mark count mismatch", static_cast<double>(img));
            return false;
        }
        try {
            res.marks.require_consecutive();
        } catch (const std::exception&) {
            note = fmt("image %g: labels not 1..K", static_cast<double>(img));
            return false;
        }

        for (int i = 0; i < n; ++i) {
            const LabelPlacement& p = res.placements[i];
            if (p.degraded) {
                note = fmt("image %g box %g: degraded placement", static_cast<double>(img),
                           static_cast<double>(i));
                return false;
            }
            const auto [mh, mw] = get_mark_size(std::to_string(p.label), dims);
            const BBox& b = boxes[i];
            const int ix0 = static_cast<int>(std::lround(b.x * w));
            const int iy0 = static_cast<int>(std::lround(b.y * h));
            const int ix1 = static_cast<int>(std::lround((b.x + b.w) * w));
            const int iy1 = static_cast<int>(std::lround((b.y + b.h) * h));
            PixelRect want{ix0, iy0, mw, mh};
            if (p.corner == Corner::TR) want = {ix1 - mw, iy0, mw, mh};
            if (p.corner == Corner::BL) want = {ix0, iy1 - mh, mw, mh};
            if (p.corner == Corner::BR) want = {ix1 - mw, iy1 - mh, mw, mh};
            if (!(p.text_box == want)) {
                note = fmt("image %g box %g: label box not at its corner", static_cast<double>(img),
                           static_cast<double>(i));
                return false;
            }
            if (p.text_box.x < 0 || p.text_box.y < 0 || p.text_box.x + p.text_box.w > w ||
                p.text_box.y + p.text_box.h > h) {
                note = fmt("image %g box %g: label box leaves the image", static_cast<double>(img),
                           static_cast<double>(i));
                return false;
            }
        }

        const SomResult rerun = apply_som(base, boxes);
        if (rerun.image.pixels != res.image.pixels) {
            note = fmt("image %g: rerun not byte-identical", static_cast<double>(img));
            return false;
        }
    }
    note = "500 images conformant";
    return true;
}

// ---------------------------------------------------------------- criterion 6

bool c6_trace_precision(std::string& note) {
    // Analytic scene: ground truth must score exactly 1.0.
    SyntheticScene scene;
    scene.canvas = {96, 96};
    scene.frames = 6;
    scene.fps = 24.0;
    scene.background_seed = 3;
    scene.gt_grid = 8;
    ObjectSpec o;
    o.object_id = "obj";
    o.size_px = 30.0;
    o.texture_seed = 7;
    for (int f = 0; f < 6; ++f) o.centers_px.push_back({30.3 + 4.0 * f, 48.2});
    scene.objects.push_back(o);
    const RenderedScene r = render_scene(scene);
    const PrecisionReport gt = trace_precision_report(r.gt_traces, r.annotations, 5.0 / 24.0, 24.0);
    if (gt.precision != 1.0 || gt.n_traces < 1) {
        note = fmt("ground truth precision %.4f over %g traces", gt.precision,
                   static_cast<double>(gt.n_traces));
        return false;
    }

    // Planted corruption: q of 2000 traces leave the box by the horizon.
    const BBox box{0.05, 0.05, 0.9, 0.9};
    const int horizon_frame = 6;  // round(3.0 s * 2 fps)
    for (const double q : {0.1, 0.25, 0.5}) {
        Rng rng(80 + static_cast<int>(q * 100));
        std::vector<Trace> traces(2000);
        for (int i = 0; i < 2000; ++i) {
            Trace& t = traces[i];
            t.seed_index = i;
            const Point2 p{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
            t.points.assign(7, p);
            t.occluded.assign(7, false);
        }
        std::vector<int> order(2000);
        for (int i = 0; i < 2000; ++i) order[i] = i;
        for (int i = 1999; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        const int corrupt = static_cast<int>(std::lround(q * 2000));
        for (int i = 0; i < corrupt; ++i) traces[order[i]].points[horizon_frame] = {0.975, 0.975};

        const std::vector<BoxAnnotation> ann{{0, box, "tgt", true},
                                             {horizon_frame, box, "tgt", true}};
        const PrecisionReport rep = trace_precision_report(traces, ann, 3.0, 2.0);
        if (rep.n_traces != 2000 || rep.horizon_frames != horizon_frame ||
            std::abs(rep.precision - (1.0 - q)) > 0.02) {
            note = fmt("q=%.2f gave precision %.4f over %g traces", q, rep.precision,
                       static_cast<double>(rep.n_traces));
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 7

bool c7_token_codec(std::string& note) {
    // Continuous action fuzz: id range plus encode/decode identity.
    const int vocab = 32000;
    ActionStats stats;
    for (int d = 0; d < kRobotDims; ++d) {
        stats.low[d] = -0.1 * (d + 1);
        stats.high[d] = 0.2 * (d + 1);
    }
    Rng rng(64);
    for (int i = 0; i < 100000; ++i) {
        RobotAction a;
        for (int d = 0; d < kRobotDims; ++d)
            a.delta[d] = rng.uniform(stats.low[d] - 0.5, stats.high[d] + 0.5);
        const TokenRecord rec = encode_robot(a, stats, vocab);
        if (!rec.token_ids || rec.token_ids->size() != kRobotDims) {
            note = "robot record without 7 token ids";
            return false;
        }
        for (const int id : *rec.token_ids)
            if (id < vocab - kRobotBins || id >= vocab) {
                note = fmt("token id %g outside the reserved range", static_cast<double>(id));
                return false;
            }
        const RobotAction back = decode_robot(*rec.token_ids, stats, vocab);
        if (encode_robot(back, stats, vocab).token_ids != rec.token_ids) {
            note = "decode/encode changed the ids";
            return false;
        }
    }

    const std::vector<std::string> texts = {
        "OK",
        "open the settings menu",
        "a \"quoted\" bit",
        "back\\slash and\nnewline",
        "colon : mark 3 : (1,2)",
        "grab : traces {2:[(1,1)]}",
        "tap : marks {9}",
        "",
    };
    const UiActionKind kinds[] = {UiActionKind::Click, UiActionKind::Type, UiActionKind::Select,
                                  UiActionKind::Scroll, UiActionKind::Press};

    for (int i = 0; i < 5000; ++i) {
        UiAction a;
        a.kind = kinds[rng.below(5)];
        MarkSet marks;
        const bool needs_pos = a.kind == UiActionKind::Click || a.kind == UiActionKind::Select;
        if (rng.below(10) < 4 || (needs_pos && rng.below(2) == 0)) {
            const int label = 1 + rng.below(9);
            marks.entries[label] = Point2{rng.uniform(), rng.uniform()};
            a.mark = label;
        } else if (needs_pos || rng.below(2) == 0) {
            a.target = Point2{rng.uniform(), rng.uniform()};
        }
        if (a.kind == UiActionKind::Type || rng.below(10) < 3)
            a.text_arg = texts[rng.below(static_cast<int>(texts.size()))];

        const TokenRecord rec = encode_grounding(a, marks);
        const GroundingRecord parsed = parse_grounding(rec.text);

        UiAction again;
        again.kind = parsed.kind;
        again.mark = parsed.mark;
        again.text_arg = parsed.text_arg;
        MarkSet marks2;
        if (parsed.mark) {
            marks2.entries[*parsed.mark] =
                dequantize({parsed.bins->first}, {parsed.bins->second});
        } else if (parsed.bins) {
            again.target = dequantize({parsed.bins->first}, {parsed.bins->second});
        }
        if (encode_grounding(again, marks2).text != rec.text) {
            note = "grounding record failed the parse/re-encode round trip: " + rec.text;
            return false;
        }
    }

    for (int i = 0; i < 5000; ++i) {
        const int nm = 1 + rng.below(4);
        const int len = 2 + rng.below(11);
        const int horizon = 1 + rng.below(len - 1);
        MarkSet marks;
        std::vector<Trace> planned(nm);
        for (int m = 0; m < nm; ++m) {
            marks.entries[m + 1] = Point2{rng.uniform(), rng.uniform()};
            Trace& t = planned[m];
            t.seed_index = m;
            for (int f = 0; f < len; ++f) {
                t.points.push_back({rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1)});
                t.occluded.push_back(false);
            }
        }
        const std::string text = texts[rng.below(static_cast<int>(texts.size() - 1))];
        const TokenRecord rec = encode_tom(text, marks, planned, horizon);
        const TomRecord parsed = parse_tom(rec.text);
        if (parsed.action_text != text || static_cast<int>(parsed.labels.size()) != nm) {
            note = "planning record lost its text or labels: " + rec.text;
            return false;
        }

        MarkSet marks2;
        std::vector<Trace> rebuilt(nm);
        for (int m = 0; m < nm; ++m) {
            marks2.entries[parsed.labels[m]] = Point2{0.5, 0.5};
            Trace& t = rebuilt[m];
            t.seed_index = m;
            t.points.push_back({0.5, 0.5});
            t.occluded.push_back(false);
            for (const auto& [bx, by] : parsed.traces[m]) {
                t.points.push_back(dequantize({bx}, {by}));
                t.occluded.push_back(false);
            }
        }
        if (encode_tom(parsed.action_text, marks2, rebuilt, horizon).text != rec.text) {
            note = "planning record failed the parse/re-encode round trip: " + rec.text;
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 8

bool c8_shot_cuts_and_filtering(std::string& note) {
    for (int v = 0; v < 20; ++v) {
        Rng rng(500 + v);
        const int n_clips = 2 + rng.below(4);
        std::vector<int> bounds{0};
        for (int j = 0; j < n_clips; ++j) bounds.push_back(bounds.back() + 12 + rng.below(19));

        FrameSequence seq;
        seq.fps = 24.0;
        for (int j = 0; j < n_clips; ++j) {
            const auto level = static_cast<std::uint8_t>(30 + 55 * (j % 4));
            for (int f = bounds[j]; f < bounds[j + 1]; ++f)
                seq.frames.push_back(Raster::filled(48, 48, level, level, level));
        }

        const std::vector<Clip> clips = detect_shots(seq, "vid" + std::to_string(v), {});
        if (static_cast<int>(clips.size()) != n_clips) {
            note = fmt("video %g: %g clips, want %g", static_cast<double>(v),
                       static_cast<double>(clips.size()), static_cast<double>(n_clips));
            return false;
        }
        for (int j = 0; j < n_clips; ++j)
            if (clips[j].start_frame != bounds[j] || clips[j].end_frame != bounds[j + 1]) {
                note = fmt("video %g clip %g: boundary off", static_cast<double>(v),
                           static_cast<double>(j));
                return false;
            }
    }

    std::vector<Clip> clips;
    std::map<std::string, double> scores;
    for (int i = 0; i < 40; ++i) {
        Clip c;
        c.segment_ref = "f";
        c.start_frame = 12 * i;
        c.end_frame = 12 * (i + 1);
        clips.push_back(c);
        scores[c.id()] = i / 100.0;
    }
    scores[clips[10].id()] = 0.2499999999;
    const std::vector<Clip> kept = filter_by_similarity(clips, scores, 0.25);
    std::set<std::string> kept_ids;
    for (const Clip& c : kept) kept_ids.insert(c.id());
    std::set<std::string> want_ids;
    for (int i = 25; i < 40; ++i) want_ids.insert(clips[i].id());
    if (kept_ids != want_ids) {
        note = fmt("filter kept %g clips, want %g", static_cast<double>(kept.size()),
                   static_cast<double>(want_ids.size()));
        return false;
    }
    return true;
}

// ---------------------------------------------------------------- criterion 9

bool c9_pipeline_throughput(std::string& note) {
    SyntheticScene scene;
    scene.canvas = {512, 512};
    scene.frames = 36;
    scene.fps = 24.0;
    scene.background_seed = 9;
    ObjectSpec o;
    o.object_id = "obj";
    o.size_px = 96.0;
    o.texture_seed = 4;
    for (int f = 0; f < 36; ++f) {
        o.centers_px.push_back({200.0 + 5.3 * f, 256.4});
        scene.camera.push_back({3.0 * f, 0.0, 1.0});
    }
    scene.objects.push_back(o);
    const RenderedScene r = render_scene(scene);

    const PyramidalLkTracker tracker;
    TomConfig cfg;
    cfg.seed = 21;

    const auto t0 = std::chrono::steady_clock::now();
    const TomResult result = run_tom(r.seq, tracker, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    const double fps = scene.frames / secs;

    if (!result.has_sample()) {
        note = "pipeline produced no sample on the benchmark clip";
        return false;
    }
    note = fmt("%.1f frames/s", fps);
    return fps >= 30.0;
}

struct Criterion {
    const char* name;
    bool (*fn)(std::string&);
    double budget_s;  // 0 = untimed
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"quantize-round-trip", c1_quantize_round_trip, 5.0},
        {"homography-recovery", c2_homography_recovery, 30.0},
        {"pan-removal-foreground-f1", c3_pan_removal_f1, 120.0},
        {"trace-clustering-structure", c4_clustering_structure, 0.0},
        {"mark-placement-conformance", c5_mark_placement, 60.0},
        {"trace-precision-metric", c6_trace_precision, 0.0},
        {"action-token-codec", c7_token_codec, 0.0},
        {"shot-cuts-and-filtering", c8_shot_cuts_and_filtering, 0.0},
        {"tracking-pipeline-throughput", c9_pipeline_throughput, 0.0},
    };

    int failures = 0;
    int index = 0;
    for (const Criterion& c : criteria) {
        ++index;
        std::string detail;
        bool ok = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ok = c.fn(detail);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double secs = std::chrono::duration<double>(t1 - t0).count();
        if (ok && c.budget_s > 0.0 && secs >= c.budget_s) {
            ok = false;
            detail = fmt("over time budget of %.0f s", c.budget_s);
        }
        std::printf("%s %d %-28s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", index, c.name, secs,
                    detail.empty() ? "" : " ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    std::printf("acceptance: %d/9 passed\n", 9 - static_cast<int>(failures));
    return failures;
}
