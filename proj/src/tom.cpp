#include "somtom/tom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace somtom {

namespace {

// Uniform double in [0, 1) from the top 53 bits; std::uniform_real_distribution
// is implementation-defined and would break cross-platform determinism.
double draw_unit(std::mt19937_64& gen) { return (gen() >> 11) * 0x1.0p-53; }

std::vector<double> trace_features(const Trace& t) {
    std::vector<double> f;
    f.reserve(2 * t.points.size());
    for (const Point2& p : t.points) {
        f.push_back(p.x);
        f.push_back(p.y);
    }
    return f;
}

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

void validate_tom_config(const TomConfig& cfg) {
    if (cfg.grid_size < 2) throw ConfigError("tom: grid_size must be >= 2");
    if (cfg.eta_px <= 0.0) throw ConfigError("tom: eta_px must be > 0");
    if (cfg.eps_px <= 0.0) throw ConfigError("tom: eps_px must be > 0");
    if (cfg.max_fg_clusters < 1) throw ConfigError("tom: max_fg_clusters must be >= 1");
    if (cfg.max_occluded_frac < 0.0 || cfg.max_occluded_frac > 1.0) {
        throw ConfigError("tom: max_occluded_frac must be in [0, 1]");
    }
}

bool has_global_motion(const std::vector<Trace>& traces, ImageDims dims, double eta_px) {
    if (traces.empty()) throw InsufficientDataError("has_global_motion: no traces");
    std::vector<double> mags;
    mags.reserve(traces.size());
    for (const Trace& t : traces) mags.push_back(trace_motion_magnitude(t, dims));
    std::sort(mags.begin(), mags.end());
    const std::size_t n = mags.size();
    const double median = (n % 2 == 1) ? mags[n / 2] : 0.5 * (mags[n / 2 - 1] + mags[n / 2]);
    return median > eta_px;
}

TraceClasses classify_traces(const std::vector<Trace>& traces, ImageDims dims,
                             const TomConfig& cfg) {
    validate_tom_config(cfg);
    TraceClasses out;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const Trace& t = traces[i];
        validate_trace(t);
        const int occluded =
            static_cast<int>(std::count(t.occluded.begin(), t.occluded.end(), true));
        if (occluded > cfg.max_occluded_frac * t.length()) {
            out.dropped.push_back(static_cast<int>(i));
            continue;
        }
        const double motion = trace_motion_magnitude(t, dims);
        if (motion >= cfg.eps_px) {
            out.foreground.push_back(static_cast<int>(i));
        } else {
            out.background.push_back(static_cast<int>(i));
        }
    }
    return out;
}

KMeansResult kmeans(const std::vector<Trace>& traces, int k, std::uint64_t seed) {
    const int n = static_cast<int>(traces.size());
    if (n == 0) throw InsufficientDataError("kmeans: no traces");
    if (k < 1 || k > n) {
        throw ValidationError("kmeans: k must be in [1, " + std::to_string(n) + "], got " +
                              std::to_string(k));
    }
    const std::size_t len = traces[0].points.size();
    std::vector<std::vector<double>> feats;
    feats.reserve(n);
    for (const Trace& t : traces) {
        if (t.points.size() != len) {
            throw ValidationError("kmeans: traces must have equal length");
        }
        feats.push_back(trace_features(t));
    }

    std::mt19937_64 gen(seed);

    // k-means++ seeding.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    centroids.push_back(feats[gen() % n]);
    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, dist2(feats[i], c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            centroids.push_back(feats[gen() % n]);
            continue;
        }
        const double u = draw_unit(gen) * total;
        double acc = 0.0;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            acc += d2[i];
            if (acc >= u) {
                pick = i;
                break;
            }
        }
        centroids.push_back(feats[pick]);
    }

    const auto nearest = [&](const std::vector<double>& f) {
        int best = 0;
        double best_d = dist2(f, centroids[0]);
        for (int c = 1; c < k; ++c) {
            const double d = dist2(f, centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    };

    std::vector<int> assign(n, 0);
    double objective = 0.0;
    double prev_objective = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
        objective = 0.0;
        for (int i = 0; i < n; ++i) {
            assign[i] = nearest(feats[i]);
            objective += dist2(feats[i], centroids[assign[i]]);
        }
        // Lloyd monotonicity; a rise beyond rounding noise means a bug.
        if (objective > prev_objective + 1e-12) {
            throw Error("kmeans: objective increased across iterations");
        }
        prev_objective = objective;

        std::vector<std::vector<double>> next(k, std::vector<double>(2 * len, 0.0));
        std::vector<int> count(k, 0);
        for (int i = 0; i < n; ++i) {
            const int c = assign[i];
            for (std::size_t d = 0; d < 2 * len; ++d) next[c][d] += feats[i][d];
            ++count[c];
        }

        std::vector<bool> claimed(n, false);
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) {
                for (double& v : next[c]) v /= count[c];
                continue;
            }
            // Reseed an empty cluster to the unclaimed trace farthest from
            // its current centroid.
            int far_i = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (claimed[i]) continue;
                const double d = dist2(feats[i], centroids[assign[i]]);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            claimed[far_i] = true;
            next[c] = feats[far_i];
        }

        double shift2 = 0.0;
        for (int c = 0; c < k; ++c) shift2 = std::max(shift2, dist2(centroids[c], next[c]));
        centroids = std::move(next);
        if (shift2 < 1e-18) break;  // centroid shift < 1e-9
    }

    objective = 0.0;
    for (int i = 0; i < n; ++i) {
        assign[i] = nearest(feats[i]);
        objective += dist2(feats[i], centroids[assign[i]]);
    }
    return {std::move(centroids), std::move(assign), objective};
}

std::vector<int> select_representatives(const std::vector<Trace>& traces,
                                        const KMeansResult& clusters, SelectionMode mode,
                                        std::uint64_t seed) {
    if (clusters.assignment.size() != traces.size()) {
        throw ValidationError("select_representatives: assignment size mismatch");
    }
    const int k = static_cast<int>(clusters.centroids.size());
    std::mt19937_64 gen(seed);
    std::vector<int> reps;
    reps.reserve(k);
    for (int c = 0; c < k; ++c) {
        std::vector<int> members;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            if (clusters.assignment[i] == c) members.push_back(static_cast<int>(i));
        }
        if (members.empty()) continue;

        if (mode == SelectionMode::SeededRandom) {
            reps.push_back(members[gen() % members.size()]);
            continue;
        }
        int best = members[0];
        double best_d = std::numeric_limits<double>::infinity();
        for (int i : members) {
            const double d = dist2(trace_features(traces[i]), clusters.centroids[c]);
            if (d < best_d || (d == best_d && traces[i].seed_index < traces[best].seed_index)) {
                best_d = d;
                best = i;
            }
        }
        reps.push_back(best);
    }
    return reps;
}

TomResult run_tom(const FrameSequence& seq, const PointTracker& tracker, const TomConfig& cfg) {
    validate_tom_config(cfg);
    validate_sequence(seq);
    std::vector<Trace> traces = tracker.track(seq, cfg.grid_size);
    return run_tom_with_traces(seq, std::move(traces), cfg);
}

TomResult run_tom_with_traces(const FrameSequence& seq, std::vector<Trace> traces,
                              const TomConfig& cfg) {
    validate_tom_config(cfg);
    validate_sequence(seq);
    if (traces.empty()) throw InsufficientDataError("tom: no traces");
    const std::size_t frame_count = seq.frames.size();
    for (const Trace& t : traces) {
        if (t.points.size() != frame_count) {
            throw ValidationError("tom: trace length " + std::to_string(t.points.size()) +
                                  " does not match frame count " + std::to_string(frame_count));
        }
    }

    const ImageDims dims = seq.dims();
    TomResult res;
    res.marked_first_frame = seq.frames[0];
    res.diagnostics.global_motion = has_global_motion(traces, dims, cfg.eta_px);

    std::vector<Trace> working = std::move(traces);
    if (res.diagnostics.global_motion) {
        RansacConfig rc = cfg.ransac;
        rc.seed = cfg.ransac.seed ^ cfg.seed;
        StabilizeResult st = stabilize_traces(working, dims, rc);
        working = std::move(st.traces);
        res.diagnostics.stabilize_steps = std::move(st.steps);
        res.diagnostics.stabilized = true;
    }

    const TraceClasses cls = classify_traces(working, dims, cfg);
    res.diagnostics.dropped_traces = static_cast<int>(cls.dropped.size());
    res.diagnostics.foreground_total = static_cast<int>(cls.foreground.size());
    res.diagnostics.background_total = static_cast<int>(cls.background.size());

    if (cls.foreground.empty()) {
        res.diagnostics.warnings.push_back("no foreground traces; clip yields no sample");
        return res;
    }

    std::mt19937_64 gen(cfg.seed);
    const std::uint64_t fg_seed = gen();
    const std::uint64_t bg_seed = gen();
    const std::uint64_t fg_select_seed = gen();
    const std::uint64_t bg_select_seed = gen();
    const std::uint64_t k_draw = gen();

    const int kmax = std::min(cfg.max_fg_clusters, static_cast<int>(cls.foreground.size()));
    res.k = cfg.deterministic_selection
                ? (kmax + 2) / 2  // ceil((1 + kmax) / 2), midpoint of the draw range
                : 1 + static_cast<int>(k_draw % static_cast<std::uint64_t>(kmax));

    const auto subset = [&](const std::vector<int>& idxs) {
        std::vector<Trace> out;
        out.reserve(idxs.size());
        for (int i : idxs) out.push_back(working[i]);
        return out;
    };
    const SelectionMode mode = cfg.deterministic_selection ? SelectionMode::Deterministic
                                                           : SelectionMode::SeededRandom;

    const std::vector<Trace> fg = subset(cls.foreground);
    const KMeansResult fg_km = kmeans(fg, res.k, fg_seed);
    const std::vector<int> fg_reps = select_representatives(fg, fg_km, mode, fg_select_seed);

    std::vector<int> bg_reps;
    std::vector<Trace> bg;
    if (!cls.background.empty()) {
        const int want = 2 * res.k;
        const int kb = std::min(want, static_cast<int>(cls.background.size()));
        if (kb < want) {
            res.diagnostics.warnings.push_back(
                "background clusters clamped to " + std::to_string(kb) + " (wanted " +
                std::to_string(want) + ")");
        }
        bg = subset(cls.background);
        const KMeansResult bg_km = kmeans(bg, kb, bg_seed);
        bg_reps = select_representatives(bg, bg_km, mode, bg_select_seed);
    } else {
        res.diagnostics.warnings.push_back("no background traces; overlay has no distractors");
    }

    std::vector<Point2> mark_points;
    mark_points.reserve(fg_reps.size() + bg_reps.size());
    for (int i : fg_reps) {
        res.fg_traces.push_back(fg[i]);
        mark_points.push_back(fg[i].points[0]);
    }
    for (int i : bg_reps) mark_points.push_back(bg[i].points[0]);

    const SomResult som = apply_som_points(seq.frames[0], mark_points, 1);
    res.marked_first_frame = som.image;

    const int n_fg = static_cast<int>(fg_reps.size());
    for (const auto& [label, target] : som.marks.entries) {
        if (label <= n_fg) {
            res.fg_marks.entries[label] = target;
        } else {
            res.bg_marks.entries[label] = target;
        }
    }
    return res;
}

}  // namespace somtom
