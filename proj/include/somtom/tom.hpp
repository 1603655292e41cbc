#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "somtom/geometry.hpp"
#include "somtom/homography.hpp"
#include "somtom/raster.hpp"
#include "somtom/som.hpp"
#include "somtom/tracking.hpp"

namespace somtom {

struct TomConfig {
    int grid_size = 15;            // tracker seeds per axis
    double eta_px = 2.0;           // median motion above this means camera motion
    double eps_px = 2.0;           // traces moving at least this are foreground
    int max_fg_clusters = 5;       // cap on the cluster-count draw
    double max_occluded_frac = 0.5;
    std::uint64_t seed = 0;
    bool deterministic_selection = true;  // midpoint k instead of a seeded draw
    RansacConfig ransac;
};

void validate_tom_config(const TomConfig& cfg);

// True when the median per-trace motion magnitude exceeds eta_px.
// Pre: traces nonempty, lengths >= 2.
bool has_global_motion(const std::vector<Trace>& traces, ImageDims dims, double eta_px);

struct TraceClasses {
    std::vector<int> foreground;  // indices into the input trace vector
    std::vector<int> background;
    std::vector<int> dropped;     // occluded beyond the allowed fraction
};

// Splits traces into foreground (motion >= eps_px) and background, dropping
// traces occluded in more than max_occluded_frac of their frames. Expects
// traces already stabilized when the camera moves.
TraceClasses classify_traces(const std::vector<Trace>& traces, ImageDims dims,
                             const TomConfig& cfg);

struct KMeansResult {
    // Cluster centers in feature space: per-step (x, y) pairs concatenated.
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignment;  // one entry per input trace
    double objective = 0.0;       // final within-cluster sum of squares
};

// Seeded k-means over whole traces (features are the concatenated normalized
// coordinates of every step, so clusters separate by location and motion).
// k-means++ init, Lloyd iterations until centroid shift < 1e-9 or 100 rounds.
// Deterministic for a fixed seed. Pre: 1 <= k <= traces.size(), equal lengths.
KMeansResult kmeans(const std::vector<Trace>& traces, int k, std::uint64_t seed);

enum class SelectionMode { Deterministic, SeededRandom };

// Picks one representative per cluster, returned as indices into `traces` in
// cluster order. Deterministic mode takes the member nearest its centroid
// (ties broken by the lower seed_index); SeededRandom draws uniformly.
std::vector<int> select_representatives(const std::vector<Trace>& traces,
                                        const KMeansResult& clusters, SelectionMode mode,
                                        std::uint64_t seed);

struct TomDiagnostics {
    bool global_motion = false;
    bool stabilized = false;
    std::vector<StabilizeStepInfo> stabilize_steps;  // per-step residuals, inlier counts
    std::vector<std::string> warnings;
    int dropped_traces = 0;
    int foreground_total = 0;  // classified foreground traces before selection
    int background_total = 0;
};

struct TomResult {
    Raster marked_first_frame;
    MarkSet fg_marks;               // labels 1..n_fg -> trace start points
    MarkSet bg_marks;               // labels n_fg+1.. -> background start points
    std::vector<Trace> fg_traces;   // supervision targets, one per fg mark
    int k = 0;                      // foreground cluster count (0 when no sample)
    TomDiagnostics diagnostics;

    bool has_sample() const { return !fg_traces.empty(); }
};

// Full pipeline over one clip: track, stabilize when the camera moves,
// classify, cluster foreground with k and background with 2k (clamped),
// mark the first frame. A clip with no foreground yields an empty result
// with a warning rather than an error.
TomResult run_tom(const FrameSequence& seq, const PointTracker& tracker, const TomConfig& cfg);

// Variant that accepts precomputed traces (equal lengths == frame count).
TomResult run_tom_with_traces(const FrameSequence& seq, std::vector<Trace> traces,
                              const TomConfig& cfg);

}  // namespace somtom
