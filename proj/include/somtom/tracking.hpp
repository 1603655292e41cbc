#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "somtom/geometry.hpp"
#include "somtom/raster.hpp"

namespace somtom {

/// Uniformly sized RGB frames plus their rate. Consumers that need luma
/// (tracking, shot detection) convert per frame.
struct FrameSequence {
    std::vector<Raster> frames;
    double fps = 24.0;

    ImageDims dims() const {
        return frames.empty() ? ImageDims{} : ImageDims{frames[0].width, frames[0].height};
    }
};

/// Throws ValidationError unless there are >= 2 frames of identical
/// dimensions and fps > 0.
void validate_sequence(const FrameSequence& seq);

struct TrackerConfig {
    int grid_size = 15;      // seeds grid_size^2 points
    int pyramid_levels = 3;
    int window = 21;         // odd, pixels
    int max_iters = 30;      // per pyramid level
    double fb_threshold = 1.5;  // forward-backward consistency, pixels
};

void validate_tracker_config(const TrackerConfig& cfg);

/// Cell centers of an s x s partition in row-major order, normalized.
std::vector<Point2> seed_grid(int width, int height, int s);

/// Point tracker interface. Implementations must be deterministic and return
/// one trace per seed, each with one point per frame.
class PointTracker {
public:
    virtual ~PointTracker() = default;
    virtual std::vector<Trace> track(const FrameSequence& seq, int grid_size) const = 0;
};

/// Classical pyramidal iterative optical-flow tracker. Each seed is tracked
/// frame to frame; a step is flagged occluded when the forward-backward
/// displacement error exceeds fb_threshold pixels or the point exits the
/// frame. A point that exits stays occluded and frozen at its last in-frame
/// position. Sequences longer than 64 frames are tracked in overlapping
/// 64-frame windows re-seeded at window starts and stitched by seed identity.
class PyramidalLkTracker : public PointTracker {
public:
    PyramidalLkTracker() = default;
    explicit PyramidalLkTracker(TrackerConfig cfg);

    std::vector<Trace> track(const FrameSequence& seq, int grid_size) const override;
    std::vector<Trace> track(const FrameSequence& seq) const;

    const TrackerConfig& config() const { return cfg_; }

private:
    TrackerConfig cfg_{};
};

/// Serves pre-computed traces (e.g. from an external neural tracker) through
/// the PointTracker interface. The grid size must match the trace count.
class ExternalTraceSource : public PointTracker {
public:
    explicit ExternalTraceSource(std::vector<Trace> traces);
    std::vector<Trace> track(const FrameSequence& seq, int grid_size) const override;

private:
    std::vector<Trace> traces_;
};

/// Reads traces from a JSONL file of {"points": [[x,y],...], "occluded":
/// [...], "seed": n} records. Parse failures name the line; traces of
/// unequal lengths raise ValidationError.
std::vector<Trace> load_external_traces(const std::filesystem::path& path);

/// Writes traces in the same JSONL schema.
void save_traces(const std::filesystem::path& path, const std::vector<Trace>& traces);

/// Loads a frame directory (PNG or PGM, lexicographic order) as luma frames;
/// fps comes from an optional metadata.json sidecar ({"fps": f}, default 24).
FrameSequence load_frame_sequence(const std::filesystem::path& dir);

}  // namespace somtom
