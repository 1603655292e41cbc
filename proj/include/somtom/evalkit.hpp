#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "somtom/geometry.hpp"
#include "somtom/raster.hpp"
#include "somtom/tracking.hpp"

namespace somtom {

struct BoxAnnotation {
    int frame_index = 0;
    BBox box;
    std::string object_id;
    bool visible = true;  // false when the object lies fully outside the frame
};

struct PrecisionReport {
    double precision = 0.0;
    int n_traces = 0;       // traces starting inside an annotated box
    int hits = 0;
    int horizon_frames = 0;
};

// Fraction of traces that start inside an annotated frame-0 box and are still
// inside that object's box round(horizon_s * fps) frames later. A trace
// occluded at the horizon, or whose object has no visible box there, counts
// as a miss. Traces starting outside every box are ignored; if that leaves
// none, UndefinedMetricError is raised rather than returning 0.
PrecisionReport trace_precision_report(const std::vector<Trace>& traces,
                                       const std::vector<BoxAnnotation>& annotations,
                                       double horizon_s, double fps);

inline double trace_precision(const std::vector<Trace>& traces,
                              const std::vector<BoxAnnotation>& annotations, double horizon_s,
                              double fps) {
    return trace_precision_report(traces, annotations, horizon_s, fps).precision;
}

// Declarative clip generator with analytic ground truth.
struct ObjectSpec {
    enum class Shape { Square, Disc };

    std::string object_id;
    Shape shape = Shape::Square;
    double size_px = 40.0;           // side or diameter, world pixels
    std::uint64_t texture_seed = 1;
    std::vector<Point2> centers_px;  // world-space center per frame
};

struct CameraPose {
    double pan_x = 0.0;  // world px; screen = (world - pan) * zoom
    double pan_y = 0.0;
    double zoom = 1.0;
};

struct SyntheticScene {
    ImageDims canvas;
    int frames = 0;
    double fps = 24.0;
    std::uint64_t background_seed = 0;
    std::vector<ObjectSpec> objects;   // later objects draw on top
    std::vector<CameraPose> camera;    // one per frame, or empty for static
    int gt_grid = 15;                  // seed grid for ground-truth traces
};

void validate_scene(const SyntheticScene& scene);

struct RenderedScene {
    FrameSequence seq;
    // One trace per gt_grid^2 seed: background seeds follow the camera,
    // object seeds follow object plus camera. Points are exact (they may
    // leave the unit square); a step is occluded when the point is outside
    // the frame or covered by an object drawn above it.
    std::vector<Trace> gt_traces;
    std::vector<BoxAnnotation> annotations;  // per object per frame, clipped
};

RenderedScene render_scene(const SyntheticScene& scene);

}  // namespace somtom
