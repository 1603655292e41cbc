#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "somtom/geometry.hpp"

namespace somtom {

/// 3x3 projective transform, scaled so m(2,2) = 1 whenever that entry is
/// nonzero. Maps points of one frame into the coordinate system of another.
struct Homography {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

    static Homography identity() { return {}; }

    /// Row-major 9-element form used by the JSON interfaces.
    std::array<double, 9> row_major() const;
    static Homography from_row_major(const std::array<double, 9>& v);

    Homography inverse() const;
    double det() const { return m.determinant(); }
};

/// Paired point sets: src holds the positions being mapped (frame t+i),
/// dst the positions they should land on (frame t). Optional non-negative
/// per-pair weights bias the least-squares fit.
struct Correspondences {
    std::vector<Point2> src;
    std::vector<Point2> dst;
    std::vector<double> weights;  // empty or same length as src

    std::size_t size() const { return src.size(); }
};

struct DltResult {
    Homography h;
    double rms_residual = 0.0;  // forward reprojection, normalized units
};

/// Least-squares DLT with isotropic point normalization (centroids at the
/// origin, mean distance sqrt(2)). Requires >= 4 pairs; throws
/// InsufficientDataError or DegenerateConfigurationError.
DltResult estimate_dlt(const Correspondences& c);

struct RansacConfig {
    double inlier_px = 3.0;
    int max_iters = 500;
    std::uint64_t seed = 0;
};

struct RansacResult {
    Homography h;
    std::vector<bool> inlier_mask;
    int inlier_count = 0;
    double rms_residual_px = 0.0;  // over inliers, symmetric transfer RMS
};

/// Seeded RANSAC around estimate_dlt. Minimal 4-point models are scored by
/// symmetric transfer error in pixels (RMS of the forward and backward
/// distances); the best inlier set is refit with the full DLT. Deterministic
/// for a fixed (correspondences, config) pair. Throws RobustFitError when no
/// model reaches 4 inliers.
RansacResult estimate_ransac(const Correspondences& c, ImageDims dims, const RansacConfig& cfg);

/// Projective application. Throws PointAtInfinityError when |w'| < 1e-12.
/// The result is not clamped: callers detect out-of-frame points with
/// in_unit_square.
Point2 apply(const Homography& h, const Point2& p);

struct StabilizeStepInfo {
    int step = 0;
    bool applied = false;      // false => points passed through untransformed
    int candidates = 0;        // usable (non-occluded at 0 and step) pairs
    int inliers = 0;
    double rms_residual_px = 0.0;
};

struct StabilizeResult {
    std::vector<Trace> traces;
    std::vector<StabilizeStepInfo> steps;
};

/// Removes global motion from a set of equal-length traces: for every step
/// i >= 1, fits a homography from the step-i positions to the step-0
/// positions with RANSAC (per-step seed = cfg.seed ^ i) and maps every
/// trace's step-i point through it. Occlusion flags pass through unchanged;
/// points may leave the unit square. Steps with fewer than 4 usable points
/// (or a failed fit) are passed through and reported with applied = false.
StabilizeResult stabilize_traces(const std::vector<Trace>& traces, ImageDims dims,
                                 const RansacConfig& cfg);

}  // namespace somtom
