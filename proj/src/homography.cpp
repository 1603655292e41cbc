#include "somtom/homography.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace somtom {

std::array<double, 9> Homography::row_major() const {
    std::array<double, 9> out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out[r * 3 + c] = m(r, c);
    return out;
}

Homography Homography::from_row_major(const std::array<double, 9>& v) {
    Homography h;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.m(r, c) = v[r * 3 + c];
    return h;
}

Homography Homography::inverse() const {
    if (std::abs(m.determinant()) <= 1e-12) {
        throw DegenerateConfigurationError("homography: matrix is not invertible");
    }
    Homography inv;
    inv.m = m.inverse();
    if (std::abs(inv.m(2, 2)) > 1e-12) inv.m /= inv.m(2, 2);
    return inv;
}

Point2 apply(const Homography& h, const Point2& p) {
    const Eigen::Vector3d v = h.m * Eigen::Vector3d(p.x, p.y, 1.0);
    if (std::abs(v(2)) < 1e-12) {
        throw PointAtInfinityError("apply: point maps to infinity");
    }
    return {v(0) / v(2), v(1) / v(2)};
}

namespace {

// Isotropic normalization: translate the centroid to the origin and scale so
// the mean distance from it is sqrt(2).
Eigen::Matrix3d normalizing_transform(const std::vector<Point2>& pts,
                                      const std::vector<int>& idx) {
    double cx = 0.0, cy = 0.0;
    for (int i : idx) {
        cx += pts[i].x;
        cy += pts[i].y;
    }
    cx /= idx.size();
    cy /= idx.size();
    double mean_dist = 0.0;
    for (int i : idx) {
        mean_dist += std::hypot(pts[i].x - cx, pts[i].y - cy);
    }
    mean_dist /= idx.size();
    if (mean_dist < 1e-12) {
        throw DegenerateConfigurationError("estimate_dlt: points are coincident");
    }
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
}

Eigen::Vector3d to_h(const Point2& p) { return {p.x, p.y, 1.0}; }

DltResult dlt_on_subset(const Correspondences& c, const std::vector<int>& idx) {
    const Eigen::Matrix3d t_src = normalizing_transform(c.src, idx);
    const Eigen::Matrix3d t_dst = normalizing_transform(c.dst, idx);

    const int n = static_cast<int>(idx.size());
    Eigen::MatrixXd a(2 * n, 9);
    for (int row = 0; row < n; ++row) {
        const int i = idx[row];
        const Eigen::Vector3d s = t_src * to_h(c.src[i]);
        const Eigen::Vector3d d = t_dst * to_h(c.dst[i]);
        const double w = c.weights.empty() ? 1.0 : std::sqrt(std::max(0.0, c.weights[i]));
        a.row(2 * row) << 0, 0, 0, -d(2) * s(0), -d(2) * s(1), -d(2) * s(2), d(1) * s(0),
            d(1) * s(1), d(1) * s(2);
        a.row(2 * row + 1) << d(2) * s(0), d(2) * s(1), d(2) * s(2), 0, 0, 0, -d(0) * s(0),
            -d(0) * s(1), -d(0) * s(2);
        a.row(2 * row) *= w;
        a.row(2 * row + 1) *= w;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A unique (up to scale) solution needs rank exactly 8.
    if (sv(7) <= std::max(1e-12, 1e-9 * sv(0))) {
        throw DegenerateConfigurationError("estimate_dlt: configuration is rank-deficient");
    }
    const Eigen::VectorXd hvec = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);

    Homography h;
    h.m = t_dst.inverse() * hn * t_src;
    if (std::abs(h.m(2, 2)) > 1e-12) h.m /= h.m(2, 2);
    if (std::abs(h.m.determinant()) <= 1e-12) {
        throw DegenerateConfigurationError("estimate_dlt: solution is singular");
    }

    double sq_sum = 0.0;
    for (int i : idx) {
        Point2 proj;
        try {
            proj = apply(h, c.src[i]);
        } catch (const PointAtInfinityError&) {
            // An exact algebraic fit can still put an input point on the
            // vanishing line; such a solution is unusable.
            throw DegenerateConfigurationError("estimate_dlt: solution maps an input to infinity");
        }
        const double dx = proj.x - c.dst[i].x;
        const double dy = proj.y - c.dst[i].y;
        sq_sum += dx * dx + dy * dy;
    }
    return {h, std::sqrt(sq_sum / idx.size())};
}

// Squared symmetric transfer error in pixels: mean of the forward and
// backward squared distances.
double symmetric_error_sq_px(const Homography& h, const Homography& h_inv, const Point2& src,
                             const Point2& dst, ImageDims dims) {
    const auto px = [&](const Point2& a, const Point2& b) {
        const double dx = (a.x - b.x) * dims.width;
        const double dy = (a.y - b.y) * dims.height;
        return dx * dx + dy * dy;
    };
    try {
        const Point2 fwd = apply(h, src);
        const Point2 bwd = apply(h_inv, dst);
        return 0.5 * (px(fwd, dst) + px(bwd, src));
    } catch (const PointAtInfinityError&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

DltResult estimate_dlt(const Correspondences& c) {
    if (c.src.size() != c.dst.size()) {
        throw ValidationError("estimate_dlt: src and dst sizes differ");
    }
    if (!c.weights.empty() && c.weights.size() != c.src.size()) {
        throw ValidationError("estimate_dlt: weights size mismatch");
    }
    if (c.size() < 4) {
        throw InsufficientDataError("estimate_dlt: need at least 4 correspondences, got " +
                                    std::to_string(c.size()));
    }
    std::vector<int> all(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) all[i] = static_cast<int>(i);
    return dlt_on_subset(c, all);
}

RansacResult estimate_ransac(const Correspondences& c, ImageDims dims, const RansacConfig& cfg) {
    if (c.size() < 4) {
        throw InsufficientDataError("estimate_ransac: need at least 4 correspondences, got " +
                                    std::to_string(c.size()));
    }
    if (!(cfg.inlier_px > 0.0)) {
        throw ValidationError("estimate_ransac: inlier_px must be positive");
    }
    const int n = static_cast<int>(c.size());
    const double thresh_sq = cfg.inlier_px * cfg.inlier_px;

    std::mt19937_64 gen(cfg.seed);
    const auto draw_index = [&]() { return static_cast<int>(gen() % n); };

    std::vector<bool> best_mask;
    int best_count = 0;
    double best_err = std::numeric_limits<double>::infinity();
    bool any_model = false;
    std::vector<int> sample(4);

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        for (int k = 0; k < 4; ++k) {
            int idx;
            bool dup;
            do {
                idx = draw_index();
                dup = false;
                for (int j = 0; j < k; ++j) dup = dup || sample[j] == idx;
            } while (dup);
            sample[k] = idx;
        }

        Homography h, h_inv;
        try {
            h = dlt_on_subset(c, sample).h;
            h_inv = h.inverse();
        } catch (const DegenerateConfigurationError&) {
            continue;  // collinear or coincident minimal sample
        }

        std::vector<bool> mask(n, false);
        int count = 0;
        double err_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double e = symmetric_error_sq_px(h, h_inv, c.src[i], c.dst[i], dims);
            if (e <= thresh_sq) {
                mask[i] = true;
                ++count;
                err_sum += e;
            }
        }
        if (count < 4) continue;
        any_model = true;
        if (count > best_count || (count == best_count && err_sum < best_err)) {
            best_count = count;
            best_err = err_sum;
            best_mask = std::move(mask);
        }
    }

    if (!any_model) {
        throw RobustFitError("estimate_ransac: no model with at least 4 inliers");
    }

    Correspondences inliers;
    for (int i = 0; i < n; ++i) {
        if (!best_mask[i]) continue;
        inliers.src.push_back(c.src[i]);
        inliers.dst.push_back(c.dst[i]);
        if (!c.weights.empty()) inliers.weights.push_back(c.weights[i]);
    }

    RansacResult out;
    out.h = estimate_dlt(inliers).h;

    // Re-score everything with the refit model.
    const Homography h_inv = out.h.inverse();
    out.inlier_mask.assign(n, false);
    double err_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = symmetric_error_sq_px(out.h, h_inv, c.src[i], c.dst[i], dims);
        if (e <= thresh_sq) {
            out.inlier_mask[i] = true;
            ++out.inlier_count;
            err_sum += e;
        }
    }
    if (out.inlier_count < 4) {
        throw RobustFitError("estimate_ransac: refit model keeps fewer than 4 inliers");
    }
    out.rms_residual_px = std::sqrt(err_sum / out.inlier_count);
    return out;
}

StabilizeResult stabilize_traces(const std::vector<Trace>& traces, ImageDims dims,
                                 const RansacConfig& cfg) {
    StabilizeResult out;
    out.traces = traces;
    if (traces.empty()) return out;

    const std::size_t len = traces.front().length();
    for (const Trace& t : traces) {
        validate_trace(t);
        if (t.length() != len) {
            throw ValidationError("stabilize_traces: traces must share one length");
        }
    }

    for (std::size_t step = 1; step < len; ++step) {
        StabilizeStepInfo info;
        info.step = static_cast<int>(step);

        Correspondences c;
        for (const Trace& t : traces) {
            if (t.occluded[0] || t.occluded[step]) continue;
            c.src.push_back(t.points[step]);
            c.dst.push_back(t.points[0]);
        }
        info.candidates = static_cast<int>(c.size());

        if (c.size() >= 4) {
            RansacConfig step_cfg = cfg;
            step_cfg.seed = cfg.seed ^ static_cast<std::uint64_t>(step);
            try {
                const RansacResult fit = estimate_ransac(c, dims, step_cfg);
                for (Trace& t : out.traces) {
                    t.points[step] = apply(fit.h, t.points[step]);
                }
                info.applied = true;
                info.inliers = fit.inlier_count;
                info.rms_residual_px = fit.rms_residual_px;
            } catch (const Error&) {
                info.applied = false;  // step passes through untransformed
            }
        }
        out.steps.push_back(info);
    }
    return out;
}

}  // namespace somtom
