#pragma once

#include <cmath>

#include "pathint/manifold.hpp"

namespace pathint {

/// Orthonormal frame at a point: columns are the chart components of
/// e_1, ..., e_n with g(e_i, e_j) = delta_ij. The column matrix is the linear
/// isometry u: R^n -> T_x M.
struct OrthonormalFrame {
    ChartPoint base;
    Mat cols;

    TangentVec apply(const Vec& a) const { return TangentVec{base, Vec(cols * a)}; }
};

/// Gram-Schmidt in the metric at x. Idempotent on orthonormal input.
inline OrthonormalFrame frame_orthonormalize(const Manifold& m, const ChartPoint& x,
                                             const Mat& raw) {
    m.require_domain(x);
    const int n = m.dim();
    if (raw.rows() != n || raw.cols() != n)
        throw UsageError("frame_orthonormalize: need n columns of length n");
    Mat g;
    m.metric(x, g);
    Mat e = raw;
    for (int c = 0; c < n; ++c) {
        for (int prev = 0; prev < c; ++prev)
            e.col(c) -= (e.col(prev).dot(g * e.col(c))) * e.col(prev);
        const double nrm2 = e.col(c).dot(g * e.col(c));
        if (!(nrm2 > 1e-24))
            throw DegenerateFrameError("frame_orthonormalize: rank-deficient columns");
        e.col(c) /= std::sqrt(nrm2);
    }
    return OrthonormalFrame{x, e};
}

/// Orthonormalized coordinate frame; the default start frame everywhere.
inline OrthonormalFrame canonical_frame(const Manifold& m, const ChartPoint& x) {
    return frame_orthonormalize(m, x, Mat::Identity(m.dim(), m.dim()));
}

/// A_ab = Ric(u e_a, u e_b) for an orthonormal frame u.
inline Mat ric_operator(const Manifold& m, const OrthonormalFrame& u) {
    Mat ric;
    m.ricci(u.base, ric);
    return Mat(u.cols.transpose() * ric * u.cols);
}

/// Frame components of a chart vector w at the frame's base point:
/// c_a = g(w, e_a). Inverse of OrthonormalFrame::apply.
inline Vec frame_components(const Manifold& m, const ChartPoint& x, const Mat& frame_cols,
                            const Vec& w) {
    Mat g;
    m.metric(x, g);
    return Vec(frame_cols.transpose() * (g * w));
}

}  // namespace pathint
