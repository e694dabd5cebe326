#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pathint/frame.hpp"
#include "pathint/geodesic.hpp"
#include "pathint/partition.hpp"
#include "pathint/rng.hpp"

namespace pathint {

/// Velocities of the rolled increments: column i is b_i, the constant
/// development velocity on segment i (so the euclidean increment over the
/// segment is b_i * dt_i).
struct DevelopmentDriver {
    Partition partition;
    Eigen::MatrixXd velocities;  // n x N

    void validate(int dim) const {
        partition.validate();
        if (velocities.rows() != dim || velocities.cols() != partition.segments())
            throw UsageError("driver: velocity block must be dim x segments");
    }
};

/// Element of the piecewise-geodesic path space, stored as development
/// coordinates plus the cached rolled segments, knot points, and knot frames.
class PiecewiseGeodesicPath {
public:
    PiecewiseGeodesicPath(const Manifold& m, ChartPoint x0, Mat frame0, Partition part,
                          Eigen::MatrixXd b, std::vector<GeodesicSegment> segs,
                          std::vector<ChartPoint> knots, std::vector<Mat> knot_frames)
        : m_(&m),
          x0_(std::move(x0)),
          frame0_(std::move(frame0)),
          part_(std::move(part)),
          b_(std::move(b)),
          segs_(std::move(segs)),
          knots_(std::move(knots)),
          knot_frames_(std::move(knot_frames)) {}

    const Manifold& manifold() const { return *m_; }
    const Partition& partition() const { return part_; }
    const Eigen::MatrixXd& coords() const { return b_; }
    const ChartPoint& start() const { return x0_; }
    const Mat& start_frame() const { return frame0_; }
    int segments() const { return part_.segments(); }
    double horizon() const { return part_.horizon(); }

    const std::vector<ChartPoint>& knots() const { return knots_; }
    const std::vector<Mat>& knot_frames() const { return knot_frames_; }
    const GeodesicSegment& segment(int i) const { return segs_[static_cast<size_t>(i)]; }

    /// Index of the segment containing t (clamped to [0, N-1]).
    int segment_index(double t) const {
        const auto& ts = part_.times;
        int lo = 0, hi = part_.segments() - 1;
        while (lo < hi) {
            const int mid = (lo + hi + 1) / 2;
            if (ts[static_cast<size_t>(mid)] <= t)
                lo = mid;
            else
                hi = mid - 1;
        }
        return lo;
    }

    ChartPoint eval(double t) const {
        require_time(t);
        return segs_[static_cast<size_t>(segment_index(t))].point(t);
    }

    /// Right velocity gamma'(t+); at t = T returns the left limit.
    TangentVec velocity(double t) const {
        require_time(t);
        return segs_[static_cast<size_t>(segment_index(t))].velocity(t);
    }

    /// Parallel frame along the path at time t.
    Mat frame_at(double t) const {
        require_time(t);
        return segs_[static_cast<size_t>(segment_index(t))].frame_cols(t);
    }

    TangentVec left_end_velocity() const { return segs_.back().end_velocity(); }

    /// E(gamma) = sum_i |b_i|^2 dt_i; exact for piecewise geodesics.
    double energy() const {
        double e = 0.0;
        for (int i = 0; i < part_.segments(); ++i)
            e += b_.col(i).squaredNorm() * part_.dt(i);
        return e;
    }

private:
    void require_time(double t) const {
        if (t < -1e-12 || t > part_.horizon() * (1.0 + 1e-12) + 1e-12)
            throw DomainError("path: time outside [0, T]");
    }

    const Manifold* m_;
    ChartPoint x0_;
    Mat frame0_;
    Partition part_;
    Eigen::MatrixXd b_;
    std::vector<GeodesicSegment> segs_;
    std::vector<ChartPoint> knots_;
    std::vector<Mat> knot_frames_;
};

namespace detail {

struct RolledSegments {
    std::vector<GeodesicSegment> segs;
    std::vector<ChartPoint> knots;    // entries for the rolled range
    std::vector<Mat> frames;
};

/// Roll segments [i0, N) starting from the given knot state. Shared by
/// develop() and the variation-field machinery (which re-rolls suffixes).
inline RolledSegments roll_segments(const Manifold& m, const ChartPoint& start,
                                    const Mat& start_frame, const Partition& part,
                                    const Eigen::MatrixXd& b, int i0,
                                    const ShootOptions& opts) {
    const int n = m.dim();
    const int nseg = part.segments();
    RolledSegments out;
    out.segs.reserve(static_cast<size_t>(nseg - i0));
    ChartPoint x = start;
    Mat frame = start_frame;
    for (int i = i0; i < nseg; ++i) {
        StateVec y0(n * (n + 2));
        y0.head(n) = x.coords;
        y0.segment(n, n) = frame * b.col(i);
        for (int c = 0; c < n; ++c) y0.segment(2 * n + c * n, n) = frame.col(c);
        GeodesicSegment seg;
        try {
            seg = shoot_state(m, x.chart, y0, part.times[static_cast<size_t>(i)], part.dt(i),
                              /*with_frame=*/true, opts);
        } catch (const IntegrationError& e) {
            throw IntegrationError("develop: segment " + std::to_string(i + 1) + " failed",
                                   e.t_reached);
        }
        x = seg.end_point();
        frame = seg.end_frame();
        out.segs.push_back(std::move(seg));
        out.knots.push_back(x);
        out.frames.push_back(frame);
    }
    return out;
}

}  // namespace detail

/// Cartan development: roll the driver increments into a piecewise geodesic
/// path; each knot frame is the parallel transport of the previous one.
inline PiecewiseGeodesicPath develop(const Manifold& m, const ChartPoint& x0,
                                     const OrthonormalFrame& frame0,
                                     const DevelopmentDriver& driver,
                                     const ShootOptions& opts = {}) {
    m.require_domain(x0);
    driver.validate(m.dim());
    auto rolled = detail::roll_segments(m, x0, frame0.cols, driver.partition,
                                        driver.velocities, 0, opts);
    std::vector<ChartPoint> knots;
    knots.reserve(rolled.knots.size() + 1);
    knots.push_back(x0);
    knots.insert(knots.end(), rolled.knots.begin(), rolled.knots.end());
    std::vector<Mat> frames;
    frames.reserve(rolled.frames.size() + 1);
    frames.push_back(frame0.cols);
    frames.insert(frames.end(), rolled.frames.begin(), rolled.frames.end());
    return PiecewiseGeodesicPath(m, x0, frame0.cols, driver.partition, driver.velocities,
                                 std::move(rolled.segs), std::move(knots), std::move(frames));
}

/// Gaussian driver with increments b_i dt_i ~ N(0, dt_i I), i.e. velocities
/// b_i ~ N(0, I / dt_i). This is both the Brownian-walk driver and the
/// importance-sampling proposal (the flat G1 law).
inline DevelopmentDriver gaussian_driver(const Partition& part, int dim, RngStream& rng) {
    DevelopmentDriver d;
    d.partition = part;
    d.velocities.resize(dim, part.segments());
    for (int i = 0; i < part.segments(); ++i) {
        const double sd = 1.0 / std::sqrt(part.dt(i));
        for (int a = 0; a < dim; ++a) d.velocities(a, i) = sd * rng.gauss();
    }
    return d;
}

struct BrownianSample {
    PiecewiseGeodesicPath path;
    DevelopmentDriver driver;
};

/// Geodesic random walk over a uniform grid: exact Brownian motion in flat
/// space, weak order-1 on curved models.
inline BrownianSample brownian_sample(const Manifold& m, const ChartPoint& x0,
                                      const OrthonormalFrame& frame0, double horizon, int steps,
                                      RngStream& rng, const ShootOptions& opts = {}) {
    if (steps < 1) throw UsageError("brownian_sample: steps >= 1");
    const Partition part = partition_uniform(horizon, steps);
    DevelopmentDriver d = gaussian_driver(part, m.dim(), rng);
    PiecewiseGeodesicPath path = develop(m, x0, frame0, d, opts);
    return BrownianSample{std::move(path), std::move(d)};
}

inline BrownianSample brownian_sample(const Manifold& m, const ChartPoint& x0,
                                      const OrthonormalFrame& frame0, double horizon, int steps,
                                      std::uint64_t seed, std::uint64_t sample_index = 0,
                                      const ShootOptions& opts = {}) {
    RngStream rng(seed, stream_tag::kBrownian, sample_index);
    return brownian_sample(m, x0, frame0, horizon, steps, rng, opts);
}

/// Parallel translation along the path from t0 to t1, composed across knots
/// via the cached parallel frames (the frame field *is* the transport).
inline TangentVec transport_along_path(const Manifold& m, const PiecewiseGeodesicPath& path,
                                       const TangentVec& w, double t0, double t1) {
    if (t0 > t1) throw DomainError("transport_along_path: need t0 <= t1");
    const ChartPoint p0 = path.eval(t0);
    TangentVec w0 = w;
    if (w0.base.chart != p0.chart) w0 = vector_to_chart(m, w0, p0.chart);
    if ((w0.base.coords - p0.coords).cwiseAbs().maxCoeff() > 1e-9)
        throw UsageError("transport_along_path: vector not based at gamma(t0)");
    const Vec c = frame_components(m, p0, path.frame_at(t0), w0.components);
    const Mat u1 = path.frame_at(t1);
    return TangentVec{path.eval(t1), Vec(u1 * c)};
}

}  // namespace pathint
