#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pathint/path.hpp"

namespace pathint {

enum class MetricKind { G0, G1 };

inline const char* kind_name(MetricKind k) { return k == MetricKind::G1 ? "g1" : "g0"; }

struct GramOptions {
    double fd_step_scale = 1e-5;   // variation FD step h = scale * (1 + |b|_inf)
    double rate_step_frac = 0.02;  // covariant-rate stencil s = frac / max(1/dt_k, |b_k|)
};

struct PathGrams {
    Eigen::MatrixXd g1, g0;
};

namespace detail {

/// Re-roll segments s..N-1 with modified coordinates b, replaying each base
/// segment's step schedule (see reroll_on_schedule). The perturbed path
/// shares the base path's knot state at t_s.
inline RolledSegments roll_like(const PiecewiseGeodesicPath& path, const Eigen::MatrixXd& b,
                                int s) {
    const Manifold& m = path.manifold();
    const int n = m.dim();
    const int nseg = path.segments();
    RolledSegments out;
    out.segs.reserve(static_cast<size_t>(nseg - s));
    ChartPoint x = path.knots()[static_cast<size_t>(s)];
    Mat frame = path.knot_frames()[static_cast<size_t>(s)];
    for (int k = s; k < nseg; ++k) {
        const GeodesicSegment& bseg = path.segment(k);
        StateVec y0(n * (n + 2));
        y0.head(n) = x.coords;
        y0.segment(n, n) = frame * b.col(k);
        for (int c = 0; c < n; ++c) y0.segment(2 * n + c * n, n) = frame.col(c);
        GeodesicSegment seg = reroll_on_schedule(m, bseg, y0);
        x = seg.end_point();
        frame = seg.end_frame();
        out.segs.push_back(std::move(seg));
        out.knots.push_back(x);
        out.frames.push_back(frame);
    }
    return out;
}

/// Variation fields of the development map by central differences, and the
/// Gram matrices of the coordinate basis in those fields.
///
/// For direction (i, alpha), the field X(t) = dPhi(b)/db_i^alpha vanishes up
/// to t_{i-1}; the perturbed paths share the base path's knot state there, so
/// only segments i..N are re-rolled. Everything is expressed in the parallel
/// frame along the base path, where covariant time derivatives are plain
/// componentwise derivatives. The rate at the owning segment's start is
/// exactly e_alpha (the perturbation changes that segment's initial velocity
/// and nothing else at that instant).
///
/// Note the structure this forces: rates vanish for segments before the
/// owning one and are unit vectors on it, so the rate matrix is block lower
/// triangular with unit diagonal blocks and det G1 = prod_i dt_i^n holds on
/// every manifold (G1 itself is not block diagonal away from flat space).
struct GramAssembler {
    const PiecewiseGeodesicPath& path;
    const GramOptions& opts;
    bool want_g1, want_g0;

    Eigen::MatrixXd g1, g0;

    void run() {
        const Manifold& m = path.manifold();
        const int n = m.dim();
        const int nseg = path.segments();
        const int dims = n * nseg;
        const Partition& part = path.partition();
        const Eigen::MatrixXd& b = path.coords();

        const double h = opts.fd_step_scale * (1.0 + b.cwiseAbs().maxCoeff());

        // pullback to frame components at each knot: c = E^T g x
        std::vector<Mat> knot_pull(static_cast<size_t>(nseg) + 1);
        for (int k = 0; k <= nseg; ++k) {
            Mat g;
            m.metric(path.knots()[static_cast<size_t>(k)], g);
            knot_pull[static_cast<size_t>(k)] =
                path.knot_frames()[static_cast<size_t>(k)].transpose() * g;
        }

        // frame components of X at knots (rows: frame index, cols: direction)
        std::vector<Eigen::MatrixXd> xk(static_cast<size_t>(nseg) + 1,
                                        Eigen::MatrixXd::Zero(n, dims));
        // frame components of the covariant rate at each segment start
        std::vector<Eigen::MatrixXd> rate(static_cast<size_t>(nseg),
                                          Eigen::MatrixXd::Zero(n, dims));

        Eigen::MatrixXd bp = b, bm = b;
        for (int s = 0; s < nseg; ++s) {      // owning segment (0-based)
            for (int a = 0; a < n; ++a) {     // coordinate within the segment
                const int dir = s * n + a;
                bp(a, s) += h;
                bm(a, s) -= h;
                const auto devp = roll_like(path, bp, s);
                const auto devm = roll_like(path, bm, s);
                bp(a, s) = b(a, s);
                bm(a, s) = b(a, s);

                // knot values
                for (int k = s + 1; k <= nseg; ++k) {
                    const ChartPoint& ref = path.knots()[static_cast<size_t>(k)];
                    ChartPoint p = devp.knots[static_cast<size_t>(k - s - 1)];
                    ChartPoint q = devm.knots[static_cast<size_t>(k - s - 1)];
                    if (p.chart != ref.chart) p = m.to_chart(p, ref.chart);
                    if (q.chart != ref.chart) q = m.to_chart(q, ref.chart);
                    const Vec xchart = (p.coords - q.coords) / (2.0 * h);
                    xk[static_cast<size_t>(k)].col(dir) =
                        knot_pull[static_cast<size_t>(k)] * xchart;
                }

                if (!want_g1) continue;
                rate[static_cast<size_t>(s)](a, dir) = 1.0;  // exact diagonal rate
                for (int k = s + 1; k < nseg; ++k) {
                    const double dtk = part.dt(k);
                    const double bk = b.col(k).norm();
                    double ss = opts.rate_step_frac / std::max(1.0 / dtk, bk);
                    ss = std::min(ss, dtk / 8.0);
                    const GeodesicSegment& bseg = path.segment(k);
                    const GeodesicSegment& psegk = devp.segs[static_cast<size_t>(k - s)];
                    const GeodesicSegment& qsegk = devm.segs[static_cast<size_t>(k - s)];
                    Vec c[5];
                    c[0] = xk[static_cast<size_t>(k)].col(dir);
                    for (int j = 1; j <= 4; ++j) {
                        const double t = part.times[static_cast<size_t>(k)] + j * ss;
                        int chart;
                        StateVec y;
                        bseg.eval_state(t, chart, y);
                        const ChartPoint bx{chart, Vec(y.head(n))};
                        Mat g;
                        m.metric(bx, g);
                        Mat e(n, n);
                        for (int ccol = 0; ccol < n; ++ccol)
                            e.col(ccol) = y.segment(2 * n + ccol * n, n);
                        ChartPoint p = psegk.point(t);
                        ChartPoint q = qsegk.point(t);
                        if (p.chart != chart) p = m.to_chart(p, chart);
                        if (q.chart != chart) q = m.to_chart(q, chart);
                        const Vec xchart = (p.coords - q.coords) / (2.0 * h);
                        c[j] = e.transpose() * (g * xchart);
                    }
                    rate[static_cast<size_t>(k)].col(dir) =
                        (-25.0 * c[0] + 48.0 * c[1] - 36.0 * c[2] + 16.0 * c[3] - 3.0 * c[4]) /
                        (12.0 * ss);
                }
            }
        }

        if (want_g1) {
            g1 = Eigen::MatrixXd::Zero(dims, dims);
            for (int k = 0; k < nseg; ++k)
                g1.noalias() += part.dt(k) * rate[static_cast<size_t>(k)].transpose() *
                                rate[static_cast<size_t>(k)];
            if (!g1.allFinite()) throw NumericalError("gram_g1: non-finite entries");
        }
        if (want_g0) {
            g0 = Eigen::MatrixXd::Zero(dims, dims);
            for (int k = 0; k < nseg; ++k)
                g0.noalias() += part.dt(k) * xk[static_cast<size_t>(k + 1)].transpose() *
                                xk[static_cast<size_t>(k + 1)];
            if (!g0.allFinite()) throw NumericalError("gram_g0: non-finite entries");
        }
    }
};

}  // namespace detail

inline Eigen::MatrixXd gram_g1(const PiecewiseGeodesicPath& path, const GramOptions& opts = {}) {
    detail::GramAssembler a{path, opts, /*want_g1=*/true, /*want_g0=*/false, {}, {}};
    a.run();
    return std::move(a.g1);
}

inline Eigen::MatrixXd gram_g0(const PiecewiseGeodesicPath& path, const GramOptions& opts = {}) {
    detail::GramAssembler a{path, opts, /*want_g1=*/false, /*want_g0=*/true, {}, {}};
    a.run();
    return std::move(a.g0);
}

inline PathGrams compute_grams(const PiecewiseGeodesicPath& path, const GramOptions& opts = {}) {
    detail::GramAssembler a{path, opts, true, true, {}, {}};
    a.run();
    return PathGrams{std::move(a.g1), std::move(a.g0)};
}

/// The variation field X^{(i,alpha)}(t) of the development map (i is the
/// 1-based owning segment), as a tangent vector at gamma(t).
inline TangentVec variation_field(const PiecewiseGeodesicPath& path, int i, int alpha, double t,
                                  const GramOptions& opts = {}) {
    const Manifold& m = path.manifold();
    const int n = m.dim();
    const int nseg = path.segments();
    if (i < 1 || i > nseg || alpha < 1 || alpha > n)
        throw UsageError("variation_field: index out of range");
    const ChartPoint base = path.eval(t);
    if (t <= path.partition().times[static_cast<size_t>(i - 1)])
        return TangentVec{base, Vec(Vec::Zero(n))};
    const Eigen::MatrixXd& b = path.coords();
    const double h = opts.fd_step_scale * (1.0 + b.cwiseAbs().maxCoeff());
    Eigen::MatrixXd bp = b, bm = b;
    bp(alpha - 1, i - 1) += h;
    bm(alpha - 1, i - 1) -= h;
    const int s = i - 1;
    const auto devp = detail::roll_like(path, bp, s);
    const auto devm = detail::roll_like(path, bm, s);
    const int seg_at_t = path.segment_index(t);
    ChartPoint p = devp.segs[static_cast<size_t>(seg_at_t - s)].point(t);
    ChartPoint q = devm.segs[static_cast<size_t>(seg_at_t - s)].point(t);
    if (p.chart != base.chart) p = m.to_chart(p, base.chart);
    if (q.chart != base.chart) q = m.to_chart(q, base.chart);
    return TangentVec{base, Vec((p.coords - q.coords) / (2.0 * h))};
}

/// Covariant rate (nabla X / dt)(t_{j-1}+) of the (i, alpha) variation field,
/// j 1-based. Zero for j < i, exactly u_{j-1} e_alpha for j = i, and a
/// frame-pullback difference quotient for j > i.
inline TangentVec covariant_rate(const PiecewiseGeodesicPath& path, int i, int alpha, int j,
                                 const GramOptions& opts = {}) {
    const Manifold& m = path.manifold();
    const int n = m.dim();
    const int nseg = path.segments();
    if (i < 1 || i > nseg || j < 1 || j > nseg || alpha < 1 || alpha > n)
        throw UsageError("covariant_rate: index out of range");
    const ChartPoint& base = path.knots()[static_cast<size_t>(j - 1)];
    const Mat& u = path.knot_frames()[static_cast<size_t>(j - 1)];
    if (j < i) return TangentVec{base, Vec(Vec::Zero(n))};
    if (j == i) return TangentVec{base, Vec(u.col(alpha - 1))};

    const Eigen::MatrixXd& b = path.coords();
    const double h = opts.fd_step_scale * (1.0 + b.cwiseAbs().maxCoeff());
    Eigen::MatrixXd bp = b, bm = b;
    bp(alpha - 1, i - 1) += h;
    bm(alpha - 1, i - 1) -= h;
    const int s = i - 1;
    const auto devp = detail::roll_like(path, bp, s);
    const auto devm = detail::roll_like(path, bm, s);
    const int k = j - 1;  // 0-based segment whose start we differentiate at
    const Partition& part = path.partition();
    const double dtk = part.dt(k);
    double ss = opts.rate_step_frac / std::max(1.0 / dtk, b.col(k).norm());
    ss = std::min(ss, dtk / 8.0);
    Mat g;
    m.metric(base, g);
    Vec c[5];
    {
        ChartPoint p = devp.knots[static_cast<size_t>(k - s - 1)];
        ChartPoint q = devm.knots[static_cast<size_t>(k - s - 1)];
        if (p.chart != base.chart) p = m.to_chart(p, base.chart);
        if (q.chart != base.chart) q = m.to_chart(q, base.chart);
        c[0] = u.transpose() * (g * Vec((p.coords - q.coords) / (2.0 * h)));
    }
    const GeodesicSegment& bseg = path.segment(k);
    for (int jj = 1; jj <= 4; ++jj) {
        const double t = part.times[static_cast<size_t>(k)] + jj * ss;
        int chart;
        StateVec y;
        bseg.eval_state(t, chart, y);
        const ChartPoint bx{chart, Vec(y.head(n))};
        Mat gt;
        m.metric(bx, gt);
        Mat e(n, n);
        for (int cc = 0; cc < n; ++cc) e.col(cc) = y.segment(2 * n + cc * n, n);
        ChartPoint p = devp.segs[static_cast<size_t>(k - s)].point(t);
        ChartPoint q = devm.segs[static_cast<size_t>(k - s)].point(t);
        if (p.chart != chart) p = m.to_chart(p, chart);
        if (q.chart != chart) q = m.to_chart(q, chart);
        c[jj] = e.transpose() * (gt * Vec((p.coords - q.coords) / (2.0 * h)));
    }
    const Vec rate_frame =
        (-25.0 * c[0] + 48.0 * c[1] - 36.0 * c[2] + 16.0 * c[3] - 3.0 * c[4]) / (12.0 * ss);
    return TangentVec{base, Vec(u * rate_frame)};
}

/// log sqrt(det Gram(kind)); throws DegenerateMetricError when not PD.
inline double log_vol_density(const Eigen::MatrixXd& gram, MetricKind kind) {
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
        const double mineig = es.eigenvalues().minCoeff();
        throw DegenerateMetricError(std::string("vol_density: gram ") + kind_name(kind) +
                                        " not positive definite",
                                    mineig);
    }
    double logdet = 0.0;
    const auto& l = llt.matrixLLT();
    for (int i = 0; i < gram.rows(); ++i) logdet += std::log(l(i, i));
    return logdet;  // = (1/2) log det
}

inline double log_vol_density(const PiecewiseGeodesicPath& path, MetricKind kind,
                              const GramOptions& opts = {}) {
    const Eigen::MatrixXd g = (kind == MetricKind::G1) ? gram_g1(path, opts) : gram_g0(path, opts);
    return log_vol_density(g, kind);
}

/// sqrt(det Gram(kind)): the density of the Riemannian volume against
/// Lebesgue measure db on development coordinates.
inline double vol_density(const PiecewiseGeodesicPath& path, MetricKind kind,
                          const GramOptions& opts = {}) {
    return std::exp(log_vol_density(path, kind, opts));
}

/// Flat-space log sqrt(det): reference values the importance weights cancel
/// against. G1: (n/2) sum log dt_i; G0: (3n/2) sum log dt_i.
inline double flat_log_vol(const Partition& part, int dim, MetricKind kind) {
    double s = 0.0;
    for (int i = 0; i < part.segments(); ++i) s += std::log(part.dt(i));
    return (kind == MetricKind::G1 ? 0.5 : 1.5) * dim * s;
}

}  // namespace pathint
