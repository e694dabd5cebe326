#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pathint/measures.hpp"

namespace pathint {

/// A finite-horizon path extended to [0, infinity) by the geodesic from
/// gamma(T) with initial vector -gamma'(T-) (backward continuation; the
/// forward sign is available for sensitivity runs). The tail segment is
/// grown lazily; instances are not safe to share across threads.
class ExtendedPath {
public:
    explicit ExtendedPath(PiecewiseGeodesicPath path, double continuation_sign = -1.0,
                          ShootOptions opts = {})
        : path_(std::move(path)), sign_(continuation_sign), opts_(opts) {}

    const PiecewiseGeodesicPath& base() const { return path_; }
    double horizon() const { return path_.horizon(); }

    ChartPoint eval(double t) const {
        if (t <= path_.horizon()) return path_.eval(t);
        ensure_tail(t - path_.horizon());
        return tail_->point(t - path_.horizon());
    }

private:
    void ensure_tail(double dur) const {
        if (tail_ && tail_->duration >= dur) return;
        const TangentVec end_vel = path_.left_end_velocity();
        TangentVec v{end_vel.base, Vec(sign_ * end_vel.components)};
        tail_ = geodesic_shoot(path_.manifold(), end_vel.base, v, std::max(1.0, 1.5 * dur),
                               opts_);
    }

    PiecewiseGeodesicPath path_;
    double sign_;
    ShootOptions opts_;
    mutable std::optional<GeodesicSegment> tail_;
};

inline ExtendedPath phi_extend(PiecewiseGeodesicPath path, double continuation_sign = -1.0) {
    return ExtendedPath(std::move(path), continuation_sign);
}

/// sup_t min(d(gamma(t), sigma(t)), 1) over the probe grid.
inline double d_infinity(const Manifold& m, const ExtendedPath& a, const ExtendedPath& b,
                         const std::vector<double>& probe_times) {
    if (probe_times.empty()) throw UsageError("d_infinity: empty probe grid");
    double sup = 0.0;
    for (double t : probe_times)
        sup = std::max(sup, std::min(m.distance(a.eval(t), b.eval(t)), 1.0));
    return sup;
}

/// Dense grid on [0, horizon] plus geometric tail probes; the tails are
/// geodesics, so a few distant samples capture the asymptotic separation.
inline std::vector<double> d_infinity_probe_grid(double horizon, int per_unit = 64) {
    std::vector<double> ts;
    const int count = std::max(2, static_cast<int>(horizon * per_unit));
    for (int i = 0; i <= count; ++i) ts.push_back(horizon * i / count);
    for (double mult : {1.5, 2.0, 4.0, 8.0}) ts.push_back(horizon * mult);
    return ts;
}

// ---------------------------------------------------------------------------
// Dyadic-horizon measures P^{kind}_{x,N} on [0, N]
// ---------------------------------------------------------------------------

struct DyadicMeasureSpec {
    int level = 1;
    MetricKind kind = MetricKind::G1;
    FiniteDimMeasure measure;
};

inline constexpr int kDyadicSegmentCap = 32;

/// Level-N measure over the dyadic partition of [0, N]. Segment count is
/// N 2^N; levels above the cap are refused (the Gram work grows like the
/// square of the segment count).
inline DyadicMeasureSpec make_dyadic_measure(int level, MetricKind kind, int dim,
                                             int segment_cap = kDyadicSegmentCap) {
    const long long segs = static_cast<long long>(level) << level;
    if (segs > segment_cap)
        throw CostCapError("dyadic level " + std::to_string(level) + " needs " +
                           std::to_string(segs) + " segments; cap is " +
                           std::to_string(segment_cap) +
                           " (use uniform partitions at fixed mesh for longer horizons)");
    DyadicMeasureSpec spec;
    spec.level = level;
    spec.kind = kind;
    spec.measure = make_measure(kind, partition_dyadic(level), dim);
    return spec;
}

/// Estimate int F o phi_N dP^{kind}_{x,N} for a cylinder F whose largest time
/// does not exceed the horizon N (the extension is then inert, which this
/// routine still exercises by evaluating F through phi_N).
inline EstimatorResult dyadic_estimate(const Manifold& m, const ChartPoint& x0,
                                       const OrthonormalFrame& frame0,
                                       const CylinderFunction& F, int level, MetricKind kind,
                                       long long samples, std::uint64_t seed,
                                       const EstimateOptions& opts = {},
                                       int segment_cap = kDyadicSegmentCap) {
    if (!F.times.empty() && F.max_time() > static_cast<double>(level))
        throw UsageError("dyadic_estimate: cylinder time beyond the horizon");
    DyadicMeasureSpec spec = make_dyadic_measure(level, kind, m.dim(), segment_cap);
    PathFunctional func = [&F](const PiecewiseGeodesicPath& p) {
        if (F.times.empty()) return 1.0;
        ExtendedPath ext = phi_extend(p);
        std::vector<ChartPoint> ys;
        ys.reserve(F.times.size());
        for (double t : F.times) ys.push_back(ext.eval(t));
        return F.f(ys);
    };
    return estimate(m, x0, frame0, spec.measure, func, samples, seed, opts);
}

// ---------------------------------------------------------------------------
// Trichotomy experiment: G0 total mass versus horizon
// ---------------------------------------------------------------------------

struct TrichotomyRow {
    std::string model;
    double horizon = 0.0;
    double log_mass = 0.0;
    double se_log = 0.0;
};

struct TrichotomyFit {
    std::string model;
    double fitted_slope = 0.0;
    double fit_se = 0.0;
    double predicted_slope = 0.0;  // -Scal/6
    std::vector<TrichotomyRow> rows;
};

inline ChartPoint default_start(const Manifold& m) {
    Vec c = Vec::Zero(m.dim());
    if (m.name() == "hyperbolic2") c[1] = 1.0;
    return ChartPoint{0, c};
}

/// Per-model G0 mass at increasing horizons over fixed-mesh uniform
/// partitions (the dyadic level-k mesh), with the weighted least-squares
/// slope of log-mass per unit horizon against the -Scal/6 prediction.
inline TrichotomyFit trichotomy_model_fit(const Manifold& m, const std::vector<double>& horizons,
                                          double mesh, long long samples, std::uint64_t seed,
                                          const EstimateOptions& opts = {}) {
    if (horizons.size() < 2) throw UsageError("trichotomy: need >= 2 horizons");
    TrichotomyFit fit;
    fit.model = m.name();
    const ChartPoint x0 = default_start(m);
    fit.predicted_slope = -m.scal(x0) / 6.0;
    const OrthonormalFrame frame0 = canonical_frame(m, x0);
    const PathFunctional one = [](const PiecewiseGeodesicPath&) { return 1.0; };
    for (double horizon : horizons) {
        const double count = horizon / mesh;
        const int segs = static_cast<int>(std::llround(count));
        if (std::abs(count - segs) > 1e-9)
            throw ConfigError("trichotomy: horizon must be a multiple of the mesh");
        const FiniteDimMeasure mu = make_measure(MetricKind::G0, partition_uniform(horizon, segs),
                                                 m.dim());
        const EstimatorResult r = estimate(m, x0, frame0, mu, one, samples, seed, opts);
        if (!(r.mean > 0)) throw NumericalError("trichotomy: nonpositive mass estimate");
        TrichotomyRow row;
        row.model = fit.model;
        row.horizon = horizon;
        row.log_mass = std::log(r.mean);
        row.se_log = r.std_error / r.mean;
        fit.rows.push_back(row);
    }
    // weighted least squares with intercept
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (const TrichotomyRow& r : fit.rows) {
        const double w = 1.0 / std::max(r.se_log * r.se_log, 1e-20);
        sw += w;
        swx += w * r.horizon;
        swy += w * r.log_mass;
        swxx += w * r.horizon * r.horizon;
        swxy += w * r.horizon * r.log_mass;
    }
    const double denom = sw * swxx - swx * swx;
    fit.fitted_slope = (sw * swxy - swx * swy) / denom;
    fit.fit_se = std::sqrt(sw / denom);
    return fit;
}

inline std::vector<TrichotomyFit> trichotomy_experiment(
    const std::vector<const Manifold*>& models, const std::vector<double>& horizons, double mesh,
    long long samples, std::uint64_t seed, const EstimateOptions& opts = {}) {
    std::vector<TrichotomyFit> fits;
    fits.reserve(models.size());
    for (const Manifold* m : models)
        fits.push_back(trichotomy_model_fit(*m, horizons, mesh, samples, seed, opts));
    return fits;
}

}  // namespace pathint
