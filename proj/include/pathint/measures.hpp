#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "pathint/cylinder.hpp"
#include "pathint/estimator.hpp"
#include "pathint/gram.hpp"
#include "pathint/heat_kernel.hpp"
#include "pathint/path.hpp"

namespace pathint {

/// The finite-dimensional measure (1/Z) e^{-E/2} Vol_{G^kind} on development
/// coordinates over a fixed partition.
struct FiniteDimMeasure {
    MetricKind kind = MetricKind::G1;
    Partition partition;
    int dim = 0;

    /// log Z. G1: Z = (sqrt(2 pi))^{n N}; G0: Z = prod_i (sqrt(2 pi) dt_i)^n.
    double log_normalizer() const { return log_normalizer(kind, partition, dim); }

    static double log_normalizer(MetricKind kind, const Partition& part, int dim) {
        const double half_l2pi = 0.5 * std::log(2.0 * M_PI);
        if (kind == MetricKind::G1) return dim * part.segments() * half_l2pi;
        double s = 0.0;
        for (int i = 0; i < part.segments(); ++i)
            s += dim * (half_l2pi + std::log(part.dt(i)));
        return s;
    }
};

inline FiniteDimMeasure make_measure(MetricKind kind, Partition part, int dim) {
    part.validate();
    if (dim < 1) throw UsageError("make_measure: dim >= 1");
    return FiniteDimMeasure{kind, std::move(part), dim};
}

namespace detail {
inline void require_same_partition(const FiniteDimMeasure& mu,
                                   const PiecewiseGeodesicPath& path) {
    const auto& a = mu.partition.times;
    const auto& b = path.partition().times;
    if (a.size() != b.size()) throw UsageError("density: path not built on measure partition");
    for (size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12)
            throw UsageError("density: path not built on measure partition");
}
}  // namespace detail

/// Density of the measure against Lebesgue measure db on development
/// coordinates: Z^{-1} e^{-E/2} sqrt(det Gram(kind)).
inline double log_density(const FiniteDimMeasure& mu, const PiecewiseGeodesicPath& path,
                          const GramOptions& opts = {}) {
    detail::require_same_partition(mu, path);
    return -mu.log_normalizer() - 0.5 * path.energy() + log_vol_density(path, mu.kind, opts);
}

inline double density(const FiniteDimMeasure& mu, const PiecewiseGeodesicPath& path,
                      const GramOptions& opts = {}) {
    return std::exp(log_density(mu, path, opts));
}

/// exp(-(1/6) int Scal(gamma(t)) dt), the scalar-curvature weight, by
/// trapezoidal quadrature over the path's knot times.
inline double scal_weight(const Manifold& m, const PiecewiseGeodesicPath& path) {
    const Partition& part = path.partition();
    double integral = 0.0;
    double prev = m.scal(path.knots()[0]);
    for (int i = 0; i < part.segments(); ++i) {
        const double cur = m.scal(path.knots()[static_cast<size_t>(i + 1)]);
        integral += 0.5 * (prev + cur) * part.dt(i);
        prev = cur;
    }
    return std::exp(-integral / 6.0);
}

using PathFunctional = std::function<double(const PiecewiseGeodesicPath&)>;

struct EstimateOptions {
    GramOptions gram;
    ShootOptions shoot;
    int workers = -1;  // -1 = env / hardware
};

namespace detail {

/// Shared sampler body: x-provider -> Gaussian proposal -> develop ->
/// importance weight sqrt(det G / det G_flat); the unnormalized weighted mean
/// estimates integral F dP. Per-sample RNG streams make the result
/// independent of the worker schedule; rejected samples (degenerate Gram)
/// contribute zero and are counted.
template <class PointProvider>
EstimatorResult measure_estimate_impl(const Manifold& m, const FiniteDimMeasure& mu,
                                      const PathFunctional& F, long long samples,
                                      std::uint64_t seed, const EstimateOptions& opts,
                                      PointProvider&& provider) {
    if (samples < 1) throw UsageError("estimate: samples >= 1");
    const int n = m.dim();
    if (n != mu.dim) throw UsageError("estimate: measure dim mismatch");
    const Partition& part = mu.partition;
    const double flat_ref = flat_log_vol(part, n, mu.kind);
    const bool need_g1 = mu.kind == MetricKind::G1;

    std::vector<double> vals(static_cast<size_t>(samples), 0.0);
    std::vector<double> wgts(static_cast<size_t>(samples), 0.0);
    std::vector<unsigned char> rej(static_cast<size_t>(samples), 0);

    parallel_for_samples(
        samples,
        [&](long long i) {
            RngStream rng(seed, stream_tag::kMeasureProposal, static_cast<std::uint64_t>(i));
            const auto [x0, frame0] = provider(rng);
            DevelopmentDriver driver = gaussian_driver(part, n, rng);
            PiecewiseGeodesicPath path = develop(m, x0, frame0, driver, opts.shoot);
            double logw;
            try {
                GramAssembler a{path, opts.gram, need_g1, !need_g1, {}, {}};
                a.run();
                const Eigen::MatrixXd& g = need_g1 ? a.g1 : a.g0;
                logw = log_vol_density(g, mu.kind) - flat_ref;
            } catch (const DegenerateMetricError&) {
                rej[static_cast<size_t>(i)] = 1;
                return;
            }
            const double w = std::exp(logw);
            wgts[static_cast<size_t>(i)] = w;
            vals[static_cast<size_t>(i)] = w * F(path);
        },
        opts.workers);

    EstimatorResult out;
    out.samples = samples;
    out.seed = seed;
    for (unsigned char r : rej) out.rejected += r;
    const SampleSummary s = summarize_mean(vals);
    out.mean = s.mean;
    out.std_error = s.std_error;
    out.ess = effective_sample_size(wgts);
    out.low_ess = out.ess < 10.0;
    return out;
}

}  // namespace detail

/// Importance-sampled estimate of integral F dP^{T,kind}_{x, P}. Proposal:
/// b_i^a ~ N(0, 1/dt_i) i.i.d. (the flat G1 law); reported mean is the
/// unnormalized weighted sample mean (the measure need not be a probability
/// measure on curved models).
inline EstimatorResult estimate(const Manifold& m, const ChartPoint& x0,
                                const OrthonormalFrame& frame0, const FiniteDimMeasure& mu,
                                const PathFunctional& F, long long samples, std::uint64_t seed,
                                const EstimateOptions& opts = {}) {
    m.require_domain(x0);
    return detail::measure_estimate_impl(
        m, mu, F, samples, seed, opts,
        [&](RngStream&) { return std::make_pair(x0, frame0); });
}

/// Plain Monte Carlo over geodesic-random-walk Brownian paths.
inline EstimatorResult wiener_mc(const Manifold& m, const ChartPoint& x0,
                                 const OrthonormalFrame& frame0, const PathFunctional& F,
                                 double horizon, int steps, long long samples,
                                 std::uint64_t seed, const EstimateOptions& opts = {}) {
    if (samples < 1) throw UsageError("wiener_mc: samples >= 1");
    std::vector<double> vals(static_cast<size_t>(samples), 0.0);
    parallel_for_samples(
        samples,
        [&](long long i) {
            RngStream rng(seed, stream_tag::kBrownian, static_cast<std::uint64_t>(i));
            BrownianSample bs = brownian_sample(m, x0, frame0, horizon, steps, rng, opts.shoot);
            vals[static_cast<size_t>(i)] = F(bs.path);
        },
        opts.workers);
    EstimatorResult out;
    out.samples = samples;
    out.seed = seed;
    const SampleSummary s = summarize_mean(vals);
    out.mean = s.mean;
    out.std_error = s.std_error;
    out.ess = static_cast<double>(samples);
    return out;
}

// ---------------------------------------------------------------------------
// Wiener ground truth for cylinder functions by heat-kernel quadrature
// ---------------------------------------------------------------------------

struct QuadratureValue {
    double value = 0.0;
    double error = 0.0;  // grid-refinement estimate
};

namespace detail {

inline QuadGrid cylinder_grid(const HeatKernelOracle& hk, const CylinderFunction& F,
                              const ChartPoint& x, double t, int resolution) {
    const Manifold& m = hk.manifold();
    if (m.name() == "torus" || m.name() == "sphere2")
        return hk.quad_grid(resolution, x, 0.0, t);
    if (F.support) {
        const auto& s = *F.support;
        return hk.quad_grid(resolution, s.center, s.radius * 1.02 + 1e-6, t);
    }
    return hk.quad_grid(resolution, x, 8.0 * std::sqrt(t), t);
}

inline double cylinder_quadrature_once(const HeatKernelOracle& hk, const ChartPoint& x,
                                       const CylinderFunction& F, int resolution) {
    const size_t nt = F.times.size();
    std::vector<ChartPoint> ys(nt);
    if (nt == 1) {
        const QuadGrid g = cylinder_grid(hk, F, x, F.times[0], resolution);
        double acc = 0.0;
        for (size_t j = 0; j < g.points.size(); ++j) {
            ys[0] = g.points[j];
            const double fv = F.f(ys);
            if (fv != 0.0) acc += g.weights[j] * fv * hk.p(F.times[0], x, g.points[j]);
        }
        return acc;
    }
    const double t1 = F.times[0], dt2 = F.times[1] - F.times[0];
    const QuadGrid g1 = cylinder_grid(hk, F, x, t1, resolution);
    const QuadGrid g2 = cylinder_grid(hk, F, x, dt2, resolution);
    double acc = 0.0;
    for (size_t j = 0; j < g1.points.size(); ++j) {
        ys[0] = g1.points[j];
        double inner = 0.0;
        for (size_t k = 0; k < g2.points.size(); ++k) {
            ys[1] = g2.points[k];
            const double fv = F.f(ys);
            if (fv != 0.0) inner += g2.weights[k] * fv * hk.p(dt2, g1.points[j], g2.points[k]);
        }
        if (inner != 0.0) acc += g1.weights[j] * inner * hk.p(t1, x, g1.points[j]);
    }
    return acc;
}

}  // namespace detail

/// Nested heat-kernel quadrature of the finite-dimensional distribution
/// (cost guard: at most two cylinder times; use wiener_mc beyond that).
/// The error field is the difference against a half-resolution grid.
inline QuadratureValue wiener_cylinder_exact(const HeatKernelOracle& hk, const ChartPoint& x,
                                             const CylinderFunction& F, int resolution = 96) {
    if (F.times.empty()) throw UsageError("wiener_cylinder_exact: no cylinder times");
    if (F.times.size() > 2)
        throw CostCapError(
            "wiener_cylinder_exact: quadrature limited to N <= 2 cylinder times; "
            "use wiener_mc for larger N");
    for (size_t i = 0; i < F.times.size(); ++i)
        if (F.times[i] <= (i ? F.times[i - 1] : 0.0))
            throw UsageError("wiener_cylinder_exact: times must be strictly increasing");
    QuadratureValue out;
    const double coarse = detail::cylinder_quadrature_once(hk, x, F, resolution / 2);
    out.value = detail::cylinder_quadrature_once(hk, x, F, resolution);
    out.error = std::abs(out.value - coarse);
    return out;
}

// ---------------------------------------------------------------------------
// Free path space: mixtures over the starting point
// ---------------------------------------------------------------------------

/// Sampleable initial distribution mu. The point mass draws nothing from the
/// stream, so delta_x reproduces the fixed-start estimator bit for bit.
class InitialDistribution {
public:
    static InitialDistribution point(ChartPoint x) {
        InitialDistribution d;
        d.kind_ = Kind::Point;
        d.points_ = {std::move(x)};
        return d;
    }

    static InitialDistribution uniform_box(int chart, Vec lo, Vec hi) {
        if (lo.size() != hi.size()) throw ConfigError("uniform_box: lo/hi size mismatch");
        for (int i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw ConfigError("uniform_box: need lo < hi");
        InitialDistribution d;
        d.kind_ = Kind::Box;
        d.points_ = {ChartPoint{chart, lo}};
        d.hi_ = std::move(hi);
        return d;
    }

    static InitialDistribution mixture(std::vector<ChartPoint> atoms,
                                       std::vector<double> weights) {
        if (atoms.empty() || atoms.size() != weights.size())
            throw ConfigError("mixture: one weight per atom");
        double tot = 0.0;
        for (double w : weights) {
            if (!(w >= 0)) throw ConfigError("mixture: weights must be nonnegative");
            tot += w;
        }
        if (!(tot > 0)) throw ConfigError("mixture: weights must not all vanish");
        InitialDistribution d;
        d.kind_ = Kind::Mixture;
        d.points_ = std::move(atoms);
        d.weights_ = std::move(weights);
        for (auto& w : d.weights_) w /= tot;
        return d;
    }

    ChartPoint sample(RngStream& rng) const {
        switch (kind_) {
            case Kind::Point:
                return points_[0];
            case Kind::Box: {
                Vec c(points_[0].coords.size());
                for (int i = 0; i < c.size(); ++i) {
                    const double u = rng.uniform();
                    c[i] = points_[0].coords[i] + u * (hi_[i] - points_[0].coords[i]);
                }
                return ChartPoint{points_[0].chart, c};
            }
            case Kind::Mixture: {
                const double u = rng.uniform();
                double acc = 0.0;
                for (size_t i = 0; i < weights_.size(); ++i) {
                    acc += weights_[i];
                    if (u <= acc) return points_[i];
                }
                return points_.back();
            }
        }
        throw NumericalError("initial distribution: unreachable");
    }

private:
    enum class Kind { Point, Box, Mixture } kind_ = Kind::Point;
    std::vector<ChartPoint> points_;
    std::vector<double> weights_;
    Vec hi_;
};

/// Estimate over the free-path measure: draw x ~ mu, then proceed exactly as
/// the fixed-start estimator (frames are the canonical ones at the draw).
inline EstimatorResult free_path_estimate(const Manifold& m, const InitialDistribution& mu,
                                          const FiniteDimMeasure& measure,
                                          const PathFunctional& F, long long samples,
                                          std::uint64_t seed, const EstimateOptions& opts = {}) {
    return detail::measure_estimate_impl(
        m, measure, F, samples, seed, opts, [&](RngStream& rng) {
            const ChartPoint x = mu.sample(rng);
            return std::make_pair(x, canonical_frame(m, x));
        });
}

/// Free-path Brownian Monte Carlo (the Wiener side of the mixture chain).
inline EstimatorResult free_path_wiener(const Manifold& m, const InitialDistribution& mu,
                                        const PathFunctional& F, double horizon, int steps,
                                        long long samples, std::uint64_t seed,
                                        const EstimateOptions& opts = {}) {
    if (samples < 1) throw UsageError("free_path_wiener: samples >= 1");
    std::vector<double> vals(static_cast<size_t>(samples), 0.0);
    parallel_for_samples(
        samples,
        [&](long long i) {
            RngStream rng(seed, stream_tag::kBrownian, static_cast<std::uint64_t>(i));
            const ChartPoint x = mu.sample(rng);
            BrownianSample bs =
                brownian_sample(m, x, canonical_frame(m, x), horizon, steps, rng, opts.shoot);
            vals[static_cast<size_t>(i)] = F(bs.path);
        },
        opts.workers);
    EstimatorResult out;
    out.samples = samples;
    out.seed = seed;
    const SampleSummary s = summarize_mean(vals);
    out.mean = s.mean;
    out.std_error = s.std_error;
    out.ess = static_cast<double>(samples);
    return out;
}

// ---------------------------------------------------------------------------
// Convergence sweeps over partition meshes
// ---------------------------------------------------------------------------

struct SweepRow {
    double mesh = 0.0;
    int segments = 0;
    EstimatorResult est;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double truth = 0.0;
    double truth_error = 0.0;
    double fitted_slope = 0.0;  // log|err| vs log(mesh); NaN when within noise
};

/// Estimates over a list of partitions plus the heat-kernel ground-truth row.
/// For kind G0 the ground truth carries the scalar-curvature factor, which is
/// deterministic e^{-T Scal / 6} on the constant-curvature shipped models.
inline SweepResult convergence_sweep(const Manifold& m, const ChartPoint& x0,
                                     const OrthonormalFrame& frame0, MetricKind kind,
                                     const CylinderFunction& F,
                                     const std::vector<Partition>& partitions,
                                     long long samples, std::uint64_t seed,
                                     const HeatKernelOracle& hk,
                                     const EstimateOptions& opts = {}, int truth_resolution = 96) {
    if (partitions.size() < 2) throw UsageError("convergence_sweep: need >= 2 partitions");
    SweepResult out;
    const QuadratureValue q = wiener_cylinder_exact(hk, x0, F, truth_resolution);
    out.truth = q.value;
    out.truth_error = q.error;
    if (kind == MetricKind::G0) {
        const double horizon = partitions.front().horizon();
        out.truth *= std::exp(-horizon * m.scal(x0) / 6.0);
    }
    const PathFunctional func = [&F](const PiecewiseGeodesicPath& p) { return F.eval_path(p); };
    for (const Partition& part : partitions) {
        SweepRow row;
        row.mesh = part.mesh();
        row.segments = part.segments();
        row.est = estimate(m, x0, frame0, make_measure(kind, part, m.dim()), func, samples,
                           seed, opts);
        out.rows.push_back(row);
    }
    // least-squares slope of log|err| against log(mesh), ignoring rows whose
    // error is statistically indistinguishable from zero
    std::vector<std::pair<double, double>> pts;
    for (const SweepRow& r : out.rows) {
        const double err = std::abs(r.est.mean - out.truth);
        if (err > 2.0 * r.est.std_error && r.mesh > 0)
            pts.emplace_back(std::log(r.mesh), std::log(err));
    }
    if (pts.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double nn = static_cast<double>(pts.size());
        out.fitted_slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    } else {
        out.fitted_slope = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace pathint
