#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "pathint/cylinder.hpp"
#include "pathint/estimator.hpp"
#include "pathint/measures.hpp"
#include "pathint/path.hpp"

namespace pathint {

/// Cameron-Martin direction: an R^n-valued path with h(0) = 0, an exact
/// derivative evaluator, and the energy norm |h|^2 = int |h'|^2 dt.
class CameronMartinPath {
public:
    std::function<Vec(double)> value;  // h(t)
    std::function<Vec(double)> deriv;  // h'(t), exact
    double norm2 = 0.0;
    std::string label;

    /// Piecewise-linear h through prescribed node values (first row zero).
    static CameronMartinPath piecewise_linear(std::vector<double> nodes,
                                              Eigen::MatrixXd values) {
        if (nodes.size() < 2 || values.cols() != static_cast<long>(nodes.size()))
            throw UsageError("piecewise_linear: one value column per node");
        if (values.col(0).cwiseAbs().maxCoeff() != 0.0)
            throw UsageError("piecewise_linear: h(0) must vanish");
        auto nd = std::make_shared<std::vector<double>>(std::move(nodes));
        auto vl = std::make_shared<Eigen::MatrixXd>(std::move(values));
        CameronMartinPath h;
        h.label = "hat";
        // right-continuous interval choice: at a node, the slope is h'(t+),
        // which is what the left-point Ito sum must see
        auto locate = [nd](double t) {
            size_t k = 1;
            while (k + 1 < nd->size() && t >= (*nd)[k]) ++k;
            return k;
        };
        h.value = [nd, vl, locate](double t) {
            t = std::clamp(t, nd->front(), nd->back());
            const size_t k = locate(t);
            const double w =
                ((t - (*nd)[k - 1]) / ((*nd)[k] - (*nd)[k - 1]));
            return Vec((1.0 - w) * vl->col(static_cast<long>(k - 1)) +
                       w * vl->col(static_cast<long>(k)));
        };
        h.deriv = [nd, vl, locate](double t) {
            t = std::clamp(t, nd->front(), nd->back());
            const size_t k = locate(t);
            return Vec((vl->col(static_cast<long>(k)) - vl->col(static_cast<long>(k - 1))) /
                       ((*nd)[k] - (*nd)[k - 1]));
        };
        for (size_t k = 1; k < nd->size(); ++k) {
            const double dt = (*nd)[k] - (*nd)[k - 1];
            h.norm2 +=
                (vl->col(static_cast<long>(k)) - vl->col(static_cast<long>(k - 1))).squaredNorm() /
                dt;
        }
        return h;
    }

    /// h(t) = amplitude * sin(k pi t / T) e_component.
    static CameronMartinPath sine_mode(int dim, int component, int k, double amplitude,
                                       double horizon) {
        if (component < 0 || component >= dim || k < 1)
            throw UsageError("sine_mode: bad component or mode");
        CameronMartinPath h;
        h.label = "sine" + std::to_string(k);
        const double om = k * M_PI / horizon;
        h.value = [dim, component, amplitude, om](double t) {
            Vec v = Vec::Zero(dim);
            v[component] = amplitude * std::sin(om * t);
            return v;
        };
        h.deriv = [dim, component, amplitude, om](double t) {
            Vec v = Vec::Zero(dim);
            v[component] = amplitude * om * std::cos(om * t);
            return v;
        };
        h.norm2 = amplitude * amplitude * om * om * horizon / 2.0;
        return h;
    }

    CameronMartinPath scaled(double c) const {
        CameronMartinPath out = *this;
        auto v = value, d = deriv;
        out.value = [v, c](double t) { return Vec(c * v(t)); };
        out.deriv = [d, c](double t) { return Vec(c * d(t)); };
        out.norm2 = c * c * norm2;
        return out;
    }

    static CameronMartinPath sum(const CameronMartinPath& a, const CameronMartinPath& b) {
        CameronMartinPath out;
        auto av = a.value, bv = b.value, ad = a.deriv, bd = b.deriv;
        out.value = [av, bv](double t) { return Vec(av(t) + bv(t)); };
        out.deriv = [ad, bd](double t) { return Vec(ad(t) + bd(t)); };
        out.label = a.label + "+" + b.label;
        out.norm2 = 0.0;  // not tracked for sums; callers integrate if needed
        return out;
    }
};

/// Ricci-damped direction on the walk's grid: the solution of
///   hat_h(t) = h(t) - (1/2) int_0^t Ric_{U_s} hat_h(s) ds,
/// discretized by the implicit trapezoid rule (O(dt^2)). This is the
/// direction for which differentiating a cylinder function is dual to the
/// plain stochastic integral int <h', dW>; with Ric = 0 it reduces to h.
inline std::vector<Vec> hat_h(const Manifold& m, const PiecewiseGeodesicPath& path,
                              const CameronMartinPath& h) {
    const Partition& part = path.partition();
    const int n = m.dim();
    std::vector<Vec> out(static_cast<size_t>(part.segments()) + 1);
    out[0] = h.value(0.0);  // = 0
    OrthonormalFrame frame{path.knots()[0], path.knot_frames()[0]};
    Mat ric_prev = ric_operator(m, frame);
    Vec hprev = out[0];
    for (int k = 1; k <= part.segments(); ++k) {
        const double dt = part.dt(k - 1);
        const Vec cur = h.value(part.times[static_cast<size_t>(k)]);
        const OrthonormalFrame fk{path.knots()[static_cast<size_t>(k)],
                                  path.knot_frames()[static_cast<size_t>(k)]};
        const Mat ric_cur = ric_operator(m, fk);
        // (I + dt/4 A_k) hat_k = hat_{k-1} + dh - dt/4 A_{k-1} hat_{k-1}
        const Vec rhs = out[static_cast<size_t>(k - 1)] + (cur - hprev) -
                        0.25 * dt * (ric_prev * out[static_cast<size_t>(k - 1)]);
        const Mat lhs = Mat::Identity(n, n) + 0.25 * dt * ric_cur;
        out[static_cast<size_t>(k)] = lhs.lu().solve(rhs);
        ric_prev = ric_cur;
        hprev = cur;
    }
    return out;
}

namespace detail {
/// Grid index of a cylinder time; the walk grid must contain it.
inline int grid_index(const Partition& part, double t) {
    for (size_t k = 0; k < part.times.size(); ++k)
        if (std::abs(part.times[k] - t) < 1e-9) return static_cast<int>(k);
    throw UsageError("cylinder time is not a grid point of the sampled path");
}
}  // namespace detail

/// Chain rule for cylinder functions: sum_i df_i (U_{t_i} hat_h(t_i)).
/// The pairing of the chart differential with the chart vector equals the
/// metric pairing of the Riemannian gradient with the vector.
inline double directional_derivative(const CylinderFunction& F,
                                     const PiecewiseGeodesicPath& path,
                                     const std::vector<Vec>& hat) {
    if (!F.differential) throw ConfigError("directional_derivative: F has no gradient evaluator");
    const std::vector<ChartPoint> ys = F.marginals(path);
    double acc = 0.0;
    for (size_t i = 0; i < F.times.size(); ++i) {
        const int k = detail::grid_index(path.partition(), F.times[i]);
        const Vec chart_vec =
            path.knot_frames()[static_cast<size_t>(k)] * hat[static_cast<size_t>(k)];
        acc += F.differential(static_cast<int>(i), ys).dot(chart_vec);
    }
    return acc;
}

/// Left-point Ito sum sum_k <h'(t_{k-1}), dW_k> with dW_k = b_k dt_k.
inline double stochastic_integral(const CameronMartinPath& h, const DevelopmentDriver& driver) {
    const Partition& part = driver.partition;
    double acc = 0.0;
    for (int k = 0; k < part.segments(); ++k)
        acc += h.deriv(part.times[static_cast<size_t>(k)])
                   .dot(driver.velocities.col(k) * part.dt(k));
    return acc;
}

struct IbpResult {
    EstimatorResult lhs;       // E[X^hat_h F]
    EstimatorResult rhs;       // E[F int <h', dW>]
    double residual = 0.0;     // |mean lhs - mean rhs|
    double residual_se = 0.0;  // paired stderr of the difference
};

/// Paired Monte Carlo of both sides of the integration-by-parts identity on
/// common Brownian samples.
inline IbpResult ibp_residual(const Manifold& m, const ChartPoint& x0,
                              const OrthonormalFrame& frame0, const CylinderFunction& F,
                              const CameronMartinPath& h, double horizon, int steps,
                              long long samples, std::uint64_t seed,
                              const EstimateOptions& opts = {}) {
    if (samples < 1) throw UsageError("ibp_residual: samples >= 1");
    std::vector<double> lhs(static_cast<size_t>(samples), 0.0);
    std::vector<double> rhs(static_cast<size_t>(samples), 0.0);
    std::vector<double> diff(static_cast<size_t>(samples), 0.0);
    parallel_for_samples(
        samples,
        [&](long long i) {
            RngStream rng(seed, stream_tag::kBrownian, static_cast<std::uint64_t>(i));
            BrownianSample bs = brownian_sample(m, x0, frame0, horizon, steps, rng, opts.shoot);
            const std::vector<Vec> hat = hat_h(m, bs.path, h);
            const double l = directional_derivative(F, bs.path, hat);
            const double r = F.eval_path(bs.path) * stochastic_integral(h, bs.driver);
            lhs[static_cast<size_t>(i)] = l;
            rhs[static_cast<size_t>(i)] = r;
            diff[static_cast<size_t>(i)] = l - r;
        },
        opts.workers);
    IbpResult out;
    const SampleSummary sl = summarize_mean(lhs);
    const SampleSummary sr = summarize_mean(rhs);
    const SampleSummary sd = summarize_mean(diff);
    out.lhs.mean = sl.mean;
    out.lhs.std_error = sl.std_error;
    out.lhs.samples = samples;
    out.lhs.seed = seed;
    out.lhs.ess = static_cast<double>(samples);
    out.rhs.mean = sr.mean;
    out.rhs.std_error = sr.std_error;
    out.rhs.samples = samples;
    out.rhs.seed = seed;
    out.rhs.ess = static_cast<double>(samples);
    out.residual = std::abs(sd.mean);
    out.residual_se = sd.std_error;
    return out;
}

}  // namespace pathint
