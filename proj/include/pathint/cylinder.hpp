#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "pathint/manifold.hpp"
#include "pathint/path.hpp"

namespace pathint {

/// Smooth compactly supported radial profile psi(s) = e^{1 - 1/(1-s)} on
/// s in [0, 1), zero beyond; psi(0) = 1.
inline double bump_profile(double s) {
    if (s >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s));
}

inline double bump_profile_deriv(double s) {
    if (s >= 1.0) return 0.0;
    const double inv = 1.0 / (1.0 - s);
    return -bump_profile(s) * inv * inv;
}

/// A compactly supported Lipschitz function of one manifold point with an
/// analytic chart differential: amplitude * psi(d(c, y)^2 / r^2).
struct RadialBump {
    const Manifold* m = nullptr;
    ChartPoint center;
    double radius = 1.0;
    double amplitude = 1.0;

    double value(const ChartPoint& y) const {
        const double d = m->distance(center, y);
        return amplitude * bump_profile(d * d / (radius * radius));
    }

    Vec differential(const ChartPoint& y) const {
        const double d = m->distance(center, y);
        const double s = d * d / (radius * radius);
        if (s >= 1.0) return Vec::Zero(m->dim());
        const Vec dd2 = m->dist2_differential(center, y);
        return Vec(amplitude * bump_profile_deriv(s) / (radius * radius) * dd2);
    }
};

/// Cylinder function F(gamma) = f(gamma(t_1), ..., gamma(t_N)) with gradient
/// access through chart differentials (df applied to a chart vector equals
/// the metric pairing with the Riemannian gradient).
class CylinderFunction {
public:
    std::vector<double> times;
    std::function<double(const std::vector<ChartPoint>&)> f;
    /// differential in slot i (0-based) at the marginal tuple
    std::function<Vec(int, const std::vector<ChartPoint>&)> differential;
    double bound = 1.0;  // sup |f|
    /// geodesic ball containing the support in every slot (for quadrature)
    struct SupportBall {
        ChartPoint center;
        double radius = 1.0;
    };
    std::optional<SupportBall> support;

    double max_time() const { return times.empty() ? 0.0 : times.back(); }

    std::vector<ChartPoint> marginals(const PiecewiseGeodesicPath& path) const {
        std::vector<ChartPoint> pts;
        pts.reserve(times.size());
        for (double t : times) pts.push_back(path.eval(t));
        return pts;
    }

    double eval_path(const PiecewiseGeodesicPath& path) const { return f(marginals(path)); }
};

/// F(gamma) = prod_i bump_i(gamma(t_i)). The shipped test functions.
inline CylinderFunction cylinder_from_bumps(std::vector<double> times,
                                            std::vector<RadialBump> bumps) {
    if (times.size() != bumps.size() || times.empty())
        throw UsageError("cylinder_from_bumps: one bump per time");
    CylinderFunction c;
    c.times = std::move(times);
    auto bs = std::make_shared<std::vector<RadialBump>>(std::move(bumps));
    c.f = [bs](const std::vector<ChartPoint>& ys) {
        double v = 1.0;
        for (size_t i = 0; i < ys.size(); ++i) v *= (*bs)[i].value(ys[i]);
        return v;
    };
    c.differential = [bs](int slot, const std::vector<ChartPoint>& ys) {
        double rest = 1.0;
        for (size_t i = 0; i < ys.size(); ++i)
            if (static_cast<int>(i) != slot) rest *= (*bs)[i].value(ys[i]);
        return Vec(rest * (*bs)[static_cast<size_t>(slot)].differential(ys[static_cast<size_t>(slot)]));
    };
    double b = 1.0;
    double rmax = 0.0;
    for (const auto& bump : *bs) {
        b *= bump.amplitude;
        rmax = std::max(rmax, bump.radius);
    }
    c.bound = std::abs(b);
    c.support = CylinderFunction::SupportBall{(*bs)[0].center, rmax};
    return c;
}

inline CylinderFunction single_bump_cylinder(double t, RadialBump bump) {
    return cylinder_from_bumps({t}, {std::move(bump)});
}

}  // namespace pathint
