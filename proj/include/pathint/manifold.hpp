#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pathint/errors.hpp"
#include "pathint/linalg.hpp"

namespace pathint {

/// A point in chart coordinates. Multi-chart models (the sphere) carry the
/// chart id alongside the coordinates.
struct ChartPoint {
    int chart = 0;
    Vec coords;

    ChartPoint() = default;
    ChartPoint(int c, Vec x) : chart(c), coords(std::move(x)) {}
};

/// Chart components of a tangent vector at `base`.
struct TangentVec {
    ChartPoint base;
    Vec components;
};

/// Chart-based Riemannian manifold: metric, connection, curvature, charts.
///
/// Curvature defaults are generic: the Riemann tensor is assembled from the
/// model's Christoffel symbols (closed form per model) with central
/// finite-difference derivatives, and Ricci/scalar curvature are contractions
/// of it. Models only supply metric/christoffel/charts/distance.
class Manifold {
public:
    virtual ~Manifold() = default;

    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    virtual int chart_count() const { return 1; }

    /// True when the Christoffel symbols vanish identically in every chart
    /// (euclidean, torus): geodesics are exact straight lines there.
    virtual bool flat_chart() const { return false; }

    virtual bool in_domain(const ChartPoint& x) const {
        return x.chart >= 0 && x.chart < chart_count() && x.coords.size() == dim() &&
               x.coords.allFinite();
    }

    void require_domain(const ChartPoint& x) const {
        if (!in_domain(x))
            throw DomainError(name() + ": point outside chart domain");
    }

    virtual void metric(const ChartPoint& x, Mat& g) const = 0;
    virtual void christoffel(const ChartPoint& x, Christoffel& gamma) const = 0;

    /// Chart the integrator should continue in; differs from x.chart near a
    /// chart boundary.
    virtual int preferred_chart(const ChartPoint& x) const {
        (void)x;
        return x.chart;
    }

    /// Transition map between overlapping charts.
    virtual ChartPoint to_chart(const ChartPoint& x, int chart) const {
        if (chart == x.chart) return x;
        throw DomainError(name() + ": no transition to chart " + std::to_string(chart));
    }

    /// Jacobian d(target coords)/d(source coords) of to_chart at x.
    virtual Mat transition_jacobian(const ChartPoint& x, int chart) const {
        if (chart == x.chart) return Mat::Identity(dim(), dim());
        throw DomainError(name() + ": no transition to chart " + std::to_string(chart));
    }

    /// Riemannian distance (closed form per shipped model).
    virtual double distance(const ChartPoint& a, const ChartPoint& b) const = 0;

    /// Chart differential (covector components) of y -> d(c, y)^2 at y.
    /// Default: central finite differences of distance^2.
    virtual Vec dist2_differential(const ChartPoint& c, const ChartPoint& y) const {
        const int n = dim();
        Vec out(n);
        for (int k = 0; k < n; ++k) {
            const double h = 1e-6 * (1.0 + std::abs(y.coords[k]));
            ChartPoint yp = y, ym = y;
            yp.coords[k] += h;
            ym.coords[k] -= h;
            const double dp = distance(c, yp), dm = distance(c, ym);
            out[k] = (dp * dp - dm * dm) / (2.0 * h);
        }
        return out;
    }

    /// R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
    ///           + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
    /// with d Gamma by central differences (step 1e-5 scaled by coordinate).
    virtual void riemann(const ChartPoint& x, RiemannTensor& r) const {
        const int n = dim();
        r.resize(n);
        Christoffel g0;
        christoffel(x, g0);
        // dGamma[i] = d/dx^i of Gamma
        std::vector<Christoffel> dg(static_cast<size_t>(n));
        Christoffel gp, gm;
        for (int i = 0; i < n; ++i) {
            const double h = 1e-5 * (1.0 + std::abs(x.coords[i]));
            ChartPoint xp = x, xm = x;
            xp.coords[i] += h;
            xm.coords[i] -= h;
            christoffel(xp, gp);
            christoffel(xm, gm);
            dg[i].resize(n);
            for (int k = 0; k < n; ++k)
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        dg[i].at(k, a, b) = (gp.at(k, a, b) - gm.at(k, a, b)) / (2.0 * h);
        }
        for (int l = 0; l < n; ++l)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        double val = dg[i].at(l, j, k) - dg[j].at(l, i, k);
                        for (int m = 0; m < n; ++m)
                            val += g0.at(l, i, m) * g0.at(m, j, k) -
                                   g0.at(l, j, m) * g0.at(m, i, k);
                        r.at(l, i, j, k) = val;
                    }
    }

    /// Ric_{jk} = R^i_{ijk}.
    virtual void ricci(const ChartPoint& x, Mat& ric) const {
        const int n = dim();
        RiemannTensor r;
        riemann(x, r);
        ric.resize(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += r.at(i, i, j, k);
                ric(j, k) = s;
            }
    }

    /// Scal = g^{jk} Ric_{jk}.
    virtual double scal(const ChartPoint& x) const {
        Mat g, ric;
        metric(x, g);
        ricci(x, ric);
        return (g.inverse() * ric).trace();
    }

    /// (R(X,V)V)^l, the Jacobi-operator contraction.
    void curvature_xvv(const ChartPoint& x, const Vec& xc, const Vec& vc, Vec& out) const {
        const int n = dim();
        RiemannTensor r;
        riemann(x, r);
        out.setZero(n);
        for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        s += r.at(l, i, j, k) * xc[i] * vc[j] * vc[k];
            out[l] = s;
        }
    }

    /// Key/value description for manifests and path records.
    virtual std::vector<std::pair<std::string, std::string>> spec_kv() const = 0;
};

/// g_x(u, v); both vectors must sit at the same point (same chart, same coords).
inline double metric_inner(const Manifold& m, const TangentVec& u, const TangentVec& v) {
    if (u.base.chart != v.base.chart ||
        (u.base.coords - v.base.coords).cwiseAbs().maxCoeff() > 1e-12)
        throw UsageError(m.name() + ": metric_inner on vectors with mismatched base points");
    m.require_domain(u.base);
    Mat g;
    m.metric(u.base, g);
    return u.components.dot(g * v.components);
}

inline double metric_norm(const Manifold& m, const TangentVec& u) {
    return std::sqrt(metric_inner(m, u, u));
}

/// Scal(x) from the Riemann contraction.
inline double scalar_curvature(const Manifold& m, const ChartPoint& x) {
    m.require_domain(x);
    return m.scal(x);
}

/// Push a tangent vector through a chart transition.
inline TangentVec vector_to_chart(const Manifold& m, const TangentVec& v, int chart) {
    if (chart == v.base.chart) return v;
    const Mat j = m.transition_jacobian(v.base, chart);
    return TangentVec{m.to_chart(v.base, chart), j * v.components};
}

}  // namespace pathint
