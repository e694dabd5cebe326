#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "pathint/models.hpp"

namespace pathint {

/// Weighted point set for integrating functions over a model manifold.
/// total weight approximates (or equals) the volume of the covered region;
/// tail_bound reports the mass excluded by domain truncation.
struct QuadGrid {
    std::vector<ChartPoint> points;
    std::vector<double> weights;
    double tail_bound = 0.0;

    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<size_t>(n), 0.0);
    w.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[static_cast<size_t>(i)] = -z;
        x[static_cast<size_t>(n - 1 - i)] = z;
        w[static_cast<size_t>(i)] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[static_cast<size_t>(n - 1 - i)] = w[static_cast<size_t>(i)];
    }
}

inline double legendre_p(int l, double x) {
    double p0 = 1.0, p1 = x;
    if (l == 0) return p0;
    for (int j = 1; j < l; ++j) {
        const double p2 = ((2.0 * j + 1.0) * x * p1 - j * p0) / (j + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

}  // namespace detail

/// Ground-truth heat kernel p_t(x, y) for a model manifold. All oracles use
/// the half-Laplacian generator (the transition density of the Brownian
/// motion the samplers produce): e^{t Delta / 2}.
class HeatKernelOracle {
public:
    static constexpr const char* kConvention = "half-laplacian";

    virtual ~HeatKernelOracle() = default;
    virtual const Manifold& manifold() const = 0;

    double p(double t, const ChartPoint& x, const ChartPoint& y) const {
        if (!(t > 0)) throw DomainError("heat kernel: t must be positive");
        manifold().require_domain(x);
        manifold().require_domain(y);
        return eval(t, x, y);
    }

    /// Quadrature grid. Compact models cover the whole manifold and ignore
    /// center/radius; flat and hyperbolic grids cover the metric ball of the
    /// given radius around `center` and report the truncation tail bound
    /// exp(-radius^2 / (2 t_scale)).
    virtual QuadGrid quad_grid(int resolution, const ChartPoint& center, double radius,
                               double t_scale) const = 0;

protected:
    virtual double eval(double t, const ChartPoint& x, const ChartPoint& y) const = 0;
};

// ---------------------------------------------------------------------------

class FlatHeatKernel final : public HeatKernelOracle {
public:
    explicit FlatHeatKernel(const Euclidean& m) : m_(m) {}
    const Manifold& manifold() const override { return m_; }

    QuadGrid quad_grid(int resolution, const ChartPoint& center, double radius,
                       double t_scale) const override {
        if (resolution < 8) throw UsageError("quad_grid: resolution >= 8");
        const int n = m_.dim();
        if (n > 2) throw UsageError("flat quad_grid: shipped for n <= 2");
        QuadGrid g;
        const double step = 2.0 * radius / (resolution - 1);
        if (n == 1) {
            for (int i = 0; i < resolution; ++i) {
                Vec c(1);
                c << center.coords[0] - radius + i * step;
                g.points.push_back(ChartPoint{0, c});
                g.weights.push_back(step * ((i == 0 || i == resolution - 1) ? 0.5 : 1.0));
            }
        } else {
            for (int i = 0; i < resolution; ++i)
                for (int j = 0; j < resolution; ++j) {
                    Vec c(2);
                    c << center.coords[0] - radius + i * step,
                        center.coords[1] - radius + j * step;
                    const double wi = (i == 0 || i == resolution - 1) ? 0.5 : 1.0;
                    const double wj = (j == 0 || j == resolution - 1) ? 0.5 : 1.0;
                    g.points.push_back(ChartPoint{0, c});
                    g.weights.push_back(step * step * wi * wj);
                }
        }
        g.tail_bound = std::exp(-radius * radius / (2.0 * t_scale));
        return g;
    }

protected:
    double eval(double t, const ChartPoint& x, const ChartPoint& y) const override {
        const double d = m_.distance(x, y);
        const int n = m_.dim();
        return std::pow(2.0 * M_PI * t, -0.5 * n) * std::exp(-d * d / (2.0 * t));
    }

private:
    const Euclidean& m_;
};

// ---------------------------------------------------------------------------

class TorusHeatKernel final : public HeatKernelOracle {
public:
    explicit TorusHeatKernel(const Torus& m) : m_(m) {}
    const Manifold& manifold() const override { return m_; }

    QuadGrid quad_grid(int resolution, const ChartPoint&, double, double) const override {
        if (resolution < 8) throw UsageError("quad_grid: resolution >= 8");
        const int n = m_.dim();
        if (n > 3) throw UsageError("torus quad_grid: shipped for n <= 3");
        QuadGrid g;
        std::vector<int> idx(static_cast<size_t>(n), 0);
        const auto& per = m_.periods();
        while (true) {
            Vec c(n);
            double w = 1.0;
            for (int k = 0; k < n; ++k) {
                c[k] = per[static_cast<size_t>(k)] * idx[static_cast<size_t>(k)] / resolution;
                w *= per[static_cast<size_t>(k)] / resolution;
            }
            g.points.push_back(ChartPoint{0, c});
            g.weights.push_back(w);
            int k = 0;
            while (k < n && ++idx[static_cast<size_t>(k)] == resolution) {
                idx[static_cast<size_t>(k)] = 0;
                ++k;
            }
            if (k == n) break;
        }
        return g;
    }

protected:
    double eval(double t, const ChartPoint& x, const ChartPoint& y) const override {
        // wrapped gaussian, product over coordinates
        double out = 1.0;
        for (int k = 0; k < m_.dim(); ++k) {
            const double L = m_.periods()[static_cast<size_t>(k)];
            double delta = y.coords[k] - x.coords[k];
            delta -= L * std::round(delta / L);
            double s = 0.0;
            for (int img = 0;; ++img) {
                const double tp = std::exp(-std::pow(delta + img * L, 2) / (2.0 * t));
                const double tm =
                    (img == 0) ? 0.0 : std::exp(-std::pow(delta - img * L, 2) / (2.0 * t));
                s += tp + tm;
                if (img > 0 && tp + tm < 1e-14 * s) break;
                if (img > 10000)
                    throw AccuracyError("torus heat kernel: image sum did not converge", tp);
            }
            out *= s / std::sqrt(2.0 * M_PI * t);
        }
        return out;
    }

private:
    const Torus& m_;
};

// ---------------------------------------------------------------------------

class SphereHeatKernel final : public HeatKernelOracle {
public:
    explicit SphereHeatKernel(const Sphere2& m) : m_(m) {}
    const Manifold& manifold() const override { return m_; }

    /// Gauss-Legendre in cos(theta) x periodic trapezoid in phi; weights sum
    /// to 4 pi a^2 exactly.
    QuadGrid quad_grid(int resolution, const ChartPoint&, double, double) const override {
        if (resolution < 8) throw UsageError("quad_grid: resolution >= 8");
        const double a = m_.radius();
        std::vector<double> xu, wu;
        detail::gauss_legendre(resolution, xu, wu);
        const int nphi = 2 * resolution;
        QuadGrid g;
        g.points.reserve(static_cast<size_t>(resolution * nphi));
        for (int i = 0; i < resolution; ++i) {
            const double u = xu[static_cast<size_t>(i)];
            const double st = std::sqrt(std::max(0.0, 1.0 - u * u));
            for (int j = 0; j < nphi; ++j) {
                const double phi = 2.0 * M_PI * j / nphi;
                const Eigen::Vector3d p(a * st * std::cos(phi), a * st * std::sin(phi), a * u);
                g.points.push_back(m_.from_embed(p));
                g.weights.push_back(a * a * wu[static_cast<size_t>(i)] * 2.0 * M_PI / nphi);
            }
        }
        return g;
    }

    /// Series value with an explicit truncation bound check (|P_l| <= 1).
    double series(double t, double geodesic_distance) const {
        const double a = m_.radius();
        const double tau = t / (2.0 * a * a);  // term damping e^{-l(l+1) tau}
        const double cosd = std::cos(geodesic_distance / a);
        double acc = 0.0;
        double pprev = 1.0, pcur = cosd;  // P_0, P_1
        for (int l = 0;; ++l) {
            double plv;
            if (l == 0)
                plv = 1.0;
            else if (l == 1)
                plv = cosd;
            else {
                const double pnext = ((2.0 * l - 1.0) * cosd * pcur - (l - 1.0) * pprev) / l;
                pprev = pcur;
                pcur = pnext;
                plv = pnext;
            }
            acc += (2.0 * l + 1.0) * std::exp(-static_cast<double>(l) * (l + 1.0) * tau) * plv;
            const double bound = (2.0 * l + 3.0) * std::exp(-(l + 1.0) * (l + 2.0) * tau);
            if (bound < 1e-16 * std::max(1.0, std::abs(acc))) break;
            if (l > 20000)
                throw AccuracyError("sphere heat kernel: series truncation failed", bound);
        }
        return acc / (4.0 * M_PI * a * a);
    }

protected:
    double eval(double t, const ChartPoint& x, const ChartPoint& y) const override {
        return series(t, m_.distance(x, y));
    }

private:
    const Sphere2& m_;
};

// ---------------------------------------------------------------------------

/// Hyperbolic plane of curvature -k. The unit-curvature kernel (full
/// Laplacian, time tau) is evaluated through the integral representation
///   p_tau(d) = sqrt(2) e^{-tau/4} (4 pi tau)^{-3/2}
///              * int_d^inf s e^{-s^2/(4 tau)} / sqrt(cosh s - cosh d) ds,
/// with the substitution s = d + u^2 removing the endpoint singularity:
/// cosh s - cosh d = 2 sinh(u^2/2) sinh(d + u^2/2). Scaling handles k != 1,
/// and the half-Laplacian convention evaluates at tau = k t / 2. The formula
/// is trusted only through the semigroup/normalization tests.
class HyperbolicHeatKernel final : public HeatKernelOracle {
public:
    explicit HyperbolicHeatKernel(const Hyperbolic2& m) : m_(m), k_(-m.curvature()) {}
    const Manifold& manifold() const override { return m_; }

    /// Geodesic polar grid over the metric ball of the given radius. The
    /// hyperbolic circle of radius rho around (cx, cy) is the euclidean
    /// circle with center (cx, cy cosh rho) and radius cy sinh rho
    /// (unit-curvature rho); parametrized by the euclidean angle theta the
    /// area element is
    ///   dA = (1/k) sinh(rho) / (cosh(rho) + sinh(rho) sin(theta)) drho dtheta,
    /// which integrates each circle exactly to (2 pi / k) sinh(rho).
    QuadGrid quad_grid(int resolution, const ChartPoint& center, double radius,
                       double t_scale) const override {
        if (resolution < 8) throw UsageError("quad_grid: resolution >= 8");
        const double rr = radius * std::sqrt(k_);  // unit-curvature radius
        const double cx = center.coords[0], cy = center.coords[1];
        static thread_local std::vector<double> gx, gw;
        if (gx.empty()) detail::gauss_legendre(8, gx, gw);
        const int panels = resolution / 4;
        const int ntheta = 2 * resolution;
        const double dtheta = 2.0 * M_PI / ntheta;
        QuadGrid g;
        g.points.reserve(static_cast<size_t>(panels) * gx.size() * ntheta);
        for (int p = 0; p < panels; ++p) {
            const double r0 = rr * p / panels, r1 = rr * (p + 1) / panels;
            for (size_t q = 0; q < gx.size(); ++q) {
                const double rho = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * gx[q];
                const double wr = 0.5 * (r1 - r0) * gw[q];
                const double ch = std::cosh(rho), sh = std::sinh(rho);
                for (int j = 0; j < ntheta; ++j) {
                    const double th = dtheta * j;
                    Vec c(2);
                    c << cx + cy * sh * std::cos(th), cy * (ch + sh * std::sin(th));
                    g.points.push_back(ChartPoint{0, c});
                    g.weights.push_back(wr * dtheta * sh / (k_ * (ch + sh * std::sin(th))));
                }
            }
        }
        // Gaussian off-diagonal decay with the curvature drift e^{+R/2}.
        g.tail_bound = 10.0 * std::exp(-rr * rr / (2.0 * t_scale * k_) + 0.5 * rr);
        return g;
    }

    double unit_kernel(double tau, double d) const {
        const double smax = std::max(d, std::sqrt(160.0 * tau)) + d + 1.0;
        const double umax = std::sqrt(smax - d);
        // composite 16-point Gauss-Legendre panels in u
        static thread_local std::vector<double> gx, gw;
        if (gx.empty()) detail::gauss_legendre(16, gx, gw);
        const int panels = 48;
        const double du = umax / panels;
        double integral = 0.0;
        for (int p = 0; p < panels; ++p) {
            const double u0 = p * du;
            for (size_t q = 0; q < gx.size(); ++q) {
                const double u = u0 + 0.5 * du * (1.0 + gx[q]);
                const double s = d + u * u;
                const double den = 2.0 * std::sinh(0.5 * u * u) * std::sinh(d + 0.5 * u * u);
                if (den <= 0.0) continue;  // only at u = 0 exactly
                const double f = 2.0 * u * s * std::exp(-s * s / (4.0 * tau)) / std::sqrt(den);
                integral += 0.5 * du * gw[q] * f;
            }
        }
        return std::sqrt(2.0) * std::exp(-tau / 4.0) * std::pow(4.0 * M_PI * tau, -1.5) *
               integral;
    }

protected:
    double eval(double t, const ChartPoint& x, const ChartPoint& y) const override {
        const double d = m_.distance(x, y);
        // curvature scaling + half-Laplacian convention
        return k_ * unit_kernel(0.5 * k_ * t, std::sqrt(k_) * d);
    }

private:
    const Hyperbolic2& m_;
    double k_;
};

// ---------------------------------------------------------------------------

inline std::unique_ptr<HeatKernelOracle> make_heat_kernel(const Manifold& m) {
    if (auto* e = dynamic_cast<const Euclidean*>(&m)) return std::make_unique<FlatHeatKernel>(*e);
    if (auto* t = dynamic_cast<const Torus*>(&m)) return std::make_unique<TorusHeatKernel>(*t);
    if (auto* s = dynamic_cast<const Sphere2*>(&m))
        return std::make_unique<SphereHeatKernel>(*s);
    if (auto* h = dynamic_cast<const Hyperbolic2*>(&m))
        return std::make_unique<HyperbolicHeatKernel>(*h);
    throw ConfigError("no heat-kernel oracle for manifold '" + m.name() + "'");
}

}  // namespace pathint
