#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pathint/manifold.hpp"

namespace pathint {

// ---------------------------------------------------------------------------
// euclidean(n)
// ---------------------------------------------------------------------------

class Euclidean final : public Manifold {
public:
    explicit Euclidean(int n) : n_(n) {
        if (n < 1 || n > kMaxDim) throw ConfigError("euclidean: dim must be in [1, 6]");
    }

    std::string name() const override { return "euclidean"; }
    int dim() const override { return n_; }
    bool flat_chart() const override { return true; }

    void metric(const ChartPoint&, Mat& g) const override { g = Mat::Identity(n_, n_); }
    void christoffel(const ChartPoint&, Christoffel& gamma) const override { gamma.resize(n_); }

    double distance(const ChartPoint& a, const ChartPoint& b) const override {
        return (a.coords - b.coords).norm();
    }

    Vec dist2_differential(const ChartPoint& c, const ChartPoint& y) const override {
        return 2.0 * (y.coords - c.coords);
    }

    std::vector<std::pair<std::string, std::string>> spec_kv() const override {
        return {{"manifold", "euclidean"}, {"dim", std::to_string(n_)}};
    }

private:
    int n_;
};

// ---------------------------------------------------------------------------
// torus(n, periods)
//
// Flat torus presented on its universal cover: chart coordinates live in R^n
// (paths may wind), the metric is euclidean, and distance wraps modulo the
// periods. Quadrature grids use the fundamental domain [0, L_j).
// ---------------------------------------------------------------------------

class Torus final : public Manifold {
public:
    Torus(int n, std::vector<double> periods) : n_(n), periods_(std::move(periods)) {
        if (n < 1 || n > kMaxDim) throw ConfigError("torus: dim must be in [1, 6]");
        if (static_cast<int>(periods_.size()) != n)
            throw ConfigError("torus: periods must have length dim");
        for (double p : periods_)
            if (!(p > 0)) throw ConfigError("torus: periods must be positive");
    }

    std::string name() const override { return "torus"; }
    int dim() const override { return n_; }
    bool flat_chart() const override { return true; }

    void metric(const ChartPoint&, Mat& g) const override { g = Mat::Identity(n_, n_); }
    void christoffel(const ChartPoint&, Christoffel& gamma) const override { gamma.resize(n_); }

    /// Minimal representative of b - a modulo the period lattice.
    Vec wrapped_delta(const ChartPoint& a, const ChartPoint& b) const {
        Vec d = b.coords - a.coords;
        for (int j = 0; j < n_; ++j) d[j] -= periods_[j] * std::round(d[j] / periods_[j]);
        return d;
    }

    double distance(const ChartPoint& a, const ChartPoint& b) const override {
        return wrapped_delta(a, b).norm();
    }

    Vec dist2_differential(const ChartPoint& c, const ChartPoint& y) const override {
        return 2.0 * wrapped_delta(c, y);
    }

    const std::vector<double>& periods() const { return periods_; }

    std::vector<std::pair<std::string, std::string>> spec_kv() const override {
        std::ostringstream ps;
        for (size_t i = 0; i < periods_.size(); ++i) {
            if (i) ps << ",";
            ps << periods_[i];
        }
        return {{"manifold", "torus"}, {"dim", std::to_string(n_)}, {"periods", ps.str()}};
    }

private:
    int n_;
    std::vector<double> periods_;
};

// ---------------------------------------------------------------------------
// sphere2(radius)
//
// Round 2-sphere of radius a with two stereographic charts:
//   chart 0: projection from the north pole (covers everything but north),
//   chart 1: projection from the south pole.
// In either chart the metric is conformal, g = lambda(u)^2 I with
// lambda = 2 a^2 / (a^2 + |u|^2). Transition on the overlap: v = a^2 u / |u|^2.
// ---------------------------------------------------------------------------

class Sphere2 final : public Manifold {
public:
    explicit Sphere2(double radius) : a_(radius) {
        if (!(radius > 0)) throw ConfigError("sphere2: radius must be positive");
    }

    std::string name() const override { return "sphere2"; }
    int dim() const override { return 2; }
    int chart_count() const override { return 2; }

    bool in_domain(const ChartPoint& x) const override {
        if (!Manifold::in_domain(x)) return false;
        // Each chart is trusted out to |u| = 5a; beyond that the conformal
        // factor is tiny and callers should have switched charts long before.
        return x.coords.squaredNorm() <= 25.0 * a_ * a_;
    }

    void metric(const ChartPoint& x, Mat& g) const override {
        const double lam = 2.0 * a_ * a_ / (a_ * a_ + x.coords.squaredNorm());
        g = (lam * lam) * Mat::Identity(2, 2);
    }

    void christoffel(const ChartPoint& x, Christoffel& gamma) const override {
        gamma.resize(2);
        const double s = x.coords.squaredNorm();
        const double p1 = -2.0 * x.coords[0] / (a_ * a_ + s);  // d(log lambda)/du1
        const double p2 = -2.0 * x.coords[1] / (a_ * a_ + s);
        conformal_gamma(gamma, p1, p2);
    }

    int preferred_chart(const ChartPoint& x) const override {
        return (x.coords.squaredNorm() > 2.25 * a_ * a_) ? 1 - x.chart : x.chart;
    }

    ChartPoint to_chart(const ChartPoint& x, int chart) const override {
        if (chart == x.chart) return x;
        const double s = x.coords.squaredNorm();
        if (s <= 0) throw DomainError("sphere2: chart transition undefined at the pole");
        return ChartPoint{chart, Vec((a_ * a_ / s) * x.coords)};
    }

    Mat transition_jacobian(const ChartPoint& x, int chart) const override {
        if (chart == x.chart) return Mat::Identity(2, 2);
        const double s = x.coords.squaredNorm();
        if (s <= 0) throw DomainError("sphere2: chart transition undefined at the pole");
        Mat j = Mat::Identity(2, 2) - (2.0 / s) * (x.coords * x.coords.transpose());
        return Mat((a_ * a_ / s) * j);
    }

    /// Embedding into R^3 (|embed| = a).
    Eigen::Vector3d embed(const ChartPoint& x) const {
        const double s = x.coords.squaredNorm();
        const double den = s + a_ * a_;
        const double z = a_ * (s - a_ * a_) / den;
        Eigen::Vector3d p(2.0 * a_ * a_ * x.coords[0] / den, 2.0 * a_ * a_ * x.coords[1] / den,
                          x.chart == 0 ? z : -z);
        return p;
    }

    /// Chart point whose embedding is p (|p| = a); chart chosen by hemisphere.
    ChartPoint from_embed(const Eigen::Vector3d& p) const {
        const int chart = (p.z() <= 0) ? 0 : 1;
        const double den = (chart == 0) ? (a_ - p.z()) : (a_ + p.z());
        Vec u(2);
        u << p.x() * a_ / den, p.y() * a_ / den;
        return ChartPoint{chart, u};
    }

    /// Columns d(embed)/du_i at x; maps chart components to ambient vectors.
    Eigen::Matrix<double, 3, 2> embed_jacobian(const ChartPoint& x) const {
        const double s = x.coords.squaredNorm();
        const double den = s + a_ * a_;
        const double den2 = den * den;
        Eigen::Matrix<double, 3, 2> j;
        for (int i = 0; i < 2; ++i) {
            for (int r = 0; r < 2; ++r)
                j(r, i) = 2.0 * a_ * a_ * ((r == i ? den : 0.0) - 2.0 * x.coords[r] * x.coords[i]) /
                          den2;
            j(2, i) = 4.0 * std::pow(a_, 3) * x.coords[i] / den2;
        }
        if (x.chart == 1) j.row(2) *= -1.0;
        return j;
    }

    double distance(const ChartPoint& x, const ChartPoint& y) const override {
        const Eigen::Vector3d p = embed(x), q = embed(y);
        return a_ * std::atan2(p.cross(q).norm(), p.dot(q));
    }

    Vec dist2_differential(const ChartPoint& c, const ChartPoint& y) const override {
        const Eigen::Vector3d pc = embed(c), py = embed(y);
        const double theta = std::atan2(pc.cross(py).norm(), pc.dot(py));
        // d(d^2) = -2 (theta/sin theta) (p_c . dP/du_k); smooth at theta = 0.
        const double ratio =
            (theta < 1e-6) ? 1.0 + theta * theta / 6.0 : theta / std::sin(theta);
        const Eigen::Matrix<double, 3, 2> j = embed_jacobian(y);
        Vec out(2);
        for (int k = 0; k < 2; ++k) out[k] = -2.0 * ratio * pc.dot(j.col(k));
        return out;
    }

    double radius() const { return a_; }

    std::vector<std::pair<std::string, std::string>> spec_kv() const override {
        std::ostringstream r;
        r << a_;
        return {{"manifold", "sphere2"}, {"radius", r.str()}};
    }

private:
    static void conformal_gamma(Christoffel& g, double p1, double p2) {
        g.at(0, 0, 0) = p1;
        g.at(0, 0, 1) = p2;
        g.at(0, 1, 0) = p2;
        g.at(0, 1, 1) = -p1;
        g.at(1, 0, 0) = -p2;
        g.at(1, 0, 1) = p1;
        g.at(1, 1, 0) = p1;
        g.at(1, 1, 1) = p2;
    }

    double a_;
};

// ---------------------------------------------------------------------------
// hyperbolic2(curvature)
//
// Upper half-plane chart {y > 0} with metric g = I / (k y^2) for constant
// curvature -k (the shipped configuration is curvature = -1, k = 1).
// ---------------------------------------------------------------------------

class Hyperbolic2 final : public Manifold {
public:
    explicit Hyperbolic2(double curvature) : k_(-curvature) {
        if (!(curvature < 0)) throw ConfigError("hyperbolic2: curvature must be negative");
    }

    std::string name() const override { return "hyperbolic2"; }
    int dim() const override { return 2; }

    bool in_domain(const ChartPoint& x) const override {
        return Manifold::in_domain(x) && x.coords[1] > 0.0;
    }

    void metric(const ChartPoint& x, Mat& g) const override {
        const double y = x.coords[1];
        g = (1.0 / (k_ * y * y)) * Mat::Identity(2, 2);
    }

    void christoffel(const ChartPoint& x, Christoffel& gamma) const override {
        gamma.resize(2);
        const double iy = 1.0 / x.coords[1];
        gamma.at(0, 0, 1) = -iy;
        gamma.at(0, 1, 0) = -iy;
        gamma.at(1, 0, 0) = iy;
        gamma.at(1, 1, 1) = -iy;
    }

    double distance(const ChartPoint& p, const ChartPoint& q) const override {
        const double dx = p.coords[0] - q.coords[0];
        const double dy = p.coords[1] - q.coords[1];
        const double w = 1.0 + (dx * dx + dy * dy) / (2.0 * p.coords[1] * q.coords[1]);
        return std::acosh(std::max(1.0, w)) / std::sqrt(k_);
    }

    Vec dist2_differential(const ChartPoint& c, const ChartPoint& p) const override {
        const double dx = p.coords[0] - c.coords[0];
        const double dy = p.coords[1] - c.coords[1];
        const double y = p.coords[1], cy = c.coords[1];
        const double r2 = dx * dx + dy * dy;
        const double w = 1.0 + r2 / (2.0 * cy * y);
        // d(d^2) = (2/k) acosh(w)/sqrt(w^2-1) dw; the ratio -> 1 as w -> 1.
        const double e = w - 1.0;
        const double ratio = (e < 1e-8) ? 1.0 - e / 3.0
                                        : std::acosh(w) / std::sqrt(w * w - 1.0);
        Vec dw(2);
        dw[0] = dx / (cy * y);
        dw[1] = dy / (cy * y) - r2 / (2.0 * cy * y * y);
        return Vec((2.0 / k_) * ratio * dw);
    }

    double curvature() const { return -k_; }

    std::vector<std::pair<std::string, std::string>> spec_kv() const override {
        std::ostringstream c;
        c << -k_;
        return {{"manifold", "hyperbolic2"}, {"curvature", c.str()}};
    }

private:
    double k_;  // K = -k_
};

// ---------------------------------------------------------------------------
// factory
// ---------------------------------------------------------------------------

struct ManifoldParams {
    int dim = 2;
    double radius = 1.0;
    double curvature = -1.0;
    std::vector<double> periods;  // defaults to all-ones
};

inline std::unique_ptr<Manifold> make_manifold(const std::string& kind,
                                               const ManifoldParams& p = {}) {
    if (kind == "euclidean") return std::make_unique<Euclidean>(p.dim);
    if (kind == "torus") {
        std::vector<double> per = p.periods;
        if (per.empty()) per.assign(static_cast<size_t>(p.dim), 1.0);
        return std::make_unique<Torus>(p.dim, per);
    }
    if (kind == "sphere2") return std::make_unique<Sphere2>(p.radius);
    if (kind == "hyperbolic2") return std::make_unique<Hyperbolic2>(p.curvature);
    throw ConfigError("unknown manifold kind '" + kind + "'");
}

}  // namespace pathint
