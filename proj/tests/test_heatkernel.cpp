// Heat-kernel oracles: closed forms, normalization, symmetry, the semigroup
// property (the validation oracle for the hyperbolic integral formula), and
// spectral decays on the sphere.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pathint/heat_kernel.hpp"
#include "pathint/path.hpp"
#include "test_util.hpp"

using namespace pathint;

namespace {
ChartPoint pt(double x, double y, int chart = 0) {
    Vec c(2);
    c << x, y;
    return ChartPoint{chart, c};
}

double semigroup_residual(const HeatKernelOracle& hk, const QuadGrid& grid, double s, double t,
                          const ChartPoint& x, const ChartPoint& y) {
    double acc = 0.0;
    for (size_t i = 0; i < grid.points.size(); ++i)
        acc += grid.weights[i] * hk.p(s, x, grid.points[i]) * hk.p(t, grid.points[i], y);
    return std::abs(acc - hk.p(s + t, x, y));
}
}  // namespace

TEST_CASE("flat kernel closed form and tail bound") {
    Euclidean e2(2);
    auto hk = make_heat_kernel(e2);
    CHECK(hk->p(1.0, pt(0, 0), pt(0, 0)) == Catch::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
    const double d = 1.3;
    CHECK(hk->p(0.7, pt(0, 0), pt(d, 0)) ==
          Catch::Approx(std::exp(-d * d / 1.4) / (2.0 * M_PI * 0.7)).epsilon(1e-14));
    CHECK_THROWS_AS(hk->p(0.0, pt(0, 0), pt(0, 0)), DomainError);

    const double t = 0.5;
    QuadGrid g = hk->quad_grid(96, pt(0, 0), 8.0 * std::sqrt(t), t);
    CHECK(g.tail_bound < 1e-13);
    double mass = 0.0;
    for (size_t i = 0; i < g.points.size(); ++i) mass += g.weights[i] * hk->p(t, pt(0, 0), g.points[i]);
    CHECK(std::abs(mass - 1.0) < 1e-6);
}

TEST_CASE("torus kernel: exact grid weight and unit mass") {
    Torus tor(2, {1.0, 1.0});
    auto hk = make_heat_kernel(tor);
    QuadGrid g = hk->quad_grid(48, pt(0, 0), 0, 0);
    CHECK(g.total_weight() == Catch::Approx(1.0).epsilon(1e-12));
    for (double t : {0.1, 0.5, 2.0}) {
        double mass = 0.0;
        for (size_t i = 0; i < g.points.size(); ++i)
            mass += g.weights[i] * hk->p(t, pt(0.3, 0.6), g.points[i]);
        CHECK(std::abs(mass - 1.0) < 1e-6);
    }
    // wrapping: moving by a full period changes nothing
    CHECK(hk->p(0.3, pt(0.1, 0.2), pt(0.4, 0.9)) ==
          Catch::Approx(hk->p(0.3, pt(1.1, 0.2), pt(0.4, -0.1))).epsilon(1e-12));
}

TEST_CASE("sphere kernel: grid area, unit mass, spectral decays") {
    Sphere2 sph(1.0);
    auto hk = make_heat_kernel(sph);
    QuadGrid g = hk->quad_grid(64, pt(0, 0), 0, 0);
    CHECK(g.total_weight() == Catch::Approx(4.0 * M_PI).epsilon(1e-12));

    const ChartPoint x = pt(0.12, -0.3);
    for (double t : {0.1, 0.5, 1.0}) {
        double mass = 0.0;
        for (size_t i = 0; i < g.points.size(); ++i)
            mass += g.weights[i] * hk->p(t, x, g.points[i]);
        CHECK(std::abs(mass - 1.0) < 1e-6);
    }

    // int P_l(cos d(x, y)) p_t(x, y) dvol(y) = exp(-l(l+1) t / 2), l <= 3
    for (int l = 1; l <= 3; ++l) {
        for (double t : {0.2, 0.5}) {
            double acc = 0.0;
            for (size_t i = 0; i < g.points.size(); ++i) {
                const double d = sph.distance(x, g.points[i]);
                acc += g.weights[i] * detail::legendre_p(l, std::cos(d)) *
                       hk->p(t, x, g.points[i]);
            }
            CHECK(std::abs(acc - std::exp(-0.5 * l * (l + 1) * t)) < 1e-5);
        }
    }
}

TEST_CASE("sphere kernel scales correctly with the radius") {
    // radius a: p_t^{(a)}(d) = a^{-2} p^{(1)}_{t/a^2}(d/a)
    Sphere2 s1(1.0), s2(2.0);
    auto h1 = make_heat_kernel(s1);
    auto h2 = make_heat_kernel(s2);
    const double t = 0.8;
    const auto* k1 = dynamic_cast<const SphereHeatKernel*>(h1.get());
    const auto* k2 = dynamic_cast<const SphereHeatKernel*>(h2.get());
    REQUIRE(k1 != nullptr);
    REQUIRE(k2 != nullptr);
    for (double d : {0.1, 0.7, 2.0}) {
        CHECK(k2->series(t, d) ==
              Catch::Approx(0.25 * k1->series(t / 4.0, d / 2.0)).epsilon(1e-10));
    }
}

TEST_CASE("hyperbolic kernel: unit mass against a radial oracle") {
    // Radial mass: int_0^inf p_t(d) 2 pi sinh(d) dd = 1 (unit curvature).
    Hyperbolic2 hyp(-1.0);
    auto hk = make_heat_kernel(hyp);
    const auto* k = dynamic_cast<const HyperbolicHeatKernel*>(hk.get());
    REQUIRE(k != nullptr);
    for (double t : {0.25, 0.5, 1.0}) {
        const double tau = 0.5 * t;
        std::vector<double> gx, gw;
        detail::gauss_legendre(24, gx, gw);
        const double dmax = 8.0 * std::sqrt(t) + 4.0;
        const int panels = 64;
        double mass = 0.0;
        for (int p = 0; p < panels; ++p) {
            const double d0 = dmax * p / panels, d1 = dmax * (p + 1) / panels;
            for (size_t q = 0; q < gx.size(); ++q) {
                const double d = 0.5 * (d0 + d1) + 0.5 * (d1 - d0) * gx[q];
                mass += 0.5 * (d1 - d0) * gw[q] * k->unit_kernel(tau, d) * 2.0 * M_PI *
                        std::sinh(d);
            }
        }
        CHECK(std::abs(mass - 1.0) < 1e-8);
    }
}

TEST_CASE("hyperbolic kernel: 2d grid mass") {
    Hyperbolic2 hyp(-1.0);
    auto hk = make_heat_kernel(hyp);
    const ChartPoint x = pt(0.0, 1.0);
    const double t = 0.5;
    QuadGrid g = hk->quad_grid(160, x, 6.0, t);
    double mass = 0.0;
    for (size_t i = 0; i < g.points.size(); ++i) mass += g.weights[i] * hk->p(t, x, g.points[i]);
    CHECK(std::abs(mass - 1.0) < 1e-6 + g.tail_bound);
}

TEST_CASE("symmetry and positivity on random pairs") {
    RngStream rng(61, stream_tag::kTest, 0);
    Euclidean e2(2);
    Torus tor(2, {1.0, 1.5});
    Sphere2 sph(1.0);
    Hyperbolic2 hyp(-1.0);
    std::vector<const Manifold*> ms{&e2, &tor, &sph, &hyp};
    for (const Manifold* m : ms) {
        auto hk = make_heat_kernel(*m);
        for (int trial = 0; trial < 10; ++trial) {
            ChartPoint x = pt(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
            ChartPoint y = pt(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
            if (m == &hyp) {
                x.coords[1] = 0.5 + rng.uniform();
                y.coords[1] = 0.5 + rng.uniform();
            }
            const double t = 0.1 + rng.uniform();
            const double pxy = hk->p(t, x, y);
            CHECK(pxy > 0.0);
            CHECK(std::abs(pxy - hk->p(t, y, x)) <= 1e-8 * std::max(1.0, pxy));
        }
    }
}

TEST_CASE("semigroup property within 1e-5 on every model") {
    Euclidean e2(2);
    Torus tor(2, {1.0, 1.0});
    Sphere2 sph(1.0);
    Hyperbolic2 hyp(-1.0);
    const double s = 0.4, t = 0.3;

    {
        auto hk = make_heat_kernel(e2);
        const ChartPoint x = pt(0, 0), y = pt(0.6, -0.4);
        QuadGrid g = hk->quad_grid(128, pt(0.3, -0.2), 8.0 * std::sqrt(s + t) + 1.0, s + t);
        CHECK(semigroup_residual(*hk, g, s, t, x, y) < 1e-5);
    }
    {
        auto hk = make_heat_kernel(tor);
        QuadGrid g = hk->quad_grid(48, pt(0, 0), 0, 0);
        CHECK(semigroup_residual(*hk, g, s, t, pt(0.2, 0.8), pt(0.7, 0.1)) < 1e-5);
    }
    {
        auto hk = make_heat_kernel(sph);
        QuadGrid g = hk->quad_grid(64, pt(0, 0), 0, 0);
        CHECK(semigroup_residual(*hk, g, s, t, pt(0.1, 0.2), pt(-0.5, 0.9)) < 1e-5);
    }
    {
        auto hk = make_heat_kernel(hyp);
        const ChartPoint x = pt(0.0, 1.0), y = pt(0.3, 1.4);
        QuadGrid g = hk->quad_grid(160, pt(0.15, 1.2), 6.5, s + t);
        CHECK(semigroup_residual(*hk, g, s, t, x, y) < 1e-5);
    }
}

TEST_CASE("walker marginals match oracle densities (chi-square)") {
    // Bin cos d(x0, X_t) for the sphere walk; expected bin masses from the
    // oracle by radial quadrature.
    Sphere2 sph(1.0);
    auto hk = make_heat_kernel(sph);
    const auto* k = dynamic_cast<const SphereHeatKernel*>(hk.get());
    const ChartPoint x0 = pt(0, 0);
    OrthonormalFrame f = canonical_frame(sph, x0);
    const double t = 0.5;
    const int nbins = 10;
    const int samples = 20000;

    std::vector<double> expected(nbins, 0.0);
    std::vector<double> gx, gw;
    detail::gauss_legendre(32, gx, gw);
    for (int b = 0; b < nbins; ++b) {
        // bins uniform in cos d over [-1, 1]
        const double c0 = -1.0 + 2.0 * b / nbins, c1 = -1.0 + 2.0 * (b + 1) / nbins;
        for (size_t q = 0; q < gx.size(); ++q) {
            const double c = 0.5 * (c0 + c1) + 0.5 * (c1 - c0) * gx[q];
            // area element in cos d: 2 pi d(cos d)
            expected[static_cast<size_t>(b)] +=
                0.5 * (c1 - c0) * gw[q] * k->series(t, std::acos(c)) * 2.0 * M_PI;
        }
    }
    std::vector<int> counts(nbins, 0);
    for (int s = 0; s < samples; ++s) {
        BrownianSample bs = brownian_sample(sph, x0, f, t, 64, /*seed=*/777, s);
        const double c = std::cos(sph.distance(x0, bs.path.knots().back()));
        int b = static_cast<int>((c + 1.0) / 2.0 * nbins);
        b = std::min(std::max(b, 0), nbins - 1);
        ++counts[static_cast<size_t>(b)];
    }
    double chi2 = 0.0;
    int dof = 0;
    for (int b = 0; b < nbins; ++b) {
        const double e = expected[static_cast<size_t>(b)] * samples;
        if (e < 5.0) continue;  // merge-tiny-bin convention: skip
        const double diff = counts[static_cast<size_t>(b)] - e;
        chi2 += diff * diff / e;
        ++dof;
    }
    CHECK(testutil::chi2_p_value(chi2, dof - 1) > 0.01);
}
