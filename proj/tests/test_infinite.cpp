// Infinite-horizon machinery: the geodesic extension map, the truncated
// uniform metric, dyadic-horizon measures, and the trichotomy slopes.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pathint/infinite_horizon.hpp"
#include "test_util.hpp"

using namespace pathint;

namespace {
ChartPoint pt(double x, double y, int chart = 0) {
    Vec c(2);
    c << x, y;
    return ChartPoint{chart, c};
}

PiecewiseGeodesicPath make_path(const Manifold& m, const ChartPoint& x0, const Partition& part,
                                const Eigen::MatrixXd& b) {
    DevelopmentDriver d;
    d.partition = part;
    d.velocities = b;
    return develop(m, x0, canonical_frame(m, x0), d);
}
}  // namespace

TEST_CASE("phi_extend: flat line doubles back") {
    Euclidean e2(2);
    ChartPoint x0 = pt(0, 0);
    Eigen::MatrixXd b(2, 1);
    b << 1.0, 0.5;
    const double T = 1.0;
    ExtendedPath ext = phi_extend(make_path(e2, x0, partition_uniform(T, 1), b));
    // phi_T(gamma)(t) = T v - (t - T) v for t >= T
    for (double t : {1.0, 1.3, 2.5, 7.0}) {
        const Vec expect = (T - (t - T)) * Vec(b.col(0));
        CHECK((ext.eval(t).coords - expect).norm() < 1e-9);
    }
    // restriction to [0, T] is the identity, exactly
    for (double t : {0.0, 0.4, 0.99}) {
        CHECK((ext.eval(t).coords - (t * b.col(0))).norm() == 0.0);
    }
}

TEST_CASE("phi_extend: forward sign flag for sensitivity runs") {
    Euclidean e2(2);
    Eigen::MatrixXd b(2, 1);
    b << 1.0, 0.0;
    ExtendedPath fwd = phi_extend(make_path(e2, pt(0, 0), partition_uniform(1.0, 1), b), +1.0);
    CHECK(fwd.eval(2.0).coords[0] == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("phi_extend: constant path extends constantly") {
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.2, 0.1);
    ExtendedPath ext =
        phi_extend(make_path(sph, x0, partition_uniform(1.0, 2), Eigen::MatrixXd::Zero(2, 2)));
    CHECK((ext.eval(5.0).coords - x0.coords).norm() == 0.0);
}

TEST_CASE("phi_extend: continuity at T with slope -gamma'(T-)") {
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.0, 0.0);
    Eigen::MatrixXd b(2, 2);
    b << 0.8, -0.4, 0.2, 0.9;
    PiecewiseGeodesicPath path = make_path(sph, x0, partition_uniform(1.0, 2), b);
    const TangentVec vT = path.left_end_velocity();
    ExtendedPath ext = phi_extend(path);
    const ChartPoint at_T = ext.eval(1.0);
    double prev = 1e9;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const double gap = sph.distance(at_T, ext.eval(1.0 + eps));
        CHECK(gap < prev);
        prev = gap;
        // speed of the continuation equals |gamma'(T-)|
        CHECK(gap / eps == Catch::Approx(metric_norm(sph, vT)).epsilon(1e-2));
    }
    // initial slope is the reflected velocity
    const double eps = 1e-6;
    const Vec slope = (ext.eval(1.0 + eps).coords - at_T.coords) / eps;
    CHECK((slope + vT.components).norm() < 1e-3 * (1.0 + vT.components.norm()));
}

TEST_CASE("d_infinity: coincidence, cap, and pseudometric properties") {
    Euclidean e2(2);
    Eigen::MatrixXd ba(2, 1), bb(2, 1), bc(2, 1);
    ba << 1.0, 0.0;
    bb << 0.5, 0.3;
    bc << -0.2, 0.8;
    const Partition part = partition_uniform(1.0, 1);
    ExtendedPath a = phi_extend(make_path(e2, pt(0, 0), part, ba));
    ExtendedPath b = phi_extend(make_path(e2, pt(0, 0), part, bb));
    ExtendedPath c = phi_extend(make_path(e2, pt(0, 0), part, bc));
    const auto grid = d_infinity_probe_grid(1.0);

    CHECK(d_infinity(e2, a, a, grid) == 0.0);
    const double dab = d_infinity(e2, a, b, grid);
    const double dba = d_infinity(e2, b, a, grid);
    const double dac = d_infinity(e2, a, c, grid);
    const double dcb = d_infinity(e2, c, b, grid);
    CHECK(dab <= 1.0);
    CHECK(dab == dba);                      // symmetry is structural
    CHECK(dab <= dac + dcb + 1e-12);        // triangle inequality
    CHECK(dab == 1.0);                      // different slopes escape any ball
}

TEST_CASE("dyadic measures: normalizer invariant and cost cap") {
    for (int level : {1, 2, 3}) {
        DyadicMeasureSpec spec = make_dyadic_measure(level, MetricKind::G1, 2);
        const long long segs = static_cast<long long>(level) << level;
        CHECK(spec.measure.partition.segments() == segs);
        // Z1 = (sqrt(2 pi))^{n N 2^N}
        CHECK(spec.measure.log_normalizer() ==
              Catch::Approx(0.5 * 2 * segs * std::log(2 * M_PI)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(make_dyadic_measure(4, MetricKind::G0, 2), CostCapError);
}

TEST_CASE("dyadic flat G1 equals the finite-horizon Wiener value") {
    Euclidean e2(2);
    ChartPoint x0 = pt(0, 0);
    OrthonormalFrame f = canonical_frame(e2, x0);
    auto hk = make_heat_kernel(e2);
    // the cylinder time must be a knot of every level used: marginals of the
    // piecewise-geodesic measures match Wiener exactly only at knot times
    RadialBump bump{&e2, pt(0.4, -0.1), 1.2, 1.0};
    CylinderFunction F = single_bump_cylinder(0.5, bump);
    const QuadratureValue truth = wiener_cylinder_exact(*hk, x0, F, 128);
    for (int level : {1, 2}) {
        EstimatorResult r = dyadic_estimate(e2, x0, f, F, level, MetricKind::G1, 20000, 3);
        CHECK(std::abs(r.mean - truth.value) < 3.0 * r.std_error + truth.error);
    }
    // beyond-horizon cylinder time is refused
    CylinderFunction late = single_bump_cylinder(2.5, bump);
    CHECK_THROWS_AS(dyadic_estimate(e2, x0, f, late, 1, MetricKind::G1, 10, 3), UsageError);
}

TEST_CASE("dyadic estimate equals the plain estimate on the same partition") {
    // phi_N is inert for cylinder times inside [0, N]; the dyadic entry point
    // must agree with the direct estimator on the identical partition.
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0, 0);
    OrthonormalFrame f = canonical_frame(sph, x0);
    RadialBump bump{&sph, pt(0.3, 0.2), 1.0, 1.0};
    CylinderFunction F = single_bump_cylinder(0.5, bump);
    EstimatorResult dy = dyadic_estimate(sph, x0, f, F, 2, MetricKind::G0, 400, 17);
    FiniteDimMeasure mu = make_measure(MetricKind::G0, partition_dyadic(2), 2);
    PathFunctional func = [&](const PiecewiseGeodesicPath& p) { return F.eval_path(p); };
    EstimatorResult direct = estimate(sph, x0, f, mu, func, 400, 17);
    CHECK(dy.mean == Catch::Approx(direct.mean).epsilon(1e-12));
}

TEST_CASE("dyadic G0 masses: torus exactly 1, sphere decays like exp(-N/3)") {
    Torus tor(2, {1.0, 1.0});
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0, 0);
    CylinderFunction none;  // F = 1 via empty times
    none.f = [](const std::vector<ChartPoint>&) { return 1.0; };

    for (int level : {1, 2}) {
        EstimatorResult rt = dyadic_estimate(tor, x0, canonical_frame(tor, x0), none, level,
                                             MetricKind::G0, 400, 23);
        CHECK(std::abs(rt.mean - 1.0) < 1e-8);  // flat: weights cancel exactly
        EstimatorResult rs = dyadic_estimate(sph, x0, canonical_frame(sph, x0), none, level,
                                             MetricKind::G0, 1500, 29);
        CHECK(std::abs(rs.mean - std::exp(-level / 3.0)) < 3.0 * rs.std_error + 0.02);
    }
}

TEST_CASE("trichotomy slopes at desk scale") {
    Torus tor(2, {1.0, 1.0});
    Sphere2 sph(1.0);
    Hyperbolic2 hyp(-1.0);
    std::vector<const Manifold*> models{&tor, &sph, &hyp};
    const std::vector<double> horizons{0.5, 1.0, 1.5};
    auto fits = trichotomy_experiment(models, horizons, 0.25, 1200, 31);
    REQUIRE(fits.size() == 3);
    CHECK(fits[0].predicted_slope == Catch::Approx(0.0).margin(1e-9));
    CHECK(fits[1].predicted_slope == Catch::Approx(-1.0 / 3.0).epsilon(1e-6));
    CHECK(fits[2].predicted_slope == Catch::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(std::abs(fits[0].fitted_slope) < 0.02);
    CHECK(std::abs(fits[1].fitted_slope + 1.0 / 3.0) < 0.25 / 3.0);
    CHECK(std::abs(fits[2].fitted_slope - 1.0 / 3.0) < 0.25 / 3.0);
    // rows carry the per-horizon masses
    CHECK(fits[1].rows.size() == horizons.size());
    CHECK(fits[1].rows[2].log_mass < fits[1].rows[0].log_mass);
}
