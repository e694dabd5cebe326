// Development (rolling) and the geodesic random walk.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pathint/models.hpp"
#include "pathint/path.hpp"
#include "test_util.hpp"

using namespace pathint;

namespace {
ChartPoint pt(double x, double y, int chart = 0) {
    Vec c(2);
    c << x, y;
    return ChartPoint{chart, c};
}
}  // namespace

TEST_CASE("euclidean development is the cumulative sum of increments") {
    Euclidean e2(2);
    ChartPoint x0 = pt(0.5, -0.25);
    OrthonormalFrame f = canonical_frame(e2, x0);
    DevelopmentDriver d;
    d.partition = partition_uniform(1.0, 4);
    d.velocities.resize(2, 4);
    d.velocities << 1.0, -2.0, 0.5, 3.0, 0.0, 1.0, 1.0, -1.0;
    PiecewiseGeodesicPath path = develop(e2, x0, f, d);
    Vec acc = x0.coords;
    for (int i = 0; i < 4; ++i) {
        acc += 0.25 * Vec(d.velocities.col(i));
        CHECK((path.knots()[static_cast<size_t>(i + 1)].coords - acc).norm() < 1e-14);
    }
    CHECK(path.energy() ==
          Catch::Approx(0.25 * d.velocities.colwise().squaredNorm().sum()).epsilon(1e-14));
}

TEST_CASE("zero driver develops to the constant path with unchanged frames") {
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.2, 0.3);
    OrthonormalFrame f = canonical_frame(sph, x0);
    DevelopmentDriver d;
    d.partition = partition_uniform(1.0, 3);
    d.velocities = Eigen::MatrixXd::Zero(2, 3);
    PiecewiseGeodesicPath path = develop(sph, x0, f, d);
    for (const auto& k : path.knots()) CHECK((k.coords - x0.coords).norm() == 0.0);
    for (const auto& fr : path.knot_frames())
        CHECK((fr - f.cols).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sphere development: one segment of length pi reaches the antipode") {
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.0, 0.0);  // south pole
    OrthonormalFrame f = canonical_frame(sph, x0);
    DevelopmentDriver d;
    d.partition = partition_uniform(1.0, 1);
    d.velocities.resize(2, 1);
    d.velocities << M_PI, 0.0;  // |b| * dt = pi
    PiecewiseGeodesicPath path = develop(sph, x0, f, d);
    const ChartPoint north = sph.from_embed({0, 0, 1});
    CHECK(sph.distance(path.knots().back(), north) < 1e-6);
}

TEST_CASE("frames stay orthonormal along 64-segment developments") {
    Sphere2 sph(1.0);
    Hyperbolic2 hyp(-1.0);
    for (const Manifold* m : {static_cast<const Manifold*>(&sph),
                              static_cast<const Manifold*>(&hyp)}) {
        ChartPoint x0 = (m->name() == "sphere2") ? pt(0.1, -0.2) : pt(0.0, 1.0);
        OrthonormalFrame f = canonical_frame(*m, x0);
        RngStream sample(99, stream_tag::kTest, 1);
        DevelopmentDriver d = gaussian_driver(partition_uniform(1.0, 64), 2, sample);
        PiecewiseGeodesicPath path = develop(*m, x0, f, d);
        double worst = 0.0;
        for (size_t k = 0; k < path.knots().size(); ++k) {
            Mat g;
            m->metric(path.knots()[k], g);
            const Mat& e = path.knot_frames()[k];
            worst = std::max(worst,
                             (e.transpose() * g * e - Mat::Identity(2, 2)).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-7);
    }
}

TEST_CASE("development is deterministic given the seed") {
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.0, 0.0);
    OrthonormalFrame f = canonical_frame(sph, x0);
    BrownianSample a = brownian_sample(sph, x0, f, 0.5, 16, /*seed=*/42, /*index=*/7);
    BrownianSample b = brownian_sample(sph, x0, f, 0.5, 16, /*seed=*/42, /*index=*/7);
    CHECK(a.driver.velocities == b.driver.velocities);
    CHECK((a.path.knots().back().coords - b.path.knots().back().coords).norm() == 0.0);
    BrownianSample c = brownian_sample(sph, x0, f, 0.5, 16, /*seed=*/43, /*index=*/7);
    CHECK(a.driver.velocities != c.driver.velocities);
}

TEST_CASE("flat increments are i.i.d. N(0, dt) per coordinate (KS)") {
    Euclidean e2(2);
    ChartPoint x0 = pt(0, 0);
    OrthonormalFrame f = canonical_frame(e2, x0);
    const int steps = 4;
    const double dt = 0.25;
    std::vector<double> zs;
    zs.reserve(10000);
    int idx = 0;
    while (zs.size() < 10000) {
        BrownianSample s = brownian_sample(e2, x0, f, 1.0, steps, /*seed=*/4242, idx++);
        // increments b_i dt ~ N(0, dt I), so b_i dt / sqrt(dt) is standard normal
        for (int i = 0; i < steps; ++i)
            for (int a = 0; a < 2; ++a)
                zs.push_back(s.driver.velocities(a, i) * dt / std::sqrt(dt));
    }
    zs.resize(10000);
    CHECK(testutil::ks_p_value_normal(zs) > 0.01);
}

TEST_CASE("flat walk: E|X_T|^2 = n T, invariant under step doubling") {
    Euclidean e2(2);
    ChartPoint x0 = pt(0, 0);
    OrthonormalFrame f = canonical_frame(e2, x0);
    for (int steps : {8, 16}) {
        std::vector<double> vals;
        vals.reserve(100000);
        for (int s = 0; s < 100000; ++s) {
            BrownianSample bs = brownian_sample(e2, x0, f, 1.0, steps, /*seed=*/7, s);
            vals.push_back(bs.path.knots().back().coords.squaredNorm());
        }
        auto st = testutil::mean_stderr(vals);
        CHECK(std::abs(st.mean - 2.0) < 3.0 * st.se);
    }
}

TEST_CASE("sphere walk matches the spectral decay of the l=1 mode") {
    // E[cos d(x0, X_T)] = exp(-T) for Brownian motion on the unit sphere
    // (zonal eigenfunction, eigenvalue l(l+1)/2 = 1 under the half-Laplacian).
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.0, 0.0);
    OrthonormalFrame f = canonical_frame(sph, x0);
    const double T = 0.5;
    const int steps = 64;
    std::vector<double> vals;
    const int samples = 20000;
    vals.reserve(samples);
    for (int s = 0; s < samples; ++s) {
        BrownianSample bs = brownian_sample(sph, x0, f, T, steps, /*seed=*/1234, s);
        vals.push_back(std::cos(sph.distance(x0, bs.path.knots().back())));
    }
    auto st = testutil::mean_stderr(vals);
    CHECK(std::abs(st.mean - std::exp(-T)) < 3.0 * st.se);
}

TEST_CASE("transport_along_path: composition law and segmentwise oracle") {
    Sphere2 sph(1.0);
    ChartPoint x0 = pt(0.05, -0.1);
    OrthonormalFrame f = canonical_frame(sph, x0);
    RngStream rng(31, stream_tag::kTest, 3);
    DevelopmentDriver d = gaussian_driver(partition_uniform(1.0, 2), 2, rng);
    PiecewiseGeodesicPath path = develop(sph, x0, f, d);

    TangentVec w = f.apply(Vec(Vec::Unit(2, 0) * 0.8 + Vec::Unit(2, 1) * 0.1));
    // composition: 0 -> 0.6 -> 1.0 equals 0 -> 1.0
    TangentVec mid = transport_along_path(sph, path, w, 0.0, 0.6);
    TangentVec endA = transport_along_path(sph, path, mid, 0.6, 1.0);
    TangentVec endB = transport_along_path(sph, path, w, 0.0, 1.0);
    CHECK((endA.components - endB.components).norm() < 1e-8);

    // two-segment oracle: fresh per-segment transport ODE solves across the knot
    TangentVec o1 = parallel_transport(sph, path.segment(0), w);
    o1.base = path.segment(1).start_point();
    TangentVec o2 = parallel_transport(sph, path.segment(1), o1);
    CHECK((o2.components - endB.components).norm() < 1e-7);

    // identity on a flat path
    Euclidean e2(2);
    OrthonormalFrame fe = canonical_frame(e2, x0);
    RngStream rng2(31, stream_tag::kTest, 4);
    PiecewiseGeodesicPath fp =
        develop(e2, x0, fe, gaussian_driver(partition_uniform(1.0, 4), 2, rng2));
    TangentVec fw{x0, Vec(Vec::Unit(2, 1))};
    CHECK((transport_along_path(e2, fp, fw, 0.0, 1.0).components - fw.components).norm() <
          1e-12);

    CHECK_THROWS_AS(transport_along_path(sph, path, w, 0.9, 0.2), DomainError);
}
