#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "pathint/manifold.hpp"
#include "pathint/ode.hpp"

namespace pathint {

struct ShootOptions {
    OdeOptions ode;
    bool force_ode = false;  // integrate even on flat charts (testing hook)
};

/// Dense-output geodesic segment on [t_start, t_start + duration].
///
/// State layout: [x (n) | v (n) | frame columns (n*n, optional)]. The frame
/// block, when present, is parallel-transported along the geodesic, so the
/// segment doubles as the horizontal lift used by development.
class GeodesicSegment {
public:
    const Manifold* manifold = nullptr;
    int n = 0;
    bool with_frame = false;
    double t_start = 0.0, duration = 0.0;
    int chart_start = 0, chart_end = 0;
    StateVec y_begin, y_end;
    std::vector<DensePiece> pieces;

    double t_end() const { return t_start + duration; }

    void eval_state(double t, int& chart, StateVec& y) const {
        if (t <= t_start || pieces.empty()) {
            chart = chart_start;
            y = y_begin;
            return;
        }
        if (t >= t_end()) {
            chart = chart_end;
            y = y_end;
            return;
        }
        // last piece with t0 <= t
        auto it = std::upper_bound(pieces.begin(), pieces.end(), t,
                                   [](double tv, const DensePiece& p) { return tv < p.t0; });
        if (it != pieces.begin()) --it;
        chart = it->chart;
        it->eval(t, y);
    }

    ChartPoint point(double t) const {
        int chart;
        StateVec y;
        eval_state(t, chart, y);
        return ChartPoint{chart, Vec(y.head(n))};
    }

    TangentVec velocity(double t) const {
        int chart;
        StateVec y;
        eval_state(t, chart, y);
        return TangentVec{ChartPoint{chart, Vec(y.head(n))}, Vec(y.segment(n, n))};
    }

    Mat frame_cols(double t) const {
        int chart;
        StateVec y;
        eval_state(t, chart, y);
        Mat e(n, n);
        for (int c = 0; c < n; ++c) e.col(c) = y.segment(2 * n + c * n, n);
        return e;
    }

    ChartPoint start_point() const { return ChartPoint{chart_start, Vec(y_begin.head(n))}; }
    ChartPoint end_point() const { return ChartPoint{chart_end, Vec(y_end.head(n))}; }
    TangentVec end_velocity() const {
        return TangentVec{end_point(), Vec(y_end.segment(n, n))};
    }
    Mat end_frame() const {
        Mat e(n, n);
        for (int c = 0; c < n; ++c) e.col(c) = y_end.segment(2 * n + c * n, n);
        return e;
    }
};

namespace detail {

/// Geodesic + parallel-frame RHS in a fixed chart.
struct GeodesicRhs {
    const Manifold* m;
    const int* chart;  // owned by the shoot loop; changes on chart switch
    int n;
    bool with_frame;

    void operator()(double, const StateVec& y, StateVec& dy) const {
        dy.resize(y.size());
        ChartPoint x{*chart, Vec(y.head(n))};
        Christoffel gm;
        m->christoffel(x, gm);
        dy.head(n) = y.segment(n, n);
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    acc += gm.at(k, i, j) * y[n + i] * y[n + j];
            dy[n + k] = -acc;
        }
        if (with_frame) {
            for (int c = 0; c < n; ++c) {
                const int off = 2 * n + c * n;
                for (int k = 0; k < n; ++k) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j)
                            acc += gm.at(k, i, j) * y[n + i] * y[off + j];
                    dy[off + k] = -acc;
                }
            }
        }
    }
};

/// Re-express a geodesic state in another chart.
inline StateVec state_to_chart(const Manifold& m, int from, const StateVec& y, int to, int n,
                               bool with_frame) {
    ChartPoint x{from, Vec(y.head(n))};
    const ChartPoint xn = m.to_chart(x, to);
    const Mat j = m.transition_jacobian(x, to);
    StateVec out(y.size());
    out.head(n) = xn.coords;
    out.segment(n, n) = j * y.segment(n, n).eval();
    if (with_frame)
        for (int c = 0; c < n; ++c)
            out.segment(2 * n + c * n, n) = j * y.segment(2 * n + c * n, n).eval();
    return out;
}

/// Replay a base segment's accepted step schedule (step sizes and chart
/// switches) from a perturbed initial state. Because the step sequence is
/// frozen, the map y0 -> y(t) is a smooth discrete flow, so central
/// differences through it measure derivatives without tolerance-level noise.
/// Callers keep perturbations small enough that the base charts stay valid.
inline GeodesicSegment reroll_on_schedule(const Manifold& m, const GeodesicSegment& base,
                                          const StateVec& y0) {
    const int n = base.n;
    GeodesicSegment seg;
    seg.manifold = &m;
    seg.n = n;
    seg.with_frame = base.with_frame;
    seg.t_start = base.t_start;
    seg.duration = base.duration;
    seg.chart_start = base.chart_start;
    seg.y_begin = y0;
    if (base.pieces.empty()) {
        seg.chart_end = base.chart_end;
        seg.y_end = y0;
        return seg;
    }
    const DensePiece& first = base.pieces.front();
    const bool linear = base.pieces.size() == 1 && first.r3.isZero(0.0) &&
                        first.r4.isZero(0.0) && first.r5.isZero(0.0);
    if (linear) {
        DensePiece p;
        p.t0 = base.t_start;
        p.h = base.duration;
        p.chart = base.chart_start;
        p.r1 = y0;
        StateVec f = StateVec::Zero(y0.size());
        f.head(n) = y0.segment(n, n);
        p.r2 = base.duration * f;
        p.r3 = StateVec::Zero(y0.size());
        p.r4 = p.r3;
        p.r5 = p.r3;
        seg.pieces.push_back(std::move(p));
        seg.chart_end = base.chart_start;
        seg.y_end = seg.y_begin + seg.pieces.back().r2;
        return seg;
    }

    int chart = base.chart_start;
    GeodesicRhs rhs{&m, &chart, n, base.with_frame};
    StateVec y = y0, k1(y0.size()), ynew(y0.size()), k7(y0.size());
    StepScratch scratch;
    rhs(base.t_start, y, k1);
    seg.pieces.reserve(base.pieces.size());
    for (const DensePiece& bp : base.pieces) {
        if (bp.chart != chart) {
            y = state_to_chart(m, chart, y, bp.chart, n, base.with_frame);
            chart = bp.chart;
            rhs(bp.t0, y, k1);
        }
        DensePiece piece;
        dopri5_step(rhs, bp.t0, bp.h, y, k1, ynew, k7, &piece, nullptr, scratch);
        piece.chart = chart;
        seg.pieces.push_back(piece);
        y.swap(ynew);
        k1.swap(k7);
    }
    if (base.chart_end != chart) {
        y = state_to_chart(m, chart, y, base.chart_end, n, base.with_frame);
        chart = base.chart_end;
    }
    seg.chart_end = chart;
    seg.y_end = y;
    return seg;
}

inline GeodesicSegment shoot_state(const Manifold& m, int chart0, const StateVec& y0,
                                   double t_start, double duration, bool with_frame,
                                   const ShootOptions& opts) {
    const int n = m.dim();
    GeodesicSegment seg;
    seg.manifold = &m;
    seg.n = n;
    seg.with_frame = with_frame;
    seg.t_start = t_start;
    seg.duration = duration;
    seg.chart_start = chart0;
    seg.y_begin = y0;

    const bool zero_vel = y0.segment(n, n).isZero(0.0);
    if (duration <= 0.0) {
        seg.chart_end = chart0;
        seg.y_end = y0;
        return seg;
    }
    if ((m.flat_chart() && !opts.force_ode) || zero_vel) {
        // Straight line (or constant point): exact, one linear piece.
        DensePiece p;
        p.t0 = t_start;
        p.h = duration;
        p.chart = chart0;
        p.r1 = y0;
        StateVec f = StateVec::Zero(y0.size());
        f.head(n) = y0.segment(n, n);
        p.r2 = duration * f;
        p.r3 = StateVec::Zero(y0.size());
        p.r4 = p.r3;
        p.r5 = p.r3;
        seg.pieces.push_back(std::move(p));
        seg.chart_end = chart0;
        seg.y_end = seg.y_begin + seg.pieces.back().r2;
        return seg;
    }

    int chart = chart0;
    GeodesicRhs rhs{&m, &chart, n, with_frame};
    Dopri5<GeodesicRhs> stepper(rhs, t_start, y0, t_start + duration, opts.ode);
    DensePiece piece;
    while (!stepper.done()) {
        stepper.step(piece);
        piece.chart = chart;
        seg.pieces.push_back(piece);
        ChartPoint x{chart, Vec(stepper.y().head(n))};
        const int pref = m.preferred_chart(x);
        if (pref != chart) {
            const StateVec ynew = state_to_chart(m, chart, stepper.y(), pref, n, with_frame);
            chart = pref;
            stepper.reset_state(ynew);
        }
    }
    seg.chart_end = chart;
    seg.y_end = stepper.y();
    return seg;
}

}  // namespace detail

/// Shoot the geodesic from x with initial velocity v for duration tau.
inline GeodesicSegment geodesic_shoot(const Manifold& m, const ChartPoint& x,
                                      const TangentVec& v, double tau,
                                      const ShootOptions& opts = {}) {
    m.require_domain(x);
    if (tau < 0) throw UsageError("geodesic_shoot: negative duration");
    if (v.base.chart != x.chart || (v.base.coords - x.coords).cwiseAbs().maxCoeff() > 1e-9)
        throw UsageError("geodesic_shoot: velocity not based at x");
    const int n = m.dim();
    StateVec y0(2 * n);
    y0.head(n) = x.coords;
    y0.segment(n, n) = v.components;
    return detail::shoot_state(m, x.chart, y0, 0.0, tau, /*with_frame=*/false, opts);
}

/// Parallel transport of w (based at seg start) along seg, by integrating the
/// transport ODE against the segment's dense output. Independent of the frame
/// block the segment may carry.
inline TangentVec parallel_transport(const Manifold& m, const GeodesicSegment& seg,
                                     const TangentVec& w, const OdeOptions& opts = {}) {
    const int n = m.dim();
    if (w.base.chart != seg.chart_start ||
        (w.base.coords - seg.y_begin.head(n)).cwiseAbs().maxCoeff() > 1e-9)
        throw UsageError("parallel_transport: vector not based at segment start");
    StateVec wc(n);
    wc = w.components;
    for (const DensePiece& p : seg.pieces) {
        if (p.h <= 0) continue;
        struct TransportRhs {
            const Manifold* m;
            const DensePiece* p;
            int n;
            void operator()(double t, const StateVec& y, StateVec& dy) const {
                StateVec s;
                p->eval(t, s);
                ChartPoint x{p->chart, Vec(s.head(n))};
                Christoffel gm;
                m->christoffel(x, gm);
                dy.resize(n);
                for (int k = 0; k < n; ++k) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j)
                            acc += gm.at(k, i, j) * s[n + i] * y[j];
                    dy[k] = -acc;
                }
            }
        };
        TransportRhs rhs{&m, &p, n};
        Dopri5<TransportRhs> stepper(rhs, p.t0, wc, p.t0 + p.h, opts);
        DensePiece scratch;
        while (!stepper.done()) stepper.step(scratch);
        wc = stepper.y();
        // If the next piece lives in another chart, convert at the junction.
        const DensePiece* next = (&p == &seg.pieces.back()) ? nullptr : (&p + 1);
        if (next && next->chart != p.chart) {
            StateVec s;
            p.eval(p.t0 + p.h, s);
            ChartPoint xj{p.chart, Vec(s.head(n))};
            wc = m.transition_jacobian(xj, next->chart) * Vec(wc);
        }
    }
    return TangentVec{seg.end_point(), Vec(wc)};
}

}  // namespace pathint
