#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathint/errors.hpp"
#include "pathint/linalg.hpp"

namespace pathint {

struct OdeOptions {
    double atol = 1e-10;
    double rtol = 1e-9;
    long max_steps = 200000;
    double initial_step = 0.0;  // 0 = automatic
};

/// One accepted step of the integrator together with its interpolation
/// polynomial. contd5-style continuous extension:
///   y(t0 + th*h) = r1 + th*(r2 + (1-th)*(r3 + th*(r4 + (1-th)*r5)))
/// A piece with r3 = r4 = r5 = 0 is an exact linear segment.
struct DensePiece {
    double t0 = 0.0, h = 0.0;
    int chart = 0;
    StateVec r1, r2, r3, r4, r5;

    void eval(double t, StateVec& out) const {
        const double th = (t - t0) / h;
        out = r1 + th * (r2 + (1.0 - th) * (r3 + th * (r4 + (1.0 - th) * r5)));
    }
};

namespace detail {

// Dormand-Prince RK5(4)7M tableau and the 4th-order dense-output weights.
namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

struct StepScratch {
    StateVec yt, k2, k3, k4, k5, k6;
};

/// One Dormand-Prince step from (t, y) with FSAL slope k1 given. Fills ynew,
/// k7 = f(t+h, ynew), the dense piece, and (optionally) the embedded error.
template <class Rhs>
void dopri5_step(Rhs& rhs, double t, double h, const StateVec& y, const StateVec& k1,
                 StateVec& ynew, StateVec& k7, DensePiece* piece, StateVec* err,
                 StepScratch& s) {
    using namespace dp;
    s.yt = y + h * (a21 * k1);
    rhs(t + c2 * h, s.yt, s.k2);
    s.yt = y + h * (a31 * k1 + a32 * s.k2);
    rhs(t + c3 * h, s.yt, s.k3);
    s.yt = y + h * (a41 * k1 + a42 * s.k2 + a43 * s.k3);
    rhs(t + c4 * h, s.yt, s.k4);
    s.yt = y + h * (a51 * k1 + a52 * s.k2 + a53 * s.k3 + a54 * s.k4);
    rhs(t + c5 * h, s.yt, s.k5);
    s.yt = y + h * (a61 * k1 + a62 * s.k2 + a63 * s.k3 + a64 * s.k4 + a65 * s.k5);
    rhs(t + h, s.yt, s.k6);
    ynew = y + h * (a71 * k1 + a73 * s.k3 + a74 * s.k4 + a75 * s.k5 + a76 * s.k6);
    rhs(t + h, ynew, k7);
    if (err)
        *err = h * (e1 * k1 + e3 * s.k3 + e4 * s.k4 + e5 * s.k5 + e6 * s.k6 + e7 * k7);
    if (piece) {
        piece->t0 = t;
        piece->h = h;
        piece->r1 = y;
        piece->r2 = ynew - y;
        piece->r3 = h * k1 - piece->r2;
        piece->r4 = piece->r2 - h * k7 - piece->r3;
        piece->r5 = h * (d1 * k1 + d3 * s.k3 + d4 * s.k4 + d5 * s.k5 + d6 * s.k6 + d7 * k7);
    }
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) stepper. The stepper form (rather than a
/// closed integrate loop) lets callers re-express the state between steps,
/// which is how chart switching is handled.
template <class Rhs>
class Dopri5 {
public:
    Dopri5(Rhs rhs, double t0, StateVec y0, double t_end, const OdeOptions& opts)
        : rhs_(std::move(rhs)), t_(t0), t_end_(t_end), y_(std::move(y0)), opts_(opts) {
        rhs_(t_, y_, k1_);
        h_ = opts.initial_step > 0 ? opts.initial_step : initial_step_guess();
    }

    bool done() const { return t_ >= t_end_ - 1e-14 * std::max(1.0, std::abs(t_end_)); }
    double t() const { return t_; }
    const StateVec& y() const { return y_; }

    /// Replace the current state (chart switch); re-evaluates the RHS.
    void reset_state(const StateVec& y) {
        y_ = y;
        rhs_(t_, y_, k1_);
    }

    /// Advance one accepted step; fills `piece` with the dense interpolant.
    void step(DensePiece& piece) {
        const int m = static_cast<int>(y_.size());
        StateVec ynew(m), k7(m), err(m);
        long rejected_in_a_row = 0;
        for (long iter = 0; iter < opts_.max_steps; ++iter) {
            h_ = std::min(h_, t_end_ - t_);
            const double h = h_;
            if (!(h > std::abs(t_) * 1e-15 + 1e-300))
                throw IntegrationError("step size underflow", t_);

            detail::dopri5_step(rhs_, t_, h, y_, k1_, ynew, k7, &piece, &err, scratch_);
            double sum = 0.0;
            for (int i = 0; i < m; ++i) {
                const double sc =
                    opts_.atol + opts_.rtol * std::max(std::abs(y_[i]), std::abs(ynew[i]));
                const double q = err[i] / sc;
                sum += q * q;
            }
            const double enorm = std::sqrt(sum / m);

            if (enorm <= 1.0 ||
                h <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(t_ + h)) {
                t_ += h;
                y_.swap(ynew);
                k1_.swap(k7);  // FSAL
                double fac = 0.9 * std::pow(std::max(enorm, 1e-10), -0.2);
                fac = std::clamp(fac, 0.2, rejected_in_a_row ? 1.0 : 5.0);
                h_ = h * fac;
                return;
            }
            ++rejected_in_a_row;
            h_ = h * std::clamp(0.9 * std::pow(enorm, -0.2), 0.1, 0.9);
        }
        throw IntegrationError("max step count exceeded", t_);
    }

private:
    double initial_step_guess() const {
        const int m = static_cast<int>(y_.size());
        double d0 = 0.0, d1n = 0.0;
        for (int i = 0; i < m; ++i) {
            const double sc = opts_.atol + opts_.rtol * std::abs(y_[i]);
            d0 += (y_[i] / sc) * (y_[i] / sc);
            d1n += (k1_[i] / sc) * (k1_[i] / sc);
        }
        d0 = std::sqrt(d0 / m);
        d1n = std::sqrt(d1n / m);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        return std::min(h0, std::abs(t_end_ - t_));
    }

    Rhs rhs_;
    double t_, t_end_, h_ = 0.0;
    StateVec y_, k1_;
    OdeOptions opts_;
    detail::StepScratch scratch_;
};

}  // namespace pathint
