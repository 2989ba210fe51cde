#pragma once

/**
 * @file integrate.hpp
 * @brief Adaptive Dormand-Prince 5(4) integration with dense output.
 *
 * Every flow in the toolkit is produced here: plain planar flows, flows
 * coupled to the variational equation (state + fundamental matrix), and the
 * inhomogeneous variational systems used to evaluate boundary fields. The
 * result of an integration is an immutable Trajectory that can be evaluated
 * at any time in its span through the free 4th-order continuous extension of
 * the method.
 *
 * Perturbations are only assumed continuous, so the controller never relies
 * on smoothness beyond what the error estimate reports. Known kink times can
 * be passed as mandatory step points; the integrator then lands on them
 * exactly and never differences across them.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace cyclepersist {

template <std::size_t N>
using StateN = std::array<double, N>;

struct IntegrationOptions {
    double tol = 1e-10;                   ///< per-step local error (abs and rel)
    std::vector<double> mandatory_times;  ///< step points the integrator must hit
    std::size_t max_steps = 5'000'000;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    // dense output
    static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                            d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                            d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

template <std::size_t N>
bool all_finite(const StateN<N>& y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Dense solution of an ODE over [t0, t1] (or [t1, t0] for backward runs).
template <std::size_t N>
class Trajectory {
public:
    struct Segment {
        double t_start;
        double h;  // signed step
        std::array<StateN<N>, 5> coeff;
        StateN<N> end;
    };

    Trajectory(double t0, double t1, StateN<N> start, double tol)
        : t0_(t0), t1_(t1), start_(start), tol_(tol) {}

    double t0() const { return t0_; }
    double t1() const { return t1_; }
    double tol() const { return tol_; }
    double direction() const { return t1_ >= t0_ ? 1.0 : -1.0; }
    const std::vector<Segment>& segments() const { return segments_; }
    const StateN<N>& front() const { return start_; }
    const StateN<N>& back() const { return segments_.empty() ? start_ : segments_.back().end; }

    bool covers(double t) const {
        const double lo = std::min(t0_, t1_), hi = std::max(t0_, t1_);
        const double slack = 1e-12 * (1.0 + hi - lo);
        return t >= lo - slack && t <= hi + slack;
    }

    StateN<N> operator()(double t) const {
        if (!covers(t)) {
            throw std::out_of_range("trajectory evaluated at t=" + std::to_string(t) +
                                    " outside [" + std::to_string(std::min(t0_, t1_)) + ", " +
                                    std::to_string(std::max(t0_, t1_)) + "]");
        }
        if (segments_.empty()) return start_;
        const double dir = direction();
        const double u = dir * (t - t0_);
        // first segment whose start lies beyond u, minus one
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), u);
        std::size_t i = it == offsets_.begin() ? 0 : static_cast<std::size_t>(it - offsets_.begin()) - 1;
        if (i >= segments_.size()) i = segments_.size() - 1;
        const Segment& s = segments_[i];
        if (t == s.t_start) return s.coeff[0];
        if (t == s.t_start + s.h) return s.end;
        double th = (t - s.t_start) / s.h;
        th = std::clamp(th, 0.0, 1.0);
        const double th1 = 1.0 - th;
        StateN<N> out;
        for (std::size_t k = 0; k < N; ++k) {
            out[k] = s.coeff[0][k] +
                     th * (s.coeff[1][k] +
                           th1 * (s.coeff[2][k] + th * (s.coeff[3][k] + th1 * s.coeff[4][k])));
        }
        return out;
    }

    /// First two components, i.e. the planar state for joint trajectories.
    Vec2 point(double t) const {
        static_assert(N >= 2);
        const auto y = (*this)(t);
        return {y[0], y[1]};
    }

    /// Accepted step end points, including t0.
    std::vector<double> step_times() const {
        std::vector<double> ts;
        ts.reserve(segments_.size() + 1);
        ts.push_back(t0_);
        for (const auto& s : segments_) ts.push_back(s.t_start + s.h);
        return ts;
    }

    void push(Segment s) {
        offsets_.push_back(direction() * (s.t_start - t0_));
        segments_.push_back(std::move(s));
    }

private:
    double t0_, t1_;
    StateN<N> start_;
    double tol_;
    std::vector<Segment> segments_;
    std::vector<double> offsets_;
};

/// Integrate y' = f(t, y) from (t0, y0) to t1 with Dormand-Prince 5(4).
template <std::size_t N, class Rhs>
Trajectory<N> integrate(Rhs&& f, double t0, const StateN<N>& y0, double t1,
                        const IntegrationOptions& opt = {}) {
    using detail::Dopri5;
    if (!(opt.tol >= 1e-13 && opt.tol <= 1e-3)) {
        throw std::invalid_argument("integration tolerance out of range: " + std::to_string(opt.tol));
    }
    if (!detail::all_finite<N>(y0)) throw NumericalError("non-finite initial state");

    Trajectory<N> traj(t0, t1, y0, opt.tol);
    if (t1 == t0) return traj;

    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double atol = opt.tol, rtol = opt.tol;

    std::vector<double> stops;
    for (double m : opt.mandatory_times) {
        if (dir * (m - t0) > 0.0 && dir * (t1 - m) > 0.0) stops.push_back(m);
    }
    std::sort(stops.begin(), stops.end(), [dir](double a, double b) { return dir * a < dir * b; });
    stops.push_back(t1);
    std::size_t next_stop = 0;

    auto eval = [&f](double t, const StateN<N>& y) {
        StateN<N> d = f(t, y);
        if (!detail::all_finite<N>(d)) {
            throw NumericalError("non-finite field value at t=" + std::to_string(t));
        }
        return d;
    };

    auto err_norm = [&](const StateN<N>& y, const StateN<N>& yn, const StateN<N>& e) {
        double acc = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double sc = atol + rtol * std::max(std::abs(y[k]), std::abs(yn[k]));
            acc += (e[k] / sc) * (e[k] / sc);
        }
        return std::sqrt(acc / static_cast<double>(N));
    };

    double t = t0;
    StateN<N> y = y0;
    StateN<N> k1 = eval(t, y);

    // Initial step (Hairer & Wanner, II.4).
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double sc = atol + rtol * std::abs(y[k]);
            d0 += (y[k] / sc) * (y[k] / sc);
            d1 += (k1[k] / sc) * (k1[k] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1 = std::sqrt(d1 / N);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, std::abs(t1 - t0));
        StateN<N> y1;
        for (std::size_t k = 0; k < N; ++k) y1[k] = y[k] + dir * h0 * k1[k];
        const StateN<N> f1 = eval(t + dir * h0, y1);
        double d2 = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double sc = atol + rtol * std::abs(y[k]);
            d2 += ((f1[k] - k1[k]) / sc) * ((f1[k] - k1[k]) / sc);
        }
        d2 = std::sqrt(d2 / N) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min(100.0 * h0, h1);
    }

    std::size_t steps = 0;
    bool last_rejected = false;
    StateN<N> k2, k3, k4, k5, k6, k7, ytmp, ynew, errv;

    while (dir * (t1 - t) > 0.0) {
        if (++steps > opt.max_steps) {
            throw NumericalError("step budget exhausted at t=" + std::to_string(t));
        }
        const double target = stops[next_stop];
        bool hits_stop = false;
        if (h >= std::abs(target - t) * (1.0 - 1e-12)) {
            h = std::abs(target - t);
            hits_stop = true;
        }
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
            throw NumericalError("step size underflow at t=" + std::to_string(t) +
                                 " (stiffness or blow-up)");
        }
        const double hs = dir * h;

        for (std::size_t k = 0; k < N; ++k) ytmp[k] = y[k] + hs * Dopri5::a21 * k1[k];
        k2 = eval(t + Dopri5::c2 * hs, ytmp);
        for (std::size_t k = 0; k < N; ++k)
            ytmp[k] = y[k] + hs * (Dopri5::a31 * k1[k] + Dopri5::a32 * k2[k]);
        k3 = eval(t + Dopri5::c3 * hs, ytmp);
        for (std::size_t k = 0; k < N; ++k)
            ytmp[k] = y[k] + hs * (Dopri5::a41 * k1[k] + Dopri5::a42 * k2[k] + Dopri5::a43 * k3[k]);
        k4 = eval(t + Dopri5::c4 * hs, ytmp);
        for (std::size_t k = 0; k < N; ++k)
            ytmp[k] = y[k] + hs * (Dopri5::a51 * k1[k] + Dopri5::a52 * k2[k] + Dopri5::a53 * k3[k] +
                                   Dopri5::a54 * k4[k]);
        k5 = eval(t + Dopri5::c5 * hs, ytmp);
        for (std::size_t k = 0; k < N; ++k)
            ytmp[k] = y[k] + hs * (Dopri5::a61 * k1[k] + Dopri5::a62 * k2[k] + Dopri5::a63 * k3[k] +
                                   Dopri5::a64 * k4[k] + Dopri5::a65 * k5[k]);
        const double t_new = hits_stop ? target : t + hs;
        k6 = eval(t + hs, ytmp);
        for (std::size_t k = 0; k < N; ++k)
            ynew[k] = y[k] + hs * (Dopri5::a71 * k1[k] + Dopri5::a73 * k3[k] + Dopri5::a74 * k4[k] +
                                   Dopri5::a75 * k5[k] + Dopri5::a76 * k6[k]);
        k7 = eval(t_new, ynew);
        for (std::size_t k = 0; k < N; ++k)
            errv[k] = hs * (Dopri5::e1 * k1[k] + Dopri5::e3 * k3[k] + Dopri5::e4 * k4[k] +
                            Dopri5::e5 * k5[k] + Dopri5::e6 * k6[k] + Dopri5::e7 * k7[k]);
        const double err = err_norm(y, ynew, errv);

        if (err <= 1.0) {
            typename Trajectory<N>::Segment seg;
            seg.t_start = t;
            seg.h = t_new - t;
            for (std::size_t k = 0; k < N; ++k) {
                const double ydiff = ynew[k] - y[k];
                const double bspl = hs * k1[k] - ydiff;
                seg.coeff[0][k] = y[k];
                seg.coeff[1][k] = ydiff;
                seg.coeff[2][k] = bspl;
                seg.coeff[3][k] = ydiff - hs * k7[k] - bspl;
                seg.coeff[4][k] = hs * (Dopri5::d1 * k1[k] + Dopri5::d3 * k3[k] + Dopri5::d4 * k4[k] +
                                        Dopri5::d5 * k5[k] + Dopri5::d6 * k6[k] + Dopri5::d7 * k7[k]);
            }
            seg.end = ynew;
            traj.push(std::move(seg));
            t = t_new;
            y = ynew;
            k1 = k7;
            if (hits_stop) ++next_stop;
            double fac = err == 0.0 ? 10.0 : 0.9 * std::pow(err, -0.2);
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
            h *= fac;
            last_rejected = false;
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            last_rejected = true;
        }
    }
    return traj;
}

/// Planar flow of an autonomous or time-dependent field; field(t, x) -> Vec2.
template <class Field>
Trajectory<2> flow(Field&& field, const Vec2& start, double t0, double t1,
                   const IntegrationOptions& opt = {}) {
    auto rhs = [&field](double t, const StateN<2>& y) {
        const Vec2 d = field(t, Vec2{y[0], y[1]});
        return StateN<2>{d.x, d.y};
    };
    return integrate<2>(rhs, t0, StateN<2>{start.x, start.y}, t1, opt);
}

/// State x(t) together with the fundamental matrix Y(t) of y' = psi'(x(t)) y,
/// Y(t0) = I. Both are read from one joint dense solution.
class VariationalTrajectory {
public:
    explicit VariationalTrajectory(std::shared_ptr<const Trajectory<6>> joint)
        : joint_(std::move(joint)) {}

    double t0() const { return joint_->t0(); }
    double t1() const { return joint_->t1(); }
    Vec2 state(double t) const { return joint_->point(t); }
    Mat2 fundamental(double t) const {
        const auto y = (*joint_)(t);
        // column-major storage after the state
        return {y[2], y[4], y[3], y[5]};
    }
    const Trajectory<6>& joint() const { return *joint_; }

private:
    std::shared_ptr<const Trajectory<6>> joint_;
};

/// Flow of x' = psi(x) coupled with Y' = jac(x) Y.
template <class Field, class Jacobian>
VariationalTrajectory flow_with_variational(Field&& psi, Jacobian&& jac, const Vec2& start,
                                            double t0, double t1,
                                            const IntegrationOptions& opt = {}) {
    auto rhs = [&](double, const StateN<6>& y) {
        const Vec2 x{y[0], y[1]};
        const Vec2 d = psi(x);
        const Mat2 j = jac(x);
        if (!is_finite(j)) throw NumericalError("Jacobian evaluation failed (non-finite)");
        const Mat2 Y{y[2], y[4], y[3], y[5]};
        const Mat2 dY = j * Y;
        return StateN<6>{d.x, d.y, dY.a11, dY.a21, dY.a12, dY.a22};
    };
    const StateN<6> y0{start.x, start.y, 1.0, 0.0, 0.0, 1.0};
    return VariationalTrajectory(std::make_shared<const Trajectory<6>>(integrate<6>(rhs, t0, y0, t1, opt)));
}

struct Crossing {
    double t;
    int direction;  ///< +1 when g goes from negative to positive
};

/// Sign changes of g along a trajectory inside [lo, hi], refined by bisection
/// on the dense output. g takes the planar point (Vec2) or the full state.
template <std::size_t N, class G>
std::vector<Crossing> find_event(const Trajectory<N>& traj, G&& g, double lo, double hi,
                                 int samples_per_step = 4) {
    if (lo > hi) std::swap(lo, hi);
    auto value = [&](double t) -> double {
        if constexpr (std::is_invocable_v<G, Vec2>) {
            return g(traj.point(t));
        } else {
            return g(traj(t));
        }
    };

    std::vector<double> ts;
    {
        auto steps = traj.step_times();
        std::sort(steps.begin(), steps.end());
        ts.push_back(lo);
        for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
            for (int j = 0; j < samples_per_step; ++j) {
                const double s = steps[i] + (steps[i + 1] - steps[i]) * j / samples_per_step;
                if (s > lo && s < hi) ts.push_back(s);
            }
        }
        ts.push_back(hi);
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    }

    std::vector<Crossing> out;
    std::vector<double> gv(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) gv[i] = value(ts[i]);

    auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const int s0 = sgn(gv[i]), s1 = sgn(gv[i + 1]);
        if (s0 == 0) {
            // exact zero on a sample: report once, direction from neighbours
            int before = 0;
            for (std::size_t j = i; j-- > 0;) {
                if (sgn(gv[j]) != 0) { before = sgn(gv[j]); break; }
            }
            int after = 0;
            for (std::size_t j = i + 1; j < ts.size(); ++j) {
                if (sgn(gv[j]) != 0) { after = sgn(gv[j]); break; }
            }
            if (i == 0 && after != 0) {
                out.push_back({ts[i], after});
            } else if (before != 0 && after != 0 && before != after) {
                out.push_back({ts[i], after});
            }
            continue;
        }
        if (s1 == 0 || s0 == s1) continue;
        double a = ts[i], b = ts[i + 1];
        double ga = gv[i];
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
            const double m = 0.5 * (a + b);
            const double gm = value(m);
            if (gm == 0.0) { a = b = m; break; }
            if (sgn(gm) == sgn(ga)) { a = m; ga = gm; } else { b = m; }
        }
        out.push_back({0.5 * (a + b), s1});
    }
    // a zero that sits exactly on the last sample
    if (ts.size() >= 2 && sgn(gv.back()) == 0) {
        int before = 0;
        for (std::size_t j = ts.size() - 1; j-- > 0;) {
            if (sgn(gv[j]) != 0) { before = sgn(gv[j]); break; }
        }
        if (before != 0) out.push_back({ts.back(), -before});
    }
    return out;
}

}  // namespace cyclepersist
