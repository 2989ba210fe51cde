#pragma once

/**
 * @file cycle.hpp
 * @brief Limit cycle location by Poincare-section shooting.
 *
 * The section is the line through the seed orthogonal to psi(seed). A few
 * first-return iterations bring the section point close to the cycle, then
 * Newton's method on (section coordinate, period) for the return condition
 * Phi_T(p) = p converges quadratically, using the variational matrix for the
 * derivative. The converged cycle is then re-anchored at the point nearest to
 * the seed and shot once more through the section orthogonal to psi there, so
 * the time origin x0(0) does not depend on the tilt of the first section.
 * Repelling cycles are shot in reversed time; the stored orbit is always
 * parameterized in forward time of the original field.
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace cyclepersist {

enum class PointLocation { Inside, Outside, OnBoundary };

inline const char* to_string(PointLocation l) {
    switch (l) {
        case PointLocation::Inside: return "inside";
        case PointLocation::Outside: return "outside";
        case PointLocation::OnBoundary: return "on_boundary";
    }
    return "?";
}

/// Shoelace signed area of a closed polyline (positive = counterclockwise).
inline double signed_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += cross(p, q);
    }
    return 0.5 * a;
}

/// +1 for counterclockwise polylines, -1 for clockwise ones.
inline int orientation_of(const std::vector<Vec2>& poly, double scale = 1.0) {
    const double a = signed_area(poly);
    if (std::abs(a) < 1e-12 * scale * scale) {
        throw HypothesisError("degenerate polyline: signed area is numerically zero");
    }
    return a > 0.0 ? 1 : -1;
}

/// Winding number of a closed polyline around p.
inline int polyline_winding(const std::vector<Vec2>& poly, const Vec2& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 a = poly[i] - p;
        const Vec2 b = poly[(i + 1) % poly.size()] - p;
        total += std::atan2(cross(a, b), dot(a, b));
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

inline double polyline_distance(const std::vector<Vec2>& poly, const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[(i + 1) % poly.size()];
        const Vec2 ab = b - a;
        const double len2 = dot(ab, ab);
        double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        best = std::min(best, norm(a + s * ab - p));
    }
    return best;
}

class LimitCycle {
public:
    LimitCycle(Trajectory<2> orbit, double period, int orientation, double residual, bool shot_backward,
               std::vector<Vec2> polyline, double min_speed, int newton_iterations)
        : orbit_(std::move(orbit)),
          period_(period),
          orientation_(orientation),
          residual_(residual),
          shot_backward_(shot_backward),
          polyline_(std::move(polyline)),
          min_speed_(min_speed),
          newton_iterations_(newton_iterations) {}

    double period() const { return period_; }
    Vec2 anchor() const { return {orbit_.front()[0], orbit_.front()[1]}; }
    int orientation() const { return orientation_; }
    double shooting_residual() const { return residual_; }
    bool shot_backward() const { return shot_backward_; }
    const std::vector<Vec2>& polyline() const { return polyline_; }
    double min_speed() const { return min_speed_; }
    int newton_iterations() const { return newton_iterations_; }
    const Trajectory<2>& orbit() const { return orbit_; }
    double signed_area() const { return cyclepersist::signed_area(polyline_); }

    /// x0(t) for any real t (periodic extension).
    Vec2 at(double t) const {
        double u = std::fmod(t, period_);
        if (u < 0.0) u += period_;
        return orbit_.point(u);
    }

    PointLocation locate(const Vec2& p) const {
        if (polyline_distance(polyline_, p) <= 1e-9 * (1.0 + norm(p))) return PointLocation::OnBoundary;
        return polyline_winding(polyline_, p) != 0 ? PointLocation::Inside : PointLocation::Outside;
    }

    /// True iff p lies in the interior U0. Throws for points on the cycle.
    bool contains(const Vec2& p) const {
        const auto l = locate(p);
        if (l == PointLocation::OnBoundary) {
            throw std::domain_error("point lies on the limit cycle (within 1e-9)");
        }
        return l == PointLocation::Inside;
    }

private:
    Trajectory<2> orbit_;
    double period_;
    int orientation_;
    double residual_;
    bool shot_backward_;
    std::vector<Vec2> polyline_;
    double min_speed_;
    int newton_iterations_;
};

/// Orientation k of the cycle: +1 when the interior is on the left of the
/// parameterization (counterclockwise), -1 otherwise.
inline int orientation(const LimitCycle& cycle) { return cycle.orientation(); }

struct CycleOptions {
    double tol = 1e-13;
    int polyline_samples = 2048;
    int max_newton = 50;
    int max_bootstrap = 40;
    double max_return_time = 200.0;
};

namespace detail {

struct ReturnHit {
    Vec2 point;
    double time;
};

// First crossing of the section <n, x - base> = 0 in the positive direction
// along the flow of dir * psi, starting on the section at p.
inline std::optional<ReturnHit> first_return(const PlanarSystem& sys, double dir, const Vec2& p, const Vec2& base,
                                             const Vec2& n, double t_max, double tol) {
    auto field = [&](double, const Vec2& x) { return dir * sys.psi(x); };
    const double chunk = std::min(t_max, 20.0);
    Vec2 start = p;
    double t_offset = 0.0;
    while (t_offset < t_max) {
        Trajectory<2> traj = flow(field, start, 0.0, chunk, IntegrationOptions{.tol = tol});
        auto crossings = find_event(traj, [&](const Vec2& x) { return dot(n, x - base); }, 0.0, chunk);
        for (const auto& c : crossings) {
            if (c.direction > 0 && t_offset + c.t > 1e-6) {
                return ReturnHit{traj.point(c.t), t_offset + c.t};
            }
        }
        start = traj.point(chunk);
        t_offset += chunk;
        if (norm(start) > 1e8) return std::nullopt;
    }
    return std::nullopt;
}


struct ShotResult {
    Vec2 point;
    double period;
    double residual;
    int iterations;
};

// Newton on (sigma, T) for Phi_T(base + sigma e) = base + sigma e in the flow of dir * psi.
inline ShotResult shoot(const PlanarSystem& sys, double dir, const Vec2& base, const Vec2& e, double sigma,
                        double T, const CycleOptions& opt) {
    auto field = [&sys, dir](const Vec2& x) { return dir * sys.psi(x); };
    auto jac = [&sys, dir](const Vec2& x) { return dir * sys.jacobian(x); };
    const double scale = 1.0 + norm(base);
    const IntegrationOptions iopt{.tol = opt.tol};
    double residual = 0.0;
    double prev_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    for (;; ++iterations) {
        if (iterations >= opt.max_newton) {
            throw NumericalError("limit cycle Newton iteration did not converge in " +
                                 std::to_string(opt.max_newton) + " iterations");
        }
        const Vec2 x = base + sigma * e;
        const auto var = flow_with_variational(field, jac, x, 0.0, T, iopt);
        const Vec2 xT = var.state(T);
        const Vec2 R = xT - x;
        residual = norm(R);
        const Mat2 Y = var.fundamental(T);
        const Vec2 c1 = Y * e - e;
        const Vec2 c2 = field(xT);
        const double det = cross(c1, c2);
        if (std::abs(det) < 1e-9 * (norm(c1) + norm(c2)) * std::max(1.0, norm(c2))) {
            throw HypothesisError(
                "shooting Newton Jacobian is singular: multiplier 1 is not simple (no isolated cycle)");
        }
        if (residual <= 1e-11 * (1.0 + norm(x))) break;
        // integration noise floor reached
        if (residual <= 1e-9 * (1.0 + norm(x)) && residual >= 0.5 * prev_residual) break;
        prev_residual = residual;
        // Solve [c1 c2] (dsigma, dT) = -R
        const double ds = -cross(R, c2) / det;
        const double dT = -cross(c1, R) / det;
        double damp = 1.0;
        const double max_step = 0.5 * scale;
        if (std::abs(ds) > max_step) damp = max_step / std::abs(ds);
        sigma += damp * ds;
        T += damp * dT;
        if (!(T > 0.0) || !std::isfinite(T)) throw NumericalError("limit cycle Newton iteration diverged");
    }
    return {base + sigma * e, T, residual, iterations};
}

// Point of the closed orbit nearest to p (foot of the perpendicular).
template <class Field>
Vec2 closest_point(const Trajectory<2>& orbit, double T, Field&& psi, const Vec2& p) {
    constexpr int samples = 2048;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double d = norm(orbit.point(T * i / samples) - p);
        if (d < best_d) { best_d = d; best = i; }
    }
    auto at = [&](double t) {
        double u = std::fmod(t, T);
        if (u < 0.0) u += T;
        return orbit.point(u);
    };
    auto g = [&](double t) { const Vec2 x = at(t); return dot(psi(x), x - p); };
    double a = T * (best - 1) / samples, b = T * (best + 1) / samples;
    double ga = g(a), gb = g(b);
    if (ga * gb > 0.0) return at(T * best / samples);
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
        const double m = 0.5 * (a + b);
        const double gm = g(m);
        if ((gm > 0.0) == (ga > 0.0)) { a = m; ga = gm; } else { b = m; }
    }
    return at(0.5 * (a + b));
}

}  // namespace detail

/// Locate the isolated limit cycle in whose basin (forward or backward) the seed lies.
inline LimitCycle find_limit_cycle(const PlanarSystem& sys, const Vec2& seed,
                                   std::optional<double> period_guess = std::nullopt,
                                   const CycleOptions& opt = {}) {
    const Vec2 f_seed = sys.psi(seed);
    if (!is_finite(f_seed) || norm(f_seed) < 1e-10 * (1.0 + norm(seed))) {
        throw HypothesisError("degenerate section: psi(seed) vanishes");
    }
    const Vec2 n = f_seed / norm(f_seed);  // section normal
    const Vec2 e = perp(n);                // section direction
    const double scale = 1.0 + norm(seed);
    const double t_max = period_guess ? 3.0 * *period_guess : opt.max_return_time;
    const double boot_tol = std::max(opt.tol, 1e-10);

    // Direction probe: two successive forward returns to the section. If the
    // second step is shorter the cycle attracts forward; otherwise shoot in
    // reversed time. A blow-up while probing counts as "no return".
    auto try_return = [&](double d, const Vec2& from, const Vec2& normal) -> std::optional<detail::ReturnHit> {
        try {
            return detail::first_return(sys, d, from, seed, normal, t_max, boot_tol);
        } catch (const NumericalError&) {
            return std::nullopt;
        }
    };
    double dir = 1.0;
    {
        bool forward_ok = false;
        auto fwd = try_return(1.0, seed, n);
        if (fwd) {
            const Vec2 p1 = seed + dot(fwd->point - seed, e) * e;
            const double d1 = norm(p1 - seed);
            if (d1 < 1e-9 * scale) {
                // seed already on a cycle: the trace of the return-time variational
                // matrix is 1 + rho there
                const auto var = flow_with_variational(sys, seed, 0.0, fwd->time, IntegrationOptions{.tol = boot_tol});
                forward_ok = std::abs(var.fundamental(fwd->time).trace() - 1.0) <= 1.0 + 1e-9;
            } else if (auto fwd2 = try_return(1.0, p1, n)) {
                const Vec2 p2 = seed + dot(fwd2->point - seed, e) * e;
                forward_ok = norm(p2 - p1) < d1;
            }
        }
        if (!forward_ok) {
            if (try_return(-1.0, seed, -n)) {
                dir = -1.0;
            } else if (!fwd) {
                throw NumericalError("no sign-changing return to the section found from the seed (the line through the seed normal to psi may miss the cycle; try a seed closer to it)");
            }
            // neither direction contracts: let Newton decide forward
        }
    }

    // In shooting time the field is dir * psi; keep the section normal aligned with it.
    const Vec2 ns = dir * n;

    // First-return bootstrap.
    Vec2 p = seed;
    double T = period_guess.value_or(0.0);
    for (int it = 0; it < opt.max_bootstrap; ++it) {
        auto hit = detail::first_return(sys, dir, p, seed, ns, t_max, boot_tol);
        if (!hit) throw NumericalError("no sign-changing return to the section found");
        const double step = norm(hit->point - p);
        p = seed + dot(hit->point - seed, e) * e;
        T = hit->time;
        if (step < 1e-7 * scale) break;
    }

    auto shot = detail::shoot(sys, dir, seed, e, dot(p - seed, e), T, opt);

    // Re-anchor at the foot of the perpendicular from the seed to the cycle and
    // shoot once more with the section through that point.
    {
        auto fwd = [&sys](double, const Vec2& x) { return sys.psi(x); };
        Trajectory<2> orbit = flow(fwd, shot.point, 0.0, shot.period, IntegrationOptions{.tol = opt.tol});
        const Vec2 foot = detail::closest_point(orbit, shot.period, [&sys](const Vec2& x) { return sys.psi(x); },
                                                seed);
        const Vec2 nf = sys.psi(foot);
        const Vec2 ef = perp(nf / norm(nf));
        const int iters = shot.iterations;
        shot = detail::shoot(sys, dir, foot, ef, 0.0, shot.period, opt);
        shot.iterations += iters;
    }
    T = shot.period;
    const double residual = shot.residual;
    const int iterations = shot.iterations;
    const IntegrationOptions iopt{.tol = opt.tol};

    if (period_guess && std::abs(T - *period_guess) > 0.3 * *period_guess) {
        throw NumericalError("converged period " + std::to_string(T) + " is not within 30% of the guess " +
                             std::to_string(*period_guess));
    }

    const Vec2 anchor = shot.point;
    Trajectory<2> orbit = flow([&sys](double, const Vec2& x) { return sys.psi(x); }, anchor, 0.0, T, iopt);

    // Smallest-period check: no same-direction passage through the anchor before T.
    {
        const Vec2 na = sys.psi(anchor);
        auto crossings = find_event(orbit, [&](const Vec2& x) { return dot(na, x - anchor); }, 0.0, T);
        for (const auto& c : crossings) {
            if (c.direction > 0 && c.t > 1e-6 * T && c.t < T * (1.0 - 1e-6) &&
                norm(orbit.point(c.t) - anchor) < 1e-6 * (1.0 + norm(anchor))) {
                throw HypothesisError("computed period is not the smallest period (early return at t=" +
                                      std::to_string(c.t) + ")");
            }
        }
    }

    std::vector<Vec2> poly;
    poly.reserve(opt.polyline_samples);
    double min_speed = std::numeric_limits<double>::infinity();
    double radius = 0.0;
    for (int i = 0; i < opt.polyline_samples; ++i) {
        const Vec2 x = orbit.point(T * i / opt.polyline_samples);
        poly.push_back(x);
        min_speed = std::min(min_speed, norm(sys.psi(x)));
        radius = std::max(radius, norm(x - anchor));
    }
    if (!(min_speed > 0.0)) throw HypothesisError("psi vanishes on the computed cycle");
    const int k = orientation_of(poly, radius);
    return LimitCycle(std::move(orbit), T, k, residual, dir < 0.0, std::move(poly), min_speed, iterations);
}

}  // namespace cyclepersist
