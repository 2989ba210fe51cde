#pragma once

// T-periodic solutions of the perturbed system x' = psi(x) + eps phi(t, x, eps)
// as fixed points of the period map, their location relative to U0, phase,
// and the distance profile to the cycle measured through transversal sections.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "bifurcation.hpp"
#include "cycle.hpp"
#include "degree.hpp"
#include "errors.hpp"
#include "floquet.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace cyclepersist {

struct PersistOptions {
    double tol = 1e-12;            ///< integration tolerance of the period map
    double residual_tol = 1e-10;   ///< fixed-point residual, times 1 + |xi|
    int max_newton = 60;
    bool broyden = false;          ///< forced secant updates; automatic when phi has kinks
    double dedupe_distance = 1e-6;
    int phase_grid = 256;
    int profile_grid = 128;
    int distance_grid = 256;       ///< orbit-to-cycle (s, t) grid
    bool exact_sections = false;   ///< also cross the flowed section I(t, r)
    QuadratureOptions quadrature{};
};

struct PoincareResult {
    Vec2 value;
    Mat2 jacobian;  ///< central differences; zero when not requested
};

namespace detail {

inline Trajectory<2> perturbed_flow(const PlanarSystem& sys, const Vec2& xi, double eps, double T, double tol) {
    IntegrationOptions io{.tol = tol, .mandatory_times = sys.kink_times(0.0, T)};
    return flow([&](double t, const Vec2& x) { return sys.perturbed(t, x, eps); }, xi, 0.0, T, io);
}

inline Vec2 period_map(const PlanarSystem& sys, const Vec2& xi, double eps, double T, double tol) {
    return perturbed_flow(sys, xi, eps, T, tol).point(T);
}

// Solves A x = b; near-singular A gets a regularized minimum-norm step.
inline Vec2 solve2(const Mat2& A, const Vec2& b) {
    const double s = std::max(A.max_abs(), 1e-300);
    if (std::abs(A.det()) > 1e-14 * s * s) return A.inverse() * b;
    const Mat2 At = A.transpose();
    const double mu = 1e-14 * s * s;
    const Mat2 G = A * At + Mat2{mu, 0.0, 0.0, mu};
    return At * (G.inverse() * b);
}

inline double wrap_phase(double x, double T) { return reduce_mod(x, T); }

}  // namespace detail

/// Time-T map of the perturbed flow and (optionally) its central-difference
/// Jacobian with step 1e-6 (1 + |xi|).
inline PoincareResult poincare_map(const PlanarSystem& sys, const Vec2& xi, double eps, double T,
                                   double tol = 1e-12, bool with_jacobian = true) {
    PoincareResult out{detail::period_map(sys, xi, eps, T, tol), {}};
    if (!with_jacobian) return out;
    const double h = 1e-6 * (1.0 + norm(xi));
    const Vec2 ex{h, 0.0}, ey{0.0, h};
    const Vec2 cx = (detail::period_map(sys, xi + ex, eps, T, tol) - detail::period_map(sys, xi - ex, eps, T, tol)) /
                    (2.0 * h);
    const Vec2 cy = (detail::period_map(sys, xi + ey, eps, T, tol) - detail::period_map(sys, xi - ey, eps, T, tol)) /
                    (2.0 * h);
    out.jacobian = Mat2::from_columns(cx, cy);
    return out;
}

enum class SolutionLocation { Inside, Outside, Straddles };

inline const char* to_string(SolutionLocation l) {
    switch (l) {
        case SolutionLocation::Inside: return "inside";
        case SolutionLocation::Outside: return "outside";
        case SolutionLocation::Straddles: return "straddles";
    }
    return "?";
}

struct ProfilePoint {
    double t = 0.0;
    bool crossed = false;
    double s = 0.0;        ///< s_eps(t) = t - theta_eps(t), unreduced
    double r = 0.0;        ///< signed offset along the section (units of |y1| direction)
    double dist = 0.0;
    double f1 = 0.0;       ///< f1(theta0, t)
    double R = 0.0;        ///< dist / (eps |f1|)
    double predicted = 0.0;  ///< first-order distance eps |f1| |y1(t)| / |1 - 1/rho*|
    bool exact_crossed = false;
    double exact_s = 0.0;
    double exact_r = 0.0;
    double exact_dist = 0.0;
    std::string note;
};

struct DistanceProfile {
    double theta0 = 0.0;
    double r0 = 0.0;  ///< linearized section half-width
    std::vector<ProfilePoint> points;
    int missing = 0;
    double min_R = 0.0, max_R = 0.0;
    double max_error = 0.0;        ///< max_t |dist - predicted|
    double max_shift = 0.0;        ///< max_t |s_eps(t) - (t - theta0)| on the circle
    int exact_crossings = 0;
    double exact_max_deviation = 0.0;  ///< max |dist - exact_dist| over exact crossings
};

struct PeriodicSolution {
    double eps = 0.0;
    double period = 0.0;
    Vec2 xi{};
    std::shared_ptr<const Trajectory<2>> orbit;
    double fixed_point_residual = 0.0;
    int iterations = 0;
    int seed = -1;
    SolutionLocation location = SolutionLocation::Straddles;
    double phase = 0.0;  ///< theta-hat in [0, T)
    std::optional<double> theta0;  ///< matched zero of f0
    DistanceProfile profile;
    double min_cycle_distance = 0.0;  ///< refined min over (s, t) of |x_eps(s) - x0(t)|

    Vec2 at(double s) const {
        double u = std::fmod(s, period);
        if (u < 0.0) u += period;
        return orbit->point(u);
    }
    double rms_norm() const {
        double acc = 0.0;
        const int n = 256;
        for (int i = 0; i < n; ++i) {
            const Vec2 p = at(period * i / n);
            acc += dot(p, p);
        }
        return std::sqrt(acc / n);
    }
};

struct SeedReport {
    Vec2 seed{};
    double theta0 = 0.0;
    double anchor = 0.0;  ///< phase of the cycle point the seed starts from
    double delta = 0.0;   ///< signed offset along y1
    bool converged = false;
    std::vector<double> residual_history;
    std::string failure;
    int solution = -1;    ///< index into the deduplicated list
};

struct SolutionSearch {
    std::vector<PeriodicSolution> solutions;
    std::vector<SeedReport> seeds;
    std::vector<std::string> warnings;
};

class NoPeriodicSolution : public NumericalError {
public:
    NoPeriodicSolution(const std::string& what, std::vector<SeedReport> seeds)
        : NumericalError(what), seeds_(std::move(seeds)) {}
    const std::vector<SeedReport>& seeds() const { return seeds_; }

private:
    std::vector<SeedReport> seeds_;
};

struct NewtonOutcome {
    Vec2 x{};
    bool converged = false;
    int iterations = 0;
    std::vector<double> history;
    std::string failure;
};

/// Damped Newton on P(xi) - xi = 0. With `broyden` the Jacobian is differenced
/// once and then secant-updated, which avoids differencing across kinks of phi.
inline NewtonOutcome newton_fixed_point(const PlanarSystem& sys, Vec2 x, double eps, double T,
                                        const PersistOptions& opt = {}) {
    NewtonOutcome out;
    const bool secant = opt.broyden || sys.has_kinks();
    try {
        PoincareResult pr = poincare_map(sys, x, eps, T, opt.tol, true);
        Mat2 A = pr.jacobian - Mat2::identity();
        Vec2 G = pr.value - x;
        for (int it = 0; it <= opt.max_newton; ++it) {
            const double r = norm(G);
            out.history.push_back(r);
            out.iterations = it;
            if (r <= opt.residual_tol * (1.0 + norm(x))) {
                // a couple of full steps more, kept only while they help
                for (int k = 0; k < 2 && norm(G) > 1e-3 * opt.residual_tol; ++k) {
                    const Vec2 xn = x + detail::solve2(A, -G);
                    const Vec2 Gn = detail::period_map(sys, xn, eps, T, opt.tol) - xn;
                    if (!(norm(Gn) < norm(G))) break;
                    x = xn;
                    G = Gn;
                    out.history.push_back(norm(G));
                }
                out.converged = true;
                out.x = x;
                return out;
            }
            if (it == opt.max_newton) break;
            const Vec2 dx = detail::solve2(A, -G);
            double lambda = 1.0;
            Vec2 xn{}, Gn{};
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls) {
                xn = x + lambda * dx;
                try {
                    Gn = detail::period_map(sys, xn, eps, T, opt.tol) - xn;
                    if (norm(Gn) < (1.0 - 1e-4 * lambda) * r) {
                        accepted = true;
                        break;
                    }
                } catch (const NumericalError&) {
                    // blow-up along the trial step: shorten it
                }
                lambda *= 0.5;
            }
            if (!accepted) {
                out.failure = "line search stalled at residual " + std::to_string(r);
                out.x = x;
                return out;
            }
            if (secant) {
                const Vec2 s = xn - x, y = Gn - G;
                const Vec2 u = (y - A * s) / dot(s, s);
                A = A + Mat2{u.x * s.x, u.x * s.y, u.y * s.x, u.y * s.y};
            } else {
                A = poincare_map(sys, xn, eps, T, opt.tol, true).jacobian - Mat2::identity();
            }
            x = xn;
            G = Gn;
        }
        out.failure = "no convergence in " + std::to_string(opt.max_newton) + " iterations";
    } catch (const NumericalError& e) {
        out.failure = e.what();
    }
    out.x = x;
    return out;
}

struct CurveDistance {
    double distance = 0.0;
    double s = 0.0, t = 0.0;
};

/// min over (s, t) of |a(s) - b(t)| for closed curves with periods Ta, Tb:
/// an n x n grid search, then alternating Brent minimization around the best pair.
template <class A, class B>
CurveDistance min_curve_distance(A&& a, double Ta, B&& b, double Tb, int n = 256) {
    std::vector<Vec2> pa(n), pb(n);
    for (int i = 0; i < n; ++i) {
        pa[i] = a(Ta * i / n);
        pb[i] = b(Tb * i / n);
    }
    CurveDistance best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double d = norm(pa[i] - pb[j]);
            if (d < best.distance) best = {d, Ta * i / n, Tb * j / n};
        }
    }
    const double ha = Ta / n, hb = Tb / n;
    for (int round = 0; round < 8; ++round) {
        const auto ms = boost::math::tools::brent_find_minima(
            [&](double s) { return norm(a(s) - b(best.t)); }, best.s - ha, best.s + ha, 40);
        const auto mt = boost::math::tools::brent_find_minima(
            [&](double t) { return norm(a(ms.first) - b(t)); }, best.t - hb, best.t + hb, 40);
        const double prev = best.distance;
        if (mt.second <= best.distance) best = {mt.second, ms.first, mt.first};
        if (prev - best.distance <= 1e-15 * (1.0 + prev)) break;
    }
    return best;
}

/// Location by unanimous verdict of 256 orbit samples; phase by least squares:
/// theta-hat minimizes the mean of |x_eps(t - theta) - x0(t)|^2.
inline void classify_and_phase(PeriodicSolution& sol, const LimitCycle& cycle, int grid = 256) {
    const double T = sol.period;
    int inside = 0, outside = 0, boundary = 0;
    for (int i = 0; i < grid; ++i) {
        switch (cycle.locate(sol.at(T * i / grid))) {
            case PointLocation::Inside: ++inside; break;
            case PointLocation::Outside: ++outside; break;
            case PointLocation::OnBoundary: ++boundary; break;
        }
    }
    if (inside == grid) {
        sol.location = SolutionLocation::Inside;
    } else if (outside == grid) {
        sol.location = SolutionLocation::Outside;
    } else {
        sol.location = SolutionLocation::Straddles;
    }

    std::vector<Vec2> x0(grid);
    for (int i = 0; i < grid; ++i) x0[i] = cycle.at(T * i / grid);
    auto J = [&](double theta) {
        double acc = 0.0;
        for (int i = 0; i < grid; ++i) {
            const Vec2 d = sol.at(T * i / grid - theta) - x0[i];
            acc += dot(d, d);
        }
        return acc / grid;
    };
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int j = 0; j < grid; ++j) {
        const double v = J(T * j / grid);
        if (v < best_val) {
            best_val = v;
            best = j;
        }
    }
    const double h = T / grid;
    const auto m = boost::math::tools::brent_find_minima(J, T * best / grid - h, T * best / grid + h, 40);
    sol.phase = detail::wrap_phase(m.first, T);
    if (T - sol.phase < 1e-9) sol.phase = 0.0;
}

namespace detail {

struct Crossing1 {
    bool found = false;
    double s = 0.0;
};

// Root of g nearest to `center` inside [center - T/2, center + T/2], from 64
// samples plus bisection. Non-finite samples never bracket a root.
template <class G>
Crossing1 nearest_root(G&& g, double center, double T, int samples = 64) {
    const double lo = center - 0.5 * T;
    std::vector<double> s(samples + 1), v(samples + 1);
    for (int i = 0; i <= samples; ++i) {
        s[i] = lo + T * i / samples;
        v[i] = g(s[i]);
    }
    Crossing1 out;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        if (!std::isfinite(v[i]) || !std::isfinite(v[i + 1])) continue;
        double root;
        if (v[i] == 0.0) {
            root = s[i];
        } else if (v[i] * v[i + 1] < 0.0) {
            auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * (1.0 + std::abs(a)); };
            const auto r = boost::math::tools::bisect(g, s[i], s[i + 1], tol);
            root = 0.5 * (r.first + r.second);
        } else {
            continue;
        }
        if (std::abs(root - center) < best) {
            best = std::abs(root - center);
            out = {true, root};
        }
    }
    return out;
}

}  // namespace detail

/// Section crossing at phase t: x_eps(s) on the line through x0(t) orthogonal
/// to z0(t) (spanned by y1(t)), s searched in [t - theta_hat -+ T/2].
inline ProfilePoint section_point(const PeriodicSolution& sol, const FloquetFrame& frame, double theta0, double t,
                                  double r0, bool exact, const PersistOptions& opt = {}) {
    ProfilePoint p;
    p.t = t;
    const double T = frame.period();
    const Vec2 x0 = frame.x0(t), z0 = frame.z0(t), y1 = frame.y1(t);
    const Vec2 n = y1 / norm(y1);
    const double center = t - sol.phase;
    auto g = [&](double s) { return dot(z0, sol.at(s) - x0); };
    const auto c = detail::nearest_root(g, center, T);
    p.f1 = eval_f1(frame, theta0, t, opt.quadrature);
    p.predicted = sol.eps * std::abs(p.f1) * norm(y1) / std::abs(1.0 - 1.0 / frame.rho_star());
    if (c.found) {
        const Vec2 d = sol.at(c.s) - x0;
        p.r = dot(n, d);
        if (std::abs(p.r) <= r0) {
            p.crossed = true;
            p.s = c.s;
            p.dist = norm(d);
            p.R = p.f1 != 0.0 ? p.dist / (sol.eps * std::abs(p.f1)) : std::numeric_limits<double>::infinity();
        } else {
            p.note = "crossing outside the section half-width";
        }
    } else {
        p.note = "no crossing in window";
    }

    if (exact) {
        // I(t, r) = flow_T(x0(t) + r zperp/|zperp|): pull x_eps(s) back by T and
        // ask for it to land on the normal line through x0(t)
        const PlanarSystem& sys = frame.system();
        const Vec2 nz = perp(z0) / norm(z0);
        auto pull = [&](double s) -> std::optional<Vec2> {
            try {
                IntegrationOptions io{.tol = opt.tol, .max_steps = 200000};
                return flow([&](double, const Vec2& x) { return sys.psi(x); }, sol.at(s), T, 0.0, io).point(0.0);
            } catch (const NumericalError&) {
                return std::nullopt;
            }
        };
        auto ge = [&](double s) {
            const auto q = pull(s);
            return q ? dot(z0, *q - x0) : std::numeric_limits<double>::quiet_NaN();
        };
        const auto ce = detail::nearest_root(ge, center, T);
        if (ce.found) {
            const auto q = pull(ce.s);
            const double r = q ? dot(nz, *q - x0) : std::numeric_limits<double>::infinity();
            if (std::abs(r) <= 1.0) {
                p.exact_crossed = true;
                p.exact_s = ce.s;
                p.exact_r = r;
                p.exact_dist = norm(sol.at(ce.s) - x0);
            }
        }
        if (!p.exact_crossed) p.note += p.note.empty() ? "no exact-section crossing" : "; no exact-section crossing";
    }
    return p;
}

/// Distance profile on a grid of phases t.
inline DistanceProfile distance_profile(const PeriodicSolution& sol, const FloquetFrame& frame, double theta0,
                                        const PersistOptions& opt = {}) {
    const double T = frame.period();
    if (detail::circle_distance(sol.phase, theta0, T) >= T / 8.0) {
        throw HypothesisError("phase mismatch: theta-hat " + std::to_string(sol.phase) + " is not within T/8 of theta0 " +
                              std::to_string(theta0));
    }
    DistanceProfile prof;
    prof.theta0 = theta0;
    const int n = opt.profile_grid;
    std::vector<double> scale(n);
    parallel_for(n, [&](std::size_t i) {
        const double t = T * i / n;
        scale[i] = std::abs(eval_f1(frame, theta0, t, opt.quadrature)) * norm(frame.y1(t));
    });
    prof.r0 = std::min(1.0, 10.0 * sol.eps * *std::max_element(scale.begin(), scale.end()));

    prof.points.resize(n);
    parallel_for(n, [&](std::size_t i) {
        prof.points[i] = section_point(sol, frame, theta0, T * i / n, prof.r0, opt.exact_sections, opt);
    });
    prof.min_R = std::numeric_limits<double>::infinity();
    prof.max_R = 0.0;
    for (const auto& p : prof.points) {
        if (!p.crossed) {
            ++prof.missing;
            continue;
        }
        prof.min_R = std::min(prof.min_R, p.R);
        prof.max_R = std::max(prof.max_R, p.R);
        prof.max_error = std::max(prof.max_error, std::abs(p.dist - p.predicted));
        prof.max_shift = std::max(prof.max_shift, detail::circle_distance(p.s, p.t - theta0, T));
        if (p.exact_crossed) {
            ++prof.exact_crossings;
            prof.exact_max_deviation = std::max(prof.exact_max_deviation, std::abs(p.dist - p.exact_dist));
        }
    }
    if (prof.missing == n) prof.min_R = 0.0;
    return prof;
}

/// Min orbit-to-cycle distance; positive verdict iff above eps * margin / 4.
struct SeparationCheck {
    double min_distance = 0.0;
    double s = 0.0, t = 0.0;
    double threshold = 0.0;
    bool holds = false;
};

inline SeparationCheck separation_check(const PeriodicSolution& sol, const LimitCycle& cycle,
                                        double normalized_margin, int grid = 256) {
    const auto d = min_curve_distance([&](double s) { return sol.at(s); }, sol.period,
                                      [&](double t) { return cycle.at(t); }, cycle.period(), grid);
    SeparationCheck c{d.distance, d.s, d.t, sol.eps * normalized_margin / 4.0, false};
    c.holds = c.min_distance > c.threshold;
    return c;
}

/// All T-periodic solutions reachable by Newton from seeds near the zeros of f0.
/// Seeds: x0(a) + delta y1(a)/|y1(a)| for a in {theta0, -theta0},
/// delta in {+-2 eps max|f1| / max|z1|, +-eps}.
inline SolutionSearch find_periodic_solutions(const LimitCycle& cycle, const FloquetFrame& frame,
                                              const BifurcationProfile& profile, double eps,
                                              const DegreeReport* degree = nullptr, const PersistOptions& opt = {}) {
    const PlanarSystem& sys = frame.system();
    const double T = frame.period();
    SolutionSearch out;
    if (degree && !degree->degree_test_applicable) {
        out.warnings.push_back("persistence criterion not met: " + degree->prediction);
    }
    if (profile.zeros.empty()) throw HypothesisError("f0 has no sign-changing zero to seed from");

    double z1_scale = 0.0;
    for (const auto& s : frame.samples()) z1_scale = std::max(z1_scale, norm(s.z1));

    for (std::size_t k = 0; k < profile.zeros.size(); ++k) {
        const double th = profile.zeros[k].theta;
        const double f1max = k < profile.f1_sign.size() ? profile.f1_sign[k].max_abs : 0.0;
        std::vector<double> deltas{2.0 * eps * f1max / z1_scale, eps};
        std::vector<double> anchors{th};
        if (detail::circle_distance(th, -th, T) > 1e-9) anchors.push_back(detail::wrap_phase(-th, T));
        for (double a : anchors) {
            const Vec2 base = frame.x0(a), dir = frame.y1(a) / norm(frame.y1(a));
            for (double d : deltas) {
                for (double sg : {1.0, -1.0}) {
                    SeedReport r;
                    r.theta0 = th;
                    r.anchor = a;
                    r.delta = sg * d;
                    r.seed = base + r.delta * dir;
                    out.seeds.push_back(r);
                }
            }
        }
    }

    std::vector<NewtonOutcome> results(out.seeds.size());
    parallel_for(out.seeds.size(), [&](std::size_t i) {
        results[i] = newton_fixed_point(sys, out.seeds[i].seed, eps, T, opt);
    });

    std::vector<std::pair<Vec2, std::size_t>> found;  // point, first seed
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& r = out.seeds[i];
        r.converged = results[i].converged;
        r.residual_history = results[i].history;
        r.failure = results[i].failure;
        if (!r.converged) continue;
        bool dup = false;
        for (std::size_t j = 0; j < found.size(); ++j) {
            if (norm(found[j].first - results[i].x) <= opt.dedupe_distance) {
                dup = true;
                r.solution = static_cast<int>(j);
                break;
            }
        }
        if (!dup) {
            r.solution = static_cast<int>(found.size());
            found.emplace_back(results[i].x, i);
        }
    }
    if (found.empty()) {
        std::string msg = "no periodic solution converged at eps=" + std::to_string(eps) + ":";
        for (const auto& s : out.seeds) {
            msg += " [seed (" + std::to_string(s.seed.x) + ", " + std::to_string(s.seed.y) + "): " + s.failure + "]";
        }
        throw NoPeriodicSolution(msg, out.seeds);
    }

    std::vector<PeriodicSolution> sols(found.size());
    parallel_for(found.size(), [&](std::size_t j) {
        auto& s = sols[j];
        s.eps = eps;
        s.period = T;
        s.xi = found[j].first;
        s.seed = static_cast<int>(found[j].second);
        s.iterations = results[found[j].second].iterations;
        s.orbit = std::make_shared<const Trajectory<2>>(detail::perturbed_flow(sys, s.xi, eps, T, opt.tol));
        s.fixed_point_residual = norm(s.orbit->point(T) - s.xi);
        classify_and_phase(s, cycle, opt.phase_grid);
        double bestd = std::numeric_limits<double>::infinity();
        for (const auto& z : profile.zeros) {
            const double d = detail::circle_distance(s.phase, z.theta, T);
            if (d < bestd) {
                bestd = d;
                s.theta0 = z.theta;
            }
        }
        if (bestd >= T / 8.0) s.theta0.reset();
    });

    // canonical order: radius-like norm (descending), then phase
    std::vector<std::size_t> order(sols.size());
    std::vector<double> rms(sols.size());
    for (std::size_t j = 0; j < sols.size(); ++j) {
        order[j] = j;
        rms[j] = sols[j].rms_norm();
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (std::abs(rms[a] - rms[b]) > 1e-9) return rms[a] > rms[b];
        return sols[a].phase < sols[b].phase;
    });
    std::vector<int> relabel(sols.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
        relabel[order[j]] = static_cast<int>(j);
        out.solutions.push_back(std::move(sols[order[j]]));
    }
    for (auto& s : out.seeds) {
        if (s.solution >= 0) s.solution = relabel[s.solution];
    }
    return out;
}

struct EpsilonRun {
    double eps = 0.0;
    std::vector<PeriodicSolution> solutions;
    std::vector<SeedReport> seeds;
    std::vector<std::string> warnings;
    std::vector<SeparationCheck> separation;  ///< per solution
    double min_pairwise_distance = std::numeric_limits<double>::infinity();
    bool distinct = true;   ///< pairwise min distance > 10 x max residual
    std::string error;      ///< non-empty when this eps failed
};

struct BranchFit {
    double theta0 = 0.0;
    std::vector<double> eps, max_error, phase_error, max_shift, min_R, max_R;
    double slope = 0.0;          ///< least-squares slope of log max_error vs log eps
    bool phase_converges = false;  ///< |theta-hat - theta0| smaller at the smallest eps (noise 1e-6)
    bool shift_monotone = false;   ///< max_shift non-increasing as eps decreases (noise 1e-6)
    bool R_bracket_stable = false; ///< min/max R within 20% between neighbouring eps
};

struct PersistenceRun {
    std::vector<double> eps_grid;
    std::vector<EpsilonRun> runs;
    std::vector<BranchFit> branches;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// One full sweep over eps: solutions, phases, profiles, distance checks and
/// the convergence fit per matched zero.
inline PersistenceRun run_persistence(const LimitCycle& cycle, const FloquetFrame& frame,
                                      const BifurcationProfile& profile, std::vector<double> eps_grid,
                                      const DegreeReport* degree = nullptr, const PersistOptions& opt = {}) {
    PersistenceRun run;
    std::sort(eps_grid.begin(), eps_grid.end(), std::greater<>());
    run.eps_grid = eps_grid;
    const double T = frame.period();
    for (double eps : eps_grid) {
        EpsilonRun er;
        er.eps = eps;
        try {
            if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
            auto found = find_periodic_solutions(cycle, frame, profile, eps, degree, opt);
            er.seeds = std::move(found.seeds);
            er.warnings = std::move(found.warnings);
            er.solutions = std::move(found.solutions);
            for (auto& s : er.solutions) {
                if (!s.theta0) {
                    er.warnings.push_back("solution with phase " + std::to_string(s.phase) +
                                          " matches no zero of f0 within T/8");
                    continue;
                }
                s.profile = distance_profile(s, frame, *s.theta0, opt);
            }
            double max_res = 0.0;
            for (std::size_t i = 0; i < er.solutions.size(); ++i) {
                auto& s = er.solutions[i];
                max_res = std::max(max_res, s.fixed_point_residual);
                double margin = 0.0;
                for (std::size_t k = 0; k < profile.zeros.size(); ++k) {
                    if (s.theta0 && profile.zeros[k].theta == *s.theta0 && k < profile.f1_sign.size()) {
                        margin = profile.f1_sign[k].normalized_margin;
                    }
                }
                er.separation.push_back(separation_check(s, cycle, margin, opt.distance_grid));
                s.min_cycle_distance = er.separation.back().min_distance;
            }
            for (std::size_t i = 0; i < er.solutions.size(); ++i) {
                for (std::size_t j = i + 1; j < er.solutions.size(); ++j) {
                    const auto& a = er.solutions[i];
                    const auto& b = er.solutions[j];
                    const auto d = min_curve_distance([&](double s) { return a.at(s); }, T,
                                                      [&](double s) { return b.at(s); }, T, opt.distance_grid);
                    er.min_pairwise_distance = std::min(er.min_pairwise_distance, d.distance);
                }
            }
            er.distinct = er.solutions.size() < 2 || er.min_pairwise_distance > 10.0 * max_res;
        } catch (const std::exception& e) {
            er.error = e.what();
        }
        run.runs.push_back(std::move(er));
    }

    for (const auto& z : profile.zeros) {
        BranchFit b;
        b.theta0 = z.theta;
        for (const auto& er : run.runs) {
            for (const auto& s : er.solutions) {
                if (!s.theta0 || *s.theta0 != z.theta || s.profile.points.empty() || s.profile.missing > 0) continue;
                b.eps.push_back(er.eps);
                b.max_error.push_back(s.profile.max_error);
                b.phase_error.push_back(detail::circle_distance(s.phase, z.theta, T));
                b.max_shift.push_back(s.profile.max_shift);
                b.min_R.push_back(s.profile.min_R);
                b.max_R.push_back(s.profile.max_R);
                break;
            }
        }
        if (b.eps.size() >= 2) {
            b.slope = loglog_slope(b.eps, b.max_error);
            const double noise = 1e-6;
            b.phase_converges = b.phase_error.back() < b.phase_error.front() ||
                                std::max(b.phase_error.back(), b.phase_error.front()) <= noise;
            b.shift_monotone = true;
            b.R_bracket_stable = true;
            for (std::size_t i = 1; i < b.eps.size(); ++i) {
                if (b.max_shift[i] > b.max_shift[i - 1] + noise) b.shift_monotone = false;
                if (std::abs(b.min_R[i] / b.min_R[i - 1] - 1.0) > 0.2) b.R_bracket_stable = false;
                if (std::abs(b.max_R[i] / b.max_R[i - 1] - 1.0) > 0.2) b.R_bracket_stable = false;
            }
        } else {
            b.slope = std::numeric_limits<double>::quiet_NaN();
        }
        run.branches.push_back(std::move(b));
    }
    return run;
}

/// Distance at a single phase t* across an eps sequence, for a zero theta0.
/// dist(t*)/eps should shrink when f1(theta0, t*) = 0.
struct VanishingProbe {
    double theta0 = 0.0;
    double t_star = 0.0;
    double f1_at_t_star = 0.0;
    double f1_scale = 0.0;  ///< max |f1(theta0, .)| over one period
    std::vector<double> eps, dist, normalized, ratios;
    bool holds = false;     ///< every ratio of successive dist/eps <= 0.7
    std::string error;
};

inline VanishingProbe vanishing_probe(const LimitCycle& cycle, const FloquetFrame& frame,
                                        const BifurcationProfile& profile, double theta0, double t_star,
                                        std::vector<double> eps_grid, const PersistOptions& opt = {}) {
    VanishingProbe pr;
    pr.theta0 = theta0;
    pr.t_star = t_star;
    pr.f1_at_t_star = eval_f1(frame, theta0, t_star, opt.quadrature);
    for (std::size_t k = 0; k < profile.zeros.size(); ++k) {
        if (detail::circle_distance(profile.zeros[k].theta, theta0, frame.period()) < 1e-6 && k < profile.f1_sign.size()) {
            pr.f1_scale = profile.f1_sign[k].max_abs;
        }
    }
    std::sort(eps_grid.begin(), eps_grid.end(), std::greater<>());
    try {
        for (double eps : eps_grid) {
            const auto found = find_periodic_solutions(cycle, frame, profile, eps, nullptr, opt);
            const PeriodicSolution* match = nullptr;
            for (const auto& s : found.solutions) {
                if (s.theta0 && detail::circle_distance(*s.theta0, theta0, frame.period()) < 1e-6) match = &s;
            }
            if (!match) throw NumericalError("no solution matched to theta0 at eps=" + std::to_string(eps));
            const ProfilePoint p = section_point(*match, frame, *match->theta0, t_star, 1.0, false, opt);
            if (!p.crossed) throw NumericalError("no section crossing at t*: " + p.note);
            pr.eps.push_back(eps);
            pr.dist.push_back(p.dist);
            pr.normalized.push_back(p.dist / eps);
        }
    } catch (const std::exception& e) {
        pr.error = e.what();
        return pr;
    }
    for (std::size_t i = 1; i < pr.normalized.size(); ++i) pr.ratios.push_back(pr.normalized[i] / pr.normalized[i - 1]);
    pr.holds = !pr.ratios.empty() &&
               std::all_of(pr.ratios.begin(), pr.ratios.end(), [](double r) { return r <= 0.7; });
    return pr;
}

}  // namespace cyclepersist
