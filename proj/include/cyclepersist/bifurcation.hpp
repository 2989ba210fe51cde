#pragma once

/**
 * @file bifurcation.hpp
 * @brief The bifurcation functions f0, f1, zeros of f0, the f1 non-vanishing
 *        condition and the symmetry hypotheses for a two-solution count.
 *
 *   f0(theta)    = int_0^T       <z0(tau), phi(tau - theta, x0(tau), 0)> dtau
 *   f1(theta, s) = int_{s-T}^{s} <z1(tau), phi(tau - theta, x0(tau), 0)> dtau
 *
 * theta and s are in the time units of the cycle. z1 on negative times comes
 * from the Floquet relation z1(tau) = z1(tau + T) / rho*.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "floquet.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace cyclepersist {

/// Raised when f0 vanishes identically: the first-order theory says nothing.
class DegenerateBifurcation : public HypothesisError {
public:
    using HypothesisError::HypothesisError;
};

struct BifurcationSettings {
    int theta_grid = 256;      ///< M, at least 64
    int f1_grid = 512;
    int symmetry_samples = 64;
    QuadratureOptions quadrature{};
};

namespace detail {

inline double reduce_mod(double x, double T) {
    double r = std::fmod(x, T);
    if (r < 0.0) r += T;
    if (r >= T) r = 0.0;
    return r;
}

// Distance between two phases on the circle of length T.
inline double circle_distance(double a, double b, double T) {
    const double d = reduce_mod(a - b, T);
    return std::min(d, T - d);
}

// Kink times of tau -> phi(tau - theta, .) inside [lo, hi].
inline std::vector<double> shifted_kinks(const PlanarSystem& sys, double theta, double lo, double hi) {
    std::vector<double> out = sys.kink_times(lo - theta, hi - theta);
    for (double& t : out) t += theta;
    return out;
}

}  // namespace detail

inline QuadratureResult integrate_f0(const FloquetFrame& frame, double theta, const QuadratureOptions& opt = {}) {
    const PlanarSystem& sys = frame.system();
    const double T = frame.period();
    theta = detail::reduce_mod(theta, T);
    auto integrand = [&](double tau) {
        return dot(frame.z0(tau), sys.phi(tau - theta, frame.x0(tau), 0.0));
    };
    const auto breaks = make_breaks(0.0, T, detail::shifted_kinks(sys, theta, 0.0, T), 8);
    return integrate_adaptive(integrand, breaks, opt, "f0(" + std::to_string(theta) + ")");
}

inline double eval_f0(const FloquetFrame& frame, double theta, const QuadratureOptions& opt = {}) {
    return integrate_f0(frame, theta, opt).value;
}

inline QuadratureResult integrate_f1(const FloquetFrame& frame, double theta, double s,
                                     const QuadratureOptions& opt = {}) {
    const PlanarSystem& sys = frame.system();
    const double T = frame.period();
    theta = detail::reduce_mod(theta, T);
    auto integrand = [&](double tau) { return dot(frame.z1(tau), sys.phi(tau - theta, frame.x0(tau), 0.0)); };
    std::vector<double> interior = detail::shifted_kinks(sys, theta, s - T, s);
    // period boundaries, where the Floquet extension switches branch
    for (double k = std::ceil((s - T) / T); k * T < s; k += 1.0) interior.push_back(k * T);
    // |z1| changes by at most a factor 2 per initial panel
    const double rate = std::abs(frame.adjoint_exponent());
    const double max_len = rate > 0.0 ? std::log(2.0) / rate : 0.0;
    const auto breaks = make_breaks(s - T, s, interior, 8, max_len);
    return integrate_adaptive(integrand, breaks, opt,
                              "f1(" + std::to_string(theta) + ", " + std::to_string(s) + ")");
}

inline double eval_f1(const FloquetFrame& frame, double theta, double s, const QuadratureOptions& opt = {}) {
    return integrate_f1(frame, theta, s, opt).value;
}

struct F0Zero {
    double theta;
    double slope;   ///< central difference, step T/(8M)
    bool simple;
    double value;   ///< f0 at theta (residual)
};

struct F1SignCheck {
    double theta0;
    double margin;             ///< min over s in [0, T] of |f1(theta0, s)|
    double argmin;
    double max_abs;            ///< max over the grid of |f1(theta0, s)|
    double normalized_margin;  ///< margin / max_abs
    bool holds;
    std::vector<double> s_grid;
    std::vector<double> f1_values;
};

struct SymmetryFlags {
    bool antiperiodic = false;
    bool f0_sym = false;
    bool f1_sym = false;
    bool symmetry_applicable = false;
    double antiperiodic_deviation = 0.0;
    double f0_sym_deviation = 0.0;
    double f1_sym_deviation = 0.0;
    std::string reason;  ///< why the symmetry argument does not apply (empty when it is)
};

struct BifurcationProfile {
    double period = 0.0;
    std::vector<double> theta_grid;
    std::vector<double> f0_values;
    double max_abs_f0 = 0.0;
    bool loud_degenerate = false;        ///< f0 vanishes identically
    std::vector<F0Zero> zeros;           ///< sign-changing zeros
    std::vector<F0Zero> degenerate_zeros;  ///< even touches
    std::vector<F1SignCheck> f1_sign;           ///< one per sign-changing zero
    SymmetryFlags symmetry;
};

/// f0 on the grid theta_i = T i / M.
inline std::vector<double> f0_on_grid(const FloquetFrame& frame, int M, const QuadratureOptions& opt = {}) {
    std::vector<double> out(M);
    parallel_for(M, [&](std::size_t i) { out[i] = eval_f0(frame, frame.period() * i / M, opt); });
    return out;
}

namespace detail {

inline F0Zero make_zero(const FloquetFrame& frame, double theta, int M, double max_abs,
                        const QuadratureOptions& opt) {
    const double T = frame.period();
    const double h = T / (8.0 * M);
    const double slope = (eval_f0(frame, theta + h, opt) - eval_f0(frame, theta - h, opt)) / (2.0 * h);
    return {theta, slope, std::abs(slope) > 1e-6 * max_abs / T, eval_f0(frame, theta, opt)};
}

inline void add_unique(std::vector<F0Zero>& zs, const F0Zero& z, double T) {
    for (const auto& e : zs) {
        if (circle_distance(e.theta, z.theta, T) < 1e-8) return;
    }
    zs.push_back(z);
}

}  // namespace detail

/// Zeros of f0 from grid values (as produced by f0_on_grid). Sign changes are
/// refined by bisection; even touches are returned in `degenerate`.
/// Throws DegenerateBifurcation when f0 vanishes identically.
inline std::vector<F0Zero> find_f0_zeros(const FloquetFrame& frame, const std::vector<double>& f0, int M,
                                         std::vector<F0Zero>* degenerate = nullptr,
                                         const QuadratureOptions& opt = {}) {
    if (M < 64) throw std::invalid_argument("f0 zero search needs a grid of at least 64 points");
    if (static_cast<int>(f0.size()) != M) throw std::invalid_argument("f0 grid size mismatch");
    const double T = frame.period();
    double max_abs = 0.0;
    for (double v : f0) max_abs = std::max(max_abs, std::abs(v));
    // scale of the integrand, so the test is meaningful for any phi amplitude
    double scale = 0.0;
    for (int i = 0; i < M; i += std::max(1, M / 16)) scale = std::max(scale, integrate_f0(frame, T * i / M, opt).l1);
    if (max_abs < 1e-12 * std::max(1.0, scale)) {
        throw DegenerateBifurcation(
            "degenerate: f0 vanishes identically (higher-order bifurcation case, out of scope)");
    }

    auto f = [&](double th) { return eval_f0(frame, th, opt); };
    std::vector<F0Zero> zeros;
    for (int i = 0; i < M; ++i) {
        const double a = f0[i], b = f0[(i + 1) % M];
        const double ta = T * i / M, tb = T * (i + 1) / M;
        double theta;
        if (a == 0.0) {
            theta = ta;
        } else if (a * b < 0.0) {
            auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-12; };
            const auto r = boost::math::tools::bisect(f, ta, tb, tol);
            theta = 0.5 * (r.first + r.second);
        } else {
            continue;
        }
        theta = detail::reduce_mod(theta, T);
        if (T - theta < 1e-10) theta = 0.0;
        detail::add_unique(zeros, detail::make_zero(frame, theta, M, max_abs, opt), T);
    }
    std::sort(zeros.begin(), zeros.end(), [](const F0Zero& x, const F0Zero& y) { return x.theta < y.theta; });

    if (degenerate) {
        degenerate->clear();
        for (int i = 0; i < M; ++i) {
            const double l = f0[(i + M - 1) % M], c = f0[i], r = f0[(i + 1) % M];
            if (c == 0.0 || l * c <= 0.0 || c * r <= 0.0) continue;  // sign changes handled above
            if (std::abs(c) > std::abs(l) || std::abs(c) > std::abs(r)) continue;
            if (std::abs(c) > 1e-3 * max_abs) continue;
            const double lo = T * (i - 1) / M, hi = T * (i + 1) / M;
            const auto m = boost::math::tools::brent_find_minima([&](double th) { return std::abs(f(th)); }, lo,
                                                                  hi, 40);
            if (m.second <= 1e-8 * max_abs) {
                F0Zero z = detail::make_zero(frame, detail::reduce_mod(m.first, T), M, max_abs, opt);
                z.simple = false;
                detail::add_unique(*degenerate, z, T);
            }
        }
    }
    return zeros;
}

/// min over s in [0, T] of |f1(theta0, s)| on a grid, refined by Brent's
/// (golden-section with parabolic steps) minimization around the best node.
inline F1SignCheck check_f1_sign(const FloquetFrame& frame, double theta0, int grid = 512,
                          const QuadratureOptions& opt = {}) {
    const double T = frame.period();
    F1SignCheck out{};
    out.theta0 = theta0;
    out.s_grid.resize(grid + 1);
    out.f1_values.resize(grid + 1);
    parallel_for(grid + 1, [&](std::size_t i) {
        out.s_grid[i] = T * i / grid;
        out.f1_values[i] = eval_f1(frame, theta0, out.s_grid[i], opt);
    });
    std::size_t best = 0;
    for (std::size_t i = 0; i <= static_cast<std::size_t>(grid); ++i) {
        out.max_abs = std::max(out.max_abs, std::abs(out.f1_values[i]));
        if (std::abs(out.f1_values[i]) < std::abs(out.f1_values[best])) best = i;
    }
    out.margin = std::abs(out.f1_values[best]);
    out.argmin = out.s_grid[best];
    // a sign change between nodes is a zero regardless of the node values
    for (std::size_t i = 0; i < static_cast<std::size_t>(grid); ++i) {
        if (out.f1_values[i] * out.f1_values[i + 1] < 0.0) {
            auto g = [&](double s) { return eval_f1(frame, theta0, s, opt); };
            auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-12; };
            const auto r = boost::math::tools::bisect(g, out.s_grid[i], out.s_grid[i + 1], tol);
            const double s = 0.5 * (r.first + r.second);
            const double v = std::abs(g(s));
            if (v < out.margin) {
                out.margin = v;
                out.argmin = s;
            }
        }
    }
    const double lo = out.s_grid[best > 0 ? best - 1 : 0];
    const double hi = out.s_grid[std::min<std::size_t>(best + 1, grid)];
    const auto m = boost::math::tools::brent_find_minima(
        [&](double s) { return std::abs(eval_f1(frame, theta0, s, opt)); }, lo, hi, 40);
    if (m.second < out.margin) {
        out.margin = m.second;
        out.argmin = m.first;
    }
    out.normalized_margin = out.max_abs > 0.0 ? out.margin / out.max_abs : 0.0;
    out.holds = out.normalized_margin > 1e-6;
    return out;
}

/// Largest relative deviation of f1(theta, s + T) / f1(theta, s) from rho*
/// over `probes` random (theta, s) in [0, T)^2 (fixed seed).
inline double f1_floquet_relation_deviation(const FloquetFrame& frame, int probes = 20, unsigned seed = 12345,
                                            const QuadratureOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, frame.period());
    double worst = 0.0;
    for (int i = 0; i < probes; ++i) {
        const double th = U(rng), s = U(rng);
        const double a = eval_f1(frame, th, s, opt);
        const double b = eval_f1(frame, th, s + frame.period(), opt);
        const double expect = frame.rho_star() * a;
        worst = std::max(worst, std::abs(b - expect) / std::max(std::abs(expect), 1e-300));
    }
    return worst;
}

/// Symmetry hypotheses. `f0` is the grid from f0_on_grid (size M).
inline SymmetryFlags check_symmetries(const FloquetFrame& frame, const LimitCycle& cycle, const std::vector<double>& f0,
                                      const std::vector<F0Zero>& zeros, int samples = 64,
                                      const QuadratureOptions& opt = {}) {
    const PlanarSystem& sys = frame.system();
    const double T = frame.period();
    SymmetryFlags out;

    // phi(t, xi) = -phi(t + T/2, xi): t on a grid, xi on the cycle and on a box around it
    std::vector<Vec2> xis;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const Vec2& p : cycle.polyline()) {
        xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    for (int j = 0; j < 16; ++j) xis.push_back(cycle.at(T * j / 16));
    const double wx = 0.5 * (xmax - xmin), wy = 0.5 * (ymax - ymin);
    for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) xis.push_back({xmin - wx + 4.0 * wx * a / 4, ymin - wy + 4.0 * wy * b / 4});
    }
    double phi_scale = 0.0, dev = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = T * i / samples;
        for (const Vec2& xi : xis) {
            const Vec2 p = sys.phi(t, xi, 0.0), q = sys.phi(t + 0.5 * T, xi, 0.0);
            phi_scale = std::max(phi_scale, norm(p));
            dev = std::max(dev, norm(p + q));
        }
    }
    out.antiperiodic_deviation = dev;
    out.antiperiodic = dev <= 1e-8 * std::max(1.0, phi_scale);

    // f0(theta) = -f0(theta + T/2)
    const int M = static_cast<int>(f0.size());
    double f0_scale = 0.0;
    dev = 0.0;
    for (int i = 0; i < M; ++i) {
        f0_scale = std::max(f0_scale, std::abs(f0[i]));
        const double other = (M % 2 == 0) ? f0[(i + M / 2) % M] : eval_f0(frame, T * i / M + 0.5 * T, opt);
        dev = std::max(dev, std::abs(f0[i] + other));
    }
    out.f0_sym_deviation = dev;
    out.f0_sym = dev <= 1e-8 * std::max(1.0, f0_scale);

    // f1(theta, T) = -f1(theta + T/2, T)
    const int n1 = 32;
    std::vector<double> a(n1), b(n1);
    parallel_for(n1, [&](std::size_t i) {
        const double th = T * i / n1;
        a[i] = eval_f1(frame, th, T, opt);
        b[i] = eval_f1(frame, th + 0.5 * T, T, opt);
    });
    double f1_scale = 0.0;
    dev = 0.0;
    for (int i = 0; i < n1; ++i) {
        f1_scale = std::max(f1_scale, std::abs(a[i]));
        dev = std::max(dev, std::abs(a[i] + b[i]));
    }
    out.f1_sym_deviation = dev;
    out.f1_sym = dev <= 1e-8 * std::max(1.0, f1_scale);

    // exactly one simple zero in [0, T/2): zeros are counted modulo T/2, so a
    // zero sitting on either end of the half-open interval is counted once
    std::vector<F0Zero> half;
    for (const auto& z : zeros) {
        const bool seen = std::any_of(half.begin(), half.end(), [&](const F0Zero& h) {
            return detail::circle_distance(h.theta, z.theta, 0.5 * T) < 1e-8;
        });
        if (!seen) half.push_back(z);
    }
    if (!out.f0_sym || !out.f1_sym) {
        out.reason = "symmetry hypotheses on f0/f1 fail";
    } else if (half.size() != 1) {
        out.reason = "need exactly one zero of f0 in [0, T/2), found " + std::to_string(half.size());
    } else if (!half.front().simple) {
        out.reason = "the zero of f0 in [0, T/2) is not simple";
    } else if (std::abs(eval_f1(frame, half.front().theta, T, opt)) <= 1e-6 * std::max(1e-300, f1_scale)) {
        out.reason = "f1(theta0, T) vanishes";
    } else {
        out.symmetry_applicable = true;
    }
    return out;
}

/// Full profile: f0 grid, zeros, f1 margins and symmetry flags.
inline BifurcationProfile analyze_bifurcation(const FloquetFrame& frame, const LimitCycle& cycle,
                                              const BifurcationSettings& st = {}) {
    BifurcationProfile p;
    p.period = frame.period();
    const int M = st.theta_grid;
    for (int i = 0; i < M; ++i) p.theta_grid.push_back(p.period * i / M);
    p.f0_values = f0_on_grid(frame, M, st.quadrature);
    for (double v : p.f0_values) p.max_abs_f0 = std::max(p.max_abs_f0, std::abs(v));
    try {
        p.zeros = find_f0_zeros(frame, p.f0_values, M, &p.degenerate_zeros, st.quadrature);
    } catch (const DegenerateBifurcation&) {
        p.loud_degenerate = true;
    }
    for (const auto& z : p.zeros) p.f1_sign.push_back(check_f1_sign(frame, z.theta, st.f1_grid, st.quadrature));
    p.symmetry = check_symmetries(frame, cycle, p.f0_values, p.zeros, st.symmetry_samples, st.quadrature);
    if (p.loud_degenerate) p.symmetry.reason = "f0 vanishes identically";
    return p;
}

}  // namespace cyclepersist
