#pragma once

/**
 * @file degree.hpp
 * @brief The boundary field F(x0(theta)) = f0(theta) xdot0(theta) + f1(theta, theta) y1(theta),
 *        its winding number along the cycle, the closed-form two-zero degree
 *        formula, and the resulting two-solution verdict.
 *
 * The Brouwer degree of F on the interior U0 is k * winding, k the orientation
 * of the cycle (+1 counterclockwise).
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "bifurcation.hpp"
#include "errors.hpp"
#include "floquet.hpp"
#include "integrate.hpp"
#include "parallel.hpp"

namespace cyclepersist {

/// F vanishes somewhere on the boundary: the degree is undefined.
class DegenerateBoundary : public HypothesisError {
public:
    DegenerateBoundary(const std::string& what, double theta) : HypothesisError(what), theta_(theta) {}
    double theta() const { return theta_; }

private:
    double theta_;
};

// ---------------------------------------------------------------------------
// F on the cycle

/// F_s(x0(theta)) = f0(theta) xdot0(theta) + f1(theta, s + theta) y1(theta); s = 0 gives F.
inline Vec2 F_on_cycle(const FloquetFrame& frame, double theta, double s = 0.0, const QuadratureOptions& opt = {}) {
    const double th = detail::reduce_mod(theta, frame.period());
    return eval_f0(frame, th, opt) * frame.xdot0(th) + eval_f1(frame, th, s + th, opt) * frame.y1(th);
}

/// F_s(xi) = eta(T) - eta(0), where q' = psi'(x(t)) q + phi(t, x(t), 0),
/// q(s) = 0, along the unperturbed solution x with x(0) = xi.
inline Vec2 F_s_via_eta(const PlanarSystem& sys, const Vec2& xi, double s, double T, double tol = 1e-11) {
    if (s < 0.0 || s > T) throw std::invalid_argument("F_s_via_eta needs s in [0, T]");
    IntegrationOptions opt{.tol = tol};
    opt.mandatory_times = sys.kink_times(0.0, T);
    const PlanarSystem* psys = &sys;
    const auto base = std::make_shared<const Trajectory<2>>(
        flow([psys](double, const Vec2& x) { return psys->psi(x); }, xi, 0.0, T, opt));
    auto rhs = [psys, base](double t, const Vec2& q) {
        const Vec2 x = base->point(std::clamp(t, 0.0, base->t1()));
        return psys->jacobian(x) * q + psys->phi(t, x, 0.0);
    };
    const Vec2 zero{0.0, 0.0};
    const Vec2 qT = s < T ? flow(rhs, zero, s, T, opt).point(T) : zero;
    const Vec2 q0 = s > 0.0 ? flow(rhs, zero, s, 0.0, opt).point(0.0) : zero;
    return qT - q0;
}

// ---------------------------------------------------------------------------
// winding numbers

struct WindingResult {
    int index = 0;
    double turns = 0.0;       ///< total unwrapped angle / 2 pi
    double residual = 0.0;    ///< |turns - index|
    double min_norm = 0.0;
    std::vector<int> refinement_trace;  ///< sample counts: initial, then after refinement
};

namespace detail {

inline double angle_between(const Vec2& a, const Vec2& b) { return std::atan2(cross(a, b), dot(a, b)); }

}  // namespace detail

/// Winding number of a closed sampled curve (last point need not repeat the
/// first). Every angle increment must stay below pi/2, else the curve is
/// under-resolved and std::domain_error is thrown.
inline WindingResult winding_of_samples(const std::vector<Vec2>& pts) {
    if (pts.size() < 3) throw std::invalid_argument("winding needs at least 3 samples");
    WindingResult r;
    r.min_norm = std::numeric_limits<double>::infinity();
    double max_norm = 0.0;
    for (const Vec2& p : pts) max_norm = std::max(max_norm, norm(p));
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2& a = pts[i];
        const Vec2& b = pts[(i + 1) % pts.size()];
        r.min_norm = std::min(r.min_norm, norm(a));
        if (!(norm(a) > 1e-14 * max_norm) || max_norm == 0.0) {
            throw DegenerateBoundary("curve passes through the origin at sample " + std::to_string(i),
                                     static_cast<double>(i));
        }
        const double d = detail::angle_between(a, b);
        if (std::abs(d) >= 0.5 * std::numbers::pi) {
            throw std::domain_error("angle increment >= pi/2 between samples " + std::to_string(i) +
                                    " and " + std::to_string(i + 1) + "; refine the curve");
        }
        total += d;
    }
    r.turns = total / (2.0 * std::numbers::pi);
    r.index = static_cast<int>(std::lround(r.turns));
    r.residual = std::abs(r.turns - r.index);
    r.refinement_trace = {static_cast<int>(pts.size())};
    return r;
}

/// Winding number of theta -> alpha(theta), theta in [0, T], alpha(0) = alpha(T).
/// Starts from `initial` equispaced samples and bisects every interval whose
/// angle increment reaches pi/2, to at most `max_depth` levels.
/// Throws DegenerateBoundary if alpha vanishes (relative to its maximum) at a sample.
/// The initial grid must not alias: a curve turning ~2 pi between samples
/// looks slow and is not refined.
inline WindingResult winding_index(const std::function<Vec2(double)>& alpha, double T, int initial = 64,
                                   int max_depth = 24, double zero_tol = 1e-9) {
    std::vector<double> th(initial + 1);
    std::vector<Vec2> val(initial + 1);
    parallel_for(initial, [&](std::size_t i) {
        th[i] = T * i / initial;
        val[i] = alpha(th[i]);
    });
    th[initial] = T;
    val[initial] = val[0];

    double max_norm = 0.0;
    for (const Vec2& v : val) max_norm = std::max(max_norm, norm(v));
    WindingResult r;
    r.refinement_trace.push_back(initial);
    if (!(max_norm > 0.0)) throw DegenerateBoundary("field vanishes identically on the boundary", 0.0);
    auto check = [&](double t, const Vec2& v) {
        if (!(norm(v) > zero_tol * max_norm)) {
            throw DegenerateBoundary("field vanishes on the boundary at theta = " + std::to_string(t), t);
        }
    };

    r.min_norm = std::numeric_limits<double>::infinity();
    double total = 0.0;
    int added = 0;
    // depth-first refinement of one interval
    std::function<void(double, const Vec2&, double, const Vec2&, int)> walk =
        [&](double ta, const Vec2& a, double tb, const Vec2& b, int depth) {
            const double d = detail::angle_between(a, b);
            if (std::abs(d) < 0.5 * std::numbers::pi) {
                total += d;
                return;
            }
            if (depth >= max_depth) {
                throw DegenerateBoundary(
                    "winding refinement did not resolve the curve near theta = " + std::to_string(ta), ta);
            }
            const double tm = 0.5 * (ta + tb);
            const Vec2 m = alpha(tm);
            ++added;
            check(tm, m);
            r.min_norm = std::min(r.min_norm, norm(m));
            walk(ta, a, tm, m, depth + 1);
            walk(tm, m, tb, b, depth + 1);
        };
    for (int i = 0; i < initial; ++i) {
        check(th[i], val[i]);
        r.min_norm = std::min(r.min_norm, norm(val[i]));
        walk(th[i], val[i], th[i + 1], val[i + 1], 0);
    }
    if (added > 0) r.refinement_trace.push_back(initial + added);
    r.turns = total / (2.0 * std::numbers::pi);
    r.index = static_cast<int>(std::lround(r.turns));
    r.residual = std::abs(r.turns - r.index);
    return r;
}

// ---------------------------------------------------------------------------
// closed-form degree for two boundary zeros

struct ClosedFormZero {
    double theta;
    int ind;        ///< +1 if f increases through the zero, -1 if it decreases
    int perp_sign;  ///< sign <z(theta)^perp, F(q(theta))>
};

struct ClosedFormResult {
    std::optional<int> degree;
    std::string failed;  ///< which hypothesis failed (empty when applicable)
    std::vector<ClosedFormZero> zeros;
};

/// d = 1 + k/2 * sum_i ind_i * perp_sign_i. The formula is derived for a
/// positively oriented boundary; reversing the parametrization flips every
/// perp sign while keeping ind, hence the factor k.
inline ClosedFormResult closed_form_degree(const std::vector<ClosedFormZero>& zeros, int orientation, bool transversal = true) {
    ClosedFormResult r;
    r.zeros = zeros;
    if (!transversal) {
        r.failed = "transversality: <z, q'> vanishes somewhere on the boundary";
    } else if (zeros.size() != 2) {
        r.failed = "zero count: f must have exactly two zeros, found " + std::to_string(zeros.size());
    } else if (std::abs(zeros[0].ind) != 1 || std::abs(zeros[1].ind) != 1) {
        r.failed = "simple zeros: f is not strictly monotone at a zero";
    } else if (zeros[0].perp_sign == 0 || zeros[0].perp_sign != -zeros[1].perp_sign) {
        r.failed = "sign alternation: <z^perp, F> must have opposite signs at the two zeros";
    } else if (orientation != 1 && orientation != -1) {
        r.failed = "orientation must be +1 or -1";
    } else {
        const int sum = zeros[0].ind * zeros[0].perp_sign + zeros[1].ind * zeros[1].perp_sign;
        r.degree = 1 + orientation * sum / 2;
    }
    return r;
}

/// Boundary data for the closed form: q' and z along the boundary and F on it.
struct BoundaryData {
    std::function<Vec2(double)> qdot;
    std::function<Vec2(double)> z;
    std::function<Vec2(double)> F;
    double period;
    int orientation;
};

/// Samples f = <z, F> on a grid, refines its sign changes by bisection and
/// evaluates the closed form. `simple_tol` is the relative slope threshold.
inline ClosedFormResult closed_form_from_boundary(const BoundaryData& b, int grid = 256, double simple_tol = 1e-6) {
    const double T = b.period;
    std::vector<double> f(grid);
    std::vector<double> transv(grid);
    parallel_for(grid, [&](std::size_t i) {
        const double th = T * i / grid;
        const Vec2 zz = b.z(th);
        f[i] = dot(zz, b.F(th));
        transv[i] = dot(zz, b.qdot(th));
    });
    bool transversal = true;
    for (double v : transv) {
        if (v == 0.0 || (v > 0.0) != (transv[0] > 0.0)) transversal = false;
    }
    double fmax = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    auto fz = [&](double th) { return dot(b.z(th), b.F(th)); };
    std::vector<ClosedFormZero> zeros;
    int touches = 0;
    for (int i = 0; i < grid; ++i) {
        const double a = f[i], c = f[(i + 1) % grid];
        const double ta = T * i / grid, tb = T * (i + 1) / grid;
        double th;
        if (a == 0.0) {
            th = ta;
        } else if (a * c < 0.0) {
            auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-12; };
            const auto r = boost::math::tools::bisect(fz, ta, tb, tol);
            th = 0.5 * (r.first + r.second);
        } else {
            const double l = f[(i + grid - 1) % grid];
            if (std::abs(a) < 1e-9 * fmax && l * a > 0.0 && a * c > 0.0) ++touches;
            continue;
        }
        const double h = T / (8.0 * grid);
        const double slope = (fz(th + h) - fz(th - h)) / (2.0 * h);
        const int ind = std::abs(slope) > simple_tol * fmax / T ? (slope > 0.0 ? 1 : -1) : 0;
        const double p = dot(perp(b.z(th)), b.F(th));
        zeros.push_back({detail::reduce_mod(th, T), ind, p > 0.0 ? 1 : (p < 0.0 ? -1 : 0)});
    }
    if (touches > 0) {
        ClosedFormResult r;
        r.zeros = zeros;
        r.failed = "simple zeros: f touches zero without changing sign";
        return r;
    }
    return closed_form_degree(zeros, b.orientation, transversal);
}

// ---------------------------------------------------------------------------
// verdict

struct EtaSignCheck {
    double theta0;
    double min_norm;     ///< min over sampled s of |F_s(x0(theta0))|
    double max_norm;
    bool sign_constant;  ///< <z1(theta0), F_s> keeps one sign over the samples
    bool holds;
};

struct DegreeReport {
    WindingResult winding;
    int k = 0;
    int dB = 0;
    std::optional<int> closed_form_value;
    std::string closed_form_failed;
    double eta_check_residual = 0.0;  ///< sup over probes of |F_on_cycle - F via eta| / scale
    int psi_degree = 0;               ///< k * winding of psi along the cycle; 1 for a valid cycle
    std::vector<EtaSignCheck> eta_sign;
    bool f1_sign_all = false;
    bool degenerate = false;          ///< F vanishes on the boundary or f0 == 0
    std::string degenerate_reason;
    bool degree_test_applicable = false;
    std::string prediction;
};

struct DegreeSettings {
    int winding_samples = 64;
    int eta_probes = 10;
    int eta_sign_samples = 64;
    unsigned seed = 2024;
    double eta_tol = 1e-11;
    QuadratureOptions quadrature{};
};

/// Sup over `probes` random theta of |F_on_cycle(theta) - F_0 via eta at x0(theta)|,
/// relative to max(1, max |F|).
inline double eta_consistency(const FloquetFrame& frame, int probes, unsigned seed, double tol,
                              const QuadratureOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, frame.period());
    std::vector<double> th(probes);
    for (double& t : th) t = U(rng);
    std::vector<double> diff(probes), mag(probes);
    parallel_for(probes, [&](std::size_t i) {
        const Vec2 a = F_on_cycle(frame, th[i], 0.0, opt);
        const Vec2 b = F_s_via_eta(frame.system(), frame.x0(th[i]), 0.0, frame.period(), tol);
        diff[i] = norm(a - b);
        mag[i] = norm(a);
    });
    const double scale = std::max(1.0, *std::max_element(mag.begin(), mag.end()));
    return *std::max_element(diff.begin(), diff.end()) / scale;
}

inline DegreeReport assess_degree(const FloquetFrame& frame, const LimitCycle& cycle,
                                    const BifurcationProfile& profile, const DegreeSettings& st = {}) {
    DegreeReport rep;
    rep.k = cycle.orientation();
    const double T = frame.period();

    rep.psi_degree = rep.k * winding_index([&](double th) { return frame.xdot0(th); }, T, st.winding_samples).index;

    rep.f1_sign_all = std::all_of(profile.f1_sign.begin(), profile.f1_sign.end(), [](const F1SignCheck& c) { return c.holds; });
    if (profile.loud_degenerate) {
        rep.degenerate = true;
        rep.degenerate_reason = "f0 vanishes identically";
        rep.prediction = "no prediction: first-order bifurcation function is degenerate";
        return rep;
    }
    try {
        rep.winding = winding_index([&](double th) { return F_on_cycle(frame, th, 0.0, st.quadrature); }, T,
                                    st.winding_samples);
    } catch (const DegenerateBoundary& e) {
        rep.degenerate = true;
        rep.degenerate_reason = e.what();
    }
    if (!rep.degenerate) rep.dB = rep.k * rep.winding.index;

    // closed form with z = z0, for which <z, F> = f0 exactly and <z, xdot0> = 1
    std::vector<ClosedFormZero> zs;
    for (const auto& z : profile.zeros) {
        const Vec2 F = F_on_cycle(frame, z.theta, 0.0, st.quadrature);
        const double p = dot(perp(frame.z0(z.theta)), F);
        zs.push_back({z.theta, z.simple ? (z.slope > 0.0 ? 1 : -1) : 0, p > 0.0 ? 1 : (p < 0.0 ? -1 : 0)});
    }
    bool transversal = true;
    for (const auto& s : frame.samples()) {
        if (!(dot(s.z0, s.xdot0) > 0.0)) transversal = false;
    }
    const ClosedFormResult cf = profile.degenerate_zeros.empty()
                                ? closed_form_degree(zs, rep.k, transversal)
                                : ClosedFormResult{std::nullopt, "simple zeros: f0 has a degenerate zero", zs};
    rep.closed_form_value = cf.degree;
    rep.closed_form_failed = cf.failed;

    rep.eta_check_residual = eta_consistency(frame, st.eta_probes, st.seed, st.eta_tol, st.quadrature);

    // nondegeneracy of F_s at the zeros of f0 for s over [0, T]
    for (const auto& z : profile.zeros) {
        EtaSignCheck c{z.theta, std::numeric_limits<double>::infinity(), 0.0, true, false};
        std::vector<Vec2> Fs(st.eta_sign_samples);
        const Vec2 xi = frame.x0(z.theta);
        parallel_for(st.eta_sign_samples, [&](std::size_t j) {
            Fs[j] = F_s_via_eta(frame.system(), xi, T * j / (st.eta_sign_samples - 1), T, st.eta_tol);
        });
        const Vec2 z1 = frame.z1(z.theta);
        int sign0 = 0;
        for (const Vec2& F : Fs) {
            c.min_norm = std::min(c.min_norm, norm(F));
            c.max_norm = std::max(c.max_norm, norm(F));
            const double p = dot(z1, F);
            const int sg = p > 0.0 ? 1 : (p < 0.0 ? -1 : 0);
            if (sign0 == 0) sign0 = sg;
            if (sg != sign0 || sg == 0) c.sign_constant = false;
        }
        c.holds = c.sign_constant && c.min_norm > 1e-6 * c.max_norm;
        rep.eta_sign.push_back(c);
    }

    rep.degree_test_applicable = !rep.degenerate && rep.dB != 1 && rep.f1_sign_all;
    if (rep.degree_test_applicable) {
        rep.prediction = "at least two T-periodic solutions for small eps: one inside U0, one outside";
    } else if (rep.degenerate) {
        rep.prediction = "no prediction: F vanishes on the cycle";
    } else if (rep.dB == 1) {
        rep.prediction = "no prediction: degree of F equals 1";
    } else {
        rep.prediction = "no prediction: f1(theta0, .) vanishes at a zero theta0 of f0";
    }
    return rep;
}

}  // namespace cyclepersist
