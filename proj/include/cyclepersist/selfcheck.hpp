#pragma once

// The oracle suite behind `cyclepersist selfcheck` and the acceptance binary.
// Each criterion bundles several checks; a criterion passes iff all of its
// checks pass. Checks marked `timing` carry wall-clock numbers and are kept
// out of the deterministic JSON.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "persist.hpp"
#include "pipeline.hpp"
#include "report.hpp"

namespace cyclepersist {

struct Check {
    std::string name;
    bool passed = false;
    std::string measured;
    std::string tolerance;
    bool timing = false;
    std::string note;
};

struct Criterion {
    int id = 0;
    std::string title;
    std::vector<Check> checks;
    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
};

struct SelfcheckReport {
    std::vector<Criterion> criteria;
    double seconds = 0.0;
    bool passed() const {
        return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.passed(); });
    }
};

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline Check le(const std::string& name, double value, double tol) {
    return {name, std::isfinite(value) && value <= tol, sci(value), "<= " + sci(tol)};
}

inline Check flag(const std::string& name, bool ok, const std::string& measured, const std::string& expected) {
    return {name, ok, measured, expected};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Root of r^3 - r = c near r = 1 (Newton from 1).
inline double cubic_radius(double c) {
    return boost::math::tools::newton_raphson_iterate(
        [c](double r) { return std::pair{r * r * r - r - c, 3.0 * r * r - 1.0}; }, 1.0, 0.5, 1.5, 50);
}

}  // namespace detail

/// Random boundary data on the unit circle satisfying the closed-form
/// hypotheses: q(theta) the circle traversed with the given orientation,
/// z = q'/|q'|, F = f z + g z^perp with f having exactly two simple zeros at
/// c +- b and g of opposite signs there. `antiperiodic` makes f and g change
/// sign under theta -> theta + pi.
inline BoundaryData synthetic_boundary(std::mt19937_64& rng, int orientation, bool antiperiodic) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double c = 2.0 * std::numbers::pi * U(rng);
    const double b = antiperiodic ? 0.5 * std::numbers::pi : 0.3 + (std::numbers::pi - 0.6) * U(rng);
    const double amp = 0.3 + 1.5 * U(rng), gamp = (U(rng) < 0.5 ? -1.0 : 1.0) * (0.2 + 2.0 * U(rng));
    const int m = 1 + static_cast<int>(4 * U(rng));
    const double ph = 2.0 * std::numbers::pi * U(rng), wob = 0.6 * U(rng);
    const double k = orientation;
    auto q = [k](double th) { return Vec2{std::cos(th), k * std::sin(th)}; };
    auto z = [k](double th) { return Vec2{-std::sin(th), k * std::cos(th)}; };
    // even multipliers keep the symmetry when requested
    const int mm = antiperiodic ? 2 * m : m;
    auto f = [=](double th) { return amp * (std::cos(th - c) - std::cos(b)) * (1.0 + wob * std::sin(mm * th + ph)); };
    auto g = [=](double th) { return gamp * std::sin(th - c) * (1.0 + wob * std::cos(mm * th + ph)); };
    BoundaryData d;
    d.qdot = z;
    d.z = z;
    d.F = [=](double th) {
        const Vec2 e = z(th);
        return f(th) * e + g(th) * perp(e);
    };
    d.period = 2.0 * std::numbers::pi;
    d.orientation = orientation;
    (void)q;
    return d;
}

inline Criterion criterion_cycle() {
    Criterion c{1, "cycle: hopf from (1.3, 0)", {}};
    const auto t0 = std::chrono::steady_clock::now();
    const auto cyc = find_limit_cycle(builtin::hopf(), {1.3, 0.0}, std::nullopt, CycleOptions{.tol = scaled_tol(1e-13)});
    const double secs = detail::seconds_since(t0);
    double sup = 0.0;
    for (int i = 0; i < 4096; ++i) sup = std::max(sup, std::abs(norm(cyc.at(cyc.period() * i / 4096)) - 1.0));
    c.checks.push_back(detail::le("|T - 2 pi|", std::abs(cyc.period() - 2.0 * std::numbers::pi), 1e-8));
    c.checks.push_back(detail::le("sup | |x0(t)| - 1 |", sup, 1e-7));
    Check t = detail::le("runtime [s]", secs, 1.0);
    t.timing = true;
    c.checks.push_back(t);
    return c;
}

inline Criterion criterion_floquet() {
    Criterion c{2, "floquet: hopf multipliers, frame and identities", {}};
    const double tol = scaled_tol(1e-13);
    const PlanarSystem hopf = builtin::hopf();
    const auto cyc = find_limit_cycle(hopf, {1.3, 0.0}, std::nullopt, CycleOptions{.tol = tol});
    const auto frame = build_frame(hopf.with_cycle_period(cyc.period()), cyc, FloquetOptions{.tol = tol});
    const double e = std::exp(-4.0 * std::numbers::pi);
    c.checks.push_back(detail::le("rho vs e^{-4pi} (rel)", std::abs(frame.rho() / e - 1.0), 1e-5));
    c.checks.push_back(detail::le("rho* vs e^{4pi} (rel)", std::abs(frame.rho_star() * e - 1.0), 1e-5));
    c.checks.push_back(detail::le("trivial multiplier |mu - 1|", frame.trivial_residual(), 1e-7));
    const auto lv = liouville_check(frame);
    c.checks.push_back(detail::le("Liouville det Y(T) vs e^{-4pi}", std::abs(lv.det - e), 1e-7));
    c.checks.push_back(detail::le("Liouville det Y(T) vs exp(quadrature) (rel)", lv.rel_error, 1e-7));
    c.checks.push_back(detail::le("pairing matrix vs diag(1,1)", pairing_deviation(frame), 1e-7));
    double ex = 0, ey = 0, ez0 = 0, ez1 = 0;
    for (const auto& s : frame.samples()) {
        const double t = s.t, ct = std::cos(t), st = std::sin(t);
        ex = std::max(ex, norm(s.xdot0 - Vec2{-st, ct}));
        ey = std::max(ey, norm(s.y1 - std::exp(-2.0 * t) * Vec2{ct, st}));
        ez0 = std::max(ez0, norm(s.z0 - Vec2{-st, ct}));
        ez1 = std::max(ez1, norm(s.z1 - std::exp(2.0 * t) * Vec2{ct, st}));
    }
    c.checks.push_back(detail::le("xdot0 closed form (sup)", ex, 1e-6));
    c.checks.push_back(detail::le("y1 closed form (sup)", ey, 1e-6));
    c.checks.push_back(detail::le("z0 closed form (sup)", ez0, 1e-6));
    c.checks.push_back(detail::le("z1 closed form (sup)", ez1, 1e-6));
    const auto lt = longtime_adjoint_extract(frame, cyc, 3);
    c.checks.push_back(detail::le("long-time extraction k=3 vs z0", lt.deviation, 1e-4));
    return c;
}

inline Criterion criterion_bifurcation(const Analysis& rot, const Analysis& cos_lit, const Analysis& vanish) {
    Criterion c{3, "bifurcation: f0, zeros, f1 and f1_sign on hopf_rot", {}};
    const double pi = std::numbers::pi;
    double e0 = 0.0;
    for (std::size_t i = 0; i < rot.profile.theta_grid.size(); ++i) {
        e0 = std::max(e0, std::abs(rot.profile.f0_values[i] + 2.0 * pi * std::sin(rot.profile.theta_grid[i])));
    }
    c.checks.push_back(detail::le("f0 vs -2 pi sin(theta) on 256-grid", e0, 1e-6));
    const auto& zs = rot.profile.zeros;
    bool ok = zs.size() == 2;
    double zerr = 0.0, serr = 0.0;
    if (ok) {
        for (const auto& z : zs) {
            const bool at0 = detail::circle_distance(z.theta, 0.0, 2.0 * pi) < 0.5;
            zerr = std::max(zerr, detail::circle_distance(z.theta, at0 ? 0.0 : pi, rot.profile.period));
            serr = std::max(serr, std::abs(z.slope - (at0 ? -2.0 * pi : 2.0 * pi)));
        }
    }
    c.checks.push_back(detail::flag("zero count", ok, std::to_string(zs.size()), "2"));
    c.checks.push_back(detail::le("zeros vs {0, pi}", ok ? zerr : INFINITY, 1e-8));
    c.checks.push_back(detail::le("slopes vs -+2 pi", ok ? serr : INFINITY, 1e-3));
    const double f100 = eval_f1(rot.frame, 0.0, 0.0);
    c.checks.push_back(detail::le("|f1(0,0) - 0.4999983|", std::abs(f100 - 0.4999983), 1e-6));
    c.checks.push_back(detail::le("f1(t+T)/f1(t) vs rho* on 20 probes (rel)",
                                  f1_floquet_relation_deviation(rot.frame, 20), 1e-6));

    // phi = (cos t, 0): the stated expectation is a f1_sign failure at theta0 = 0
    const auto lit = check_f1_sign(cos_lit.frame, 0.0, cos_lit.settings.f1_grid);
    Check l = detail::flag("f1_sign failure detected for phi=(cos t,0) at theta0=0", !lit.holds,
                           lit.holds ? "f1_sign holds, normalized margin " + detail::sci(lit.normalized_margin)
                                     : "f1_sign fails",
                           "f1_sign fails");
    l.note = "f1(0,s) = (1-e^{-4pi}) e^{2s} (2+cos2s+sin2s)/8 > 0 for this phi, so f1_sign holds; see README";
    c.checks.push_back(l);
    const auto cor = check_f1_sign(vanish.frame, 0.0, vanish.settings.f1_grid);
    Check v = detail::flag("f1_sign failure detected for phi=e_r(t)+2e_r(3t) at theta0=0 (f1 with the stated zeros)",
                           !cor.holds, "normalized margin " + detail::sci(cor.normalized_margin), "f1_sign fails");
    c.checks.push_back(v);
    return c;
}

inline Criterion criterion_degree(const std::vector<const Analysis*>& symmetric, const Analysis& rot,
                                  const Analysis& hopf_plain, const Analysis& vdp) {
    Criterion c{4, "degree: winding vs closed form, dB values", {}};
    std::mt19937_64 rng(20240611);
    int total = 0, agree = 0, applicable = 0;
    for (int i = 0; i < 24; ++i) {
        const int k = i % 2 == 0 ? 1 : -1;
        const auto b = synthetic_boundary(rng, k, false);
        const auto cf = closed_form_from_boundary(b);
        const auto w = winding_index(b.F, b.period);
        ++total;
        if (cf.degree) {
            ++applicable;
            if (*cf.degree == k * w.index) ++agree;
        }
    }
    c.checks.push_back(detail::flag("synthetic fields: winding == closed form (exact)",
                                    applicable == total && agree == total && total >= 20,
                                    std::to_string(agree) + "/" + std::to_string(total) + " (applicable " +
                                        std::to_string(applicable) + ")",
                                    ">= 20, all equal"));
    int sym_ok = 0, sym_total = 0;
    for (int i = 0; i < 8; ++i) {
        const int k = i % 2 == 0 ? 1 : -1;
        const auto b = synthetic_boundary(rng, k, true);
        const auto cf = closed_form_from_boundary(b);
        const int w = k * winding_index(b.F, b.period).index;
        ++sym_total;
        if (cf.degree && (*cf.degree == 0 || *cf.degree == 2) && (w == 0 || w == 2)) ++sym_ok;
    }
    for (const Analysis* a : symmetric) {
        if (!a->profile.symmetry.symmetry_applicable) continue;
        ++sym_total;
        if (!a->degree.degenerate && (a->degree.dB == 0 || a->degree.dB == 2)) ++sym_ok;
    }
    c.checks.push_back(detail::flag("values in {0,2} under the symmetry hypotheses", sym_ok == sym_total,
                                    std::to_string(sym_ok) + "/" + std::to_string(sym_total), "all"));
    const bool rot_ok = rot.degree.dB == 0 && rot.degree.closed_form_value && *rot.degree.closed_form_value == 0;
    c.checks.push_back(detail::flag("hopf_rot dB = 0 by both routes", rot_ok,
                                    "winding " + std::to_string(rot.degree.dB) + ", closed form " +
                                        (rot.degree.closed_form_value ? std::to_string(*rot.degree.closed_form_value) : "n/a"),
                                    "0, 0"));
    c.checks.push_back(detail::flag("d_B(psi, U0) = 1 for hopf and vdp",
                                    hopf_plain.degree.psi_degree == 1 && vdp.degree.psi_degree == 1,
                                    std::to_string(hopf_plain.degree.psi_degree) + ", " +
                                        std::to_string(vdp.degree.psi_degree),
                                    "1, 1"));
    c.checks.push_back(detail::le("F on the cycle vs F via eta at 10 random theta (hopf_rot)",
                                  rot.degree.eta_check_residual, 1e-6));
    return c;
}

inline std::vector<double> sweep_eps() { return {0.02, 0.01, 0.005, 0.0025}; }

inline Criterion criterion_persistence(const Analysis& rot) {
    Criterion c{5, "persistence: hopf_rot at eps = 0.01", {}};
    const double eps = 0.01, pi = std::numbers::pi;
    const auto t0 = std::chrono::steady_clock::now();
    const auto run = run_persistence(rot.cycle, rot.frame, rot.profile, {eps}, &rot.degree);
    const double secs = detail::seconds_since(t0);
    const auto& er = run.runs.front();
    const auto& sols = er.solutions;
    c.checks.push_back(detail::flag("solution count", sols.size() == 2 && er.error.empty(),
                                    std::to_string(sols.size()) + (er.error.empty() ? "" : " (" + er.error + ")"),
                                    "2"));
    double res = 0.0;
    for (const auto& s : sols) res = std::max(res, s.fixed_point_residual);
    c.checks.push_back(detail::le("fixed-point residual", sols.empty() ? INFINITY : res, 1e-10));
    const double r_out = detail::cubic_radius(eps), r_in = detail::cubic_radius(-eps);
    double rerr = INFINITY, perr = INFINITY;
    bool loc = false;
    if (sols.size() == 2) {
        auto radius_error = [](const PeriodicSolution& s, double r) {
            double worst = 0.0;
            for (int i = 0; i < 256; ++i) worst = std::max(worst, std::abs(norm(s.at(s.period * i / 256)) - r));
            return worst;
        };
        rerr = std::max(radius_error(sols[0], r_out), radius_error(sols[1], r_in));
        perr = std::max(detail::circle_distance(sols[0].phase, 0.0, 2 * pi),
                        detail::circle_distance(sols[1].phase, pi, 2 * pi));
        loc = sols[0].location == SolutionLocation::Outside && sols[1].location == SolutionLocation::Inside;
    }
    c.checks.push_back(detail::le("radii vs cubic roots (" + detail::sci(r_out) + ", " + detail::sci(r_in) + ")",
                                  rerr, 1e-5));
    c.checks.push_back(detail::le("phases vs {0, pi}", perr, 1e-3));
    c.checks.push_back(detail::flag("outer outside, inner inside", loc,
                                    sols.size() == 2 ? std::string(to_string(sols[0].location)) + ", " +
                                                           to_string(sols[1].location)
                                                     : "n/a",
                                    "outside, inside"));
    const bool sep = sols.size() == 2 && er.min_pairwise_distance >= eps / 4.0;
    c.checks.push_back(detail::flag("geometric distinctness margin >= eps/4", sep,
                                    detail::sci(er.min_pairwise_distance), ">= " + detail::sci(eps / 4.0)));
    Check t = detail::le("runtime [s]", secs, 10.0);
    t.timing = true;
    c.checks.push_back(t);
    return c;
}

inline Criterion criterion_profile(const Analysis& rot, const Analysis& cos_lit, const Analysis& vanish) {
    Criterion c{6, "distance profile, phase convergence, vanishing probe and separation", {}};
    const auto eps_grid = sweep_eps();
    const auto run = run_persistence(rot.cycle, rot.frame, rot.profile, eps_grid, &rot.degree);
    // per branch: max_t |dist - eps/2|, R bracket and positivity
    bool slopes_ok = !run.branches.empty(), R_ok = true, bracket_ok = true, c2_ok = true;
    std::string slopes, c2s;
    for (const auto& z : rot.profile.zeros) {
        std::vector<double> es, errs, lo, hi;
        for (const auto& er : run.runs) {
            for (const auto& s : er.solutions) {
                if (!s.theta0 || *s.theta0 != z.theta) continue;
                double worst = 0.0;
                for (const auto& p : s.profile.points) {
                    if (!p.crossed || !(p.R > 0.0) || !std::isfinite(p.R)) R_ok = false;
                    worst = std::max(worst, std::abs(p.dist - er.eps / 2.0));
                }
                es.push_back(er.eps);
                errs.push_back(worst);
                lo.push_back(s.profile.min_R);
                hi.push_back(s.profile.max_R);
            }
        }
        if (es.size() != eps_grid.size()) {
            slopes_ok = false;
            R_ok = false;
            continue;
        }
        const double sl = loglog_slope(es, errs);
        slopes += (slopes.empty() ? "" : ", ") + detail::sci(sl);
        if (!(std::abs(sl - 2.0) <= 0.3)) slopes_ok = false;
        for (std::size_t i = 1; i < es.size(); ++i) {
            if (std::abs(lo[i] / lo[i - 1] - 1.0) > 0.2 || std::abs(hi[i] / hi[i - 1] - 1.0) > 0.2) bracket_ok = false;
        }
    }
    for (const auto& er : run.runs) {
        if (er.solutions.size() != 2) c2_ok = false;
        for (const auto& s : er.solutions) {
            if (!(s.min_cycle_distance >= er.eps / 4.0)) c2_ok = false;
        }
    }
    c.checks.push_back(detail::flag("log-log slope of max|dist - eps/2| per branch", slopes_ok, slopes, "2.0 +- 0.3"));
    c.checks.push_back(detail::flag("R(t) > 0 and finite for all t", R_ok, R_ok ? "yes" : "no", "yes"));
    c.checks.push_back(detail::flag("[min R, max R] stable within 20% under eps-halving", bracket_ok,
                                    bracket_ok ? "yes" : "no", "yes"));
    bool phase_ok = !run.branches.empty();
    for (const auto& b : run.branches) phase_ok = phase_ok && b.phase_converges && b.shift_monotone;
    c.checks.push_back(detail::flag("phase convergence (noise 1e-6)", phase_ok, phase_ok ? "yes" : "no", "yes"));

    const double pi = std::numbers::pi;
    auto probe_check = [&](const Analysis& a, double t_star, const std::string& name) {
        const auto pr = vanishing_probe(a.cycle, a.frame, a.profile, 0.0, t_star, eps_grid);
        std::string m;
        for (double r : pr.ratios) m += (m.empty() ? "" : ", ") + detail::sci(r);
        if (!pr.error.empty()) m = pr.error;
        Check ch = detail::flag(name + " (f1(0,t*) = " + detail::sci(pr.f1_at_t_star) + ")", pr.holds, m,
                                "ratios of dist(t*)/eps <= 0.7");
        return ch;
    };
    // t* solves 1 + sqrt2 sin(2t + pi/4) = 0
    Check lit = probe_check(cos_lit, 0.5 * pi, "vanishing-f1 probe, phi=(cos t,0), t*=pi/2");
    lit.note = "f1(0,.) has no zero for this phi (see README), so dist(t*)/eps stays ~ constant";
    c.checks.push_back(lit);
    const auto f1v = check_f1_sign(vanish.frame, 0.0, vanish.settings.f1_grid);
    c.checks.push_back(probe_check(vanish, f1v.argmin, "vanishing-f1 probe, phi=e_r(t)+2e_r(3t), t*=" +
                                                            detail::sci(f1v.argmin)));
    c.checks.push_back(detail::flag("separation: min orbit-to-cycle distance >= eps/4, both solutions", c2_ok,
                                    c2_ok ? "yes" : "no", "yes"));
    return c;
}

inline Criterion criterion_regression(const Analysis& vdp_base) {
    Criterion c{7, "regression: vdp invariants and degree stability", {}};
    const auto& d = vdp_base.diagnostics;
    c.checks.push_back(detail::flag("pipeline completes", true, "yes", "yes"));
    c.checks.push_back(detail::le("pairing matrix vs diag(1,1)", d.pairing, 1e-7));
    c.checks.push_back(detail::le("Liouville (rel)", d.liouville.rel_error, 1e-6));
    c.checks.push_back(detail::le("|rho rho* - 1|", d.rho_product, 1e-6));
    PipelineSettings a = vdp_base.settings, b = vdp_base.settings;
    a.tol = 2e-13;
    b.tol = 1e-13;
    b.frame_grid *= 2;
    b.theta_grid *= 2;
    b.f1_grid *= 2;
    b.winding_samples *= 2;
    const auto ra = analyze(builtin::vdp(), a);
    const auto rb = analyze(builtin::vdp(), b);
    auto sig = [](const Analysis& x) {
        return std::to_string(x.degree.k) + "/" + std::to_string(x.degree.winding.index) + "/" +
               std::to_string(x.degree.dB) + "/" +
               (x.degree.closed_form_value ? std::to_string(*x.degree.closed_form_value) : "-");
    };
    c.checks.push_back(detail::flag("k/winding/dB/closed form stable (tol halved, grids doubled)",
                                    sig(ra) == sig(rb) && sig(ra) == sig(vdp_base), sig(ra) + " vs " + sig(rb),
                                    "identical"));
    return c;
}

/// Criteria 1-7. Criterion 8 (determinism, total runtime) needs two runs and
/// is added by `with_determinism`.
inline SelfcheckReport run_selfcheck() {
    const auto t0 = std::chrono::steady_clock::now();
    SelfcheckReport rep;
    rep.criteria.push_back(criterion_cycle());
    rep.criteria.push_back(criterion_floquet());

    const PipelineSettings st;
    const auto rot = analyze(builtin::hopf_rot(), st);
    const auto cos_lit = analyze(builtin::hopf_cos(), st);
    const auto vanish = analyze(builtin::hopf_f1_vanishing(), st);
    const auto plain_cycle = analyze(builtin::hopf_cos2(), st);  // hopf field, d_B(psi) only
    const auto vdp = analyze(builtin::vdp(), st);

    rep.criteria.push_back(criterion_bifurcation(rot, cos_lit, vanish));
    rep.criteria.push_back(criterion_degree({&rot, &cos_lit, &vanish}, rot, plain_cycle, vdp));
    rep.criteria.push_back(criterion_persistence(rot));
    rep.criteria.push_back(criterion_profile(rot, cos_lit, vanish));
    rep.criteria.push_back(criterion_regression(vdp));
    rep.seconds = detail::seconds_since(t0);
    return rep;
}

inline Json selfcheck_json(const SelfcheckReport& r, bool with_timing) {
    Json crit = Json::array();
    for (const auto& c : r.criteria) {
        Json checks = Json::array();
        for (const auto& k : c.checks) {
            Json j{{"name", k.name}, {"passed", k.passed}, {"tolerance", k.tolerance}};
            if (!k.timing || with_timing) j["measured"] = k.measured;
            if (!k.note.empty()) j["note"] = k.note;
            checks.push_back(j);
        }
        crit.push_back({{"id", c.id}, {"title", c.title}, {"passed", c.passed()}, {"checks", checks}});
    }
    Json j{{"schema_version", kSchemaVersion}, {"tool_version", CYCLEPERSIST_VERSION},
           {"tolerance_scale", tolerance_scale()}, {"criteria", crit}, {"passed", r.passed()}};
    if (with_timing) j["timing"] = {{"seconds", r.seconds}};
    return j;
}

/// Runs the suite twice (the second time single-threaded) and appends
/// criterion 8: byte-identical reports and total runtime under 60 s.
inline SelfcheckReport run_selfcheck_with_determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string saved = std::getenv("CYCLEPERSIST_THREADS") ? std::getenv("CYCLEPERSIST_THREADS") : "";
    const bool had = std::getenv("CYCLEPERSIST_THREADS") != nullptr;
    // at least 4 workers even on small hosts, otherwise both runs are serial
    const unsigned many = std::max(4u, worker_count());
    setenv("CYCLEPERSIST_THREADS", std::to_string(many).c_str(), 1);
    SelfcheckReport first = run_selfcheck();
    setenv("CYCLEPERSIST_THREADS", "1", 1);
    SelfcheckReport second = run_selfcheck();
    if (had) setenv("CYCLEPERSIST_THREADS", saved.c_str(), 1);
    else unsetenv("CYCLEPERSIST_THREADS");
    const double total = detail::seconds_since(t0);

    const std::string a = selfcheck_json(first, false).dump(2), b = selfcheck_json(second, false).dump(2);
    Criterion c{8, "determinism and runtime", {}};
    c.checks.push_back(detail::flag("two runs (" + std::to_string(many) + " threads, then 1) give byte-identical reports",
                                    a == b, a == b ? "identical (" + std::to_string(a.size()) + " bytes)" : "differ",
                                    "identical"));
    Check t = detail::le("suite runtime, one run [s]", first.seconds, 60.0);
    t.timing = true;
    c.checks.push_back(t);
    first.criteria.push_back(c);
    first.seconds = total;
    return first;
}

inline void print_selfcheck(std::FILE* out, const SelfcheckReport& r, bool verbose) {
    for (const auto& c : r.criteria) {
        std::string fails;
        for (const auto& k : c.checks) {
            if (!k.passed) fails += (fails.empty() ? "" : "; ") + k.name + ": " + k.measured + " (want " + k.tolerance + ")";
        }
        std::fprintf(out, "%s  %d  %s%s%s\n", c.passed() ? "PASS" : "FAIL", c.id, c.title.c_str(),
                     fails.empty() ? "" : "  -- ", fails.c_str());
        if (verbose) {
            for (const auto& k : c.checks) {
                std::fprintf(out, "        [%s] %s: %s (%s)\n", k.passed ? "ok" : "FAIL", k.name.c_str(),
                             k.measured.c_str(), k.tolerance.c_str());
                if (!k.note.empty()) std::fprintf(out, "               note: %s\n", k.note.c_str());
            }
        }
    }
}

}  // namespace cyclepersist
