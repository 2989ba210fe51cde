#pragma once

// Machine-readable output: JSON reports (nlohmann), CSV tables and
// self-contained SVG line plots. Everything here is a pure function of its
// inputs so that identical runs serialize to identical bytes.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <openssl/evp.h>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "persist.hpp"
#include "pipeline.hpp"

#ifndef CYCLEPERSIST_VERSION
#define CYCLEPERSIST_VERSION "0.0.0"
#endif

namespace cyclepersist {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0";

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
}

inline Json vec_json(const Vec2& v) { return Json::array({v.x, v.y}); }

inline Json provenance_json(const std::string& config_hash, const Analysis& a) {
    const auto& s = a.settings;
    return Json{{"schema_version", kSchemaVersion},
                {"tool_version", CYCLEPERSIST_VERSION},
                {"config_sha256", config_hash},
                {"tolerances",
                 {{"integration", a.effective_tol},
                  {"integration_requested", s.tol},
                  {"tolerance_scale", tolerance_scale()},
                  {"quadrature", s.quad_tol},
                  {"f1_sign_normalized_margin", 1e-6},
                  {"zero_bisection", 1e-12}}},
                {"grids",
                 {{"frame", s.frame_grid},
                  {"theta", s.theta_grid},
                  {"f1_sign", s.f1_grid},
                  {"winding_initial", s.winding_samples}}},
                {"seed", vec_json(s.seed)}};
}

inline Json cycle_json(const LimitCycle& c) {
    return Json{{"period", c.period()},
                {"anchor", vec_json(c.anchor())},
                {"orientation", c.orientation()},
                {"shooting_residual", c.shooting_residual()},
                {"shot_backward", c.shot_backward()},
                {"newton_iterations", c.newton_iterations()},
                {"min_speed", c.min_speed()},
                {"signed_area", c.signed_area()}};
}

inline Json floquet_json(const FloquetFrame& f, const FrameDiagnostics& d) {
    return Json{{"rho", f.rho()},
                {"rho_star", f.rho_star()},
                {"rho_rho_star_deviation", d.rho_product},
                {"trivial_multiplier_residual", f.trivial_residual()},
                {"adjoint_trivial_multiplier_residual", f.adjoint_trivial_residual()},
                {"adjoint_exponent", f.adjoint_exponent()},
                {"pairing_deviation", d.pairing},
                {"parallel_defect", d.parallel},
                {"liouville", {{"det", d.liouville.det}, {"predicted", d.liouville.predicted},
                               {"relative_error", d.liouville.rel_error}}},
                {"floquet_relations", {{"y1", d.relations.y1}, {"z0", d.relations.z0}, {"z1", d.relations.z1}}},
                {"grid", f.grid()}};
}

inline Json bifurcation_json(const BifurcationProfile& p) {
    Json zeros = Json::array();
    for (std::size_t i = 0; i < p.zeros.size(); ++i) {
        const auto& z = p.zeros[i];
        Json j{{"theta", z.theta}, {"slope", z.slope}, {"simple", z.simple}, {"f0", z.value}};
        if (i < p.f1_sign.size()) {
            const auto& c = p.f1_sign[i];
            j["f1_sign"] = {{"holds", c.holds},
                        {"margin", c.margin},
                        {"argmin", c.argmin},
                        {"max_abs_f1", c.max_abs},
                        {"normalized_margin", c.normalized_margin}};
        }
        zeros.push_back(j);
    }
    Json touches = Json::array();
    for (const auto& z : p.degenerate_zeros) touches.push_back({{"theta", z.theta}, {"f0", z.value}});
    const auto& s = p.symmetry;
    return Json{{"period", p.period},
                {"max_abs_f0", p.max_abs_f0},
                {"f0_identically_zero", p.loud_degenerate},
                {"zeros", zeros},
                {"degenerate_zeros", touches},
                {"symmetry",
                 {{"antiperiodic", s.antiperiodic},
                  {"f0_symmetric", s.f0_sym},
                  {"f1_symmetric", s.f1_sym},
                  {"symmetry_applicable", s.symmetry_applicable},
                  {"antiperiodic_deviation", s.antiperiodic_deviation},
                  {"f0_symmetry_deviation", s.f0_sym_deviation},
                  {"f1_symmetry_deviation", s.f1_sym_deviation},
                  {"reason", s.reason}}}};
}

inline Json degree_json(const DegreeReport& d) {
    Json eta_sign = Json::array();
    for (const auto& c : d.eta_sign) {
        eta_sign.push_back({{"theta0", c.theta0},
                           {"min_norm", c.min_norm},
                           {"max_norm", c.max_norm},
                           {"sign_constant", c.sign_constant},
                           {"holds", c.holds}});
    }
    Json j{{"winding", d.winding.index},
           {"winding_turns", d.winding.turns},
           {"winding_residual", d.winding.residual},
           {"winding_min_norm", d.winding.min_norm},
           {"winding_refinement", d.winding.refinement_trace},
           {"k", d.k},
           {"dB", d.dB},
           {"closed_form", d.closed_form_value ? Json(*d.closed_form_value) : Json(nullptr)},
           {"closed_form_failed", d.closed_form_failed},
           {"eta_check_residual", d.eta_check_residual},
           {"psi_degree", d.psi_degree},
           {"eta_sign", eta_sign},
           {"f1_sign_all", d.f1_sign_all},
           {"degenerate", d.degenerate},
           {"degenerate_reason", d.degenerate_reason},
           {"degree_test_applicable", d.degree_test_applicable},
           {"prediction", d.prediction}};
    return j;
}

/// The analyze report. Wall-clock time is isolated under "timing".
inline Json analysis_json(const Analysis& a, const std::string& config_hash, bool with_timing = true) {
    Json j{{"system", a.system.name()},
           {"cycle", cycle_json(a.cycle)},
           {"floquet", floquet_json(a.frame, a.diagnostics)},
           {"bifurcation", bifurcation_json(a.profile)},
           {"degree", degree_json(a.degree)},
           {"provenance", provenance_json(config_hash, a)}};
    if (with_timing) j["timing"] = {{"analysis_seconds", a.seconds}};
    return j;
}

inline Json profile_json(const DistanceProfile& p) {
    Json j{{"theta0", p.theta0},
           {"r0", p.r0},
           {"grid", p.points.size()},
           {"missing", p.missing},
           {"min_R", p.min_R},
           {"max_R", p.max_R},
           {"max_error_vs_first_order", p.max_error},
           {"max_phase_shift", p.max_shift},
           {"exact_crossings", p.exact_crossings},
           {"exact_max_deviation", p.exact_max_deviation}};
    Json notes = Json::array();
    for (const auto& q : p.points) {
        if (!q.note.empty()) notes.push_back({{"t", q.t}, {"note", q.note}});
    }
    j["notes"] = notes;
    return j;
}

inline Json solution_json(const PeriodicSolution& s, const SeparationCheck* sep) {
    Json j{{"xi", vec_json(s.xi)},
           {"fixed_point_residual", s.fixed_point_residual},
           {"newton_iterations", s.iterations},
           {"location", to_string(s.location)},
           {"phase", s.phase},
           {"theta0", s.theta0 ? Json(*s.theta0) : Json(nullptr)},
           {"rms_norm", s.rms_norm()},
           {"min_cycle_distance", s.min_cycle_distance}};
    if (sep) j["separation"] = {{"min_distance", sep->min_distance}, {"threshold", sep->threshold}, {"holds", sep->holds}};
    if (!s.profile.points.empty()) j["profile"] = profile_json(s.profile);
    return j;
}

inline Json persistence_json(const PersistenceRun& run) {
    Json runs = Json::array();
    for (const auto& er : run.runs) {
        Json sols = Json::array();
        for (std::size_t i = 0; i < er.solutions.size(); ++i) {
            sols.push_back(solution_json(er.solutions[i], i < er.separation.size() ? &er.separation[i] : nullptr));
        }
        Json seeds = Json::array();
        for (const auto& s : er.seeds) {
            seeds.push_back({{"seed", vec_json(s.seed)},
                             {"theta0", s.theta0},
                             {"anchor", s.anchor},
                             {"delta", s.delta},
                             {"converged", s.converged},
                             {"solution", s.solution},
                             {"residual_history", s.residual_history},
                             {"failure", s.failure}});
        }
        runs.push_back({{"eps", er.eps},
                        {"error", er.error},
                        {"warnings", er.warnings},
                        {"solution_count", er.solutions.size()},
                        {"min_pairwise_distance", er.solutions.size() < 2 ? Json(nullptr)
                                                                          : Json(er.min_pairwise_distance)},
                        {"distinct", er.distinct},
                        {"solutions", sols},
                        {"seeds", seeds}});
    }
    Json fits = Json::array();
    for (const auto& b : run.branches) {
        fits.push_back({{"theta0", b.theta0},
                        {"eps", b.eps},
                        {"max_error", b.max_error},
                        {"phase_error", b.phase_error},
                        {"max_phase_shift", b.max_shift},
                        {"min_R", b.min_R},
                        {"max_R", b.max_R},
                        {"loglog_slope", std::isfinite(b.slope) ? Json(b.slope) : Json(nullptr)},
                        {"phase_converges", b.phase_converges},
                        {"phase_shift_monotone", b.shift_monotone},
                        {"R_bracket_stable", b.R_bracket_stable}});
    }
    return Json{{"eps_grid", run.eps_grid}, {"runs", runs}, {"convergence_fit", fits}};
}

inline Json vanishing_probe_json(const VanishingProbe& p) {
    return Json{{"theta0", p.theta0},
                {"t_star", p.t_star},
                {"f1_at_t_star", p.f1_at_t_star},
                {"f1_scale", p.f1_scale},
                {"eps", p.eps},
                {"dist", p.dist},
                {"dist_over_eps", p.normalized},
                {"halving_ratios", p.ratios},
                {"ratio_limit", 0.7},
                {"holds", p.holds},
                {"error", p.error}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_f0_csv(std::ostream& out, const BifurcationProfile& p) {
    out << "theta,f0\n";
    for (std::size_t i = 0; i < p.theta_grid.size(); ++i) out << fmt(p.theta_grid[i]) << ',' << fmt(p.f0_values[i]) << '\n';
}

inline void write_f1_csv(std::ostream& out, const BifurcationProfile& p) {
    out << "theta0,s,f1\n";
    for (const auto& c : p.f1_sign) {
        for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
            out << fmt(c.theta0) << ',' << fmt(c.s_grid[i]) << ',' << fmt(c.f1_values[i]) << '\n';
        }
    }
}

inline void write_profile_csv(std::ostream& out, const PersistenceRun& run) {
    out << "eps,solution,theta0,t,s_eps,dist,R,predicted,crossed,exact_crossed,exact_dist\n";
    for (const auto& er : run.runs) {
        for (std::size_t i = 0; i < er.solutions.size(); ++i) {
            const auto& s = er.solutions[i];
            for (const auto& p : s.profile.points) {
                out << fmt(er.eps) << ',' << i << ',' << fmt(s.profile.theta0) << ',' << fmt(p.t) << ',' << fmt(p.s)
                    << ',' << fmt(p.dist) << ',' << fmt(p.R) << ',' << fmt(p.predicted) << ',' << int(p.crossed)
                    << ',' << int(p.exact_crossed) << ',' << fmt(p.exact_dist) << '\n';
            }
        }
    }
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
    std::string name;
    std::vector<double> x, y;
};

/// Line plot with linear axes. `equal_aspect` keeps x and y scales equal
/// (used for curves in the plane); `mark_origin` draws a cross at (0, 0).
inline std::string svg_plot(const std::string& title, const std::vector<Series>& series, const std::string& xlabel,
                            const std::string& ylabel, bool equal_aspect = false, bool mark_origin = false,
                            const std::string& note = "") {
    const double W = 640, H = 420, L = 70, R = 20, Tm = 40, B = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (mark_origin) {
        x0 = std::min(x0, 0.0), x1 = std::max(x1, 0.0), y0 = std::min(y0, 0.0), y1 = std::max(y1, 0.0);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 <= 0) x1 = x0 + 1;
    if (y1 - y0 <= 0) { y0 -= 0.5; y1 += 0.5; }
    const double pw = W - L - R, ph = H - Tm - B;
    double sx = pw / (x1 - x0), sy = ph / (y1 - y0);
    if (equal_aspect) sx = sy = std::min(sx, sy);
    auto X = [&](double x) { return L + (x - x0) * sx; };
    auto Y = [&](double y) { return Tm + ph - (y - y0) * sy; };
    char buf[256];
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << Tm << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">%.4g</text>\n", L + pw * i / 4,
                      H - B + 16, xv);
        o << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\">%.4g</text>\n", L - 6,
                      Tm + ph - ph * i / 4 + 4, yv);
        o << buf;
    }
    o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text x=\"16\" y=\"" << Tm + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << Tm + ph / 2
      << ")\">" << ylabel << "</text>\n";
    if (mark_origin) {
        std::snprintf(buf, sizeof buf,
                      "<path d=\"M%.2f %.2fL%.2f %.2fM%.2f %.2fL%.2f %.2f\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                      X(0) - 6, Y(0), X(0) + 6, Y(0), X(0), Y(0) - 6, X(0), Y(0) + 6);
        o << buf;
    }
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::string d;
        bool pen = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen = false;
                continue;
            }
            std::snprintf(buf, sizeof buf, "%c%.2f %.2f", pen ? 'L' : 'M', X(s.x[i]), Y(s.y[i]));
            d += buf;
            pen = true;
        }
        const char* c = colors[k % 6];
        o << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\"/>\n";
        o << "<text x=\"" << L + 8 << "\" y=\"" << Tm + 16 + 14 * k << "\" fill=\"" << c << "\">" << s.name
          << "</text>\n";
    }
    if (!note.empty()) {
        o << "<text x=\"" << W - R - 6 << "\" y=\"" << Tm + 16 << "\" text-anchor=\"end\">" << note << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline std::string f0_svg(const BifurcationProfile& p) {
    return svg_plot("f0(theta)", {{"f0", p.theta_grid, p.f0_values}}, "theta", "f0");
}

inline std::string f1_svg(const BifurcationProfile& p) {
    std::vector<Series> s;
    for (const auto& c : p.f1_sign) {
        Series q{"f1(" + fmt(c.theta0).substr(0, 8) + ", s)", c.s_grid, {}};
        for (double v : c.f1_values) q.y.push_back(v);
        s.push_back(std::move(q));
    }
    return svg_plot("f1(theta0, s) at the zeros of f0", s, "s", "f1");
}

/// The boundary curve theta -> F(x0(theta)) with its winding number.
inline std::string winding_svg(const FloquetFrame& frame, const DegreeReport& d, int samples = 256,
                               const QuadratureOptions& opt = {}) {
    Series s{"F(x0(theta))", std::vector<double>(samples + 1), std::vector<double>(samples + 1)};
    parallel_for(samples + 1, [&](std::size_t i) {
        const Vec2 F = F_on_cycle(frame, frame.period() * i / samples, 0.0, opt);
        s.x[i] = F.x;
        s.y[i] = F.y;
    });
    return svg_plot("boundary field F along the cycle", {s}, "F_1", "F_2", true, true,
                    "winding " + std::to_string(d.winding.index) + ", dB " + std::to_string(d.dB));
}

inline std::string profile_svg(const PersistenceRun& run) {
    std::vector<Series> s;
    for (const auto& er : run.runs) {
        for (std::size_t i = 0; i < er.solutions.size(); ++i) {
            const auto& sol = er.solutions[i];
            if (sol.profile.points.empty()) continue;
            Series q{"eps " + fmt(er.eps) + " #" + std::to_string(i), {}, {}};
            for (const auto& p : sol.profile.points) {
                q.x.push_back(p.t);
                q.y.push_back(p.crossed ? p.dist / er.eps : std::numeric_limits<double>::quiet_NaN());
            }
            s.push_back(std::move(q));
        }
    }
    return svg_plot("distance to the cycle through the sections, dist(t)/eps", s, "t", "dist/eps");
}

}  // namespace cyclepersist
