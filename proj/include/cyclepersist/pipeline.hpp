#pragma once

// model -> cycle -> floquet -> bifurcation -> degree, with the knobs the CLI
// and the self-check expose.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>

#include "bifurcation.hpp"
#include "cycle.hpp"
#include "degree.hpp"
#include "floquet.hpp"
#include "model.hpp"

namespace cyclepersist {

struct PipelineSettings {
    Vec2 seed{1.3, 0.0};
    std::optional<double> period_guess;
    double tol = 1e-13;        ///< cycle and frame integration tolerance
    int frame_grid = 1024;
    int theta_grid = 256;
    int f1_grid = 512;
    int winding_samples = 64;
    double quad_tol = 1e-9;
    double bounding_box = 3.0;

    static PipelineSettings from(const AnalysisSettings& a) {
        PipelineSettings s;
        s.seed = a.seed;
        s.period_guess = a.period_guess;
        s.tol = a.tol;
        s.frame_grid = a.frame_grid;
        s.theta_grid = a.theta_grid;
        s.f1_grid = a.f1_grid;
        s.bounding_box = a.bounding_box;
        return s;
    }
};

/// CYCLEPERSIST_TOL_SCALE multiplies every integration tolerance (default 1).
/// Meant for induced-failure experiments.
inline double tolerance_scale() {
    if (const char* env = std::getenv("CYCLEPERSIST_TOL_SCALE")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end != env && v > 0.0 && std::isfinite(v)) return v;
    }
    return 1.0;
}

inline double scaled_tol(double tol) { return std::clamp(tol * tolerance_scale(), 1e-13, 1e-3); }

struct FrameDiagnostics {
    double pairing = 0.0;          ///< pairing_deviation
    double parallel = 0.0;        ///< angle between y1 and z0^perp
    double rho_product = 0.0;     ///< |rho rho* - 1|
    LiouvilleCheck liouville{};
    FloquetRelationResiduals relations{};
};

inline FrameDiagnostics diagnose(const FloquetFrame& f) {
    return {pairing_deviation(f), parallel_defect(f), std::abs(f.rho() * f.rho_star() - 1.0), liouville_check(f),
            floquet_relation_residuals(f)};
}

struct Analysis {
    PlanarSystem system;  ///< with the cycle period attached
    LimitCycle cycle;
    FloquetFrame frame;
    FrameDiagnostics diagnostics;
    BifurcationProfile profile;
    DegreeReport degree;
    PipelineSettings settings;
    double effective_tol;
    double seconds;  ///< wall clock; never part of comparisons
};

inline Analysis analyze(const PlanarSystem& input, const PipelineSettings& st = {}) {
    const auto start = std::chrono::steady_clock::now();
    const double tol = scaled_tol(st.tol);
    // the scaled clock needs a period before phi can be probed; any value works here
    require_finite_on_box(input.with_cycle_period(2.0 * std::numbers::pi), st.bounding_box);
    auto cycle = find_limit_cycle(input, st.seed, st.period_guess, CycleOptions{.tol = tol});
    const PlanarSystem sys = input.with_cycle_period(cycle.period());
    auto frame = build_frame(sys, cycle, FloquetOptions{.tol = tol, .grid = st.frame_grid});
    auto diag = diagnose(frame);
    const QuadratureOptions q{.tol = st.quad_tol};
    auto profile = analyze_bifurcation(frame, cycle,
                                       BifurcationSettings{.theta_grid = st.theta_grid, .f1_grid = st.f1_grid,
                                                           .quadrature = q});
    auto degree = assess_degree(frame, cycle, profile,
                                  DegreeSettings{.winding_samples = st.winding_samples, .quadrature = q});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {sys, std::move(cycle), std::move(frame), diag, std::move(profile), std::move(degree), st, tol, secs};
}

}  // namespace cyclepersist
