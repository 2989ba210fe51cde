#pragma once

/**
 * @file model.hpp
 * @brief Problem instances: x' = psi(x) + eps * phi(t, x, eps) in the plane.
 *
 * A PlanarSystem bundles the unperturbed field psi, its Jacobian (analytic or
 * central finite differences), and the T-periodic perturbation phi. The
 * perturbation must share the period of the limit cycle, which is only known
 * after the cycle has been computed; with the scaled forcing clock phi is
 * written as a 2*pi-periodic function of tau and evaluated at
 * tau = 2*pi*t / T_cycle once the cycle period has been attached.
 */

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "integrate.hpp"
#include "linalg.hpp"

namespace cyclepersist {

enum class ForcingClock { Scaled, Absolute };

using VectorField = std::function<Vec2(const Vec2&)>;
using JacobianField = std::function<Mat2(const Vec2&)>;
using Perturbation = std::function<Vec2(double, const Vec2&, double)>;

/// Central-difference Jacobian with step 1e-6 * (1 + |x|).
inline Mat2 finite_difference_jacobian(const VectorField& psi, const Vec2& x) {
    const double h = 1e-6 * (1.0 + norm(x));
    const Vec2 dx = (psi(x + Vec2{h, 0.0}) - psi(x - Vec2{h, 0.0})) / (2.0 * h);
    const Vec2 dy = (psi(x + Vec2{0.0, h}) - psi(x - Vec2{0.0, h})) / (2.0 * h);
    return Mat2::from_columns(dx, dy);
}

class PlanarSystem {
public:
    PlanarSystem(std::string name, VectorField psi, std::optional<JacobianField> jac, Perturbation phi,
                 ForcingClock clock = ForcingClock::Absolute, std::vector<double> kink_phases = {})
        : name_(std::move(name)),
          psi_(std::move(psi)),
          analytic_jac_(jac.has_value()),
          phi_(std::move(phi)),
          clock_(clock),
          kink_phases_(std::move(kink_phases)) {
        if (jac) {
            jac_ = std::move(*jac);
        } else {
            jac_ = [f = psi_](const Vec2& x) { return finite_difference_jacobian(f, x); };
        }
        for (double k : kink_phases_) {
            if (!(k >= 0.0 && k < 1.0)) throw std::invalid_argument("kink phases must lie in [0, 1)");
        }
    }

    const std::string& name() const { return name_; }
    Vec2 psi(const Vec2& x) const { return psi_(x); }
    Mat2 jacobian(const Vec2& x) const { return jac_(x); }
    bool has_analytic_jacobian() const { return analytic_jac_; }
    ForcingClock clock() const { return clock_; }
    const std::vector<double>& kink_phases() const { return kink_phases_; }
    bool has_kinks() const { return !kink_phases_.empty(); }

    /// Period of phi in its time argument: T_cycle for the scaled clock (once
    /// attached), 2*pi otherwise.
    double forcing_period() const {
        if (clock_ == ForcingClock::Scaled && cycle_period_) return *cycle_period_;
        return 2.0 * std::numbers::pi;
    }

    std::optional<double> cycle_period() const { return cycle_period_; }

    /// Copy of this system with the cycle period attached (fixes the scaled clock).
    PlanarSystem with_cycle_period(double period) const {
        PlanarSystem copy = *this;
        copy.cycle_period_ = period;
        return copy;
    }

    /// Copy with phi replaced by phi(t - shift, x, eps).
    PlanarSystem with_time_shift(double shift) const {
        PlanarSystem copy = *this;
        copy.time_shift_ += shift;
        return copy;
    }

    /// phi evaluated on the system clock (time in the units of the cycle).
    Vec2 phi(double t, const Vec2& x, double eps) const {
        t -= time_shift_;
        if (clock_ == ForcingClock::Scaled) {
            if (!cycle_period_) {
                throw std::logic_error("scaled forcing clock used before the cycle period is known");
            }
            t = 2.0 * std::numbers::pi * t / *cycle_period_;
        }
        return phi_(t, x, eps);
    }

    /// Full perturbed field psi(x) + eps * phi(t, x, eps).
    Vec2 perturbed(double t, const Vec2& x, double eps) const {
        return psi_(x) + eps * phi(t, x, eps);
    }

    /// Kink times of phi inside [lo, hi] on the system clock.
    std::vector<double> kink_times(double lo, double hi) const {
        std::vector<double> out;
        if (kink_phases_.empty()) return out;
        if (lo > hi) std::swap(lo, hi);
        const double period = forcing_period();
        const double first = std::floor((lo - time_shift_) / period) - 1.0;
        for (double k = first; (k * period + time_shift_) <= hi + period; k += 1.0) {
            for (double ph : kink_phases_) {
                const double t = (k + ph) * period + time_shift_;
                if (t >= lo && t <= hi) out.push_back(t);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    const VectorField& psi_fn() const { return psi_; }
    const JacobianField& jacobian_fn() const { return jac_; }

private:
    std::string name_;
    VectorField psi_;
    JacobianField jac_;
    bool analytic_jac_;
    Perturbation phi_;
    ForcingClock clock_;
    std::vector<double> kink_phases_;
    std::optional<double> cycle_period_;
    double time_shift_ = 0.0;
};

/// Variational flow of the unperturbed field of a system.
inline VariationalTrajectory flow_with_variational(const PlanarSystem& sys, const Vec2& start, double t0,
                                                   double t1, const IntegrationOptions& opt = {}) {
    return flow_with_variational([&sys](const Vec2& x) { return sys.psi(x); },
                                 [&sys](const Vec2& x) { return sys.jacobian(x); }, start, t0, t1, opt);
}

/// max over sampled (t, x) of |phi(t + T) - phi(t)| for the attached period.
inline double periodicity_defect(const PlanarSystem& sys, double period, double box = 2.0, int samples = 200) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> ut(0.0, period), ux(-box, box);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = ut(rng);
        const Vec2 x{ux(rng), ux(rng)};
        worst = std::max(worst, norm(sys.phi(t + period, x, 0.0) - sys.phi(t, x, 0.0)));
    }
    return worst;
}

namespace builtin {

inline Vec2 hopf_field(const Vec2& x) {
    const double r2 = x.x * x.x + x.y * x.y;
    return {x.x - x.y - x.x * r2, x.x + x.y - x.y * r2};
}

inline Mat2 hopf_jacobian(const Vec2& x) {
    const double r2 = x.x * x.x + x.y * x.y;
    return {1.0 - r2 - 2.0 * x.x * x.x, -1.0 - 2.0 * x.x * x.y,
            1.0 - 2.0 * x.x * x.y, 1.0 - r2 - 2.0 * x.y * x.y};
}

inline Vec2 zero_phi(double, const Vec2&, double) { return {0.0, 0.0}; }

inline PlanarSystem hopf(Perturbation phi = zero_phi, std::string name = "hopf",
                         std::vector<double> kinks = {}) {
    return PlanarSystem(std::move(name), hopf_field, JacobianField(hopf_jacobian), std::move(phi),
                        ForcingClock::Absolute, std::move(kinks));
}

/// hopf + phi = (cos t, sin t): the reference instance with closed forms.
inline PlanarSystem hopf_rot() {
    return hopf([](double t, const Vec2&, double) { return Vec2{std::cos(t), std::sin(t)}; }, "hopf_rot");
}

/// hopf + phi = (cos t, 0).
inline PlanarSystem hopf_cos() {
    return hopf([](double t, const Vec2&, double) { return Vec2{std::cos(t), 0.0}; }, "hopf_cos");
}

/// hopf + phi = (cos^2 t, 0): half-period periodic, not antiperiodic.
inline PlanarSystem hopf_cos2() {
    return hopf([](double t, const Vec2&, double) { return Vec2{std::cos(t) * std::cos(t), 0.0}; },
                "hopf_cos2");
}

/// hopf + phi = (cos t + 2 cos 3t, sin t + 2 sin 3t). Here
/// f1(0, s) = (1 - e^{-4 pi}) e^{2s} (1 + cos 2s + sin 2s) / 2 vanishes at
/// s = pi/2 and s = 3 pi/4, so the nonvanishing condition on f1 fails at the
/// zero theta0 = 0 of f0.
inline PlanarSystem hopf_f1_vanishing() {
    return hopf(
        [](double t, const Vec2&, double) {
            return Vec2{std::cos(t) + 2.0 * std::cos(3.0 * t), std::sin(t) + 2.0 * std::sin(3.0 * t)};
        },
        "hopf_f1_vanishing");
}

/// hopf + a continuous, non-C^1 rotating forcing built from triangle waves.
inline PlanarSystem hopf_tri() {
    return hopf(
        [](double t, const Vec2&, double) {
            return Vec2{triangle_wave(t + 0.5 * std::numbers::pi), triangle_wave(t)};
        },
        "hopf_tri", {0.0, 0.25, 0.5, 0.75});
}

/// Van der Pol, mu = 1, with phi = (0, cos tau) on the scaled clock.
inline PlanarSystem vdp() {
    return PlanarSystem(
        "vdp", [](const Vec2& x) { return Vec2{x.y, (1.0 - x.x * x.x) * x.y - x.x}; },
        JacobianField([](const Vec2& x) { return Mat2{0.0, 1.0, -2.0 * x.x * x.y - 1.0, 1.0 - x.x * x.x}; }),
        [](double tau, const Vec2&, double) { return Vec2{0.0, std::cos(tau)}; }, ForcingClock::Scaled);
}

/// Linear rotation x' = (-x2, x1): every orbit is periodic, no isolated cycle.
inline PlanarSystem rotation() {
    return PlanarSystem(
        "rotation", [](const Vec2& x) { return Vec2{-x.y, x.x}; },
        JacobianField([](const Vec2&) { return Mat2{0.0, -1.0, 1.0, 0.0}; }), zero_phi);
}

}  // namespace builtin

/// Builtin instance by name; throws std::invalid_argument for unknown names.
inline PlanarSystem builtin_system(const std::string& name) {
    if (name == "hopf") return builtin::hopf();
    if (name == "hopf_rot") return builtin::hopf_rot();
    if (name == "hopf_cos") return builtin::hopf_cos();
    if (name == "hopf_cos2") return builtin::hopf_cos2();
    if (name == "hopf_f1_vanishing") return builtin::hopf_f1_vanishing();
    if (name == "hopf_tri") return builtin::hopf_tri();
    if (name == "zero_phi") return builtin::hopf(builtin::zero_phi, "zero_phi");
    if (name == "vdp") return builtin::vdp();
    if (name == "rotation") return builtin::rotation();
    throw std::invalid_argument("unknown builtin system '" + name + "'");
}

/// Analysis knobs read from the [analysis] table.
struct AnalysisSettings {
    Vec2 seed{1.3, 0.0};
    std::optional<double> period_guess;
    double tol = 1e-13;          ///< integration tolerance (cycle and frame)
    int frame_grid = 1024;       ///< Floquet frame samples
    int theta_grid = 256;        ///< f0 grid
    int f1_grid = 512;
    std::vector<double> eps{0.01};
    double bounding_box = 3.0;   ///< half-width of the finiteness probe box
};

struct Problem {
    PlanarSystem system;
    AnalysisSettings settings;
};

namespace detail {

inline ExpressionProgram parse_config_expression(const Config& cfg, const std::string& section,
                                                 const std::string& key) {
    const ConfigValue* v = cfg.find(section, key);
    if (!v) throw std::invalid_argument("missing field [" + section + "] " + key);
    const auto* text = std::get_if<std::string>(&v->value);
    if (!text) {
        throw ParseError("config line " + std::to_string(v->line) + ", column " + std::to_string(v->column) +
                             ": [" + section + "] " + key + " must be a quoted expression",
                         0, v->line, v->column);
    }
    try {
        return ExpressionProgram::parse(*text);
    } catch (const ParseError& e) {
        const std::size_t col = v->column + 1 + e.offset();
        throw ParseError("config line " + std::to_string(v->line) + ", column " + std::to_string(col) + ": [" +
                             section + "] " + key + ": " + e.what(),
                         e.offset(), v->line, col);
    }
}

}  // namespace detail

/// Build a problem from a parsed config. Either [system] builtin = "<name>" or
/// expressions psi1, psi2 (+ optional jac11..jac22) and [perturbation] phi1, phi2.
inline Problem build_problem(const Config& cfg) {
    AnalysisSettings settings;
    if (auto s = cfg.get_numbers("analysis", "seed")) {
        if (s->size() != 2) throw std::invalid_argument("[analysis] seed must have two entries");
        settings.seed = {(*s)[0], (*s)[1]};
    }
    settings.period_guess = cfg.get_number("analysis", "period_guess");
    if (auto v = cfg.get_number("analysis", "tol")) settings.tol = *v;
    if (auto v = cfg.get_number("analysis", "frame_grid")) settings.frame_grid = static_cast<int>(*v);
    if (auto v = cfg.get_number("analysis", "theta_grid")) settings.theta_grid = static_cast<int>(*v);
    if (auto v = cfg.get_number("analysis", "f1_grid")) settings.f1_grid = static_cast<int>(*v);
    if (auto v = cfg.get_numbers("analysis", "eps")) settings.eps = *v;
    if (auto v = cfg.get_number("analysis", "bounding_box")) settings.bounding_box = *v;

    if (auto b = cfg.get_string("system", "builtin")) {
        return {builtin_system(*b), settings};
    }

    auto psi1 = detail::parse_config_expression(cfg, "system", "psi1");
    auto psi2 = detail::parse_config_expression(cfg, "system", "psi2");
    VectorField psi = [psi1, psi2](const Vec2& x) { return Vec2{psi1(0.0, x.x, x.y, 0.0), psi2(0.0, x.x, x.y, 0.0)}; };

    std::optional<JacobianField> jac;
    const bool any_jac = cfg.find("system", "jac11") || cfg.find("system", "jac12") ||
                         cfg.find("system", "jac21") || cfg.find("system", "jac22");
    if (any_jac) {
        auto j11 = detail::parse_config_expression(cfg, "system", "jac11");
        auto j12 = detail::parse_config_expression(cfg, "system", "jac12");
        auto j21 = detail::parse_config_expression(cfg, "system", "jac21");
        auto j22 = detail::parse_config_expression(cfg, "system", "jac22");
        jac = [j11, j12, j21, j22](const Vec2& x) {
            return Mat2{j11(0.0, x.x, x.y, 0.0), j12(0.0, x.x, x.y, 0.0), j21(0.0, x.x, x.y, 0.0),
                        j22(0.0, x.x, x.y, 0.0)};
        };
    }

    auto phi1 = detail::parse_config_expression(cfg, "perturbation", "phi1");
    auto phi2 = detail::parse_config_expression(cfg, "perturbation", "phi2");
    Perturbation phi = [phi1, phi2](double t, const Vec2& x, double eps) {
        return Vec2{phi1(t, x.x, x.y, eps), phi2(t, x.x, x.y, eps)};
    };

    ForcingClock clock = ForcingClock::Scaled;
    if (auto c = cfg.get_string("perturbation", "clock")) {
        if (*c == "scaled") clock = ForcingClock::Scaled;
        else if (*c == "absolute") clock = ForcingClock::Absolute;
        else throw std::invalid_argument("[perturbation] clock must be \"scaled\" or \"absolute\"");
    }
    std::vector<double> kinks;
    if (auto k = cfg.get_numbers("perturbation", "kinks")) kinks = *k;
    std::string name = cfg.get_string("system", "name").value_or("custom");

    return {PlanarSystem(name, std::move(psi), std::move(jac), std::move(phi), clock, std::move(kinks)), settings};
}

inline PlanarSystem build_system(const Config& cfg) { return build_problem(cfg).system; }

/// Largest |psi| + |phi| over a grid on [-box, box]^2 x [0, T]; throws when any
/// value is non-finite.
inline void require_finite_on_box(const PlanarSystem& sys, double box, int n = 21) {
    const double period = sys.forcing_period();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Vec2 x{-box + 2.0 * box * i / (n - 1), -box + 2.0 * box * j / (n - 1)};
            if (!is_finite(sys.psi(x))) throw NumericalError("psi is not finite on the analysis box");
            for (int k = 0; k < 8; ++k) {
                if (!is_finite(sys.phi(period * k / 8.0, x, 0.0))) {
                    throw NumericalError("phi is not finite on the analysis box");
                }
            }
        }
    }
}

}  // namespace cyclepersist
