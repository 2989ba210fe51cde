#pragma once

/**
 * @file floquet.hpp
 * @brief Monodromy, characteristic multipliers and the eigenfunction frame.
 *
 * Along the cycle x0 the linearized system y' = A(t) y, A(t) = psi'(x0(t)),
 * has the eigenfunctions xdot0 (multiplier 1) and y1 (multiplier rho); the
 * adjoint z' = -A(t)^T z has z0 (multiplier 1) and z1 (multiplier rho*).
 * The monodromy Y(T) comes from the variational equation; its eigenvectors
 * (and those of Y(T)^{-T}) are then propagated by integrating y' = A y and
 * z' = -A^T z directly, rather than by forming Y(t)^{-T}, which loses about
 * |det Y(t)|^{-1} ulps. Each curve is integrated in the time direction in
 * which it dominates the other solutions of its equation (forward for a
 * growing mode, backward from t = T otherwise), so errors never get
 * amplified by the competing mode. The curves are
 * normalized so that <xdot0(0), z0(0)> = <y1(0), z1(0)> = 1. The sign of y1 is
 * fixed by <y1(0), xdot0(0)^perp> > 0.
 *
 * Outside [0, T] the curves are extended by their Floquet relations
 * y1(t + T) = rho y1(t), z1(t + T) = rho* z1(t), xdot0 and z0 periodic.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cycle.hpp"
#include "errors.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace cyclepersist {

struct FrameSample {
    double t;
    Vec2 xdot0;
    Vec2 y1;
    Vec2 z0;
    Vec2 z1;
};

struct FloquetOptions {
    double tol = 1e-13;
    int grid = 1024;
    double hyperbolicity_gap = 1e-3;  ///< required |rho - 1|
};

class FloquetFrame {
public:
    struct Parts {
        std::shared_ptr<const Trajectory<8>> forward;   // [x0, y1, z0, z1] on [0, T]
        std::shared_ptr<const Trajectory<6>> backward;  // [y1, z0, z1] from T down to 0
        bool y1_backward, z0_backward, z1_backward;
        std::shared_ptr<const PlanarSystem> system;
        double period;
        Vec2 v;   // y1(0)
        Vec2 w0;  // z0(0)
        Vec2 w1;  // z1(0)
        double rho;
        double rho_star;
        double trivial_residual;
        double adjoint_trivial_residual;
        Mat2 monodromy;
        int grid;
    };

    explicit FloquetFrame(Parts p) : p_(std::move(p)) {
        samples_.reserve(p_.grid);
        for (int i = 0; i < p_.grid; ++i) samples_.push_back(sample(p_.period * i / p_.grid));
    }

    double period() const { return p_.period; }
    double rho() const { return p_.rho; }
    double rho_star() const { return p_.rho_star; }
    double trivial_residual() const { return p_.trivial_residual; }
    double adjoint_trivial_residual() const { return p_.adjoint_trivial_residual; }
    const Mat2& monodromy() const { return p_.monodromy; }
    const std::vector<FrameSample>& samples() const { return samples_; }
    int grid() const { return p_.grid; }

    /// Floquet exponent of z1: ln(rho*) / T.
    double adjoint_exponent() const { return std::log(std::abs(p_.rho_star)) / p_.period; }

    Vec2 x0(double t) const {
        const auto f = (*p_.forward)(reduce(t).second);
        return {f[0], f[1]};
    }
    Vec2 xdot0(double t) const { return p_.system->psi(x0(t)); }
    Vec2 y1(double t) const {
        const auto [k, u] = reduce(t);
        return std::pow(p_.rho, k) * mode(u, 0, p_.y1_backward);
    }
    Vec2 z0(double t) const { return mode(reduce(t).second, 1, p_.z0_backward); }
    Vec2 z1(double t) const {
        const auto [k, u] = reduce(t);
        return std::pow(p_.rho_star, k) * mode(u, 2, p_.z1_backward);
    }

    FrameSample sample(double t) const {
        const auto [k, u] = reduce(t);
        return {t, xdot0(u), std::pow(p_.rho, k) * mode(u, 0, p_.y1_backward), mode(u, 1, p_.z0_backward),
                std::pow(p_.rho_star, k) * mode(u, 2, p_.z1_backward)};
    }

    /// The forward-integrated curves at t = T, before any Floquet extension.
    FrameSample integrated_end() const {
        const auto& s = p_.forward->back();
        return {p_.period, p_.system->psi({s[0], s[1]}), {s[2], s[3]}, {s[4], s[5]}, {s[6], s[7]}};
    }

    const PlanarSystem& system() const { return *p_.system; }

private:
    std::pair<double, double> reduce(double t) const {
        const double k = std::floor(t / p_.period);
        double u = t - k * p_.period;
        if (u >= p_.period) u = p_.period;  // rounding at the right end
        if (u < 0.0) u = 0.0;
        return {k, u};
    }
    // which: 0 = y1, 1 = z0, 2 = z1
    Vec2 mode(double u, int which, bool backward) const {
        if (backward) {
            const auto s = (*p_.backward)(u);
            return {s[2 * which], s[2 * which + 1]};
        }
        const auto s = (*p_.forward)(u);
        return {s[2 + 2 * which], s[3 + 2 * which]};
    }

    Parts p_;
    std::vector<FrameSample> samples_;
};

/// Y(T, 0) along the cycle.
inline Mat2 monodromy(const PlanarSystem& sys, const LimitCycle& cycle, double tol = 1e-13) {
    const auto var = flow_with_variational(sys, cycle.anchor(), 0.0, cycle.period(), IntegrationOptions{.tol = tol});
    return var.fundamental(cycle.period());
}

namespace detail {

// Split the real spectrum of M into the trivial multiplier (closest to 1) and the other one.
inline std::pair<RealEigen, RealEigen> split_trivial(const Mat2& M, const char* what) {
    const auto eig = real_eigen(M);
    if (!eig) throw HypothesisError(std::string(what) + " has complex multipliers; no trivial multiplier 1");
    const auto& [a, b] = *eig;
    return std::abs(a.value - 1.0) <= std::abs(b.value - 1.0) ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace detail

inline FloquetFrame build_frame(const PlanarSystem& sys, const LimitCycle& cycle, const FloquetOptions& opt = {}) {
    const double T = cycle.period();
    const Mat2 M = monodromy(sys, cycle, opt.tol);

    const auto [triv, nontriv] = detail::split_trivial(M, "monodromy");
    if (std::abs(nontriv.value - 1.0) <= opt.hyperbolicity_gap) {
        throw HypothesisError("multiplier 1 is not simple: rho = " + std::to_string(nontriv.value) +
                              " (hyperbolicity condition violated)");
    }
    const Mat2 Mstar = M.inverse().transpose();
    const auto [triv_star, nontriv_star] = detail::split_trivial(Mstar, "adjoint monodromy");

    const Vec2 xdot0 = sys.psi(cycle.anchor());
    Vec2 v = nontriv.vector;
    if (dot(v, perp(xdot0)) < 0.0) v = -v;
    Vec2 w0 = triv_star.vector;
    Vec2 w1 = nontriv_star.vector;
    const double p0 = dot(xdot0, w0);
    const double p1 = dot(v, w1);
    if (std::abs(p0) < 1e-12 || std::abs(p1) < 1e-12) {
        throw NumericalError("eigenvector pairing failed: adjoint eigenvector orthogonal to its partner");
    }
    w0 = w0 / p0;
    w1 = w1 / p1;

    const PlanarSystem* psys = &sys;
    auto rhs = [psys](double, const StateN<8>& s) {
        const Vec2 x{s[0], s[1]};
        const Mat2 A = psys->jacobian(x);
        const Mat2 At = A.transpose();
        const Vec2 f = psys->psi(x);
        const Vec2 dy = A * Vec2{s[2], s[3]};
        const Vec2 dz0 = -(At * Vec2{s[4], s[5]});
        const Vec2 dz1 = -(At * Vec2{s[6], s[7]});
        return StateN<8>{f.x, f.y, dy.x, dy.y, dz0.x, dz0.y, dz1.x, dz1.y};
    };
    const Vec2 a = cycle.anchor();
    auto forward = std::make_shared<const Trajectory<8>>(integrate<8>(
        rhs, 0.0, StateN<8>{a.x, a.y, v.x, v.y, w0.x, w0.y, w1.x, w1.y}, T, IntegrationOptions{.tol = opt.tol}));

    // Backward pass along the forward orbit (the cycle itself is unstable in
    // one of the two directions, so x0 is never integrated backward).
    auto rhs_back = [psys, forward](double t, const StateN<6>& s) {
        const auto f = (*forward)(std::clamp(t, 0.0, forward->t1()));
        const Mat2 A = psys->jacobian({f[0], f[1]});
        const Mat2 At = A.transpose();
        const Vec2 dy = A * Vec2{s[0], s[1]};
        const Vec2 dz0 = -(At * Vec2{s[2], s[3]});
        const Vec2 dz1 = -(At * Vec2{s[4], s[5]});
        return StateN<6>{dy.x, dy.y, dz0.x, dz0.y, dz1.x, dz1.y};
    };
    const double rho = nontriv.value, rho_star = nontriv_star.value;
    const Vec2 yT = rho * v, z1T = rho_star * w1;
    auto backward = std::make_shared<const Trajectory<6>>(integrate<6>(
        rhs_back, T, StateN<6>{yT.x, yT.y, w0.x, w0.y, z1T.x, z1T.y}, 0.0, IntegrationOptions{.tol = opt.tol}));

    const bool z1_grows = std::abs(rho_star) > 1.0;
    return FloquetFrame({forward, backward, std::abs(rho) < 1.0, z1_grows, !z1_grows,
                         std::make_shared<const PlanarSystem>(sys.with_cycle_period(T)), T, v, w0, w1, rho, rho_star,
                         std::abs(triv.value - 1.0), std::abs(triv_star.value - 1.0), M, opt.grid});
}

/// max over the frame grid of |(xdot0 y1)^T (z0 z1) - I| (entrywise).
inline double pairing_deviation(const FloquetFrame& frame) {
    double worst = 0.0;
    for (const auto& s : frame.samples()) {
        const double d00 = std::abs(dot(s.xdot0, s.z0) - 1.0);
        const double d01 = std::abs(dot(s.xdot0, s.z1));
        const double d10 = std::abs(dot(s.y1, s.z0));
        const double d11 = std::abs(dot(s.y1, s.z1) - 1.0);
        worst = std::max({worst, d00, d01, d10, d11});
    }
    return worst;
}

/// max over the grid of the angle between y1(t) and z0(t)^perp.
inline double parallel_defect(const FloquetFrame& frame) {
    double worst = 0.0;
    for (const auto& s : frame.samples()) {
        const Vec2 a = s.y1, b = perp(s.z0);
        const double c = std::abs(cross(a, b)) / (norm(a) * norm(b));
        worst = std::max(worst, std::asin(std::min(1.0, c)));
    }
    return worst;
}

struct LiouvilleCheck {
    double det;        ///< det Y(T) of the frame's monodromy
    double predicted;  ///< exp of the integral of div psi along the cycle
    double abs_error;
    double rel_error;
};

/// det Y(T) against exp(int_0^T div psi(x0(t)) dt), the integral by adaptive quadrature.
inline LiouvilleCheck liouville_check(const FloquetFrame& frame, double quad_tol = 1e-12) {
    const PlanarSystem& sys = frame.system();
    const double T = frame.period();
    auto div = [&](double t) { return sys.jacobian(frame.x0(t)).trace(); };
    // a finite-difference Jacobian carries ~1e-10 noise; 1e-12 is out of reach then
    if (!sys.has_analytic_jacobian()) quad_tol = std::max(quad_tol, 1e-8);
    const auto q = integrate_adaptive(div, make_breaks(0.0, T, {}, 16), QuadratureOptions{.tol = quad_tol},
                                      "divergence integral");
    const double pred = std::exp(q.value);
    const double det = frame.monodromy().det();
    return {det, pred, std::abs(det - pred), std::abs(det - pred) / std::abs(pred)};
}

struct FloquetRelationResiduals {
    double y1;  ///< |y1(T) - rho y1(0)| / |rho y1(0)|
    double z1;
    double z0;
};

/// Floquet relations checked on the integrated curves at t = T (no extension).
inline FloquetRelationResiduals floquet_relation_residuals(const FloquetFrame& frame) {
    const FrameSample s0 = frame.sample(0.0);
    const FrameSample sT = frame.integrated_end();
    return {norm(sT.y1 - frame.rho() * s0.y1) / norm(frame.rho() * s0.y1),
            norm(sT.z1 - frame.rho_star() * s0.z1) / norm(frame.rho_star() * s0.z1),
            norm(sT.z0 - s0.z0) / norm(s0.z0)};
}

/// max over interior grid nodes of |z' + A^T z| / |z| by central differences, for z0 and z1.
inline double adjoint_equation_residual(const FloquetFrame& frame) {
    const double h = 1e-5 * frame.period();
    double worst = 0.0;
    for (const auto& s : frame.samples()) {
        const double t = std::max(s.t, h);
        const Mat2 At = frame.system().jacobian(frame.x0(t)).transpose();
        for (int which = 0; which < 2; ++which) {
            auto z = [&](double u) { return which == 0 ? frame.z0(u) : frame.z1(u); };
            const Vec2 zd = (z(t + h) - z(t - h)) / (2.0 * h);
            const Vec2 r = zd + At * z(t);
            worst = std::max(worst, norm(r) / std::max(1.0, norm(z(t))));
        }
    }
    return worst;
}

struct LongtimeExtraction {
    std::vector<double> t;           ///< grid on [0, T]
    std::vector<Vec2> z;             ///< extracted curve, after optimal scalar rescaling
    double scale;                    ///< the applied scalar
    double deviation;                ///< sup_t |scale * z_raw(t) - z0(t)|
    int periods;                     ///< k actually used (after capping)
    bool time_reversed;
};

/// Long-time extraction of z0 by integrating the adjoint system over k periods
/// and keeping the last one. The z1 transient decays by rho*^{-1} per period
/// backward in time when |rho*| > 1, or by rho* forward in time otherwise.
///
/// Default initial vector: xdot0(0)^perp/|xdot0(0)| + xdot0(0)/|xdot0(0)|^2,
/// the z1(0) direction plus a component with unit z0 weight.
inline LongtimeExtraction longtime_adjoint_extract(const FloquetFrame& frame, const LimitCycle& cycle, int k,
                                                   std::optional<Vec2> initial = std::nullopt,
                                                   double tol = 1e-13, int grid = 512) {
    if (k < 2) throw std::invalid_argument("longtime_adjoint_extract needs k >= 2");
    const double T = frame.period();
    const double decay = std::abs(frame.rho_star()) > 1.0 ? 1.0 / std::abs(frame.rho_star())
                                                          : std::abs(frame.rho_star());
    const int k_cap = decay > 0.0 ? static_cast<int>(std::floor(-300.0 * std::log(10.0) / std::log(decay))) : k;
    const int periods = std::max(2, std::min(k, k_cap));
    const bool reversed = std::abs(frame.rho_star()) > 1.0;

    const Vec2 xd = frame.xdot0(0.0);
    const Vec2 start = initial.value_or(perp(xd) / norm(xd) + xd / dot(xd, xd));

    const PlanarSystem& sys = frame.system();
    auto rhs = [&](double t, const Vec2& z) { return -1.0 * (sys.jacobian(cycle.at(t)).transpose() * z); };
    const double t_end = reversed ? -periods * T : periods * T;
    const Trajectory<2> traj = flow(rhs, start, 0.0, t_end, IntegrationOptions{.tol = tol});

    LongtimeExtraction out;
    out.periods = periods;
    out.time_reversed = reversed;
    std::vector<Vec2> raw;
    std::vector<Vec2> ref;
    for (int i = 0; i <= grid; ++i) {
        const double t = T * i / grid;
        // last period of the run, shifted onto [0, T]
        const double src = reversed ? t - periods * T : t + (periods - 1) * T;
        out.t.push_back(t);
        raw.push_back(traj.point(src));
        ref.push_back(frame.z0(t));
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        num += dot(raw[i], ref[i]);
        den += dot(raw[i], raw[i]);
    }
    out.scale = den > 0.0 ? num / den : 0.0;
    out.deviation = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out.z.push_back(out.scale * raw[i]);
        out.deviation = std::max(out.deviation, norm(out.z.back() - ref[i]));
    }
    return out;
}

/// Frame export: one row per grid sample.
inline void write_frame_csv(std::ostream& out, const FloquetFrame& frame) {
    out << "t,xdot0_1,xdot0_2,y1_1,y1_2,z0_1,z0_2,z1_1,z1_2\n";
    char buf[320];
    for (const auto& s : frame.samples()) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.xdot0.x,
                      s.xdot0.y, s.y1.x, s.y1.y, s.z0.x, s.z0.y, s.z1.x, s.z1.y);
        out << buf;
    }
}

}  // namespace cyclepersist
