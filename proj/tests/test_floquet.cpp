#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "cyclepersist/floquet.hpp"
#include "oracles.hpp"

using namespace cyclepersist;
constexpr double pi = std::numbers::pi;

namespace {

struct HopfFrame {
    LimitCycle cycle;
    FloquetFrame frame;
};

const HopfFrame& hopf() {
    static const HopfFrame h = [] {
        const auto sys = builtin::hopf();
        auto c = find_limit_cycle(sys, {1.3, 0.0});
        auto f = build_frame(sys.with_cycle_period(c.period()), c);
        return HopfFrame{std::move(c), std::move(f)};
    }();
    return h;
}

}  // namespace

TEST(Monodromy, HopfEigenvalues) {
    const auto& h = hopf();
    const auto eig = real_eigen(monodromy(builtin::hopf(), h.cycle));
    ASSERT_TRUE(eig);
    EXPECT_LT(std::abs(eig->first.value - 1.0), 1e-6);
    EXPECT_LT(std::abs(eig->second.value / std::exp(-4 * pi) - 1.0), 1e-6);
}

TEST(Frame, Multipliers) {
    const auto& f = hopf().frame;
    EXPECT_LT(std::abs(f.rho() / std::exp(-4 * pi) - 1.0), 1e-6);
    EXPECT_LT(std::abs(f.rho_star() / std::exp(4 * pi) - 1.0), 1e-5);
    EXPECT_NEAR(f.rho_star(), 2.86751e5, 1.0);
    EXPECT_LT(f.trivial_residual(), 1e-7);
    EXPECT_LT(f.adjoint_trivial_residual(), 1e-7);
    EXPECT_NEAR(f.adjoint_exponent(), 2.0, 1e-9);
}

TEST(Frame, LiouvilleClosedForm) {
    // div psi = 2 - 4 r^2 = -2 on the unit circle
    EXPECT_LT(std::abs(hopf().frame.monodromy().det() - std::exp(-4 * pi)), 1e-7);
}

TEST(Frame, LiouvilleAgainstSimpson) {
    const auto& f = hopf().frame;
    const auto& sys = f.system();
    const double T = f.period();
    const double integral = oracle::simpson([&](double t) { return sys.jacobian(f.x0(t)).trace(); }, 0.0, T);
    EXPECT_LT(std::abs(f.monodromy().det() / std::exp(integral) - 1.0), 1e-7);
    const auto lc = liouville_check(f);
    EXPECT_LT(std::abs(std::log(lc.predicted) - integral), 1e-9);
    EXPECT_LT(lc.rel_error, 1e-7);
}

TEST(Frame, ClosedFormCurves) {
    const auto& f = hopf().frame;
    double ex = 0, ey = 0, ez0 = 0, ez1 = 0;
    for (const auto& s : f.samples()) {
        const double t = s.t, c = std::cos(t), n = std::sin(t);
        ex = std::max(ex, norm(s.xdot0 - Vec2{-n, c}));
        ey = std::max(ey, norm(s.y1 - std::exp(-2 * t) * Vec2{c, n}));
        ez0 = std::max(ez0, norm(s.z0 - Vec2{-n, c}));
        ez1 = std::max(ez1, norm(s.z1 - std::exp(2 * t) * Vec2{c, n}));
    }
    EXPECT_LT(ex, 1e-6);
    EXPECT_LT(ey, 1e-6);
    EXPECT_LT(ez0, 1e-6);
    EXPECT_LT(ez1, 1e-6);
}

TEST(Frame, FloquetExtensionOutsideOnePeriod) {
    const auto& f = hopf().frame;
    for (double t : {-5.0, -0.3, 7.0, 11.5}) {
        const Vec2 c{std::cos(t), std::sin(t)};
        EXPECT_LT(norm(f.y1(t) - std::exp(-2 * t) * c), 1e-6 * std::exp(-2 * t) + 1e-12) << t;
        EXPECT_LT(norm(f.z1(t) - std::exp(2 * t) * c), 1e-6 * std::exp(2 * t)) << t;
        EXPECT_LT(norm(f.z0(t) - perp(c) * -1.0), 1e-6) << t;
    }
}

TEST(Frame, PairingIsIdentity) {
    const auto& f = hopf().frame;
    EXPECT_LT(pairing_deviation(f), 1e-7);
    for (const auto& s : f.samples()) {
        const double scale = norm(s.xdot0) * norm(s.z1) + norm(s.y1) * norm(s.z0);
        EXPECT_LT(std::abs(dot(s.xdot0, s.z1)), 1e-7 * scale);
        EXPECT_LT(std::abs(dot(s.y1, s.z0)), 1e-7 * scale);
        EXPECT_NEAR(dot(s.xdot0, s.z0), 1.0, 1e-7);
        EXPECT_NEAR(dot(s.y1, s.z1), 1.0, 1e-7);
    }
}

TEST(Frame, FloquetRelationsAndAdjointEquation) {
    const auto& f = hopf().frame;
    const auto r = floquet_relation_residuals(f);
    EXPECT_LT(r.y1, 1e-7);
    EXPECT_LT(r.z0, 1e-7);
    EXPECT_LT(r.z1, 1e-7);
    EXPECT_LT(adjoint_equation_residual(f), 1e-5);
    EXPECT_LT(parallel_defect(f), 1e-9);
}

TEST(Longtime, ThreePeriods) {
    const auto& h = hopf();
    const auto e = longtime_adjoint_extract(h.frame, h.cycle, 3);
    EXPECT_EQ(e.periods, 3);
    EXPECT_LT(e.deviation, 1e-4);
}

TEST(Longtime, TransientDecaysGeometrically) {
    const auto& h = hopf();
    // a large z1 component makes the k = 2 transient visible above round-off
    const Vec2 start = Vec2{1e3, 0.0} + Vec2{0.0, 1.0};
    const auto e2 = longtime_adjoint_extract(h.frame, h.cycle, 2, start);
    const auto e3 = longtime_adjoint_extract(h.frame, h.cycle, 3, start);
    EXPECT_GT(e2.deviation, 1e-6);
    EXPECT_LT(e3.deviation, e2.deviation * 1e-3);
}

TEST(Longtime, ExactStartHasNoTransient) {
    const auto& h = hopf();
    for (int k : {2, 3, 5}) {
        const auto e = longtime_adjoint_extract(h.frame, h.cycle, k, h.frame.z0(0.0));
        EXPECT_LT(e.deviation, 1e-9) << k;
    }
    EXPECT_THROW(longtime_adjoint_extract(h.frame, h.cycle, 1), std::invalid_argument);
}

TEST(Frame, VanDerPolInvariants) {
    const auto sys = builtin::vdp();
    const auto c = find_limit_cycle(sys, {2.0, 0.0});
    const auto f = build_frame(sys.with_cycle_period(c.period()), c);
    EXPECT_LT(pairing_deviation(f), 1e-7);
    EXPECT_LT(std::abs(f.rho() * f.rho_star() - 1.0), 1e-6);
    EXPECT_LT(liouville_check(f).rel_error, 1e-6);
    EXPECT_LT(f.trivial_residual(), 1e-7);
    const double integral =
        oracle::simpson([&](double t) { return f.system().jacobian(f.x0(t)).trace(); }, 0.0, f.period());
    EXPECT_LT(std::abs(f.monodromy().det() / std::exp(integral) - 1.0), 1e-6);
}

TEST(Frame, RotationRejected) {
    // no cycle to build on: the shooting step already refuses
    EXPECT_THROW(find_limit_cycle(builtin::rotation(), {1.0, 0.0}), HypothesisError);
}
