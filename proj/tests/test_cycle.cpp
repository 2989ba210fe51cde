#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "cyclepersist/cycle.hpp"
#include "oracles.hpp"

using namespace cyclepersist;
constexpr double pi = std::numbers::pi;

namespace {

// Period of the vdp cycle from successive downward crossings of x2 = 0 with
// x1 > 0, after a long transient; odeint dense output plus bisection.
double vdp_reference_period() {
    namespace ode = boost::numeric::odeint;
    using S = oracle::State;
    auto rhs = [](const S& x, S& d, double) { d = {x[1], (1 - x[0] * x[0]) * x[1] - x[0]}; };
    auto st = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<S>());
    st.initialize(S{2.0, 0.0}, 0.0, 1e-3);
    std::vector<double> hits;
    while (st.current_time() < 120.0) {
        st.do_step(rhs);
        const S a = st.previous_state(), b = st.current_state();
        if (a[1] > 0 && b[1] <= 0 && b[0] > 0) {
            double lo = st.previous_time(), hi = st.current_time();
            S m;
            for (int i = 0; i < 80; ++i) {
                const double mid = 0.5 * (lo + hi);
                st.calc_state(mid, m);
                (m[1] > 0 ? lo : hi) = mid;
            }
            hits.push_back(0.5 * (lo + hi));
        }
    }
    return hits.back() - hits[hits.size() - 2];
}

PlanarSystem reversed_hopf() {
    return PlanarSystem("hopf_reversed", [](const Vec2& x) { return -1.0 * builtin::hopf_field(x); },
                        JacobianField([](const Vec2& x) { return -1.0 * builtin::hopf_jacobian(x); }),
                        builtin::zero_phi);
}

}  // namespace

TEST(Cycle, HopfFromSeed) {
    const auto c = find_limit_cycle(builtin::hopf(), {1.3, 0.0});
    EXPECT_LT(std::abs(c.period() - 2 * pi), 1e-8);
    EXPECT_LT(norm(c.anchor() - Vec2{1.0, 0.0}), 1e-7);
    double sup = 0.0;
    for (int i = 0; i < 4096; ++i) sup = std::max(sup, std::abs(norm(c.at(c.period() * i / 4096)) - 1.0));
    EXPECT_LT(sup, 1e-7);
    EXPECT_LT(c.shooting_residual(), 1e-10);
    EXPECT_FALSE(c.shot_backward());
}

TEST(Cycle, OtherSeedsAndPeriodGuess) {
    for (Vec2 seed : {Vec2{0.5, 0.0}, Vec2{0.0, -1.4}, Vec2{-0.7, 0.7}}) {
        const auto c = find_limit_cycle(builtin::hopf(), seed, 6.0);
        EXPECT_LT(std::abs(c.period() - 2 * pi), 1e-8);
        EXPECT_LT(std::abs(norm(c.anchor()) - 1.0), 1e-7);
    }
}

TEST(Cycle, PeriodicExtension) {
    const auto c = find_limit_cycle(builtin::hopf(), {1.3, 0.0});
    for (double t : {-3.0, 0.4, 7.5, 20.0}) EXPECT_LT(norm(c.at(t) - c.at(t + c.period())), 1e-9);
}

TEST(Cycle, RotationHasNoIsolatedCycle) {
    EXPECT_THROW(find_limit_cycle(builtin::rotation(), {1.0, 0.0}), HypothesisError);
}

TEST(Cycle, EquilibriumSeedRejected) {
    EXPECT_THROW(find_limit_cycle(builtin::hopf(), {0.0, 0.0}), HypothesisError);
}

TEST(Cycle, VanDerPolPeriod) {
    const auto c = find_limit_cycle(builtin::vdp(), {2.0, 0.0});
    const double ref = vdp_reference_period();
    EXPECT_NEAR(ref, 6.6633, 1e-3);
    EXPECT_NEAR(c.period(), ref, 1e-3);
    EXPECT_NEAR(c.period(), ref, 1e-8);
}

TEST(Cycle, RepellingCycleFoundBackward) {
    const auto c = find_limit_cycle(reversed_hopf(), {1.3, 0.0});
    EXPECT_TRUE(c.shot_backward());
    EXPECT_LT(std::abs(c.period() - 2 * pi), 1e-8);
    EXPECT_EQ(c.orientation(), -1);
}

TEST(Contains, HopfPoints) {
    const auto c = find_limit_cycle(builtin::hopf(), {1.3, 0.0});
    EXPECT_TRUE(c.contains({0.0, 0.0}));
    EXPECT_FALSE(c.contains({2.0, 0.0}));
    EXPECT_TRUE(c.contains({0.99496, 0.0}));
    EXPECT_FALSE(c.contains({1.00496, 0.0}));
    EXPECT_EQ(c.locate({0.0, -0.5}), PointLocation::Inside);
    EXPECT_EQ(c.locate({-3.0, 1.0}), PointLocation::Outside);
}

TEST(Orientation, HopfCounterclockwise) {
    const auto c = find_limit_cycle(builtin::hopf(), {1.3, 0.0});
    EXPECT_EQ(orientation(c), 1);
    EXPECT_NEAR(c.signed_area(), pi, 1e-5);
}

TEST(Orientation, ReversedTimeFlips) {
    const auto c = find_limit_cycle(reversed_hopf(), {1.3, 0.0});
    EXPECT_EQ(orientation(c), -1);
    EXPECT_NEAR(c.signed_area(), -pi, 1e-5);
}

TEST(Orientation, VanDerPolMatchesSignedArea) {
    const auto c = find_limit_cycle(builtin::vdp(), {2.0, 0.0});
    EXPECT_EQ(orientation(c), c.signed_area() > 0 ? 1 : -1);
    // vdp turns clockwise
    EXPECT_EQ(orientation(c), -1);
}

TEST(Geometry, PolylineHelpers) {
    const std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EXPECT_DOUBLE_EQ(signed_area(square), 1.0);
    EXPECT_EQ(orientation_of(square), 1);
    EXPECT_EQ(polyline_winding(square, {0.5, 0.5}), 1);
    EXPECT_EQ(polyline_winding(square, {1.5, 0.5}), 0);
    EXPECT_DOUBLE_EQ(polyline_distance(square, {0.5, -2.0}), 2.0);
}
