#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cyclepersist/selfcheck.hpp"

using namespace cyclepersist;
constexpr double pi = std::numbers::pi;

namespace {

const Analysis& analysis(const std::string& name) {
    static std::map<std::string, Analysis> cache;
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, analyze(builtin_system(name))).first;
    return it->second;
}

BoundaryData circle_boundary(std::function<double(double)> f, std::function<double(double)> g) {
    BoundaryData b;
    auto z = [](double th) { return Vec2{-std::sin(th), std::cos(th)}; };
    b.qdot = z;
    b.z = z;
    b.F = [=](double th) { return f(th) * z(th) + g(th) * perp(z(th)); };
    b.period = 2 * pi;
    b.orientation = 1;
    return b;
}

}  // namespace

TEST(Winding, SimpleCurves) {
    EXPECT_EQ(winding_index([](double th) { return Vec2{std::cos(2 * th), std::sin(2 * th)}; }, 2 * pi).index, 2);
    EXPECT_EQ(winding_index([](double th) { return Vec2{std::cos(th), -std::sin(th)}; }, 2 * pi).index, -1);
    EXPECT_EQ(winding_index([](double) { return Vec2{0.3, -1.0}; }, 2 * pi).index, 0);
}

TEST(Winding, FastRotationNeedsRefinement) {
    // 64 samples see steps of ~3.9 rad, which bisection resolves; far coarser
    // grids alias and no sampled method can notice
    const auto w = winding_index([](double th) { return Vec2{std::cos(40 * th), std::sin(40 * th)}; }, 2 * pi, 64);
    EXPECT_EQ(w.index, 40);
    EXPECT_GT(w.refinement_trace.size(), 1u);
}

TEST(Winding, VanishingCurveIsDegenerate) {
    EXPECT_THROW(winding_index([](double th) { return Vec2{std::sin(th), 0.0}; }, 2 * pi), DegenerateBoundary);
}

TEST(ClosedForm, SyntheticExamples) {
    // f = cos th, g = sin th: zeros pi/2 (ind -1, g > 0) and 3pi/2 (ind +1, g < 0)
    const auto a = closed_form_from_boundary(circle_boundary([](double t) { return std::cos(t); },
                                                             [](double t) { return std::sin(t); }));
    ASSERT_TRUE(a.degree) << a.failed;
    EXPECT_EQ(*a.degree, 0);
    const auto b = closed_form_from_boundary(circle_boundary([](double t) { return std::cos(t); },
                                                             [](double t) { return -std::sin(t); }));
    ASSERT_TRUE(b.degree) << b.failed;
    EXPECT_EQ(*b.degree, 2);
}

TEST(ClosedForm, HypothesisFailuresAreNamed) {
    const auto three = closed_form_degree({{0.0, 1, 1}, {1.0, -1, -1}, {2.0, 1, 1}}, 1);
    EXPECT_FALSE(three.degree);
    EXPECT_NE(three.failed.find("zero count"), std::string::npos);
    const auto same = closed_form_degree({{0.0, 1, 1}, {1.0, -1, 1}}, 1);
    EXPECT_NE(same.failed.find("sign alternation"), std::string::npos);
    const auto flat = closed_form_degree({{0.0, 0, 1}, {1.0, -1, -1}}, 1);
    EXPECT_NE(flat.failed.find("simple zeros"), std::string::npos);
    EXPECT_NE(closed_form_degree({{0.0, 1, 1}, {1.0, -1, -1}}, 1, false).failed.find("transversality"),
              std::string::npos);
}

TEST(ClosedForm, MatchesWindingOnRandomFields) {
    std::mt19937_64 rng(99);
    int n = 0;
    for (int i = 0; i < 30; ++i) {
        const int k = i % 2 == 0 ? 1 : -1;
        const auto b = synthetic_boundary(rng, k, i % 3 == 0);
        const auto cf = closed_form_from_boundary(b);
        ASSERT_TRUE(cf.degree) << i << ": " << cf.failed;
        EXPECT_EQ(*cf.degree, k * winding_index(b.F, b.period).index) << i;
        ++n;
    }
    EXPECT_GE(n, 20);
}

TEST(ClosedForm, AntiperiodicFieldsGiveZeroOrTwo) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        const auto b = synthetic_boundary(rng, i % 2 ? -1 : 1, true);
        const auto cf = closed_form_from_boundary(b);
        ASSERT_TRUE(cf.degree);
        EXPECT_TRUE(*cf.degree == 0 || *cf.degree == 2) << *cf.degree;
    }
}

TEST(FOnCycle, HopfRotValues) {
    const auto& f = analysis("hopf_rot").frame;
    const double f1_00 = 0.5 * (1 - std::exp(-4 * pi));
    // theta = 0: f0 = 0, so F = f1(0, 0) y1(0) = f1(0, 0) (1, 0)
    EXPECT_LT(norm(F_on_cycle(f, 0.0) - Vec2{f1_00, 0.0}), 1e-7);
    // theta = pi/2: f1 = 0, F = f0 xdot0 = -2pi (-1, 0)
    EXPECT_LT(norm(F_on_cycle(f, pi / 2) - Vec2{2 * pi, 0.0}), 1e-7);
}

TEST(FOnCycle, AgreesWithVariationOfConstants) {
    const auto& a = analysis("hopf_rot");
    EXPECT_LT(a.degree.eta_check_residual, 1e-6);
    for (double th : {0.7, 2.9}) {
        const Vec2 via = F_s_via_eta(a.system, a.frame.x0(th), 0.0, a.frame.period());
        EXPECT_LT(norm(F_on_cycle(a.frame, th) - via), 1e-6) << th;
    }
}

TEST(FOnCycle, TangentialComponentIndependentOfS) {
    const auto& f = analysis("hopf_rot").frame;
    for (double th : {0.4, 2.0}) {
        const double f0 = eval_f0(f, th);
        for (double s : {0.0, 1.0, 4.5}) EXPECT_NEAR(dot(f.z0(th), F_on_cycle(f, th, s)), f0, 1e-7) << th << " " << s;
    }
}

TEST(Degree, HopfRot) {
    const auto& d = analysis("hopf_rot").degree;
    EXPECT_EQ(d.k, 1);
    EXPECT_EQ(d.dB, 0);
    ASSERT_TRUE(d.closed_form_value);
    EXPECT_EQ(*d.closed_form_value, 0);
    EXPECT_FALSE(d.degenerate);
    EXPECT_TRUE(d.f1_sign_all);
    EXPECT_TRUE(d.degree_test_applicable);
    EXPECT_EQ(d.psi_degree, 1);
    ASSERT_EQ(d.eta_sign.size(), 2u);
    for (const auto& e : d.eta_sign) EXPECT_TRUE(e.holds);
}

TEST(Degree, HopfCosIsApplicable) {
    const auto& d = analysis("hopf_cos").degree;
    EXPECT_NE(d.dB, 1);
    EXPECT_TRUE(d.f1_sign_all);
    EXPECT_TRUE(d.degree_test_applicable);
}

TEST(Degree, VanishingF1BlocksThePrediction) {
    const auto& d = analysis("hopf_f1_vanishing").degree;
    EXPECT_FALSE(d.f1_sign_all);
    EXPECT_FALSE(d.degree_test_applicable);
    EXPECT_NE(d.prediction.find("f1"), std::string::npos);
}

TEST(Degree, ZeroPerturbationDegenerate) {
    const auto& d = analysis("zero_phi").degree;
    EXPECT_TRUE(d.degenerate);
    EXPECT_FALSE(d.degree_test_applicable);
    EXPECT_EQ(d.psi_degree, 1);
}

TEST(Degree, VanDerPolOrientation) {
    const auto& d = analysis("vdp").degree;
    EXPECT_EQ(d.k, -1);
    EXPECT_EQ(d.psi_degree, 1);
}
