#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "cyclepersist/pipeline.hpp"
#include "oracles.hpp"

using namespace cyclepersist;
constexpr double pi = std::numbers::pi;

namespace {

// one analysis per system, shared by the tests below
const Analysis& analysis(const std::string& name) {
    static std::map<std::string, Analysis> cache;
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, analyze(builtin_system(name))).first;
    return it->second;
}

PlanarSystem hopf_x1_forcing() {
    return builtin::hopf([](double t, const Vec2& x, double) { return Vec2{std::cos(t) * x.x, 0.0}; }, "hopf_x1");
}

double f1_cos_closed(double s) {
    return (1 - std::exp(-4 * pi)) * std::exp(2 * s) * (2 + std::cos(2 * s) + std::sin(2 * s)) / 8;
}

}  // namespace

TEST(F0, HopfRotExamples) {
    const auto& f = analysis("hopf_rot").frame;
    EXPECT_NEAR(eval_f0(f, pi / 2), -2 * pi, 1e-8);
    EXPECT_NEAR(eval_f0(f, 0.0), 0.0, 1e-8);
    for (double th : {0.3, 1.7, 4.0, 5.9}) EXPECT_NEAR(eval_f0(f, th), -2 * pi * std::sin(th), 1e-8) << th;
}

TEST(F0, ZeroPerturbationGivesZero) {
    const auto& a = analysis("zero_phi");
    for (double th : {0.0, 1.0, 3.0}) EXPECT_EQ(eval_f0(a.frame, th), 0.0);
    EXPECT_TRUE(a.profile.loud_degenerate);
    EXPECT_TRUE(a.profile.zeros.empty());
}

TEST(F1, HopfRotExamples) {
    const auto& f = analysis("hopf_rot").frame;
    EXPECT_NEAR(eval_f1(f, 0.0, 0.0), 0.4999983, 1e-6);
    const double at_T = eval_f1(f, 0.0, 2 * pi);
    EXPECT_LT(std::abs(at_T / (0.5 * (std::exp(4 * pi) - 1)) - 1), 1e-4);
    EXPECT_NEAR(eval_f1(f, pi / 2, 1.3), 0.0, 1e-8);
    for (double s : {0.5, 2.0, 5.0}) {
        const double want = 0.5 * std::cos(1.1) * std::exp(2 * s) * (1 - std::exp(-4 * pi));
        EXPECT_LT(std::abs(eval_f1(f, 1.1, s) / want - 1), 1e-6) << s;
    }
}

TEST(F1, HopfCosClosedForm) {
    const auto& f = analysis("hopf_cos").frame;
    for (double s : {0.0, 0.9, pi / 2, 3.5, 6.0}) {
        EXPECT_LT(std::abs(eval_f1(f, 0.0, s) / f1_cos_closed(s) - 1), 1e-6) << s;
    }
}

TEST(Quadrature, AgreesWithSimpsonOracle) {
    const auto& f = analysis("hopf_rot").frame;
    const auto& sys = f.system();
    for (double th : {0.4, 2.2, 5.1}) {
        const double a = oracle::simpson([&](double t) { return dot(f.z0(t), sys.phi(t - th, f.x0(t), 0.0)); }, 0.0,
                                         f.period());
        EXPECT_NEAR(eval_f0(f, th), a, 1e-9) << th;
        const double s = 1.3 * th;
        const double b = oracle::simpson([&](double t) { return dot(f.z1(t), sys.phi(t - th, f.x0(t), 0.0)); },
                                         s - f.period(), s);
        EXPECT_LT(std::abs(eval_f1(f, th, s) / b - 1), 1e-8) << th;
    }
}

TEST(Zeros, HopfRotZerosAndSlopes) {
    const auto& p = analysis("hopf_rot").profile;
    ASSERT_EQ(p.zeros.size(), 2u);
    EXPECT_LT(detail::circle_distance(p.zeros[0].theta, 0.0, p.period), 1e-8);
    EXPECT_LT(std::abs(p.zeros[1].theta - pi), 1e-8);
    EXPECT_NEAR(p.zeros[0].slope, -2 * pi, 1e-3);
    EXPECT_NEAR(p.zeros[1].slope, 2 * pi, 1e-3);
    EXPECT_TRUE(p.zeros[0].simple && p.zeros[1].simple);
    EXPECT_TRUE(p.degenerate_zeros.empty());
}

TEST(Zeros, FinerGridAgrees) {
    for (const char* n : {"hopf_tri", "hopf_f1_vanishing"}) {
        const auto& a = analysis(n);
        const auto f0 = f0_on_grid(a.frame, 512);
        const auto fine = find_f0_zeros(a.frame, f0, 512);
        ASSERT_EQ(fine.size(), a.profile.zeros.size()) << n;
        for (std::size_t i = 0; i < fine.size(); ++i) {
            EXPECT_LT(detail::circle_distance(fine[i].theta, a.profile.zeros[i].theta, a.frame.period()), 1e-8) << n;
            EXPECT_NEAR(fine[i].slope, a.profile.zeros[i].slope, 1e-3 * std::abs(fine[i].slope)) << n;
        }
    }
}

TEST(Zeros, IdenticallyZeroIsReportedLoudly) {
    // <z0, (cos(t - theta) x1, 0)> integrates to zero for every theta
    const auto a = analyze(hopf_x1_forcing());
    EXPECT_TRUE(a.profile.loud_degenerate);
    EXPECT_LT(a.profile.max_abs_f0, 1e-8);
    EXPECT_THROW(find_f0_zeros(a.frame, a.profile.f0_values, 256), DegenerateBifurcation);
}

TEST(Zeros, CoarseGridRejected) {
    const auto& a = analysis("hopf_rot");
    EXPECT_THROW(find_f0_zeros(a.frame, f0_on_grid(a.frame, 32), 32), std::invalid_argument);
}

TEST(F1Sign, HopfRotHoldsAtBothZeros) {
    const auto& p = analysis("hopf_rot").profile;
    ASSERT_EQ(p.f1_sign.size(), 2u);
    for (const auto& c : p.f1_sign) {
        EXPECT_TRUE(c.holds);
        EXPECT_GT(c.normalized_margin, 1e-6);
    }
}

TEST(F1Sign, HopfCosHolds) {
    // f1(0, s) = (1 - e^{-4pi}) e^{2s} (2 + cos 2s + sin 2s) / 8 stays positive:
    // 2 + sqrt2 sin(2s + pi/4) >= 2 - sqrt2
    const auto& a = analysis("hopf_cos");
    const auto c = check_f1_sign(a.frame, 0.0);
    EXPECT_TRUE(c.holds);
    EXPECT_GT(c.margin, 0.0);
    EXPECT_NEAR(c.margin, f1_cos_closed(c.argmin), 1e-6 * c.max_abs);
}

TEST(F1Sign, VanishingCaseFails) {
    const auto& a = analysis("hopf_f1_vanishing");
    const auto c = check_f1_sign(a.frame, 0.0);
    EXPECT_FALSE(c.holds);
    EXPECT_LT(c.normalized_margin, 1e-6);
    // zeros at pi/2 and 3pi/4; the minimizer is one of them
    EXPECT_LT(std::min(std::abs(c.argmin - pi / 2), std::abs(c.argmin - 0.75 * pi)), 1e-4);
}

TEST(F1, FloquetRelation) {
    EXPECT_LT(f1_floquet_relation_deviation(analysis("hopf_rot").frame, 20), 1e-6);
    EXPECT_LT(f1_floquet_relation_deviation(analysis("hopf_tri").frame, 10), 1e-6);
}

TEST(Symmetry, HopfRotAllFlags) {
    const auto& s = analysis("hopf_rot").profile.symmetry;
    EXPECT_TRUE(s.antiperiodic);
    EXPECT_TRUE(s.f0_sym);
    EXPECT_TRUE(s.f1_sym);
    EXPECT_TRUE(s.symmetry_applicable);
    EXPECT_TRUE(s.reason.empty());
}

TEST(Symmetry, CosSquaredNotAntiperiodic) {
    const auto& s = analysis("hopf_cos2").profile.symmetry;
    EXPECT_FALSE(s.antiperiodic);
    EXPECT_FALSE(s.symmetry_applicable);
    EXPECT_FALSE(s.reason.empty());
}

TEST(Symmetry, ZeroPerturbationNotApplicable) {
    const auto& s = analysis("zero_phi").profile.symmetry;
    EXPECT_FALSE(s.symmetry_applicable);
    EXPECT_EQ(s.reason, "f0 vanishes identically");
}
