#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cyclepersist/model.hpp"

using namespace cyclepersist;
constexpr double pi = std::numbers::pi;

namespace {

double ev(const std::string& src, double t = 0, double x1 = 0, double x2 = 0, double eps = 0) {
    return ExpressionProgram::parse(src)(t, x1, x2, eps);
}

std::size_t error_offset(const std::string& src) {
    try {
        ExpressionProgram::parse(src);
    } catch (const ParseError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "no error for '" << src << "'";
    return 0;
}

}  // namespace

TEST(Expression, Examples) {
    EXPECT_DOUBLE_EQ(ev("sin(t)*x1", pi / 2, 2.0), 2.0);
    EXPECT_NEAR(ev("abs(sin(t)) - 2/pi", 0.0), -2.0 / pi, 1e-15);
    EXPECT_EQ(ev("x1 - x2 - x1*(x1^2+x2^2)", 0, 1.0, 0.0), 0.0);
}

TEST(Expression, PrecedenceAndAssociativity) {
    EXPECT_EQ(ev("1 + 2*3"), 7.0);
    EXPECT_EQ(ev("(1 + 2)*3"), 9.0);
    EXPECT_EQ(ev("2^3^2"), 512.0);
    EXPECT_EQ(ev("-2^2"), -4.0);
    EXPECT_EQ(ev("8/4/2"), 1.0);
    EXPECT_EQ(ev("2 - 3 - 4"), -5.0);
    EXPECT_EQ(ev("2^-1"), 0.5);
}

TEST(Expression, FunctionsAndConstants) {
    EXPECT_NEAR(ev("exp(1) - e"), 0.0, 1e-15);
    EXPECT_NEAR(ev("log(e^2)"), 2.0, 1e-15);
    EXPECT_EQ(ev("min(3, -1) + max(2, 5)"), 4.0);
    EXPECT_NEAR(ev("mod(7.5, 2)"), 1.5, 1e-15);
    EXPECT_EQ(ev("sign(-3) + sign(0) + sign(2)"), 0.0);
    EXPECT_NEAR(ev("tri(pi/2)"), 1.0, 1e-15);
    EXPECT_NEAR(ev("tri(0)"), 0.0, 1e-15);
    EXPECT_NEAR(ev("tri(-pi/2)"), -1.0, 1e-15);
    EXPECT_NEAR(ev("eps*t + x2", 2.0, 0.0, 3.0, 0.5), 4.0, 1e-15);
    EXPECT_EQ(ev("1.5e-3*1e3"), 1.5);
}

TEST(Expression, ErrorsCarryOffsets) {
    EXPECT_EQ(error_offset("1 + "), 4u);
    EXPECT_EQ(error_offset("sin(t"), 5u);
    EXPECT_EQ(error_offset("x1 + y"), 5u);
    EXPECT_EQ(error_offset("foo(2)"), 0u);
    EXPECT_EQ(error_offset("2 3"), 2u);
    EXPECT_THROW(ExpressionProgram::parse(""), ParseError);
    EXPECT_THROW(ExpressionProgram::parse("min(1)"), ParseError);
    EXPECT_THROW(ExpressionProgram::parse("sin(1, 2)"), ParseError);
}

TEST(Expression, UnparseRoundTrips) {
    for (const char* src : {"x1 - x2 - x1*(x1^2+x2^2)", "-(t + 1)^2/3", "2^3^2", "min(sin(t), -x2) * eps"}) {
        const auto a = ExpressionProgram::parse(src);
        const auto b = ExpressionProgram::parse(a.unparse());
        for (double t : {0.0, 0.7, -1.3}) EXPECT_EQ(a(t, 0.4, -0.9, 0.1), b(t, 0.4, -0.9, 0.1)) << src;
    }
}

TEST(Config, ParsesValues) {
    const auto c = Config::parse(
        "# comment\n"
        "top = 1\n"
        "[analysis]\n"
        "tol = 1e-12   # trailing\n"
        "seed = [1.3, -0.5]\n"
        "flag = true\n"
        "[system]\n"
        "name = \"a \\\"quoted\\\" name\"\n");
    EXPECT_EQ(c.get_number("", "top"), 1.0);
    EXPECT_EQ(c.get_number("analysis", "tol"), 1e-12);
    EXPECT_EQ(c.get_numbers("analysis", "seed"), (std::vector<double>{1.3, -0.5}));
    EXPECT_EQ(c.get_numbers("analysis", "tol"), (std::vector<double>{1e-12}));
    EXPECT_EQ(c.get_string("system", "name"), "a \"quoted\" name");
    EXPECT_FALSE(c.get_number("analysis", "missing"));
    EXPECT_THROW(c.get_string("analysis", "tol"), ParseError);
}

TEST(Config, ErrorsCarryLineAndColumn) {
    auto where = [](const std::string& text) -> std::pair<std::size_t, std::size_t> {
        try {
            Config::parse(text);
        } catch (const ParseError& e) {
            return {e.line(), e.column()};
        }
        return {0, 0};
    };
    EXPECT_EQ(where("[a]\nx = 1\ny 2\n"), (std::pair<std::size_t, std::size_t>{3, 3}));
    EXPECT_EQ(where("[a\n"), (std::pair<std::size_t, std::size_t>{1, 3}));
    EXPECT_EQ(where("x = \"open\n"), (std::pair<std::size_t, std::size_t>{1, 10}));
    EXPECT_EQ(where("x = 1\nx = 2\n"), (std::pair<std::size_t, std::size_t>{2, 1}));
    EXPECT_EQ(where("x = 12abc\n"), (std::pair<std::size_t, std::size_t>{1, 5}));
    EXPECT_EQ(where("x = [1, 2\n"), (std::pair<std::size_t, std::size_t>{1, 10}));
}

TEST(Config, ExpressionErrorPointsIntoTheFile) {
    const std::string text = "[system]\npsi1 = \"x1 + * x2\"\npsi2 = \"x1\"\n[perturbation]\nphi1 = \"0\"\nphi2 = \"0\"\n";
    try {
        build_problem(Config::parse(text));
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        // the '*' sits at column 14 of line 2
        EXPECT_EQ(e.column(), 14u);
    }
}

TEST(Config, MissingFieldIsReported) {
    EXPECT_THROW(build_problem(Config::parse("[system]\npsi1 = \"x1\"\n")), std::invalid_argument);
    EXPECT_THROW(build_problem(Config::parse("[system]\nbuiltin = \"nope\"\n")), std::invalid_argument);
}

TEST(Config, AnalysisSettings) {
    const auto p = build_problem(Config::parse(
        "[system]\nbuiltin = \"vdp\"\n[analysis]\nseed = [2, 0]\ntol = 1e-12\nframe_grid = 512\n"
        "theta_grid = 128\nf1_grid = 64\neps = [0.02, 0.01]\nperiod_guess = 6.6\nbounding_box = 4\n"));
    EXPECT_EQ(p.system.name(), "vdp");
    EXPECT_EQ(p.settings.seed, (Vec2{2.0, 0.0}));
    EXPECT_EQ(p.settings.tol, 1e-12);
    EXPECT_EQ(p.settings.frame_grid, 512);
    EXPECT_EQ(p.settings.theta_grid, 128);
    EXPECT_EQ(p.settings.f1_grid, 64);
    EXPECT_EQ(p.settings.eps, (std::vector<double>{0.02, 0.01}));
    EXPECT_EQ(p.settings.period_guess, 6.6);
    EXPECT_EQ(p.settings.bounding_box, 4.0);
}

TEST(Config, ExpressionSystemMatchesBuiltin) {
    const auto p = build_problem(Config::parse(
        "[system]\npsi1 = \"x1 - x2 - x1*(x1^2 + x2^2)\"\npsi2 = \"x1 + x2 - x2*(x1^2 + x2^2)\"\n"
        "[perturbation]\nphi1 = \"cos(t)\"\nphi2 = \"sin(t)\"\nclock = \"absolute\"\n"));
    const auto ref = builtin::hopf_rot();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        const Vec2 x{U(rng), U(rng)};
        const double t = 3.0 * U(rng);
        EXPECT_LT(norm(p.system.psi(x) - ref.psi(x)), 1e-14);
        EXPECT_LT(norm(p.system.phi(t, x, 0.0) - ref.phi(t, x, 0.0)), 1e-14);
        // no jacobian given: finite differences
        EXPECT_FALSE(p.system.has_analytic_jacobian());
        EXPECT_LT((p.system.jacobian(x) - ref.jacobian(x)).max_abs(), 1e-7);
    }
}

TEST(Model, BuiltinHopfClosedForm) {
    const auto h = builtin::hopf();
    for (int i = 0; i < 16; ++i) {
        const double t = 2 * pi * i / 16;
        // (cos t, sin t) solves the system: psi equals the derivative
        EXPECT_LT(norm(h.psi({std::cos(t), std::sin(t)}) - Vec2{-std::sin(t), std::cos(t)}), 1e-15);
    }
}

TEST(Model, AnalyticJacobiansMatchFiniteDifferences) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (const auto& sys : {builtin::hopf(), builtin::vdp(), builtin::rotation()}) {
        ASSERT_TRUE(sys.has_analytic_jacobian());
        for (int i = 0; i < 20; ++i) {
            const Vec2 x{U(rng), U(rng)};
            const Mat2 fd = finite_difference_jacobian([&](const Vec2& p) { return sys.psi(p); }, x);
            EXPECT_LT((fd - sys.jacobian(x)).max_abs(), 1e-7) << sys.name();
        }
    }
}

TEST(Model, ScaledClockNeedsThePeriod) {
    const auto v = builtin::vdp();
    EXPECT_EQ(v.clock(), ForcingClock::Scaled);
    EXPECT_THROW(v.phi(0.0, {0, 0}, 0.0), std::logic_error);
    const auto w = v.with_cycle_period(6.0);
    EXPECT_EQ(w.forcing_period(), 6.0);
    EXPECT_NEAR(w.phi(1.5, {0, 0}, 0.0).y, std::cos(2 * pi * 1.5 / 6.0), 1e-15);
    EXPECT_LT(periodicity_defect(w, 6.0), 1e-12);
}

TEST(Model, PerturbationsArePeriodic) {
    for (const char* n : {"hopf_rot", "hopf_cos", "hopf_cos2", "hopf_f1_vanishing", "hopf_tri"}) {
        const auto s = builtin_system(n);
        EXPECT_LT(periodicity_defect(s, 2 * pi), 1e-12) << n;
    }
}

TEST(Model, TimeShift) {
    const auto s = builtin::hopf_rot().with_time_shift(0.3);
    EXPECT_NEAR(s.phi(1.0, {0, 0}, 0.0).x, std::cos(0.7), 1e-15);
}

TEST(Model, KinkTimes) {
    const auto s = builtin::hopf_tri();
    EXPECT_TRUE(s.has_kinks());
    const auto ks = s.kink_times(0.0, 2 * pi);
    // kinks at 0, pi/2, pi, 3pi/2 within the open window
    ASSERT_GE(ks.size(), 3u);
    for (double k : ks) EXPECT_NEAR(std::remainder(k, pi / 2), 0.0, 1e-12);
}

TEST(Model, NonFiniteFieldRejected) {
    const PlanarSystem bad("bad", [](const Vec2& x) { return Vec2{1.0 / x.x, 0.0}; }, std::nullopt,
                           builtin::zero_phi);
    EXPECT_THROW(require_finite_on_box(bad, 1.0), NumericalError);
    EXPECT_NO_THROW(require_finite_on_box(builtin::hopf_rot(), 3.0));
}
