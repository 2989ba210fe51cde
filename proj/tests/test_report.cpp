#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "cyclepersist/report.hpp"

using namespace cyclepersist;

namespace {

PipelineSettings quick() {
    PipelineSettings s;
    s.frame_grid = 512;
    s.theta_grid = 128;
    s.f1_grid = 128;
    return s;
}

std::string report_with_threads(const char* threads) {
    setenv("CYCLEPERSIST_THREADS", threads, 1);
    const auto a = analyze(builtin::hopf_rot(), quick());
    unsetenv("CYCLEPERSIST_THREADS");
    return analysis_json(a, "abc", false).dump(2);
}

// every '<tag' has a matching '</tag>' or is self-closed
bool balanced_tags(const std::string& s) {
    std::vector<std::string> stack;
    for (std::size_t i = s.find('<'); i != std::string::npos; i = s.find('<', i + 1)) {
        const std::size_t end = s.find('>', i);
        if (end == std::string::npos) return false;
        const std::string tag = s.substr(i + 1, end - i - 1);
        if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
        } else if (tag.back() != '/') {
            stack.push_back(tag.substr(0, tag.find_first_of(" \n")));
        }
    }
    return stack.empty();
}

}  // namespace

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Json, IdenticalAcrossThreadCounts) {
    const std::string a = report_with_threads("4");
    const std::string b = report_with_threads("1");
    const std::string c = report_with_threads("3");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Json, RequiredKeys) {
    const auto a = analyze(builtin::hopf_rot(), quick());
    const auto j = analysis_json(a, "deadbeef", true);
    for (const char* k : {"system", "cycle", "floquet", "bifurcation", "degree", "provenance", "timing"}) {
        EXPECT_TRUE(j.contains(k)) << k;
    }
    EXPECT_EQ(j["provenance"]["schema_version"], kSchemaVersion);
    EXPECT_EQ(j["provenance"]["config_sha256"], "deadbeef");
    EXPECT_EQ(j["degree"]["dB"], 0);
    EXPECT_EQ(j["degree"]["closed_form"], 0);
    EXPECT_EQ(j["bifurcation"]["zeros"].size(), 2u);
    EXPECT_TRUE(j["bifurcation"]["zeros"][0].contains("f1_sign"));
    EXPECT_FALSE(analysis_json(a, "x", false).contains("timing"));
}

TEST(Json, PersistenceReport) {
    const auto a = analyze(builtin::hopf_rot(), quick());
    const auto run = run_persistence(a.cycle, a.frame, a.profile, {0.01}, &a.degree);
    const auto j = persistence_json(run);
    std::ostringstream s;
    s << j;
    EXPECT_NE(s.str().find("\"solutions\""), std::string::npos);
    EXPECT_EQ(s.str().find("NaN"), std::string::npos);
}

TEST(Csv, FormatsRoundTrip) {
    EXPECT_EQ(std::stod(fmt(0.1)), 0.1);
    EXPECT_EQ(std::stod(fmt(-1.2345678901234567e-300)), -1.2345678901234567e-300);
    const auto a = analyze(builtin::hopf_rot(), quick());
    std::ostringstream f0, f1;
    write_f0_csv(f0, a.profile);
    write_f1_csv(f1, a.profile);
    std::istringstream in(f0.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "theta,f0");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 1);
        ++rows;
    }
    EXPECT_EQ(rows, 128);
    EXPECT_EQ(f1.str().rfind("theta0,s,f1\n", 0), 0u);
}

TEST(Svg, WellFormed) {
    const auto a = analyze(builtin::hopf_rot(), quick());
    for (const std::string& svg : {f0_svg(a.profile), f1_svg(a.profile), winding_svg(a.frame, a.degree)}) {
        EXPECT_EQ(svg.rfind("<svg", 0), 0u);
        EXPECT_NE(svg.find("</svg>"), std::string::npos);
        EXPECT_TRUE(balanced_tags(svg));
        EXPECT_EQ(svg.find("nan"), std::string::npos);
    }
    // empty series still give a valid document
    EXPECT_TRUE(balanced_tags(svg_plot("empty", {}, "x", "y")));
}
