// Runs the cyclepersist binary end to end and checks exit codes and outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("cyclepersist_cli_" + std::to_string(::getpid())) / name;
    fs::create_directories(d);
    return d;
}

Run cli(const std::string& args) {
    static int n = 0;
    const fs::path d = scratch("io");
    const fs::path o = d / ("out" + std::to_string(n) + ".txt"), e = d / ("err" + std::to_string(n++) + ".txt");
    const std::string cmd = std::string(CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int st = std::system(cmd.c_str());
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(o), slurp(e)};
}

std::string config(const std::string& name) { return std::string(CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(Cli, AnalyzeHopfRot) {
    const auto r = cli("analyze " + config("hopf_rot.toml"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["degree"]["dB"], 0);
    EXPECT_EQ(j["degree"]["degree_test_applicable"], true);
    EXPECT_EQ(j["provenance"]["config_sha256"].get<std::string>().size(), 64u);
    EXPECT_TRUE(j.contains("timing"));
}

TEST(Cli, ZeroPerturbationExitsTwo) {
    const auto r = cli("analyze " + config("zero_phi.toml"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bifurcation function identically zero"), std::string::npos) << r.err;
}

TEST(Cli, RotationExitsTwo) {
    const auto r = cli("analyze " + config("rotation.toml"));
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, VerifyRejectsNonPositiveEps) {
    const auto r = cli("verify " + config("hopf_rot.toml") + " --eps 0");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("must be positive"), std::string::npos) << r.err;
}

TEST(Cli, VerifyFindsTwoSolutions) {
    const auto r = cli("verify " + config("hopf_rot.toml") + " --eps 0.01");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j["persistence"]["runs"].size(), 1u);
    EXPECT_EQ(j["persistence"]["runs"][0]["solution_count"], 2);
    EXPECT_EQ(j["vanishing_probes"].size(), 0u);
}

TEST(Cli, BadConfigExitsOne) {
    const fs::path p = scratch("bad") / "bad.toml";
    std::ofstream(p) << "[system]\npsi1 = \"x1 +\"\npsi2 = \"x2\"\n";
    const auto r = cli("analyze " + p.string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 2, column 13"), std::string::npos) << r.err;
    EXPECT_EQ(cli("analyze /nonexistent/file.toml").code, 1);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli("analyze " + config("hopf_rot.toml") + " --tol 1e-2").code, 1);
    EXPECT_EQ(cli("frobnicate").code, 1);
}

TEST(Cli, WritesAllFormats) {
    const fs::path d = scratch("all");
    const auto r = cli("analyze " + config("hopf_rot.toml") + " --out " + d.string() + " --format all");
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"analysis.json", "f0.csv", "f1.csv", "f0.svg", "f1.svg", "winding.svg"}) {
        EXPECT_TRUE(fs::exists(d / f)) << f;
        EXPECT_GT(fs::file_size(d / f), 0u) << f;
    }
    EXPECT_TRUE(nlohmann::json::accept(slurp(d / "analysis.json")));
}

TEST(Cli, ReportMatchesSchema) {
    if (std::system("python3 -c 'import jsonschema' >/dev/null 2>&1") != 0) GTEST_SKIP() << "python3 jsonschema missing";
    const fs::path d = scratch("schema");
    ASSERT_EQ(cli("analyze " + config("hopf_rot.toml") + " --out " + d.string() + " --format json").code, 0);
    const std::string cmd = "python3 -c 'import json,sys,jsonschema; jsonschema.validate(json.load(open(sys.argv[1])), "
                            "json.load(open(sys.argv[2])))' " +
                            (d / "analysis.json").string() + " " + SCHEMA_PATH;
    EXPECT_EQ(std::system(cmd.c_str()), 0);
}

TEST(Cli, IdenticalOutputAcrossThreadCounts) {
    const auto a = cli("analyze " + config("hopf_rot.toml"));
    const auto b = cli("analyze " + config("hopf_rot.toml") + " ");
    setenv("CYCLEPERSIST_THREADS", "1", 1);
    const auto c = cli("analyze " + config("hopf_rot.toml"));
    unsetenv("CYCLEPERSIST_THREADS");
    auto strip = [](const std::string& s) {
        auto j = nlohmann::ordered_json::parse(s);
        j.erase("timing");
        return j.dump();
    };
    EXPECT_EQ(strip(a.out), strip(b.out));
    EXPECT_EQ(strip(a.out), strip(c.out));
}
