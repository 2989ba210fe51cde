// cyclepersist: analyze / verify / selfcheck front end.
//
// Exit codes: 0 success, 1 numerical or usage failure, 2 the instance violates
// a hypothesis of the analysis (no usable cycle, degenerate boundary field,
// bifurcation function identically zero).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cyclepersist/report.hpp"
#include "cyclepersist/selfcheck.hpp"

namespace cp = cyclepersist;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kNumerical = 1, kHypothesis = 2;

struct Common {
    std::string config;
    double tol = 0.0;  // 0: take it from the config
    int grid = 0;
    std::string out;
    std::string format = "json";
};

struct Loaded {
    cp::Problem problem;
    cp::PipelineSettings settings;
    std::string hash;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Loaded load(const Common& c) {
    const std::string text = read_file(c.config);
    Loaded l{cp::build_problem(cp::Config::parse(text)), {}, cp::sha256_hex(text)};
    l.settings = cp::PipelineSettings::from(l.problem.settings);
    if (c.tol > 0.0) l.settings.tol = c.tol;
    if (c.grid > 0) l.settings.theta_grid = c.grid;
    return l;
}

bool wants(const Common& c, const std::string& kind) { return c.format == kind || c.format == "all"; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
    out << text;
}

// JSON goes to stdout unless --out is given; CSV and SVG always need --out.
void emit_json(const Common& c, const cp::Json& j, const std::string& name) {
    if (!wants(c, "json")) return;
    if (c.out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_text(fs::path(c.out) / name, j.dump(2) + "\n");
    }
}

void prepare_out(const Common& c) {
    if (c.out.empty()) {
        if (c.format == "csv" || c.format == "svg" || c.format == "all") {
            throw std::invalid_argument("--format " + c.format + " needs --out <dir>");
        }
        return;
    }
    fs::create_directories(c.out);
}

// Reports degenerate instances; returns the exit code for a completed analysis.
int degeneracy_code(const cp::Analysis& a) {
    if (a.profile.loud_degenerate) {
        std::cerr << "error: bifurcation function identically zero (f0 = 0 on the cycle); "
                     "first-order analysis does not apply\n";
        return kHypothesis;
    }
    if (a.degree.degenerate) {
        std::cerr << "error: degenerate boundary field: " << a.degree.degenerate_reason << '\n';
        return kHypothesis;
    }
    return kOk;
}

int cmd_analyze(const Common& c) {
    prepare_out(c);
    const Loaded l = load(c);
    const cp::Analysis a = cp::analyze(l.problem.system, l.settings);
    emit_json(c, cp::analysis_json(a, l.hash), "analysis.json");
    if (!c.out.empty()) {
        const fs::path dir(c.out);
        if (wants(c, "csv")) {
            std::ostringstream f0, f1;
            cp::write_f0_csv(f0, a.profile);
            cp::write_f1_csv(f1, a.profile);
            write_text(dir / "f0.csv", f0.str());
            write_text(dir / "f1.csv", f1.str());
        }
        if (wants(c, "svg")) {
            write_text(dir / "f0.svg", cp::f0_svg(a.profile));
            write_text(dir / "f1.svg", cp::f1_svg(a.profile));
            if (!a.profile.loud_degenerate) write_text(dir / "winding.svg", cp::winding_svg(a.frame, a.degree));
        }
    }
    return degeneracy_code(a);
}

int cmd_verify(const Common& c, std::vector<double> eps, bool exact) {
    for (double e : eps) {
        if (!(e > 0.0)) throw std::invalid_argument("ε must be positive (got " + cp::fmt(e) + ")");
    }
    prepare_out(c);
    const Loaded l = load(c);
    if (eps.empty()) eps = l.problem.settings.eps;
    for (double e : eps) {
        if (!(e > 0.0)) throw std::invalid_argument("ε must be positive (got " + cp::fmt(e) + ")");
    }
    const cp::Analysis a = cp::analyze(l.problem.system, l.settings);
    if (const int code = degeneracy_code(a); code != kOk) return code;

    cp::PersistOptions opt;
    opt.exact_sections = exact;
    const auto run = cp::run_persistence(a.cycle, a.frame, a.profile, eps, &a.degree, opt);

    // probe every zero where f1 changes sign, at the recorded argmin
    cp::Json probes = cp::Json::array();
    if (run.eps_grid.size() >= 2) {
        for (const auto& s : a.profile.f1_sign) {
            if (s.holds) continue;
            probes.push_back(cp::vanishing_probe_json(
                cp::vanishing_probe(a.cycle, a.frame, a.profile, s.theta0, s.argmin, run.eps_grid, opt)));
        }
    }
    cp::Json j{{"system", a.system.name()},
               {"analysis", cp::analysis_json(a, l.hash, false)},
               {"persistence", cp::persistence_json(run)},
               {"vanishing_probes", probes},
               {"exact_sections", exact},
               {"timing", {{"analysis_seconds", a.seconds}}}};
    emit_json(c, j, "verify.json");
    if (!c.out.empty()) {
        const fs::path dir(c.out);
        if (wants(c, "csv")) {
            std::ostringstream p;
            cp::write_profile_csv(p, run);
            write_text(dir / "profiles.csv", p.str());
        }
        if (wants(c, "svg")) write_text(dir / "profiles.svg", cp::profile_svg(run));
    }
    int failed = 0;
    for (const auto& er : run.runs) {
        if (!er.error.empty()) {
            std::cerr << "eps " << cp::fmt(er.eps) << ": " << er.error << '\n';
            ++failed;
        }
    }
    return failed ? kNumerical : kOk;
}

int cmd_selfcheck(bool verbose, const std::string& json_path, bool once) {
    const auto rep = once ? cp::run_selfcheck() : cp::run_selfcheck_with_determinism();
    cp::print_selfcheck(stdout, rep, verbose);
    if (!json_path.empty()) write_text(json_path, cp::selfcheck_json(rep, true).dump(2) + "\n");
    std::printf("%s (%.1f s)\n", rep.passed() ? "all checks passed" : "some checks FAILED", rep.seconds);
    return rep.passed() ? kOk : kNumerical;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("config", c.config, "configuration file")->required();
    sub->add_option("--tol", c.tol, "integration tolerance (overrides the config)")->check(CLI::Range(1e-13, 1e-3));
    sub->add_option("--grid", c.grid, "theta grid for f0 (overrides the config)")->check(CLI::Range(16, 1 << 16));
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--format", c.format, "json | csv | svg | all")
        ->check(CLI::IsMember({"json", "csv", "svg", "all"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"persistence of a planar limit cycle under small periodic forcing"};
    app.set_version_flag("--version", std::string(CYCLEPERSIST_VERSION));
    app.require_subcommand(1);

    Common ac, vc;
    auto* analyze = app.add_subcommand("analyze", "cycle, Floquet frame, bifurcation functions and degree");
    add_common(analyze, ac);

    std::vector<double> eps;
    bool exact = false;
    auto* verify = app.add_subcommand("verify", "locate the periodic solutions for each eps and check the profile");
    add_common(verify, vc);
    verify->add_option("--eps", eps, "comma-separated list of eps values")->delimiter(',');
    verify->add_flag("--exact-sections", exact, "also compute the curved-section distances");

    bool verbose = false, once = false;
    std::string json_path;
    auto* selfcheck = app.add_subcommand("selfcheck", "run the oracle suite");
    selfcheck->add_flag("-v,--verbose", verbose, "print every check");
    selfcheck->add_flag("--once", once, "single run, skip the determinism comparison");
    selfcheck->add_option("--json", json_path, "write the report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kNumerical;
    }

    try {
        if (*analyze) return cmd_analyze(ac);
        if (*verify) return cmd_verify(vc, eps, exact);
        return cmd_selfcheck(verbose, json_path, once);
    } catch (const cp::HypothesisError& e) {
        std::cerr << "hypothesis failure: " << e.what() << '\n';
        return kHypothesis;
    } catch (const cp::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kNumerical;
    } catch (const cp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
}
