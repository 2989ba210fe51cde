// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.
// Pass -v to list the individual checks under each line.

#include <cstdio>
#include <cstring>

#include "cyclepersist/selfcheck.hpp"

int main(int argc, char** argv) {
    const bool verbose = argc > 1 && (std::strcmp(argv[1], "-v") == 0 || std::strcmp(argv[1], "--verbose") == 0);
    const auto rep = cyclepersist::run_selfcheck_with_determinism();
    cyclepersist::print_selfcheck(stdout, rep, verbose);
    int passed = 0;
    for (const auto& c : rep.criteria) passed += c.passed();
    std::printf("%d/%zu criteria passed (%.1f s)\n", passed, rep.criteria.size(), rep.seconds);
    return rep.passed() ? 0 : 1;
}
