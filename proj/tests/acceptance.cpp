// Acceptance run: one PASS/FAIL line per criterion.
// Exits 0 when the failing criteria are exactly those named by --expect-red.

#include "defeature/acceptance.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace defeature;

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string expect_red;
    bool quick = false;
    int levels = 3;
    app.add_option("--expect-red", expect_red, "comma-separated criteria known to fail");
    app.add_flag("--quick", quick, "skip the refinement study");
    app.add_option("--levels", levels, "refinement levels in the convergence check")->check(CLI::Range(2, 5));
    CLI11_PARSE(app, argc, argv);

    std::set<std::string> expected;
    std::stringstream ss(expect_red);
    for (std::string id; std::getline(ss, id, ',');)
        if (!id.empty()) expected.insert(id);

    acceptance::Options opt;
    opt.max_level = levels - 1;
    opt.convergence = !quick;
    opt.progress = [](const std::string& s) { std::cerr << "... " << s << std::endl; };

    std::set<std::string> red;
    for (const auto& r : acceptance::run(opt)) {
        std::cout << acceptance::format_line(r) << std::endl;
        if (!r.pass) red.insert(r.id);
    }

    if (red == expected) return 0;
    for (const auto& id : red)
        if (!expected.count(id)) std::cout << "unexpected failure: " << id << "\n";
    for (const auto& id : expected)
        if (!red.count(id)) std::cout << "expected failure now passes: " << id << "\n";
    return 1;
}
