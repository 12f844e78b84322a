#include "defeature/acceptance.hpp"
#include "defeature/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace defeature;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitConfig = 3;

struct Overrides {
    std::optional<std::string> format;
    std::optional<std::string> out;
    std::optional<bool> solve_original;
    std::optional<double> alpha;
    std::optional<double> h;
    std::optional<int> refine;
    std::optional<int> levels;
};

bool is_config_error(ErrorCode c) {
    switch (c) {
    case ErrorCode::Config:
    case ErrorCode::Parse:
    case ErrorCode::UnknownExperiment:
    case ErrorCode::NonAlignedRegion:
    case ErrorCode::OverlappingFS:
    case ErrorCode::EmptyRegion:
    case ErrorCode::InvalidPermittivity: return true;
    default: return false;
    }
}

int exit_code_for(const Error& e) {
    if (e.code() == ErrorCode::NotConverged) return kExitNotConverged;
    if (is_config_error(e.code())) return kExitConfig;
    return kExitFail;
}

RunConfig load_with_overrides(const std::string& path, const Overrides& o) {
    RunConfig c = load_config(path);
    if (o.format) c.format = format_from_string(*o.format);
    if (o.out) c.out = *o.out;
    if (o.solve_original) c.solve_original = *o.solve_original;
    if (o.alpha) c.geometry.alpha = *o.alpha;
    if (o.h) c.geometry.h = *o.h;
    if (o.refine) c.geometry.refine = *o.refine;
    if (o.levels) c.levels = *o.levels;
    c.validate();
    return c;
}

std::vector<Scenario> build_all(const RunConfig& c) {
    std::vector<Scenario> out;
    for (const auto& id : c.scenarios) {
        if (!within_sweep_range(id))
            std::cerr << "warning: " << scenario_label(id) << " lies outside the swept parameter range\n";
        out.push_back(build_experiment(id, c.geometry));
    }
    return out;
}

int cmd_run(const std::string& path, const Overrides& o) {
    const RunConfig c = load_with_overrides(path, o);
    const auto scenarios = build_all(c);
    PipelineOptions popt{c.solver, c.solve_original};
    const auto reports = run_all(scenarios, popt);

    if (c.out.empty()) {
        write_reports(std::cout, reports, c.format);
        return 0;
    }
    std::ofstream f(c.out);
    if (!f) throw Error(ErrorCode::Config, "cannot write '" + c.out + "'");
    write_reports(f, reports, c.format);
    write_table(std::cout, reports);
    return 0;
}

int cmd_convergence(const std::string& path, const Overrides& o) {
    const RunConfig c = load_with_overrides(path, o);
    const ExperimentId id = c.scenarios.front();
    std::vector<Scenario> scenarios;
    for (int l = 0; l < c.levels; ++l) {
        CapacitorGeometry g = c.geometry;
        g.refine += l;
        scenarios.push_back(build_experiment(id, g));
    }
    const auto reports = run_all(scenarios, {c.solver, c.solve_original});

    std::cout << scenario_label(id) << "\n";
    std::printf("%5s %9s %16s %16s %16s %12s\n", "level", "dofs", "Q_hat", "U", "L", "drift");
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        char drift[32] = "-";
        if (i) std::snprintf(drift, sizeof drift, "%.3e", std::abs(r.q_simplified - reports[i - 1].q_simplified) / std::abs(r.q_simplified));
        std::printf("%5zu %9zu %16.4f %16.4f %16.4f %12s\n", i + static_cast<std::size_t>(c.geometry.refine), r.dofs,
                    r.q_simplified, r.upper, r.lower, drift);
    }
    if (!c.out.empty()) {
        std::ofstream f(c.out);
        if (!f) throw Error(ErrorCode::Config, "cannot write '" + c.out + "'");
        write_reports(f, reports, c.format);
    }
    return 0;
}

int cmd_validate(const Overrides& o, bool quick) {
    acceptance::Options opt;
    if (o.alpha) opt.geometry.alpha = *o.alpha;
    if (o.h) opt.geometry.h = *o.h;
    if (o.refine) opt.geometry.refine = *o.refine;
    if (o.levels) opt.max_level = *o.levels - 1;
    opt.convergence = !quick;
    opt.progress = [](const std::string& s) { std::cerr << "... " << s << "\n"; };
    const auto results = acceptance::run(opt);
    for (const auto& r : results) std::cout << acceptance::format_line(r) << "\n";
    return acceptance::all_pass(results) ? 0 : kExitFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Defeaturing error bounds for 2D electrostatic capacitor models"};
    app.require_subcommand(1);

    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--alpha", o.alpha, "penalty factor for removed Neumann voids");
        sub->add_option("--spacing", o.h, "base mesh spacing in cm");
        sub->add_option("--refine", o.refine, "uniform refinement level");
    };

    std::string config;
    auto* run = app.add_subcommand("run", "run the scenarios of a config file");
    run->add_option("config", config, "config file")->required();
    run->add_option("--format", o.format, "csv, json or table");
    run->add_option("--out", o.out, "report file");
    run->add_flag("--solve-original,!--no-solve-original", o.solve_original, "also solve the original model");
    add_common(run);

    auto* conv = app.add_subcommand("convergence", "refinement study for the first scenario of a config");
    conv->add_option("config", config, "config file")->required();
    conv->add_option("--levels", o.levels, "number of levels, at least 2");
    conv->add_option("--format", o.format, "format of the --out file");
    conv->add_option("--out", o.out, "report file");
    add_common(conv);

    bool quick = false;
    auto* val = app.add_subcommand("validate", "run the acceptance checks");
    val->add_flag("--quick", quick, "skip the refinement study");
    val->add_option("--levels", o.levels, "refinement levels in the convergence check");
    add_common(val);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(config, o);
        if (*conv) return cmd_convergence(config, o);
        return cmd_validate(o, quick);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
}
