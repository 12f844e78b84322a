#pragma once

#include "defeature/scenarios.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace defeature {

enum class OutputFormat { Csv, Json, Table };

constexpr std::string_view to_string(OutputFormat f) {
    switch (f) {
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Json: return "json";
    case OutputFormat::Table: return "table";
    }
    return "unknown";
}

inline OutputFormat format_from_string(std::string_view s) {
    for (OutputFormat f : {OutputFormat::Csv, OutputFormat::Json, OutputFormat::Table})
        if (to_string(f) == s) return f;
    throw Error(ErrorCode::Config, "unknown output format '" + std::string(s) + "'");
}

/// Everything one `run` or `convergence` invocation needs.
struct RunConfig {
    Family family = Family::Exp1;
    std::vector<ExperimentId> scenarios;
    CapacitorGeometry geometry;
    SolverOptions solver;
    bool solve_original = true;
    OutputFormat format = OutputFormat::Table;
    std::string out;
    int levels = 3;

    void validate() const {
        if (!(geometry.h > 0.0)) throw Error(ErrorCode::Config, "h must be positive");
        if (geometry.refine < 0) throw Error(ErrorCode::Config, "refine must be non-negative");
        if (!(solver.tol > 0.0)) throw Error(ErrorCode::Config, "tol must be positive");
        if (!(geometry.alpha > 0.0)) throw Error(ErrorCode::Config, "alpha must be positive");
        if (scenarios.empty()) throw Error(ErrorCode::Config, "no scenarios configured");
        if (levels < 2) throw Error(ErrorCode::Config, "levels must be at least 2");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_number(const std::string& key, std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw Error(ErrorCode::Config, "key '" + key + "': '" + t + "' is not a number");
    return v;
}

inline std::vector<double> parse_numbers(const std::string& key, std::string_view text, std::size_t count) {
    std::vector<double> v;
    for (const auto& part : split(text, ',')) v.push_back(parse_number(key, part));
    if (v.size() != count)
        throw Error(ErrorCode::Config, "key '" + key + "' needs " + std::to_string(count) + " comma-separated numbers");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::Config, "key '" + key + "': '" + v + "' is not a boolean");
}

inline Rect parse_rect(const std::string& key, const std::string& v) {
    const auto n = parse_numbers(key, v, 4);
    return {n[0], n[1], n[2], n[3]};
}

// "3; 5; 7" for Exp1, "0.5,0.4; 0.6,0.5" for the two-parameter families.
inline std::vector<ExperimentId> parse_values(Family f, const std::string& key, const std::string& v) {
    std::vector<ExperimentId> ids;
    const std::size_t arity = (f == Family::Exp1) ? 1 : (f == Family::Glass || f == Family::Strip) ? 0 : 2;
    for (const auto& entry : split(v, ';')) {
        if (entry.empty()) continue;
        if (arity == 0) throw Error(ErrorCode::Config, std::string(to_string(f)) + " takes no parameter values");
        const auto n = parse_numbers(key, entry, arity);
        ids.push_back({f, n[0], arity > 1 ? n[1] : 0.0});
    }
    return ids;
}

} // namespace detail

/// Parses the flat `key = value` format. Blank lines and text after '#' are ignored.
/// Without a `values` key the family's default sweep is used.
inline RunConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, detail::trim(std::string_view(line).substr(eq + 1))).second)
            throw Error(ErrorCode::Config, "duplicate key '" + key + "'");
    }

    RunConfig c;
    auto it = kv.find("experiment");
    if (it == kv.end()) throw Error(ErrorCode::Config, "missing key 'experiment'");
    c.family = family_from_string(it->second);
    kv.erase(it);

    bool have_values = false;
    CapacitorGeometry& g = c.geometry;
    for (const auto& [key, v] : kv) {
        using namespace detail;
        if (key == "values") {
            c.scenarios = parse_values(c.family, key, v);
            have_values = true;
        } else if (key == "h") g.h = parse_number(key, v);
        else if (key == "refine") g.refine = static_cast<int>(parse_number(key, v));
        else if (key == "tol") c.solver.tol = parse_number(key, v);
        else if (key == "max_iter") c.solver.max_iter = static_cast<std::size_t>(parse_number(key, v));
        else if (key == "alpha") g.alpha = parse_number(key, v);
        else if (key == "solve_original") c.solve_original = parse_bool(key, v);
        else if (key == "format") c.format = format_from_string(v);
        else if (key == "out") c.out = v;
        else if (key == "levels") c.levels = static_cast<int>(parse_number(key, v));
        else if (key == "half_size") g.half_size = parse_number(key, v);
        else if (key == "voltage") g.voltage = parse_number(key, v);
        else if (key == "eps_air") g.eps_air = parse_number(key, v);
        else if (key == "plate_left") g.plate_left = parse_rect(key, v);
        else if (key == "plate_right") g.plate_right = parse_rect(key, v);
        else if (key == "interest") g.interest = parse_rect(key, v);
        else if (key == "exp1_feature") g.exp1_feature = parse_rect(key, v);
        else if (key == "exp2_anchor") {
            const auto n = parse_numbers(key, v, 2);
            g.exp2_anchor = {n[0], n[1]};
        } else if (key == "exp34_center_x") g.exp34_center_x = parse_number(key, v);
        else if (key == "exp5_width") g.exp5_width = parse_number(key, v);
        else if (key == "exp5_height") g.exp5_height = parse_number(key, v);
        else if (key == "glass_gap") g.glass_gap = parse_number(key, v);
        else if (key == "glass_plate_length") g.glass_plate_length = parse_number(key, v);
        else if (key == "eps_pyrex") g.eps_pyrex = parse_number(key, v);
        else if (key == "eps_sodium") g.eps_sodium = parse_number(key, v);
        else if (key == "sodium") g.sodium = parse_rect(key, v);
        else throw Error(ErrorCode::Config, "unknown key '" + key + "'");
    }
    if (!have_values) c.scenarios = default_sweep(c.family);
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Config, "cannot read config '" + path + "'");
    return parse_config(in);
}

} // namespace defeature
