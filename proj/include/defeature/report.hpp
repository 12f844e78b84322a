#pragma once

#include "defeature/config.hpp"
#include "defeature/mesh_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace defeature {

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "label", "family", "kind", "param_a", "param_b", "q_simplified", "residual", "nu", "nu_star", "lower",
        "upper", "q_exact", "q_error_linear", "effectivity", "alpha", "dofs", "iterations", "informative"};
    return cols;
}

namespace detail {

inline std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

inline FeatureKind kind_from_string(std::string_view s) {
    for (FeatureKind k : {FeatureKind::Internal, FeatureKind::PositiveNeumann, FeatureKind::NegativeNeumann,
                          FeatureKind::NegativeDirichlet})
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::Parse, "unknown feature kind '" + std::string(s) + "'");
}

} // namespace detail

/// CSV with a header row; reals at 17 significant digits, empty cells for absent values.
inline void write_csv(std::ostream& os, const std::vector<BoundReport>& reports) {
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : reports) {
        using detail::opt_num;
        os << '"' << r.label << "\"," << to_string(r.family) << ',' << to_string(r.kind) << ','
           << format_double(r.param_a) << ',' << format_double(r.param_b) << ',' << format_double(r.q_simplified) << ','
           << format_double(r.residual) << ',' << format_double(r.nu) << ',' << format_double(r.nu_star) << ','
           << format_double(r.lower) << ',' << format_double(r.upper) << ',' << opt_num(r.q_exact) << ','
           << opt_num(r.q_error_linear) << ',' << opt_num(r.effectivity) << ',' << format_double(r.alpha) << ','
           << r.dofs << ',' << r.iterations << ',' << (r.informative() ? "true" : "false") << '\n';
    }
}

inline std::vector<BoundReport> read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error(ErrorCode::Parse, "empty CSV");
    std::vector<BoundReport> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.front() != '"') throw Error(ErrorCode::Parse, "CSV row must start with a quoted label");
        const auto close = line.find('"', 1);
        if (close == std::string::npos || close + 1 >= line.size() || line[close + 1] != ',')
            throw Error(ErrorCode::Parse, "unterminated label");
        BoundReport r;
        r.label = line.substr(1, close - 1);
        std::vector<std::string> f;
        std::stringstream rest(line.substr(close + 2));
        std::string cell;
        while (std::getline(rest, cell, ',')) f.push_back(cell);
        if (f.size() != csv_columns().size() - 1) throw Error(ErrorCode::Parse, "wrong CSV column count");
        try {
            r.family = family_from_string(f[0]);
            r.kind = detail::kind_from_string(f[1]);
            r.param_a = std::stod(f[2]);
            r.param_b = std::stod(f[3]);
            r.q_simplified = std::stod(f[4]);
            r.residual = std::stod(f[5]);
            r.nu = std::stod(f[6]);
            r.nu_star = std::stod(f[7]);
            r.lower = std::stod(f[8]);
            r.upper = std::stod(f[9]);
            r.q_exact = detail::parse_opt(f[10]);
            r.q_error_linear = detail::parse_opt(f[11]);
            r.effectivity = detail::parse_opt(f[12]);
            r.alpha = std::stod(f[13]);
            r.dofs = std::stoul(f[14]);
            r.iterations = std::stoul(f[15]);
        } catch (const std::logic_error& e) {
            throw Error(ErrorCode::Parse, std::string("bad CSV field: ") + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j{{"label", r.label},
                     {"family", to_string(r.family)},
                     {"kind", to_string(r.kind)},
                     {"param_a", r.param_a},
                     {"param_b", r.param_b},
                     {"q_simplified", r.q_simplified},
                     {"residual", r.residual},
                     {"nu", r.nu},
                     {"nu_star", r.nu_star},
                     {"lower", r.lower},
                     {"upper", r.upper},
                     {"alpha", r.alpha},
                     {"dofs", r.dofs},
                     {"iterations", r.iterations},
                     {"informative", r.informative()}};
    j["q_exact"] = r.q_exact ? nlohmann::json(*r.q_exact) : nlohmann::json(nullptr);
    j["q_error_linear"] = r.q_error_linear ? nlohmann::json(*r.q_error_linear) : nlohmann::json(nullptr);
    j["effectivity"] = r.effectivity ? nlohmann::json(*r.effectivity) : nlohmann::json(nullptr);
    return j;
}

inline void write_json(std::ostream& os, const std::vector<BoundReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    os << arr.dump(2) << '\n';
}

inline std::string param_text(const BoundReport& r) {
    char buf[64];
    switch (r.family) {
    case Family::Exp1: std::snprintf(buf, sizeof buf, "eps_F=%g", r.param_a); break;
    case Family::Exp2:
    case Family::Exp3:
    case Family::Exp4: std::snprintf(buf, sizeof buf, "W=%g H=%g", r.param_a, r.param_b); break;
    case Family::Exp5: std::snprintf(buf, sizeof buf, "(%g, %g)", r.param_a, r.param_b); break;
    default: std::snprintf(buf, sizeof buf, "%s", std::string(to_string(r.family)).c_str()); break;
    }
    return buf;
}

/// Columns: params, effectivity, exact QoI, U, L. A '!' marks a non-informative bound.
inline void write_table(std::ostream& os, const std::vector<BoundReport>& reports) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-18s %10s %14s %14s %14s\n", "params", "I", "Q(Phi)", "U", "L");
    os << buf;
    for (const auto& r : reports) {
        char eff[32] = "-", q[32] = "-";
        if (r.effectivity) std::snprintf(eff, sizeof eff, "%.7f", *r.effectivity);
        if (r.q_exact) std::snprintf(q, sizeof q, "%.2f", *r.q_exact);
        std::snprintf(buf, sizeof buf, "%-18s %10s %14s %14.2f %14.2f%s\n", param_text(r).c_str(), eff, q, r.upper,
                      r.lower, r.informative() ? "" : " !");
        os << buf;
    }
}

inline void write_reports(std::ostream& os, const std::vector<BoundReport>& reports, OutputFormat f) {
    switch (f) {
    case OutputFormat::Csv: write_csv(os, reports); break;
    case OutputFormat::Json: write_json(os, reports); break;
    case OutputFormat::Table: write_table(os, reports); break;
    }
}

} // namespace defeature
