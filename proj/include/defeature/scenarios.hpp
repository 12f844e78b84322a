#pragma once

#include "defeature/estimator.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace defeature {

namespace regions {
inline constexpr RegionId kBulk{0};
inline constexpr RegionId kInterest{1};
inline constexpr RegionId kFeature{2};
inline constexpr RegionId kDielectric{3};
inline constexpr RegionId kPlateLeft{10};
inline constexpr RegionId kPlateRight{11};
} // namespace regions

namespace tags {
inline constexpr BoundaryTag kOuter{1};
inline constexpr BoundaryTag kNegativePlate{2};
inline constexpr BoundaryTag kPositivePlate{3};
} // namespace tags

enum class Family { Glass, Exp1, Exp2, Exp3, Exp4, Exp5, Strip };

constexpr std::string_view to_string(Family f) {
    switch (f) {
    case Family::Glass: return "glass";
    case Family::Exp1: return "exp1";
    case Family::Exp2: return "exp2";
    case Family::Exp3: return "exp3";
    case Family::Exp4: return "exp4";
    case Family::Exp5: return "exp5";
    case Family::Strip: return "strip";
    }
    return "unknown";
}

inline Family family_from_string(std::string_view s) {
    for (Family f : {Family::Glass, Family::Exp1, Family::Exp2, Family::Exp3, Family::Exp4, Family::Exp5, Family::Strip})
        if (to_string(f) == s) return f;
    throw Error(ErrorCode::UnknownExperiment, "unknown experiment '" + std::string(s) + "'");
}

/// One experiment instance. Parameters by family:
///   Exp1: a = feature permittivity as a multiple of the surrounding one
///   Exp2, Exp3, Exp4: a = width, b = height of F
///   Exp5: (a, b) = centre of F
struct ExperimentId {
    Family family = Family::Exp1;
    double a = 0.0;
    double b = 0.0;
};

/// Capacitor layout in centimetres. Defaults reproduce the experiments; all
/// placements of F are configurable.
struct CapacitorGeometry {
    double half_size = 3.0;
    double h = 0.05;
    int refine = 0;
    double voltage = 220.0;
    double eps_air = 1.0005;
    double alpha = 1e-5;

    Rect plate_left{-0.3, -0.5, -0.2, 0.5};
    Rect plate_right{0.2, -0.5, 0.3, 0.5};
    Rect interest{-0.2, -0.5, 0.2, 0.0};

    Rect exp1_feature{-0.2, 0.05, 0.2, 0.45};
    Point exp2_anchor{-0.3, 0.6};  // lower-left corner of F
    double exp34_center_x = -1.8;  // F hangs from the bottom edge of the box
    double exp5_width = 0.05;
    double exp5_height = 0.2;

    // glass cut-plane: dielectric fills the gap between plates
    double glass_gap = 0.6;
    double glass_plate_length = 0.4;
    double eps_pyrex = 4.6;
    double eps_sodium = 8.4;
    Rect sodium{-0.1, 0.0, 0.1, 0.2};
};

struct FeatureSpec {
    FeatureKind kind = FeatureKind::Internal;
    RegionId region = regions::kFeature;
    double eps_feature = 1.0;  // permittivity of F in the original model
    double eps_ref = 1.0;      // permittivity the simplified model puts in F
    std::optional<double> dirichlet_value;
};

struct Scenario {
    std::string label;
    ExperimentId id;
    std::shared_ptr<const Mesh> mesh;
    MaterialField original;
    MaterialField simplified;
    BoundaryConditions bc;           // simplified model
    BoundaryConditions bc_original;  // original model
    RegionSet interest;
    FeatureSpec feature;
    double alpha = 1e-5;
};

namespace detail {

inline std::string fmt_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::shared_ptr<const Mesh> make_mesh(const StructuredSpec& spec, int refine) {
    Mesh m = build_structured(spec);
    for (int i = 0; i < refine; ++i) m = refine_uniform(m);
    return std::make_shared<const Mesh>(std::move(m));
}

inline StructuredSpec capacitor_spec(const CapacitorGeometry& g, Rect left, Rect right) {
    StructuredSpec spec;
    spec.domain = {-g.half_size, -g.half_size, g.half_size, g.half_size};
    spec.h = g.h;
    spec.regions.push_back({regions::kPlateLeft, left, true});
    spec.regions.push_back({regions::kPlateRight, right, true});
    spec.boundary_rules.push_back({on_rect_boundary(left), tags::kNegativePlate});
    spec.boundary_rules.push_back({on_rect_boundary(right), tags::kPositivePlate});
    spec.boundary_rules.push_back({on_rect_boundary(spec.domain), tags::kOuter});
    return spec;
}

inline BoundaryConditions plate_bc(double voltage) {
    BoundaryConditions bc;
    bc.dirichlet[tags::kNegativePlate] = -voltage;
    bc.dirichlet[tags::kPositivePlate] = voltage;
    return bc;
}

inline MaterialField uniform(const CapacitorGeometry& g, std::initializer_list<RegionId> ids) {
    MaterialField m;
    for (RegionId r : ids) m.set(r, g.eps_air);
    return m;
}

} // namespace detail

/// Whether the parameters fall inside the swept ranges of the experiments.
inline bool within_sweep_range(const ExperimentId& id) {
    constexpr double tol = 1e-9;
    auto in = [](double v, double lo, double hi) { return v >= lo - tol && v <= hi + tol; };
    switch (id.family) {
    case Family::Exp1: return in(id.a, 1.0, 13.0);
    case Family::Exp2: return in(id.a, 0.5, 2.95) && in(id.b, 0.4, 1.5);
    case Family::Exp3:
    case Family::Exp4: return in(id.a, 0.3, 2.4) && in(id.b, 0.3, 2.4);
    case Family::Exp5: return in(id.b, -0.35, 0.35);
    default: return true;
    }
}

inline std::string scenario_label(const ExperimentId& id) {
    using detail::fmt_param;
    switch (id.family) {
    case Family::Exp1: return "exp1 eps_F=" + fmt_param(id.a);
    case Family::Exp2:
    case Family::Exp3:
    case Family::Exp4: return std::string(to_string(id.family)) + " " + fmt_param(id.a) + "x" + fmt_param(id.b);
    case Family::Exp5: return "exp5 (" + fmt_param(id.a) + "," + fmt_param(id.b) + ")";
    default: return std::string(to_string(id.family));
    }
}

/// Capacitor without features: plates are holes held at -V and +V, the outer box is insulating.
inline Scenario build_capacitor(const CapacitorGeometry& g) {
    using namespace regions;
    auto spec = detail::capacitor_spec(g, g.plate_left, g.plate_right);
    spec.regions.push_back({kInterest, g.interest});
    Scenario s;
    s.label = "capacitor";
    s.mesh = detail::make_mesh(spec, g.refine);
    s.original = s.simplified = detail::uniform(g, {kBulk, kInterest});
    s.bc = s.bc_original = detail::plate_bc(g.voltage);
    s.interest = kInterest;
    s.alpha = g.alpha;
    return s;
}

inline Scenario build_experiment(const ExperimentId& id, const CapacitorGeometry& g = {}) {
    using namespace regions;
    Scenario s;
    s.id = id;
    s.label = scenario_label(id);
    s.alpha = g.alpha;
    s.interest = kInterest;
    s.bc = s.bc_original = detail::plate_bc(g.voltage);
    const double eps = g.eps_air;
    const double L = g.half_size;

    if (id.family == Family::Strip) {
        // gap between full-height plates; F is an inert copy of the upper half
        StructuredSpec spec;
        spec.domain = {g.plate_left.x1, g.plate_left.y0, g.plate_right.x0, g.plate_left.y1};
        spec.h = g.h;
        const Rect d = spec.domain;
        const double mid = 0.5 * (d.y0 + d.y1);
        spec.regions.push_back({kInterest, {d.x0, d.y0, d.x1, mid}});
        spec.regions.push_back({kFeature, {d.x0, mid, d.x1, d.y1}});
        spec.boundary_rules.push_back({[d](Point a, Point b) { return std::abs(a.x - d.x0) < 1e-9 && std::abs(b.x - d.x0) < 1e-9; }, tags::kNegativePlate});
        spec.boundary_rules.push_back({[d](Point a, Point b) { return std::abs(a.x - d.x1) < 1e-9 && std::abs(b.x - d.x1) < 1e-9; }, tags::kPositivePlate});
        spec.boundary_rules.push_back({on_rect_boundary(d), tags::kOuter});
        s.mesh = detail::make_mesh(spec, g.refine);
        s.original = s.simplified = detail::uniform(g, {kInterest, kFeature});
        s.feature = {FeatureKind::Internal, kFeature, eps, eps, std::nullopt};
        return s;
    }

    if (id.family == Family::Glass) {
        const double half = 0.5 * g.glass_gap;
        const double len = 0.5 * g.glass_plate_length;
        const double t = g.plate_right.width();
        const Rect left{-half - t, -len, -half, len};
        const Rect right{half, -len, half + t, len};
        auto spec = detail::capacitor_spec(g, left, right);
        spec.regions.push_back({kInterest, {-half, -len, half, 0.0}});
        spec.regions.push_back({kDielectric, {-half, 0.0, half, len}});
        spec.regions.push_back({kFeature, g.sodium});
        spec.disjoint.push_back({kFeature, kInterest});
        s.mesh = detail::make_mesh(spec, g.refine);
        s.simplified.set(kBulk, eps).set(kInterest, g.eps_pyrex).set(kDielectric, g.eps_pyrex).set(kFeature, g.eps_pyrex);
        s.original = s.simplified;
        s.original.set(kFeature, g.eps_sodium);
        s.feature = {FeatureKind::Internal, kFeature, g.eps_sodium, g.eps_pyrex, std::nullopt};
        return s;
    }

    auto spec = detail::capacitor_spec(g, g.plate_left, g.plate_right);
    spec.regions.push_back({kInterest, g.interest});
    spec.disjoint.push_back({kFeature, kInterest});
    s.simplified = detail::uniform(g, {kBulk, kInterest, kFeature});
    s.original = s.simplified;

    switch (id.family) {
    case Family::Exp1: {
        if (!(id.a > 0.0)) throw Error(ErrorCode::Config, "exp1 needs a positive permittivity factor");
        spec.regions.push_back({kFeature, g.exp1_feature});
        s.original.set(kFeature, id.a * eps);
        s.feature = {FeatureKind::Internal, kFeature, id.a * eps, eps, std::nullopt};
        break;
    }
    case Family::Exp2: {
        if (!(id.a > 0.0) || !(id.b > 0.0)) throw Error(ErrorCode::Config, "exp2 needs a positive feature size");
        spec.regions.push_back({kFeature, {g.exp2_anchor.x, g.exp2_anchor.y, g.exp2_anchor.x + id.a, g.exp2_anchor.y + id.b}});
        s.original.set(kFeature, 5.0 * eps);
        s.feature = {FeatureKind::Internal, kFeature, 5.0 * eps, eps, std::nullopt};
        break;
    }
    case Family::Exp3:
    case Family::Exp4: {
        if (!(id.a > 0.0) || !(id.b > 0.0)) throw Error(ErrorCode::Config, "feature size must be positive");
        const double cx = g.exp34_center_x;
        spec.regions.push_back({kFeature, {cx - 0.5 * id.a, -L, cx + 0.5 * id.a, -L + id.b}});
        if (id.family == Family::Exp3) {
            s.simplified.set(kFeature, 0.0);
            s.feature = {FeatureKind::PositiveNeumann, kFeature, eps, 0.0, std::nullopt};
        } else {
            s.original.set(kFeature, g.alpha * eps);
            s.feature = {FeatureKind::NegativeNeumann, kFeature, g.alpha * eps, eps, std::nullopt};
        }
        break;
    }
    case Family::Exp5: {
        const double w = 0.5 * g.exp5_width, hh = 0.5 * g.exp5_height;
        spec.regions.push_back({kFeature, {id.a - w, id.b - hh, id.a + w, id.b + hh}});
        const double v = id.a < 0.0 ? -g.voltage : g.voltage;
        s.bc_original.dirichlet_regions[kFeature] = v;
        s.feature = {FeatureKind::NegativeDirichlet, kFeature, eps, eps, v};
        break;
    }
    default: throw Error(ErrorCode::UnknownExperiment, "unhandled experiment family");
    }
    s.mesh = detail::make_mesh(spec, g.refine);
    return s;
}

/// The parameter sweeps of the experiments.
inline std::vector<ExperimentId> default_sweep(Family f) {
    std::vector<ExperimentId> ids;
    switch (f) {
    case Family::Glass:
    case Family::Strip: ids.push_back({f}); break;
    case Family::Exp1:
        for (int k = 3; k <= 13; ++k) ids.push_back({f, static_cast<double>(k)});
        break;
    case Family::Exp2:
        for (int k = 0; k <= 10; ++k) ids.push_back({f, 0.5 + 0.1 * k, 0.4 + 0.1 * k});
        ids.push_back({f, 2.85, 1.3});
        ids.push_back({f, 2.95, 1.4});
        break;
    case Family::Exp3:
    case Family::Exp4:
        for (int k = 1; k <= 8; ++k) ids.push_back({f, 0.3 * k, 0.3 * k});
        break;
    case Family::Exp5:
        for (int k = 0; k < 8; ++k) ids.push_back({f, -0.325, -0.35 + 0.1 * k});
        break;
    }
    return ids;
}

struct PipelineOptions {
    SolverOptions solver;
    bool solve_original = true;
};

struct BoundReport {
    std::string label;
    Family family = Family::Exp1;
    FeatureKind kind = FeatureKind::Internal;
    double param_a = 0.0;
    double param_b = 0.0;
    double q_simplified = 0.0;
    double residual = 0.0;
    double nu = 0.0;
    double nu_star = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::optional<double> q_exact;
    std::optional<double> q_error_linear;  // QoI linearised at the simplified solution, applied to the error
    std::optional<double> effectivity;
    double alpha = 0.0;
    std::size_t dofs = 0;
    std::size_t iterations = 0;

    /// Bounds whose width exceeds the QoI or whose lower end is negative.
    bool informative() const {
        const double ref = q_exact ? std::abs(*q_exact) : std::abs(q_simplified);
        const double eff = ref > 0.0 ? 1.0 + std::abs(upper - lower) / ref : 0.0;
        return !(eff > 2.0) && !(lower < 0.0);
    }
};

struct PipelineResult {
    BoundReport report;
    PotentialField primal;    // simplified, extended into F where needed
    PotentialField dual;
    PotentialField kinematic; // admissible field for the original model
    std::optional<PotentialField> original;
};

namespace detail {

// Tags an error with the scenario and the pipeline stage it came from.
template <class Fn>
auto staged(const std::string& label, const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), label + " [" + stage + "] " + e.message());
    }
}

} // namespace detail

inline PipelineResult run_pipeline_detailed(const Scenario& s, const PipelineOptions& opt = {}) {
    using detail::staged;
    const FeatureSpec& f = s.feature;
    BoundReport r;
    r.label = s.label;
    r.family = s.id.family;
    r.kind = f.kind;
    r.param_a = s.id.a;
    r.param_b = s.id.b;
    r.alpha = s.alpha;
    r.dofs = s.mesh->num_nodes();

    SolveReport rep;
    PotentialField phi = staged(s.label, "primal", [&] {
        auto u = solve_potential({s.mesh, &s.simplified, s.bc, std::nullopt, std::nullopt, "primal"}, opt.solver, &rep);
        return f.kind == FeatureKind::PositiveNeumann ? solve_feature_problem(u, f.region, f.eps_feature, opt.solver) : u;
    });
    r.iterations += rep.iterations;

    PotentialField dual = staged(s.label, "dual", [&] {
        const auto load = assemble_dual_load(s.simplified, phi, s.interest);
        auto z = solve_potential({s.mesh, &s.simplified, s.bc.homogeneous(), load, std::nullopt, "dual"}, opt.solver, &rep);
        return f.kind == FeatureKind::PositiveNeumann ? solve_feature_problem(z, f.region, f.eps_feature, opt.solver) : z;
    });
    r.iterations += rep.iterations;

    PotentialField kin = phi;
    const CreTerms t = staged(s.label, "estimator", [&] {
        switch (f.kind) {
        case FeatureKind::Internal: return cre_internal(phi, dual, f.region, f.eps_ref, f.eps_feature);
        case FeatureKind::PositiveNeumann: return cre_positive_neumann(phi, dual, f.region, f.eps_feature);
        case FeatureKind::NegativeNeumann: return cre_negative(f.kind, phi, dual, f.region, f.eps_ref, s.alpha);
        case FeatureKind::NegativeDirichlet: break;
        }
        auto terms = cre_negative(f.kind, phi, dual, f.region, f.eps_ref, s.alpha, f.dirichlet_value);
        kin = overwrite_region(phi, f.region, *f.dirichlet_value);
        return terms;
    });
    r.q_simplified = qoi_linearized(s.simplified, phi, kin, s.interest);
    r.residual = t.residual;
    r.nu = t.nu;
    r.nu_star = t.nu_star;
    const Bounds b = combine_bounds(r.q_simplified, t.residual, t.nu, t.nu_star);
    r.lower = b.lower;
    r.upper = b.upper;

    std::optional<PotentialField> orig;
    if (opt.solve_original) {
        orig = staged(s.label, "original", [&] {
            return solve_potential({s.mesh, &s.original, s.bc_original, std::nullopt, phi.values, "original"}, opt.solver, &rep);
        });
        r.iterations += rep.iterations;
        r.q_exact = qoi_exact(s.original, *orig, s.interest);
        r.q_error_linear = qoi_linearized(s.simplified, phi, *orig, s.interest) - r.q_simplified;
        r.effectivity = effectivity(*r.q_exact, b);
    }
    return {r, std::move(phi), std::move(dual), std::move(kin), std::move(orig)};
}

inline BoundReport run_pipeline(const Scenario& s, const PipelineOptions& opt = {}) {
    return run_pipeline_detailed(s, opt).report;
}

/// Worker count: hardware concurrency capped by DEFEATURE_THREADS.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DEFEATURE_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Applies `fn` to 0..n-1 on a bounded pool; results keep index order. The first error is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn, unsigned workers = worker_count()) {
    using T = decltype(fn(std::size_t{0}));
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<T> out;
    out.reserve(n);
    for (auto& v : slots) out.push_back(std::move(*v));
    return out;
}

/// Runs every scenario; reports come back in input order whatever the worker count.
inline std::vector<BoundReport> run_all(const std::vector<Scenario>& scenarios, const PipelineOptions& opt = {},
                                        unsigned workers = worker_count()) {
    return parallel_map(scenarios.size(), [&](std::size_t i) { return run_pipeline(scenarios[i], opt); }, workers);
}

} // namespace defeature
