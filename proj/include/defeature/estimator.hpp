#pragma once

#include "defeature/solver.hpp"

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

namespace defeature {

enum class FeatureKind { Internal, PositiveNeumann, NegativeNeumann, NegativeDirichlet };

constexpr std::string_view to_string(FeatureKind k) {
    switch (k) {
    case FeatureKind::Internal: return "internal";
    case FeatureKind::PositiveNeumann: return "positive-neumann";
    case FeatureKind::NegativeNeumann: return "negative-neumann";
    case FeatureKind::NegativeDirichlet: return "negative-dirichlet";
    }
    return "unknown";
}

struct CreTerms {
    double nu = 0.0;
    double nu_star = 0.0;
    double residual = 0.0;
};

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Integral over `interest` of eps |grad phi|^2.
inline double qoi_exact(const MaterialField& mat, const PotentialField& phi, const RegionSet& interest) {
    return energy_inner_product(mat, phi, phi, interest);
}

/// The QoI linearised at `ref` and applied to `test`.
inline double qoi_linearized(const MaterialField& mat, const PotentialField& ref, const PotentialField& test,
                             const RegionSet& interest) {
    return energy_inner_product(mat, ref, test, interest);
}

/// Element-wise flux -eps grad u.
inline std::vector<Vec2> flux_of(const MaterialField& mat, const PotentialField& u) {
    const Mesh& m = *u.mesh;
    std::vector<Vec2> d(m.num_triangles());
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        const double eps = mat.at(m.triangles()[e].region);
        const Vec2 g = u.gradient(e);
        d[e] = {-eps * g.x, -eps * g.y};
    }
    return d;
}

/// Constitutive relation error of the pair (field, flux) for material `mat`:
/// the square root of the sum of |flux + eps grad field|^2 / eps over elements.
/// Void elements contribute nothing.
inline double constitutive_relation_error(const MaterialField& mat, const PotentialField& field,
                                          const std::vector<Vec2>& flux,
                                          std::optional<RegionId> region = std::nullopt) {
    const Mesh& m = *field.mesh;
    if (flux.size() != m.num_triangles()) throw Error(ErrorCode::MeshMismatch, "flux size differs from mesh");
    double s = 0.0;
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        const RegionId r = m.triangles()[e].region;
        if (region && r != *region) continue;
        const double eps = mat.at(r);
        if (eps == 0.0) continue;
        const Vec2 g = field.gradient(e);
        const Vec2 diff{flux[e].x + eps * g.x, flux[e].y + eps * g.y};
        s += dot(diff, diff) / eps * m.area(e);
    }
    return std::sqrt(s);
}

namespace detail {

inline double checked_sqrt(double v, const char* what) {
    if (v < 0.0) throw Error(ErrorCode::NegativeNorm, std::string(what) + " squared is negative");
    return std::sqrt(v);
}

struct FeatureSums {
    double uu = 0.0, ww = 0.0, uw = 0.0;
};

// Integrals over F of grad u . grad u, grad w . grad w and grad u . grad w, each weighted by element area.
inline FeatureSums feature_sums(const PotentialField& u, const PotentialField& w, RegionId feature) {
    require_same_mesh(u, w);
    const Mesh& m = *u.mesh;
    require_region(m, feature);
    FeatureSums s;
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        if (m.triangles()[e].region != feature) continue;
        const double a = m.area(e);
        const Vec2 gu = u.gradient(e), gw = w.gradient(e);
        s.uu += a * dot(gu, gu);
        s.ww += a * dot(gw, gw);
        s.uw += a * dot(gu, gw);
    }
    return s;
}

} // namespace detail

/// Terms for a feature whose permittivity eps_feature was replaced by eps_ref.
/// Fields are the simplified primal and dual solutions.
inline CreTerms cre_internal(const PotentialField& phi, const PotentialField& phi_star, RegionId feature,
                             double eps_ref, double eps_feature) {
    if (!(eps_feature > 0.0) || !(eps_ref >= 0.0))
        throw Error(ErrorCode::InvalidPermittivity, "feature permittivity must be positive");
    const auto s = detail::feature_sums(phi, phi_star, feature);
    const double jump = eps_ref - eps_feature;
    const double w = jump * jump / eps_feature;
    return {detail::checked_sqrt(w * s.uu, "nu"), detail::checked_sqrt(w * s.ww, "nu*"), jump * s.uw};
}

/// Nodes of F that also belong to a triangle outside F.
inline std::vector<char> interface_nodes(const Mesh& m, RegionId feature) {
    const auto in_f = region_node_mask(m, feature);
    std::vector<char> out(m.num_nodes(), 0), iface(m.num_nodes(), 0);
    for (const auto& t : m.triangles())
        if (t.region != feature)
            for (NodeIndex n : t.v) out[n] = 1;
    for (NodeIndex n = 0; n < m.num_nodes(); ++n) iface[n] = static_cast<char>(in_f[n] && out[n]);
    return iface;
}

/// Extends `outside` into F by solving the Laplace problem on F with the
/// trace of `outside` on the interface and zero flux on the rest of its boundary.
inline PotentialField solve_feature_problem(const PotentialField& outside, RegionId feature, double eps_feature,
                                            const SolverOptions& opt = {}) {
    const Mesh& m = *outside.mesh;
    require_region(m, feature);
    if (!(eps_feature > 0.0)) throw Error(ErrorCode::InvalidPermittivity, "feature permittivity must be positive");
    const auto iface = interface_nodes(m, feature);
    if (std::find(iface.begin(), iface.end(), 1) == iface.end())
        throw Error(ErrorCode::EmptyInterface, "feature shares no nodes with the rest of the mesh");

    MaterialField mat;
    for (RegionId r : m.region_ids()) mat.set(r, r == feature ? eps_feature : 0.0);
    const CsrMatrix K = assemble_stiffness(m, mat);
    const auto in_f = region_node_mask(m, feature);
    NodalConstraints c{std::vector<char>(m.num_nodes(), 0), outside.values};
    for (NodeIndex n = 0; n < m.num_nodes(); ++n) c.fixed[n] = static_cast<char>(!in_f[n] || iface[n]);
    const LinearSystem sys = reduce_system(K, std::vector<double>(m.num_nodes(), 0.0), c);
    std::vector<double> x = sys.restrict_to_free(outside.values);
    solve_spd(sys.A, sys.rhs, x, opt);
    return PotentialField{outside.mesh, sys.expand(x), outside.label + "+feature"};
}

/// Terms for a Neumann protrusion F of permittivity eps_feature that the
/// simplified model removed. Fields must already be extended into F.
inline CreTerms cre_positive_neumann(const PotentialField& phi, const PotentialField& phi_star, RegionId feature,
                                     double eps_feature) {
    if (!(eps_feature > 0.0)) throw Error(ErrorCode::InvalidPermittivity, "feature permittivity must be positive");
    const auto s = detail::feature_sums(phi, phi_star, feature);
    return {detail::checked_sqrt(eps_feature * s.uu, "nu"), detail::checked_sqrt(eps_feature * s.ww, "nu*"),
            -eps_feature * s.uw};
}

/// Copy of `u` with every node of the closed region F set to `value`.
inline PotentialField overwrite_region(const PotentialField& u, RegionId feature, double value) {
    require_region(*u.mesh, feature);
    PotentialField out = u;
    const auto in_f = region_node_mask(*u.mesh, feature);
    for (NodeIndex n = 0; n < in_f.size(); ++n)
        if (in_f[n]) out.values[n] = value;
    return out;
}

/// Terms for a removed void.
///  NegativeNeumann: the original model carries alpha*eps_ref on F, the simplified one eps_ref.
///  NegativeDirichlet: the original model holds F at the conductor potential; the simplified
///  fields are overwritten on the closed feature and the correction is measured on the
///  surrounding elements, assumed to carry eps_ref.
inline CreTerms cre_negative(FeatureKind kind, const PotentialField& phi, const PotentialField& phi_star,
                             RegionId feature, double eps_ref, double alpha,
                             std::optional<double> dirichlet_value = std::nullopt) {
    if (kind == FeatureKind::NegativeNeumann) {
        if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidPermittivity, "penalty factor must be positive");
        return cre_internal(phi, phi_star, feature, eps_ref, alpha * eps_ref);
    }
    if (kind != FeatureKind::NegativeDirichlet)
        throw Error(ErrorCode::Config, "cre_negative needs a negative feature kind");
    if (!dirichlet_value) throw Error(ErrorCode::MissingDirichletValue, "negative Dirichlet feature has no potential");
    require_same_mesh(phi, phi_star);
    const Mesh& m = *phi.mesh;
    const PotentialField kin = overwrite_region(phi, feature, *dirichlet_value);
    const PotentialField kin_star = overwrite_region(phi_star, feature, 0.0);
    double nn = 0.0, ss = 0.0, r = 0.0;
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        if (m.triangles()[e].region == feature) continue;
        const Vec2 gp = phi.gradient(e), gk = kin.gradient(e);
        const Vec2 d{gk.x - gp.x, gk.y - gp.y};
        const Vec2 gs = phi_star.gradient(e), gks = kin_star.gradient(e);
        const Vec2 ds{gs.x - gks.x, gs.y - gks.y};
        if (d.x == 0.0 && d.y == 0.0 && ds.x == 0.0 && ds.y == 0.0) continue;
        const double w = eps_ref * m.area(e);
        nn += w * dot(d, d);
        ss += w * dot(ds, ds);
        r -= w * dot(d, gks);
    }
    return {detail::checked_sqrt(nn, "nu"), detail::checked_sqrt(ss, "nu*"), r};
}

inline Bounds combine_bounds(double q_simplified, double residual, double nu, double nu_star) {
    if (nu < 0.0 || nu_star < 0.0) throw Error(ErrorCode::NegativeNorm, "energy norms must be non-negative");
    const double c = q_simplified + residual;
    return {c - nu * nu_star, c + nu * nu_star};
}

/// One plus the bound width relative to the exact QoI.
inline double effectivity(double q_exact, Bounds b) {
    if (q_exact == 0.0) throw Error(ErrorCode::ZeroQoI, "effectivity is undefined for a zero QoI");
    return 1.0 + std::abs(b.upper - b.lower) / std::abs(q_exact);
}

} // namespace defeature
