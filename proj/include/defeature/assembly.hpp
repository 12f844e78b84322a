#pragma once

#include "defeature/field.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

namespace defeature {

/// Piecewise-constant permittivity keyed by region. Zero marks a void region.
class MaterialField {
public:
    MaterialField() = default;
    MaterialField(std::initializer_list<std::pair<const RegionId, double>> init) {
        for (const auto& [r, eps] : init) set(r, eps);
    }

    MaterialField& set(RegionId r, double eps) {
        if (!(eps >= 0.0) || !std::isfinite(eps))
            throw Error(ErrorCode::InvalidPermittivity, "region " + std::to_string(r.value) + " has invalid permittivity");
        eps_[r] = eps;
        return *this;
    }

    double at(RegionId r) const {
        auto it = eps_.find(r);
        if (it == eps_.end())
            throw Error(ErrorCode::MissingMaterial, "no permittivity for region " + std::to_string(r.value));
        return it->second;
    }

    bool contains(RegionId r) const { return eps_.count(r) != 0; }

    void check_covers(const Mesh& m) const {
        for (RegionId r : m.region_ids()) at(r);
    }

private:
    std::map<RegionId, double> eps_;
};

struct BoundaryConditions {
    std::map<BoundaryTag, double> dirichlet;
    std::map<BoundaryTag, double> neumann;         // outward flux density on tagged edges
    std::map<RegionId, double> dirichlet_regions;  // every node of the region is fixed
    std::map<RegionId, double> charge;             // volume charge density

    BoundaryConditions homogeneous() const {
        BoundaryConditions h;
        for (const auto& [t, v] : dirichlet) h.dirichlet[t] = 0.0;
        for (const auto& [r, v] : dirichlet_regions) h.dirichlet_regions[r] = 0.0;
        return h;
    }
};

/// Compressed sparse row matrix with sorted column indices.
struct CsrMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col;
    std::vector<double> val;

    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
            y[i] = s;
        }
    }

    double at(std::size_t i, std::size_t j) const {
        const auto first = col.begin() + static_cast<long>(row_ptr[i]);
        const auto last = col.begin() + static_cast<long>(row_ptr[i + 1]);
        auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return 0.0;
        return val[static_cast<std::size_t>(it - col.begin())];
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
        return d;
    }
};

/// Node-to-node sparsity of a P1 mesh.
inline CsrMatrix mesh_pattern(const Mesh& m) {
    std::vector<std::vector<std::size_t>> adj(m.num_nodes());
    for (const auto& t : m.triangles())
        for (NodeIndex a : t.v)
            for (NodeIndex b : t.v) adj[a].push_back(b);
    CsrMatrix K;
    K.n = m.num_nodes();
    K.row_ptr.assign(K.n + 1, 0);
    for (std::size_t i = 0; i < K.n; ++i) {
        auto& row = adj[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        if (row.empty()) row.push_back(i);
        K.row_ptr[i + 1] = K.row_ptr[i] + row.size();
        K.col.insert(K.col.end(), row.begin(), row.end());
    }
    K.val.assign(K.col.size(), 0.0);
    return K;
}

inline std::array<std::array<double, 3>, 3> element_stiffness(const Mesh& m, ElementIndex e, double eps) {
    const auto g = shape_gradients(m, e);
    const double a = m.area(e);
    std::array<std::array<double, 3>, 3> k{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) k[i][j] = eps * a * dot(g[i], g[j]);
    return k;
}

/// K_ij = sum over elements of eps * grad N_i . grad N_j.
inline CsrMatrix assemble_stiffness(const Mesh& m, const MaterialField& mat) {
    mat.check_covers(m);
    CsrMatrix K = mesh_pattern(m);
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        const auto& t = m.triangles()[e];
        const auto k = element_stiffness(m, e, mat.at(t.region));
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t row = t.v[i];
            const auto first = K.col.begin() + static_cast<long>(K.row_ptr[row]);
            const auto last = K.col.begin() + static_cast<long>(K.row_ptr[row + 1]);
            for (std::size_t j = 0; j < 3; ++j) {
                const auto it = std::lower_bound(first, last, t.v[j]);
                K.val[static_cast<std::size_t>(it - K.col.begin())] += k[i][j];
            }
        }
    }
    return K;
}

/// Load from Neumann flux and volume charge.
inline std::vector<double> assemble_load(const Mesh& m, const BoundaryConditions& bc) {
    std::vector<double> f(m.num_nodes(), 0.0);
    for (const auto& be : m.boundary_edges()) {
        auto it = bc.neumann.find(be.tag);
        if (it == bc.neumann.end()) continue;
        const Point a = m.nodes()[be.v[0]], b = m.nodes()[be.v[1]];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        f[be.v[0]] += 0.5 * it->second * len;
        f[be.v[1]] += 0.5 * it->second * len;
    }
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        const auto& t = m.triangles()[e];
        auto it = bc.charge.find(t.region);
        if (it == bc.charge.end()) continue;
        for (NodeIndex n : t.v) f[n] += it->second * m.area(e) / 3.0;
    }
    return f;
}

struct NodalConstraints {
    std::vector<char> fixed;
    std::vector<double> value;

    std::size_t count() const { return static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), 1)); }
};

/// Fixed nodes from Dirichlet tags and Dirichlet regions. First assignment wins.
inline NodalConstraints dirichlet_constraints(const Mesh& m, const BoundaryConditions& bc) {
    NodalConstraints c{std::vector<char>(m.num_nodes(), 0), std::vector<double>(m.num_nodes(), 0.0)};
    auto fix = [&](NodeIndex n, double v) {
        if (c.fixed[n]) return;
        c.fixed[n] = 1;
        c.value[n] = v;
    };
    for (const auto& be : m.boundary_edges()) {
        auto it = bc.dirichlet.find(be.tag);
        if (it == bc.dirichlet.end()) continue;
        fix(be.v[0], it->second);
        fix(be.v[1], it->second);
    }
    for (const auto& [r, v] : bc.dirichlet_regions) {
        require_region(m, r);
        for (const auto& t : m.triangles())
            if (t.region == r)
                for (NodeIndex n : t.v) fix(n, v);
    }
    return c;
}

/// Free-by-free system left after eliminating fixed nodes.
struct LinearSystem {
    CsrMatrix A;
    std::vector<double> rhs;
    std::vector<double> lift;          // full-length, fixed values and zeros elsewhere
    std::vector<NodeIndex> free_nodes;

    std::vector<double> expand(const std::vector<double>& x) const {
        std::vector<double> u = lift;
        for (std::size_t i = 0; i < free_nodes.size(); ++i) u[free_nodes[i]] = x[i];
        return u;
    }

    std::vector<double> restrict_to_free(const std::vector<double>& u) const {
        std::vector<double> x(free_nodes.size());
        for (std::size_t i = 0; i < free_nodes.size(); ++i) x[i] = u[free_nodes[i]];
        return x;
    }
};

/// Eliminates constrained rows and columns. Nodes with a zero stiffness
/// diagonal (touched only by void elements) are pinned to zero.
inline LinearSystem reduce_system(const CsrMatrix& K, const std::vector<double>& load, const NodalConstraints& c) {
    LinearSystem s;
    s.lift.assign(K.n, 0.0);
    std::vector<long> map(K.n, -1);
    for (std::size_t i = 0; i < K.n; ++i) {
        if (c.fixed[i]) {
            s.lift[i] = c.value[i];
        } else if (K.at(i, i) > 0.0) {
            map[i] = static_cast<long>(s.free_nodes.size());
            s.free_nodes.push_back(i);
        }
    }
    s.A.n = s.free_nodes.size();
    s.A.row_ptr.assign(s.A.n + 1, 0);
    s.rhs.assign(s.A.n, 0.0);
    for (std::size_t r = 0; r < s.A.n; ++r) {
        const NodeIndex i = s.free_nodes[r];
        double b = load[i];
        for (std::size_t k = K.row_ptr[i]; k < K.row_ptr[i + 1]; ++k) {
            const std::size_t j = K.col[k];
            if (map[j] >= 0) {
                s.A.col.push_back(static_cast<std::size_t>(map[j]));
                s.A.val.push_back(K.val[k]);
            } else {
                b -= K.val[k] * s.lift[j];
            }
        }
        s.rhs[r] = b;
        s.A.row_ptr[r + 1] = s.A.col.size();
    }
    return s;
}

inline LinearSystem apply_dirichlet_lifting(const CsrMatrix& K, const BoundaryConditions& bc, const Mesh& m,
                                            const std::optional<std::vector<double>>& load = std::nullopt) {
    const NodalConstraints c = dirichlet_constraints(m, bc);
    if (c.count() == 0) throw Error(ErrorCode::NoDirichletNodes, "no Dirichlet nodes; the system is singular");
    return reduce_system(K, load ? *load : assemble_load(m, bc), c);
}

/// Load of the adjoint problem: entry j is the integral over `interest` of eps grad(ref) . grad N_j.
inline std::vector<double> assemble_dual_load(const MaterialField& mat, const PotentialField& ref,
                                              const RegionSet& interest) {
    const Mesh& m = *ref.mesh;
    require_regions(m, interest);
    std::vector<double> f(m.num_nodes(), 0.0);
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        const auto& t = m.triangles()[e];
        if (!interest.contains(t.region)) continue;
        const auto g = shape_gradients(m, e);
        const Vec2 gu = ref.gradient(e);
        const double w = mat.at(t.region) * m.area(e);
        for (std::size_t k = 0; k < 3; ++k) f[t.v[k]] += w * dot(gu, g[k]);
    }
    return f;
}

/// Integral of eps grad u . grad v, over one region or the whole mesh.
inline double energy_inner_product(const MaterialField& mat, const PotentialField& u, const PotentialField& v,
                                   const std::optional<RegionSet>& region = std::nullopt) {
    require_same_mesh(u, v);
    const Mesh& m = *u.mesh;
    if (region) require_regions(m, *region);
    double s = 0.0;
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        const auto& t = m.triangles()[e];
        if (region && !region->contains(t.region)) continue;
        s += mat.at(t.region) * m.area(e) * dot(u.gradient(e), v.gradient(e));
    }
    return s;
}

} // namespace defeature
