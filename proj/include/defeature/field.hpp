#pragma once

#include "defeature/mesh.hpp"

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

namespace defeature {

/// Gradients of the three barycentric shape functions of triangle `e`.
inline std::array<Vec2, 3> shape_gradients(const Mesh& m, ElementIndex e) {
    const auto& t = m.triangles()[e].v;
    const Point a = m.nodes()[t[0]], b = m.nodes()[t[1]], c = m.nodes()[t[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    return {Vec2{(b.y - c.y) / det, (c.x - b.x) / det},
            Vec2{(c.y - a.y) / det, (a.x - c.x) / det},
            Vec2{(a.y - b.y) / det, (b.x - a.x) / det}};
}

/// Nodal P1 field bound to a mesh.
struct PotentialField {
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> values;
    std::string label;

    Vec2 gradient(ElementIndex e) const {
        const auto g = shape_gradients(*mesh, e);
        const auto& t = mesh->triangles()[e].v;
        Vec2 r{};
        for (int k = 0; k < 3; ++k) {
            const double u = values[t[static_cast<std::size_t>(k)]];
            r.x += u * g[static_cast<std::size_t>(k)].x;
            r.y += u * g[static_cast<std::size_t>(k)].y;
        }
        return r;
    }
};

inline void require_same_mesh(const PotentialField& a, const PotentialField& b) {
    if (!a.mesh || a.mesh != b.mesh || a.values.size() != b.values.size())
        throw Error(ErrorCode::MeshMismatch, "fields '" + a.label + "' and '" + b.label + "' live on different meshes");
}

inline void require_region(const Mesh& m, RegionId r) {
    if (!m.has_region(r)) throw Error(ErrorCode::UnknownRegion, "region " + std::to_string(r.value) + " not in mesh");
}

/// A union of regions, e.g. a domain of interest split across materials.
struct RegionSet {
    std::vector<RegionId> ids;

    RegionSet() = default;
    RegionSet(RegionId r) : ids{r} {}
    RegionSet(std::initializer_list<RegionId> rs) : ids(rs) {}

    bool contains(RegionId r) const { return std::find(ids.begin(), ids.end(), r) != ids.end(); }
};

inline void require_regions(const Mesh& m, const RegionSet& s) {
    if (s.ids.empty()) throw Error(ErrorCode::UnknownRegion, "empty region set");
    for (RegionId r : s.ids) require_region(m, r);
}

} // namespace defeature
