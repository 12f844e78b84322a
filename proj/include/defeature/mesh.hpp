#pragma once

#include "defeature/core.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace defeature {

struct Triangle {
    std::array<NodeIndex, 3> v{};
    RegionId region{};
};

struct BoundaryEdge {
    std::array<NodeIndex, 2> v{};
    BoundaryTag tag{};
};

inline constexpr BoundaryTag kUntagged{0};

/// Conforming P1 triangulation. Triangles are stored counter-clockwise.
class Mesh {
public:
    Mesh() = default;

    Mesh(std::vector<Point> nodes, std::vector<Triangle> triangles, std::vector<BoundaryEdge> edges)
        : nodes_(std::move(nodes)), triangles_(std::move(triangles)), edges_(std::move(edges)) {
        for (std::size_t e = 0; e < triangles_.size(); ++e) {
            for (NodeIndex n : triangles_[e].v) {
                if (n >= nodes_.size())
                    throw Error(ErrorCode::BadElement, "triangle " + std::to_string(e) + " references missing node");
            }
            if (!(signed_area(e) > 0.0))
                throw Error(ErrorCode::BadElement, "triangle " + std::to_string(e) + " has non-positive area");
        }
        for (const auto& be : edges_) {
            if (be.v[0] >= nodes_.size() || be.v[1] >= nodes_.size())
                throw Error(ErrorCode::BadElement, "boundary edge references missing node");
        }
    }

    const std::vector<Point>& nodes() const { return nodes_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<BoundaryEdge>& boundary_edges() const { return edges_; }

    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_triangles() const { return triangles_.size(); }

    double signed_area(ElementIndex e) const {
        const auto& t = triangles_[e].v;
        const Point a = nodes_[t[0]], b = nodes_[t[1]], c = nodes_[t[2]];
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

    double area(ElementIndex e) const { return signed_area(e); }

    Point centroid(ElementIndex e) const {
        const auto& t = triangles_[e].v;
        return {(nodes_[t[0]].x + nodes_[t[1]].x + nodes_[t[2]].x) / 3.0,
                (nodes_[t[0]].y + nodes_[t[1]].y + nodes_[t[2]].y) / 3.0};
    }

    std::vector<RegionId> region_ids() const {
        std::set<RegionId> ids;
        for (const auto& t : triangles_) ids.insert(t.region);
        return {ids.begin(), ids.end()};
    }

    bool has_region(RegionId r) const {
        for (const auto& t : triangles_)
            if (t.region == r) return true;
        return false;
    }

    std::vector<BoundaryTag> boundary_tags() const {
        std::set<BoundaryTag> tags;
        for (const auto& be : edges_) tags.insert(be.tag);
        return {tags.begin(), tags.end()};
    }

private:
    std::vector<Point> nodes_;
    std::vector<Triangle> triangles_;
    std::vector<BoundaryEdge> edges_;
};

struct RegionSpec {
    RegionId id{};
    Rect rect{};
    bool hole = false;  // cells are removed from the mesh
};

struct BoundaryRule {
    std::function<bool(Point, Point)> match;
    BoundaryTag tag{};
};

struct StructuredSpec {
    Rect domain{};
    double h = 0.05;
    RegionId bulk{0};
    std::vector<RegionSpec> regions;
    std::vector<BoundaryRule> boundary_rules;
    std::vector<std::pair<RegionId, RegionId>> disjoint;
};

/// Matches edges lying on the boundary of `r`.
inline std::function<bool(Point, Point)> on_rect_boundary(Rect r, double tol = 1e-9) {
    return [r, tol](Point a, Point b) {
        auto same = [tol](double u, double v) { return std::abs(u - v) <= tol; };
        const Point m{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
        if (!r.contains(m, tol)) return false;
        if (same(a.x, b.x) && (same(a.x, r.x0) || same(a.x, r.x1))) return true;
        if (same(a.y, b.y) && (same(a.y, r.y0) || same(a.y, r.y1))) return true;
        return false;
    };
}

namespace detail {

inline long grid_index(double v, double origin, double h, double scale, ErrorCode err, const char* what) {
    const double q = (v - origin) / h;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, scale / h))
        throw Error(err, std::string(what) + " is not aligned with the grid spacing");
    return static_cast<long>(r);
}

struct EdgeKey {
    NodeIndex a, b;
    EdgeKey(NodeIndex u, NodeIndex v) : a(std::min(u, v)), b(std::max(u, v)) {}
    auto operator<=>(const EdgeKey&) const = default;
};

} // namespace detail

/// Structured triangulation of an axis-aligned rectangle. Each grid square is
/// split along one diagonal, mirrored per quadrant about the domain centre so
/// the mesh is symmetric about both midlines. Cells take the region of the
/// smallest containing region rectangle.
inline Mesh build_structured(const StructuredSpec& spec) {
    const Rect& d = spec.domain;
    const double h = spec.h;
    if (!(h > 0.0) || !(d.width() > 0.0) || !(d.height() > 0.0))
        throw Error(ErrorCode::NonAlignedRegion, "domain or spacing is degenerate");
    const double scale = std::max(d.width(), d.height());
    const long nx = detail::grid_index(d.x1, d.x0, h, scale, ErrorCode::NonAlignedRegion, "domain width");
    const long ny = detail::grid_index(d.y1, d.y0, h, scale, ErrorCode::NonAlignedRegion, "domain height");

    struct CellRange { long i0, i1, j0, j1; };
    std::vector<CellRange> ranges;
    for (const auto& r : spec.regions) {
        if (!d.contains({r.rect.x0, r.rect.y0}, 1e-12 * scale) || !d.contains({r.rect.x1, r.rect.y1}, 1e-12 * scale))
            throw Error(ErrorCode::NonAlignedRegion, "region " + std::to_string(r.id.value) + " leaves the domain");
        CellRange c{detail::grid_index(r.rect.x0, d.x0, h, scale, ErrorCode::NonAlignedRegion, "region edge"),
                    detail::grid_index(r.rect.x1, d.x0, h, scale, ErrorCode::NonAlignedRegion, "region edge"),
                    detail::grid_index(r.rect.y0, d.y0, h, scale, ErrorCode::NonAlignedRegion, "region edge"),
                    detail::grid_index(r.rect.y1, d.y0, h, scale, ErrorCode::NonAlignedRegion, "region edge")};
        if (c.i1 <= c.i0 || c.j1 <= c.j0)
            throw Error(ErrorCode::EmptyRegion, "region " + std::to_string(r.id.value) + " has no area");
        ranges.push_back(c);
    }
    for (const auto& [ra, rb] : spec.disjoint) {
        for (const auto& a : spec.regions)
            for (const auto& b : spec.regions)
                if (a.id == ra && b.id == rb && a.rect.overlaps(b.rect))
                    throw Error(ErrorCode::OverlappingFS,
                                "regions " + std::to_string(ra.value) + " and " + std::to_string(rb.value) + " overlap");
    }

    // cell ownership: -1 bulk, otherwise index into spec.regions
    std::vector<int> owner(static_cast<std::size_t>(nx * ny), -1);
    for (long j = 0; j < ny; ++j) {
        for (long i = 0; i < nx; ++i) {
            int best = -1;
            for (std::size_t k = 0; k < ranges.size(); ++k) {
                const auto& c = ranges[k];
                if (i < c.i0 || i >= c.i1 || j < c.j0 || j >= c.j1) continue;
                if (best < 0 || spec.regions[k].rect.area() <= spec.regions[static_cast<std::size_t>(best)].rect.area())
                    best = static_cast<int>(k);
            }
            owner[static_cast<std::size_t>(j * nx + i)] = best;
        }
    }

    const auto grid_node = [nx](long i, long j) { return static_cast<std::size_t>(j * (nx + 1) + i); };
    std::vector<long> node_id(static_cast<std::size_t>((nx + 1) * (ny + 1)), -1);
    auto cell_present = [&](long i, long j) {
        const int o = owner[static_cast<std::size_t>(j * nx + i)];
        return o < 0 || !spec.regions[static_cast<std::size_t>(o)].hole;
    };
    for (long j = 0; j < ny; ++j)
        for (long i = 0; i < nx; ++i)
            if (cell_present(i, j))
                for (auto [di, dj] : {std::pair{0L, 0L}, {1L, 0L}, {1L, 1L}, {0L, 1L}})
                    node_id[grid_node(i + di, j + dj)] = 0;

    std::vector<Point> nodes;
    for (long j = 0; j <= ny; ++j) {
        for (long i = 0; i <= nx; ++i) {
            auto& id = node_id[grid_node(i, j)];
            if (id < 0) continue;
            id = static_cast<long>(nodes.size());
            nodes.push_back({d.x0 + static_cast<double>(i) * h, d.y0 + static_cast<double>(j) * h});
        }
    }

    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(2 * nx * ny));
    for (long j = 0; j < ny; ++j) {
        for (long i = 0; i < nx; ++i) {
            if (!cell_present(i, j)) continue;
            const int o = owner[static_cast<std::size_t>(j * nx + i)];
            const RegionId reg = o < 0 ? spec.bulk : spec.regions[static_cast<std::size_t>(o)].id;
            const auto a = static_cast<NodeIndex>(node_id[grid_node(i, j)]);
            const auto b = static_cast<NodeIndex>(node_id[grid_node(i + 1, j)]);
            const auto c = static_cast<NodeIndex>(node_id[grid_node(i + 1, j + 1)]);
            const auto e = static_cast<NodeIndex>(node_id[grid_node(i, j + 1)]);
            const long sx = 2 * i + 1 - nx;
            const long sy = 2 * j + 1 - ny;
            if (sx * sy >= 0) {
                tris.push_back({{a, b, c}, reg});
                tris.push_back({{a, c, e}, reg});
            } else {
                tris.push_back({{a, b, e}, reg});
                tris.push_back({{b, c, e}, reg});
            }
        }
    }

    for (const auto& r : spec.regions) {
        if (r.hole) continue;
        bool found = false;
        for (const auto& t : tris)
            if (t.region == r.id) { found = true; break; }
        if (!found) throw Error(ErrorCode::EmptyRegion, "region " + std::to_string(r.id.value) + " owns no triangles");
    }

    std::map<detail::EdgeKey, int> count;
    std::map<detail::EdgeKey, std::array<NodeIndex, 2>> oriented;
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            const NodeIndex u = t.v[static_cast<std::size_t>(k)], v = t.v[static_cast<std::size_t>((k + 1) % 3)];
            const detail::EdgeKey key(u, v);
            ++count[key];
            oriented[key] = {u, v};
        }
    }
    std::vector<BoundaryEdge> edges;
    for (const auto& [key, n] : count) {
        if (n != 1) continue;
        const auto v = oriented[key];
        BoundaryTag tag = kUntagged;
        for (const auto& rule : spec.boundary_rules) {
            if (rule.match(nodes[v[0]], nodes[v[1]])) { tag = rule.tag; break; }
        }
        edges.push_back({v, tag});
    }
    return Mesh(std::move(nodes), std::move(tris), std::move(edges));
}

/// Splits every triangle into four through its edge midpoints.
inline Mesh refine_uniform(const Mesh& m) {
    std::vector<Point> nodes = m.nodes();
    std::map<detail::EdgeKey, NodeIndex> mid;
    auto midpoint = [&](NodeIndex u, NodeIndex v) {
        const detail::EdgeKey key(u, v);
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        const Point a = nodes[u], b = nodes[v];
        nodes.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
        const NodeIndex id = nodes.size() - 1;
        mid.emplace(key, id);
        return id;
    };
    std::vector<Triangle> tris;
    tris.reserve(4 * m.num_triangles());
    for (const auto& t : m.triangles()) {
        const auto [a, b, c] = t.v;
        const NodeIndex ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
        tris.push_back({{a, ab, ca}, t.region});
        tris.push_back({{ab, b, bc}, t.region});
        tris.push_back({{ca, bc, c}, t.region});
        tris.push_back({{ab, bc, ca}, t.region});
    }
    std::vector<BoundaryEdge> edges;
    edges.reserve(2 * m.boundary_edges().size());
    for (const auto& be : m.boundary_edges()) {
        const NodeIndex mnode = mid.at(detail::EdgeKey(be.v[0], be.v[1]));
        edges.push_back({{be.v[0], mnode}, be.tag});
        edges.push_back({{mnode, be.v[1]}, be.tag});
    }
    return Mesh(std::move(nodes), std::move(tris), std::move(edges));
}

inline double region_area(const Mesh& m, RegionId r) {
    double a = 0.0;
    bool found = false;
    for (ElementIndex e = 0; e < m.num_triangles(); ++e) {
        if (m.triangles()[e].region != r) continue;
        a += m.area(e);
        found = true;
    }
    if (!found) throw Error(ErrorCode::UnknownRegion, "region " + std::to_string(r.value) + " not in mesh");
    return a;
}

/// Nodes touched by at least one triangle of region `r`.
inline std::vector<char> region_node_mask(const Mesh& m, RegionId r) {
    std::vector<char> mask(m.num_nodes(), 0);
    for (const auto& t : m.triangles())
        if (t.region == r)
            for (NodeIndex n : t.v) mask[n] = 1;
    return mask;
}

} // namespace defeature
