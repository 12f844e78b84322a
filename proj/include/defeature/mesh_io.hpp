#pragma once

#include "defeature/mesh.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace defeature {

// Text layout:
//   defeature-mesh 1
//   <nodes> <triangles> <edges>
//   x y            (one line per node)
//   i j k region   (one line per triangle)
//   i j tag        (one line per boundary edge)

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_mesh(std::ostream& os, const Mesh& m) {
    os << "defeature-mesh 1\n";
    os << m.num_nodes() << ' ' << m.num_triangles() << ' ' << m.boundary_edges().size() << '\n';
    for (const auto& p : m.nodes()) os << format_double(p.x) << ' ' << format_double(p.y) << '\n';
    for (const auto& t : m.triangles())
        os << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.region.value << '\n';
    for (const auto& e : m.boundary_edges()) os << e.v[0] << ' ' << e.v[1] << ' ' << e.tag.value << '\n';
}

inline Mesh read_mesh(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "defeature-mesh" || version != 1)
        throw Error(ErrorCode::Parse, "missing mesh header");
    std::size_t nn = 0, nt = 0, ne = 0;
    if (!(is >> nn >> nt >> ne)) throw Error(ErrorCode::Parse, "missing mesh counts");
    std::vector<Point> nodes(nn);
    for (auto& p : nodes)
        if (!(is >> p.x >> p.y)) throw Error(ErrorCode::Parse, "truncated node block");
    std::vector<Triangle> tris(nt);
    for (auto& t : tris)
        if (!(is >> t.v[0] >> t.v[1] >> t.v[2] >> t.region.value)) throw Error(ErrorCode::Parse, "truncated triangle block");
    std::vector<BoundaryEdge> edges(ne);
    for (auto& e : edges)
        if (!(is >> e.v[0] >> e.v[1] >> e.tag.value)) throw Error(ErrorCode::Parse, "truncated edge block");
    return Mesh(std::move(nodes), std::move(tris), std::move(edges));
}

inline std::string to_text(const Mesh& m) {
    std::ostringstream os;
    write_mesh(os, m);
    return os.str();
}

inline Mesh from_text(const std::string& s) {
    std::istringstream is(s);
    return read_mesh(is);
}

} // namespace defeature
