#include "defeature/solver.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

using namespace defeature;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CsrMatrix dense_to_csr(const std::vector<std::vector<double>>& a) {
    CsrMatrix m;
    m.n = a.size();
    m.row_ptr.assign(m.n + 1, 0);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j)
            if (a[i][j] != 0.0) {
                m.col.push_back(j);
                m.val.push_back(a[i][j]);
            }
        m.row_ptr[i + 1] = m.col.size();
    }
    return m;
}

// Gap between two full-height plates at x = -0.2 and x = 0.2.
std::shared_ptr<const Mesh> strip_mesh(double h) {
    StructuredSpec s;
    s.domain = {-0.2, -0.5, 0.2, 0.5};
    s.h = h;
    s.regions.push_back({RegionId{1}, {-0.2, -0.5, 0.2, 0.0}});
    s.boundary_rules.push_back({[](Point a, Point b) { return a.x == -0.2 && b.x == -0.2; }, BoundaryTag{1}});
    s.boundary_rules.push_back({[](Point a, Point b) { return a.x == 0.2 && b.x == 0.2; }, BoundaryTag{2}});
    return std::make_shared<const Mesh>(build_structured(s));
}

std::shared_ptr<const Mesh> box_with_inclusion() {
    StructuredSpec s;
    s.domain = {0, 0, 1, 1};
    s.h = 0.05;
    s.regions.push_back({RegionId{2}, {0.3, 0.4, 0.6, 0.7}});
    s.boundary_rules.push_back({[](Point a, Point b) { return a.x == 0 && b.x == 0; }, BoundaryTag{1}});
    s.boundary_rules.push_back({[](Point a, Point b) { return a.y == 1 && b.y == 1; }, BoundaryTag{2}});
    s.boundary_rules.push_back({on_rect_boundary(s.domain), BoundaryTag{3}});
    return std::make_shared<const Mesh>(build_structured(s));
}

} // namespace

TEST_CASE("identity system converges in one iteration", "[solver]") {
    const CsrMatrix I = dense_to_csr({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    std::vector<double> x;
    const auto rep = solve_spd(I, {1.0, -2.0, 3.5}, x);
    CHECK(rep.iterations == 1);
    CHECK(x == std::vector<double>{1.0, -2.0, 3.5});
}

TEST_CASE("2x2 system by hand", "[solver]") {
    const CsrMatrix A = dense_to_csr({{2, -1}, {-1, 2}});
    std::vector<double> x;
    solve_spd(A, {1.0, 0.0}, x);
    CHECK_THAT(x[0], WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THAT(x[1], WithinAbs(1.0 / 3.0, 1e-12));
}

TEST_CASE("solver failures are reported", "[solver]") {
    std::vector<double> x;
    try {
        solve_spd(dense_to_csr({{1, 0}, {0, 0}}), {1.0, 1.0}, x);
        FAIL("expected SingularSystem");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularSystem);
    }
    try {
        solve_spd(dense_to_csr({{1, 2}, {2, 1}}), {1.0, -1.0}, x);
        FAIL("expected SingularSystem for an indefinite matrix");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularSystem);
    }

    const auto m = box_with_inclusion();
    MaterialField mat{{RegionId{0}, 1.0}, {RegionId{2}, 7.0}};
    BoundaryConditions bc;
    bc.dirichlet[BoundaryTag{1}] = 220.0;
    bc.dirichlet[BoundaryTag{2}] = -220.0;
    try {
        solve_potential({m, &mat, bc, std::nullopt, std::nullopt, "starved"}, {1e-10, 3});
        FAIL("expected NotConverged");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotConverged);
    }
}

TEST_CASE("parallel-plate strip is linear in x", "[solver]") {
    const auto m = strip_mesh(0.05);
    MaterialField mat{{RegionId{0}, 1.0005}, {RegionId{1}, 1.0005}};
    BoundaryConditions bc;
    bc.dirichlet[BoundaryTag{1}] = 220.0;
    bc.dirichlet[BoundaryTag{2}] = -220.0;
    const auto u = solve_potential({m, &mat, bc, std::nullopt, std::nullopt, "strip"});
    for (NodeIndex n = 0; n < m->num_nodes(); ++n)
        CHECK_THAT(u.values[n], WithinAbs(-1100.0 * m->nodes()[n].x, 1e-7));
    for (ElementIndex e = 0; e < m->num_triangles(); ++e) {
        CHECK_THAT(u.gradient(e).x, WithinRel(-1100.0, 1e-9));
        CHECK_THAT(u.gradient(e).y, WithinAbs(0.0, 1e-6));
    }
}

TEST_CASE("linear boundary data is reproduced", "[solver][property]") {
    StructuredSpec s;
    s.domain = {0, 0, 1, 1};
    s.h = 0.1;
    s.boundary_rules.push_back({on_rect_boundary(s.domain), BoundaryTag{1}});
    const auto m = std::make_shared<const Mesh>(build_structured(s));
    MaterialField mat{{RegionId{0}, 2.5}};
    const CsrMatrix K = assemble_stiffness(*m, mat);
    NodalConstraints c{std::vector<char>(m->num_nodes(), 0), std::vector<double>(m->num_nodes(), 0.0)};
    for (const auto& be : m->boundary_edges())
        for (NodeIndex n : be.v) {
            c.fixed[n] = 1;
            c.value[n] = 3 * m->nodes()[n].x + 4 * m->nodes()[n].y - 1;
        }
    const LinearSystem sys = reduce_system(K, std::vector<double>(m->num_nodes(), 0.0), c);
    std::vector<double> x(sys.A.n, 0.0);
    solve_spd(sys.A, sys.rhs, x, {1e-14, 0});
    const PotentialField u{m, sys.expand(x), "linear"};
    for (NodeIndex n = 0; n < m->num_nodes(); ++n)
        CHECK_THAT(u.values[n], WithinAbs(3 * m->nodes()[n].x + 4 * m->nodes()[n].y - 1, 1e-11));
    for (ElementIndex e = 0; e < m->num_triangles(); ++e)
        CHECK_THAT(std::hypot(u.gradient(e).x, u.gradient(e).y), WithinRel(5.0, 1e-10));
}

TEST_CASE("element gradients", "[solver]") {
    const auto m = std::make_shared<const Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {0, 1}},
                                                std::vector<Triangle>{{{0, 1, 2}, RegionId{0}}},
                                                std::vector<BoundaryEdge>{});
    CHECK(PotentialField{m, {4, 4, 4}, "c"}.gradient(0).x == 0.0);
    CHECK(PotentialField{m, {4, 4, 4}, "c"}.gradient(0).y == 0.0);
    const Vec2 g = PotentialField{m, {0, 1, 0}, "x"}.gradient(0);
    CHECK(g.x == 1.0);
    CHECK(g.y == 0.0);
}

TEST_CASE("solutions with an inclusion are consistent and extremal", "[solver][property]") {
    const auto m = box_with_inclusion();
    MaterialField mat{{RegionId{0}, 1.0}, {RegionId{2}, 7.0}};
    BoundaryConditions bc;
    bc.dirichlet[BoundaryTag{1}] = 10.0;
    bc.dirichlet[BoundaryTag{2}] = -5.0;
    SolveReport rep;
    const auto u = solve_potential({m, &mat, bc, std::nullopt, std::nullopt, "u"}, {}, &rep);
    CHECK(rep.converged);
    CHECK(rep.residual <= 1e-10);

    // maximum principle
    const auto [lo, hi] = std::minmax_element(u.values.begin(), u.values.end());
    CHECK(*lo >= -5.0 - 1e-10 * 15.0);
    CHECK(*hi <= 10.0 + 1e-10 * 15.0);

    // Galerkin consistency and static admissibility of the discrete flux
    const CsrMatrix K = assemble_stiffness(*m, mat);
    const LinearSystem sys = apply_dirichlet_lifting(K, bc, *m);
    std::vector<double> Ku;
    K.multiply(u.values, Ku);
    double rhs_norm = 0.0, res = 0.0;
    for (std::size_t r = 0; r < sys.A.n; ++r) {
        const NodeIndex n = sys.free_nodes[r];
        res = std::max(res, std::abs(Ku[n]));
        rhs_norm = std::max(rhs_norm, std::abs(sys.rhs[r]));
    }
    CHECK(res <= 1e-8 * rhs_norm);

    // energy is stationary against admissible perturbations
    auto energy = [&](const std::vector<double>& v) {
        PotentialField f{m, v, "v"};
        return 0.5 * energy_inner_product(mat, f, f);
    };
    const double e0 = energy(u.values);
    for (NodeIndex n : {sys.free_nodes[5], sys.free_nodes[sys.free_nodes.size() / 2]}) {
        for (double t : {1e-3, -1e-3}) {
            auto v = u.values;
            v[n] += t;
            CHECK(energy(v) >= e0 - 1e-9);
        }
    }

    // warm start at the solution needs no iterations
    SolveReport again;
    solve_potential({m, &mat, bc, std::nullopt, u.values, "warm"}, {}, &again);
    CHECK(again.iterations == 0);
}

TEST_CASE("void regions are pinned rather than left singular", "[solver]") {
    const auto m = box_with_inclusion();
    MaterialField mat{{RegionId{0}, 1.0}, {RegionId{2}, 0.0}};
    BoundaryConditions bc;
    bc.dirichlet[BoundaryTag{1}] = 1.0;
    bc.dirichlet[BoundaryTag{2}] = 0.0;
    const auto u = solve_potential({m, &mat, bc, std::nullopt, std::nullopt, "void"});
    for (double v : u.values) CHECK(std::isfinite(v));
}
