#include "defeature/estimator.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>

using namespace defeature;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const RegionId kS{1}, kF{2};

// Unit box, Dirichlet on the left and top edges, S in the lower part, F above it.
std::shared_ptr<const Mesh> layout(Rect feature = {0.4, 0.6, 0.7, 0.8}) {
    StructuredSpec s;
    s.domain = {0, 0, 1, 1};
    s.h = 0.05;
    s.regions.push_back({kS, {0.0, 0.0, 1.0, 0.4}});
    s.regions.push_back({kF, feature});
    s.disjoint.push_back({kF, kS});
    s.boundary_rules.push_back({[](Point a, Point b) { return a.x == 0 && b.x == 0; }, BoundaryTag{1}});
    s.boundary_rules.push_back({[](Point a, Point b) { return a.y == 1 && b.y == 1; }, BoundaryTag{2}});
    s.boundary_rules.push_back({on_rect_boundary(s.domain), BoundaryTag{3}});
    return std::make_shared<const Mesh>(build_structured(s));
}

BoundaryConditions plates() {
    BoundaryConditions bc;
    bc.dirichlet[BoundaryTag{1}] = 100.0;
    bc.dirichlet[BoundaryTag{2}] = -100.0;
    return bc;
}

struct Solved {
    PotentialField phi, dual, exact;
};

Solved solve_internal(std::shared_ptr<const Mesh> m, double eps_r, double eps_f) {
    MaterialField simp{{RegionId{0}, eps_r}, {kS, eps_r}, {kF, eps_r}};
    MaterialField orig{{RegionId{0}, eps_r}, {kS, eps_r}, {kF, eps_f}};
    const auto bc = plates();
    auto phi = solve_potential({m, &simp, bc, std::nullopt, std::nullopt, "phi"}, {1e-13, 0});
    const auto load = assemble_dual_load(simp, phi, kS);
    auto dual = solve_potential({m, &simp, bc.homogeneous(), load, std::nullopt, "dual"}, {1e-13, 0});
    auto exact = solve_potential({m, &orig, bc, std::nullopt, std::nullopt, "exact"}, {1e-13, 0});
    return {phi, dual, exact};
}

PotentialField affine(std::shared_ptr<const Mesh> m, double a, double b, double c) {
    PotentialField u{m, std::vector<double>(m->num_nodes()), "affine"};
    for (NodeIndex n = 0; n < m->num_nodes(); ++n) u.values[n] = a * m->nodes()[n].x + b * m->nodes()[n].y + c;
    return u;
}

} // namespace

TEST_CASE("QoI basics", "[estimator]") {
    const auto m = layout();
    MaterialField mat{{RegionId{0}, 1.0}, {kS, 2.0}, {kF, 3.0}};
    const auto zero = affine(m, 0, 0, 0);
    CHECK(qoi_exact(mat, zero, kS) == 0.0);
    const auto u = affine(m, 3, 4, 1);
    // |grad|^2 = 25 over S of area 0.4 with eps 2
    CHECK_THAT(qoi_exact(mat, u, kS), WithinRel(20.0, 1e-13));
    CHECK(qoi_linearized(mat, u, u, kS) == qoi_exact(mat, u, kS));

    const auto v = affine(m, -1, 2, 0), w = affine(m, 0.5, 0.5, 3);
    PotentialField vw = v;
    for (std::size_t i = 0; i < vw.values.size(); ++i) vw.values[i] = 2 * v.values[i] - 3 * w.values[i];
    CHECK_THAT(qoi_linearized(mat, u, vw, kS),
               WithinRel(2 * qoi_linearized(mat, u, v, kS) - 3 * qoi_linearized(mat, u, w, kS), 1e-13));
}

TEST_CASE("Q of the original minus Q of the simplified equals Q of the error", "[estimator]") {
    const auto m = layout();
    const auto s = solve_internal(m, 1.0005, 5.0);
    MaterialField simp{{RegionId{0}, 1.0005}, {kS, 1.0005}, {kF, 1.0005}};
    PotentialField e = s.exact;
    for (std::size_t i = 0; i < e.values.size(); ++i) e.values[i] -= s.phi.values[i];
    CHECK_THAT(qoi_linearized(simp, s.phi, s.exact, kS) - qoi_linearized(simp, s.phi, s.phi, kS),
               WithinAbs(qoi_linearized(simp, s.phi, e, kS), 1e-8));
}

TEST_CASE("simplified primal and dual are energy-orthogonal", "[estimator]") {
    const auto m = layout();
    const auto s = solve_internal(m, 1.0005, 5.0);
    MaterialField simp{{RegionId{0}, 1.0005}, {kS, 1.0005}, {kF, 1.0005}};
    const double cross = energy_inner_product(simp, s.phi, s.dual);
    const double scale = std::sqrt(energy_inner_product(simp, s.phi, s.phi) * energy_inner_product(simp, s.dual, s.dual));
    REQUIRE(scale > 0.0);
    WARN("relative cross energy " << std::abs(cross) / scale);
    CHECK(std::abs(cross) <= 1e-10 * scale);
}

TEST_CASE("internal feature terms", "[estimator]") {
    SECTION("identical permittivity collapses to zero") {
        const auto m = layout();
        const auto s = solve_internal(m, 1.0005, 1.0005);
        const auto t = cre_internal(s.phi, s.dual, kF, 1.0005, 1.0005);
        CHECK(t.nu == 0.0);
        CHECK(t.nu_star == 0.0);
        CHECK(t.residual == 0.0);
    }
    SECTION("one triangle by hand") {
        const auto m = std::make_shared<const Mesh>(std::vector<Point>{{0, 0}, {2, 0}, {0, 1}},
                                                    std::vector<Triangle>{{{0, 1, 2}, kF}}, std::vector<BoundaryEdge>{});
        const PotentialField u{m, {0.0, 6.0, 4.0}, "u"};  // grad = (3, 4), |grad|^2 = 25
        const double A = 1.0, g2 = 25.0, er = 1.0, ef = 4.0;
        const auto t = cre_internal(u, u, kF, er, ef);
        CHECK_THAT(t.nu * t.nu, WithinRel(A * g2 * (er - ef) * (er - ef) / ef, 1e-14));
        CHECK_THAT(t.nu_star, WithinRel(t.nu, 1e-15));
        CHECK_THAT(t.residual, WithinRel(A * g2 * (er - ef), 1e-14));
    }
    SECTION("zero feature permittivity is rejected") {
        const auto m = layout();
        const auto u = affine(m, 1, 0, 0);
        CHECK_THROWS_AS(cre_internal(u, u, kF, 1.0, 0.0), Error);
    }
    SECTION("nu equals the constitutive relation error of the simplified pair") {
        const auto m = layout();
        const auto s = solve_internal(m, 1.0005, 7.0);
        MaterialField simp{{RegionId{0}, 1.0005}, {kS, 1.0005}, {kF, 1.0005}};
        MaterialField orig{{RegionId{0}, 1.0005}, {kS, 1.0005}, {kF, 7.0}};
        const auto t = cre_internal(s.phi, s.dual, kF, 1.0005, 7.0);
        CHECK_THAT(constitutive_relation_error(orig, s.phi, flux_of(simp, s.phi)), WithinRel(t.nu, 1e-12));
        CHECK_THAT(constitutive_relation_error(orig, s.phi, flux_of(simp, s.phi), kF), WithinRel(t.nu, 1e-12));
    }
    SECTION("bounds enclose the linearised QoI of the original solution") {
        const auto m = layout();
        MaterialField simp{{RegionId{0}, 1.0005}, {kS, 1.0005}, {kF, 1.0005}};
        for (double ef : {0.2, 3.0, 13.0}) {
            const auto s = solve_internal(m, 1.0005, ef);
            const auto t = cre_internal(s.phi, s.dual, kF, 1.0005, ef);
            const double qh = qoi_exact(simp, s.phi, kS);
            const auto b = combine_bounds(qh, t.residual, t.nu, t.nu_star);
            const double q = qoi_linearized(simp, s.phi, s.exact, kS);
            INFO("eps_F = " << ef);
            CHECK(b.lower <= q + 1e-9 * q);
            CHECK(q <= b.upper + 1e-9 * q);
            CHECK(t.nu * t.nu_star > 1e-6 * qh);
            CHECK(std::abs((q - qh) - t.residual) <= t.nu * t.nu_star * (1 + 1e-9));
        }
    }
}

TEST_CASE("feature problem", "[estimator]") {
    const auto m = layout({0.4, 0.6, 0.7, 1.0});
    SECTION("constant trace extends to a constant") {
        const auto ext = solve_feature_problem(affine(m, 0, 0, 42.0), kF, 1.0);
        for (double v : ext.values) CHECK_THAT(v, WithinAbs(42.0, 1e-10));
    }
    SECTION("linear trace on the interface extends linearly") {
        // F touches the top edge; the interface is its left, right and bottom sides
        PotentialField u = affine(m, 0, 0, 0);
        const auto in_f = region_node_mask(*m, kF);
        const auto iface = interface_nodes(*m, kF);
        for (NodeIndex n = 0; n < m->num_nodes(); ++n) {
            u.values[n] = in_f[n] && !iface[n] ? 123.0 : 5.0 * m->nodes()[n].x - 1.0;
        }
        const auto ext = solve_feature_problem(u, kF, 2.0, {1e-13, 0});
        for (NodeIndex n = 0; n < m->num_nodes(); ++n)
            if (in_f[n]) CHECK_THAT(ext.values[n], WithinAbs(5.0 * m->nodes()[n].x - 1.0, 1e-9));
    }
    SECTION("values stay within the trace extremes") {
        PotentialField u = affine(m, 0, 0, 0);
        for (NodeIndex n = 0; n < m->num_nodes(); ++n) {
            const Point p = m->nodes()[n];
            u.values[n] = std::sin(7 * p.x) * std::cos(3 * p.y);
        }
        const auto in_f = region_node_mask(*m, kF);
        const auto iface = interface_nodes(*m, kF);
        double lo = 1e9, hi = -1e9;
        for (NodeIndex n = 0; n < m->num_nodes(); ++n)
            if (iface[n]) lo = std::min(lo, u.values[n]), hi = std::max(hi, u.values[n]);
        const auto ext = solve_feature_problem(u, kF, 1.0);
        for (NodeIndex n = 0; n < m->num_nodes(); ++n)
            if (in_f[n]) {
                CHECK(ext.values[n] >= lo - 1e-9);
                CHECK(ext.values[n] <= hi + 1e-9);
            }
    }
    SECTION("a detached feature has no interface") {
        StructuredSpec s;
        s.domain = {0, 0, 1, 1};
        s.h = 0.1;
        s.regions.push_back({kF, {0.0, 0.0, 1.0, 1.0}});
        const auto whole = std::make_shared<const Mesh>(build_structured(s));
        try {
            solve_feature_problem(affine(whole, 1, 0, 0), kF, 1.0);
            FAIL("expected EmptyInterface");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyInterface);
        }
    }
}

TEST_CASE("positive Neumann terms", "[estimator]") {
    const auto m = layout();
    const auto flat = affine(m, 0, 0, 3.0);
    const auto z = affine(m, 1, 2, 0);
    const auto t = cre_positive_neumann(flat, z, kF, 1.0005);
    CHECK(t.nu == 0.0);
    CHECK(t.residual == 0.0);
    CHECK_THAT(t.nu_star, WithinRel(std::sqrt(1.0005 * 5.0 * region_area(*m, kF)), 1e-12));
    PotentialField other{layout(), z.values, "other"};
    CHECK_THROWS_AS(cre_positive_neumann(flat, other, kF, 1.0), Error);
}

TEST_CASE("negative feature terms", "[estimator]") {
    const auto m = layout();
    const auto u = affine(m, 2, -1, 0.5), z = affine(m, -3, 1, 0);

    SECTION("Neumann void is the internal formula with the penalised permittivity") {
        const auto a = cre_negative(FeatureKind::NegativeNeumann, u, z, kF, 1.0005, 1e-5);
        const auto b = cre_internal(u, z, kF, 1.0005, 1e-5 * 1.0005);
        CHECK(a.nu == b.nu);
        CHECK(a.nu_star == b.nu_star);
        CHECK(a.residual == b.residual);
    }
    SECTION("Dirichlet void: only elements bordering F contribute") {
        const auto t = cre_negative(FeatureKind::NegativeDirichlet, u, z, kF, 1.0, 1e-5, 7.0);
        const auto kin = overwrite_region(u, kF, 7.0);
        const auto in_f = region_node_mask(*m, kF);
        double nn = 0.0;
        for (ElementIndex e = 0; e < m->num_triangles(); ++e) {
            const auto& tri = m->triangles()[e];
            if (tri.region == kF) {
                CHECK(kin.gradient(e).x == 0.0);
                CHECK(kin.gradient(e).y == 0.0);
                continue;
            }
            const bool touches = in_f[tri.v[0]] || in_f[tri.v[1]] || in_f[tri.v[2]];
            const Vec2 d{kin.gradient(e).x - u.gradient(e).x, kin.gradient(e).y - u.gradient(e).y};
            if (!touches) CHECK(dot(d, d) == 0.0);
            nn += m->area(e) * dot(d, d);
        }
        CHECK_THAT(t.nu * t.nu, WithinRel(nn, 1e-12));
        CHECK(t.nu_star > 0.0);
    }
    SECTION("Dirichlet void without a potential is rejected") {
        try {
            cre_negative(FeatureKind::NegativeDirichlet, u, z, kF, 1.0, 1e-5);
            FAIL("expected MissingDirichletValue");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MissingDirichletValue);
        }
        CHECK_THROWS_AS(cre_negative(FeatureKind::Internal, u, z, kF, 1.0, 1e-5), Error);
    }
}

TEST_CASE("bound combination and effectivity", "[estimator]") {
    const auto b = combine_bounds(100, 5, 2, 3);
    CHECK(b.lower == 99.0);
    CHECK(b.upper == 111.0);
    const auto c = combine_bounds(100, 5, 0, 3);
    CHECK(c.lower == 105.0);
    CHECK(c.upper == 105.0);
    try {
        combine_bounds(1, 0, -1, 1);
        FAIL("expected NegativeNorm");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NegativeNorm);
    }

    CHECK(effectivity(5.0, {3.0, 3.0}) == 1.0);
    CHECK_THAT(effectivity(293213, {293032.95, 293408.05}), WithinAbs(1.0012793, 1e-7));
    CHECK_THAT(effectivity(243680, {-915189, 1402538}), WithinAbs(10.51, 5e-3));
    try {
        effectivity(0.0, {1, 2});
        FAIL("expected ZeroQoI");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroQoI);
    }
}
