#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "vexgame/simplex.hpp"

using namespace vexgame;

namespace {

int binom2(int k) { return k * (k - 1) / 2; }

}  // namespace

TEST_CASE("node counts match the closed formulas") {
    CHECK(make_grid(2, 1).node_count() == 2);
    CHECK(make_grid(2, 4).node_count() == 5);
    CHECK(make_grid(2, 400).node_count() == 401);
    CHECK(make_grid(3, 1).node_count() == 3);
    CHECK(make_grid(3, 2).node_count() == 6);
    CHECK(make_grid(3, 60).node_count() == binom2(62));

    // brute enumeration of lattice points with a+b+c = m
    for (int m : {1, 2, 3, 7, 12}) {
        int count = 0;
        for (int a = 0; a <= m; ++a)
            for (int b = 0; a + b <= m; ++b) ++count;
        CHECK(make_grid(3, m).node_count() == count);
    }
}

TEST_CASE("grid construction rejects bad arguments") {
    CHECK_THROWS_WITH(make_grid(4, 10), Catch::Matchers::ContainsSubstring("unsupported-dimension"));
    CHECK_THROWS_WITH(make_grid(1, 10), Catch::Matchers::ContainsSubstring("unsupported-dimension"));
    CHECK_THROWS_WITH(make_grid(2, 0), Catch::Matchers::ContainsSubstring("resolution-too-small"));
    CHECK_THROWS_WITH(make_grid(3, -3), Catch::Matchers::ContainsSubstring("resolution-too-small"));
}

TEST_CASE("m = 1 grids consist of exactly the unit vertices") {
    for (int dim : {2, 3}) {
        SimplexGrid g = make_grid(dim, 1);
        REQUIRE(g.node_count() == dim);
        std::set<int> states;
        for (int id = 0; id < g.node_count(); ++id) {
            int s = g.vertex_state(id);
            REQUIRE(s >= 0);
            states.insert(s);
            CHECK(g.vertex_id(s) == id);
            SimplexPoint p = g.point(id);
            for (int i = 0; i < dim; ++i)
                CHECK(p[i] == (i == s ? 1.0 : 0.0));
        }
        CHECK(int(states.size()) == dim);
    }
}

TEST_CASE("three-state m = 2 lattice is complete and ordered") {
    SimplexGrid g = make_grid(3, 2);
    std::vector<std::array<int, 3>> expect = {{0, 0, 2}, {0, 1, 1}, {0, 2, 0},
                                              {1, 0, 1}, {1, 1, 0}, {2, 0, 0}};
    REQUIRE(g.node_count() == int(expect.size()));
    for (int id = 0; id < g.node_count(); ++id) {
        CHECK(g.lattice(id) == expect[std::size_t(id)]);
        CHECK(g.id_of(expect[std::size_t(id)][0], expect[std::size_t(id)][1]) == id);
    }
    // ids are ordered lexicographically by (a, b)
    for (int id = 1; id < g.node_count(); ++id) {
        const auto& prev = g.lattice(id - 1);
        const auto& cur = g.lattice(id);
        CHECK((cur[0] > prev[0] || (cur[0] == prev[0] && cur[1] > prev[1])));
    }
}

TEST_CASE("lattice coordinates and points are consistent") {
    for (int m : {5, 9}) {
        SimplexGrid g2 = make_grid(2, m);
        for (int id = 0; id < g2.node_count(); ++id) {
            const auto& a = g2.lattice(id);
            CHECK(a[0] + a[1] == m);
            SimplexPoint p = g2.point(id);
            CHECK(p[0] == Catch::Approx(double(a[0]) / m).margin(1e-15));
            CHECK(p[1] == Catch::Approx(double(a[1]) / m).margin(1e-15));
        }
        SimplexGrid g3 = make_grid(3, m);
        for (int id = 0; id < g3.node_count(); ++id) {
            const auto& a = g3.lattice(id);
            CHECK(a[0] + a[1] + a[2] == m);
            CHECK(g3.id_of(a[0], a[1]) == id);
        }
    }
    CHECK(make_grid(3, 4).id_of(5, 0) == -1);
    CHECK(make_grid(3, 4).id_of(2, 3) == -1);
    CHECK(make_grid(2, 4).id_of(-1) == -1);
}

TEST_CASE("point validation catches malformed inputs") {
    CHECK_NOTHROW(validate_point(SimplexPoint(0.25, 0.75)));
    CHECK_NOTHROW(validate_point(SimplexPoint(0.2, 0.3, 0.5)));
    CHECK_THROWS_WITH(validate_point(SimplexPoint(0.5, 0.6)),
                      Catch::Matchers::ContainsSubstring("invalid-simplex-point"));
    CHECK_THROWS_WITH(validate_point(SimplexPoint(-0.1, 1.1)),
                      Catch::Matchers::ContainsSubstring("invalid-simplex-point"));
    SimplexPoint bad;
    bad.dim = 5;
    CHECK_THROWS_WITH(validate_point(bad),
                      Catch::Matchers::ContainsSubstring("unsupported-dimension"));
}

TEST_CASE("snap picks the nearest node and breaks ties by lowest id") {
    SimplexGrid g = make_grid(2, 2);
    CHECK(g.snap(SimplexPoint(0.0, 1.0)) == 0);
    CHECK(g.snap(SimplexPoint(0.5, 0.5)) == 1);
    CHECK(g.snap(SimplexPoint(0.6, 0.4)) == 1);
    CHECK(g.snap(SimplexPoint(0.25, 0.75)) == 0);  // exact tie, lowest id wins

    SimplexGrid g3 = make_grid(3, 3);
    CHECK(g3.snap(SimplexPoint(1.0, 0.0, 0.0)) == g3.vertex_id(0));
    int id = g3.snap(SimplexPoint(0.3, 0.35, 0.35));
    CHECK(linf_distance(g3.point(id), SimplexPoint(0.3, 0.35, 0.35)) <= 0.5 / 3 + 1e-12);

    CHECK_THROWS_WITH(g.snap(SimplexPoint(0.2, 0.3, 0.5)),
                      Catch::Matchers::ContainsSubstring("dimension-mismatch"));
}

TEST_CASE("snapping every grid point returns that point") {
    for (int dim : {2, 3}) {
        SimplexGrid g = make_grid(dim, 7);
        for (int id = 0; id < g.node_count(); ++id) CHECK(g.snap(g.point(id)) == id);
    }
}

TEST_CASE("interpolation reproduces affine functions exactly") {
    auto affine2 = [](const SimplexPoint& p) { return 2.0 * p[0] - 3.0 * p[1] + 0.7; };
    SimplexGrid g2 = make_grid(2, 8);
    std::vector<double> f2;
    for (int id = 0; id < g2.node_count(); ++id) f2.push_back(affine2(g2.point(id)));
    for (double x : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        SimplexPoint p(x, 1.0 - x);
        CHECK(g2.interpolate(f2, p) == Catch::Approx(affine2(p)).margin(1e-12));
    }

    auto affine3 = [](const SimplexPoint& p) {
        return 1.5 * p[0] - 0.25 * p[1] + 4.0 * p[2];
    };
    SimplexGrid g3 = make_grid(3, 6);
    std::vector<double> f3;
    for (int id = 0; id < g3.node_count(); ++id) f3.push_back(affine3(g3.point(id)));
    // includes points in both lattice triangle orientations
    for (auto [x, y] : {std::pair{0.1, 0.2}, {0.4, 0.45}, {0.05, 0.9}, {0.33, 0.33},
                        {1.0, 0.0}, {0.0, 0.0}}) {
        SimplexPoint p(x, y, 1.0 - x - y);
        CHECK(g3.interpolate(f3, p) == Catch::Approx(affine3(p)).margin(1e-12));
    }
}

TEST_CASE("interpolation at grid nodes returns the stored values") {
    SimplexGrid g = make_grid(3, 5);
    std::vector<double> f;
    for (int id = 0; id < g.node_count(); ++id) f.push_back(std::sin(id * 0.7));
    for (int id = 0; id < g.node_count(); ++id)
        CHECK(g.interpolate(f, g.point(id)) == Catch::Approx(f[std::size_t(id)]).margin(1e-12));
}

TEST_CASE("vertex helpers agree across dimensions") {
    for (int dim : {2, 3}) {
        SimplexGrid g = make_grid(dim, 6);
        for (int s = 0; s < dim; ++s) {
            int id = g.vertex_id(s);
            CHECK(g.vertex_state(id) == s);
            CHECK(linf_distance(g.point(id), vertex_point(dim, s)) == 0.0);
        }
        // non-vertex nodes report -1
        int interior = g.snap(dim == 2 ? SimplexPoint(0.5, 0.5)
                                       : SimplexPoint(1.0 / 3, 1.0 / 3, 1.0 / 3));
        CHECK(g.vertex_state(interior) == -1);
    }
}
