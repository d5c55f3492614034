#include "oracles.hpp"

#include "trifem/atlas.hpp"

#include <doctest.h>

using namespace trifem;

namespace {

Mesh box(double x0, double x1, int n, int region) {
  const Mesh m = generate_structured(BoxShape{make_vec({x0, 0}), make_vec({x1, 1})}, std::array<int, 2>{n, n});
  return retag_regions(m, [region](const Point&, int) { return region; });
}

// Two unit squares side by side in the universal chart, region 2 drawn in
// the coordinates of `chart2`.
Atlas two_squares(int n, const ChartMap& to_universal2) {
  Atlas a;
  a.regions.push_back({1, ChartMap::identity(2), box(0, 1, n, 1)});
  a.regions.push_back(region_from_universal(2, to_universal2, box(1, 2, n, 2)));
  a.interfaces.push_back({1, box_tag::xmax, 2, box_tag::xmin});
  return a;
}

}  // namespace

TEST_CASE("global index counts") {
  for (int n : {1, 4, 7}) {
    const std::size_t expected = 2 * (n + 1) * (n + 1) - (n + 1);
    const Atlas a = two_squares(n, ChartMap::identity(2));
    const GlobalIndex g = build_global_index(a);
    CHECK(g.num_dofs == expected);

    // Both meshes drawn at the origin; matching happens in the universal chart.
    Atlas t;
    t.regions.push_back({1, ChartMap::identity(2), box(0, 1, n, 1)});
    t.regions.push_back({2, ChartMap::translation(make_vec({1, 0})), box(0, 1, n, 2)});
    t.interfaces.push_back({1, box_tag::xmax, 2, box_tag::xmin});
    const GlobalIndex gt = build_global_index(t);
    CHECK(gt.num_dofs == expected);
    CHECK(gt.dof == g.dof);
  }
  const Atlas a = two_squares(5, ChartMap::rotation(0.3));
  const GlobalIndex g = build_global_index(a);
  // Region 1 keeps its own numbering; every region 2 interface node reuses one.
  for (std::size_t i = 0; i < g.dof[0].size(); ++i) CHECK(g.dof[0][i] == int(i));
  const auto shared = a.regions[1].mesh.boundary_nodes(box_tag::xmin);
  for (int n : shared) CHECK(g.dof[1][n] < int(g.dof[0].size()));
  std::vector<int> all;
  for (const auto& r : g.dof) all.insert(all.end(), r.begin(), r.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  CHECK(all.size() == g.num_dofs);
  CHECK(build_global_index(a).dof == g.dof);
}

TEST_CASE("interface mismatch") {
  Atlas a = two_squares(4, ChartMap::identity(2));
  const double tol = dedup_tolerance(a);
  CHECK(tol == doctest::Approx(1e-9 * std::sqrt(5.0)));
  const int victim = a.regions[1].mesh.boundary_nodes(box_tag::xmin)[2];
  std::vector<Point> nodes = a.regions[1].mesh.nodes();
  nodes[victim](0) += 10 * tol;
  a.regions[1].mesh = with_nodes(a.regions[1].mesh, nodes);
  try {
    build_global_index(a);
    FAIL("expected InterfaceMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InterfaceMismatch);
    CHECK(std::string(e.what()).find("node " + std::to_string(victim)) != std::string::npos);
  }
  // Within tolerance is accepted.
  nodes[victim](0) = 1.0 + 0.1 * tol;
  a.regions[1].mesh = with_nodes(a.regions[1].mesh, nodes);
  CHECK_NOTHROW(build_global_index(a));
}

TEST_CASE("map_interface_nodes") {
  const Atlas id = two_squares(3, ChartMap::identity(2));
  for (const auto& [n, p] : map_interface_nodes(id, 1, 2)) CHECK(p == id.regions[0].mesh.node(n));

  // Region 2 coordinates are x doubled relative to the universal chart.
  const Atlas s = two_squares(3, ChartMap::axis_scaling(make_vec({0.5, 1})));
  const auto to2 = map_interface_nodes(s, 1, 2);
  CHECK(to2.size() == 4);
  for (const auto& [n, p] : to2) {
    const Point& x = s.regions[0].mesh.node(n);
    CHECK(p(0) == doctest::Approx(2 * x(0)).epsilon(1e-15));
    CHECK(p(1) == doctest::Approx(x(1)).epsilon(1e-15));
  }

  const Atlas r = two_squares(6, ChartMap::composite({ChartMap::translation(make_vec({0.2, -0.1})),
                                                      ChartMap::polar_stretch(make_vec({0, 0}), 1.5, 1.0)}));
  const auto there = map_interface_nodes(r, 2, 1);
  for (const auto& [n, p] : there) {
    // Back into region 2 coordinates.
    const Point back = r.regions[1].to_universal.inverse(r.regions[0].to_universal.forward(p));
    CHECK((back - r.regions[1].mesh.node(n)).norm() <= 1e-12);
  }
  CHECK(oracle::error_code([&] { map_interface_nodes(r, 1, 1); }) == ErrorCode::NoSuchInterface);
  CHECK(oracle::error_code([&] { map_interface_nodes(r, 1, 9); }).has_value());
}

TEST_CASE("atlas solve matches the merged mesh") {
  const int n = 8;
  MaterialField mat(2);
  mat.scalar(1, 1.0).tensor(2, make_mat({{3, 0.5}, {0.5, 2}}));
  const auto top = [](const Point& y) { return y(1) * y(1) + 1.0; };

  // Single chart on the merged mesh.
  Mesh merged = generate_structured(BoxShape{make_vec({0, 0}), make_vec({2, 1})}, std::array<int, 2>{2 * n, n});
  merged = retag_regions(merged, [](const Point& c, int) { return c(0) < 1 ? 1 : 2; });
  const BVPSpec single{merged, standard_triplet(2, mat),
                       {DirichletCondition::constant(box_tag::xmin, 0.0),
                        DirichletCondition::function(box_tag::xmax, top)}};
  SolverConfig cfg;
  cfg.tol = 1e-13;
  const Solution ref = solve_bvp(single, cfg);

  const Mat A = make_mat({{1.3, 0.4}, {-0.2, 0.9}});
  AtlasProblem p;
  p.atlas = two_squares(n, ChartMap::affine(A, make_vec({0.5, -0.25})));
  p.universal_metric = MetricField::euclidean(2);
  p.universal_material = mat;
  p.chart_metric[2] = MetricField::constant(make_mat({{2, 0.3}, {0.3, 1}}));
  p.dirichlet = {{1, box_tag::xmin, [](const Point&) { return 0.0; }}, {2, box_tag::xmax, top}};
  const AtlasSolution s = solve_atlas(p, cfg);
  CHECK(s.index.num_dofs == merged.num_nodes());
  double worst = 0;
  for (std::size_t r = 0; r < 2; ++r) {
    const auto& reg = p.atlas.regions[r];
    for (std::size_t i = 0; i < reg.mesh.num_nodes(); ++i) {
      const auto v = interpolate(merged, ref.potential, reg.to_universal.forward(reg.mesh.node(i)));
      REQUIRE(v.has_value());
      worst = std::max(worst, std::abs(*v - s.region_potential[r](i)));
    }
  }
  CHECK(worst <= 1e-10);
  CHECK(s.energy == doctest::Approx(ref.energy).epsilon(1e-10));

  // Region triplets satisfy the equivalence transform against the universal one.
  const Triplet t2 = region_triplet(p, 1);
  const Point y = make_vec({1.5, 0.5});
  const Point x = p.atlas.regions[1].to_universal.inverse(y);
  const Mat J = A.inverse();
  const Mat expected = transform_material(mat(2, y), Mat::Identity(2, 2), t2.metric(2, x), J);
  CHECK(oracle::rel_diff(t2.material(2, x), expected) <= 1e-14);
}
