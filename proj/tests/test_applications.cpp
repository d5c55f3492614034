#include "oracles.hpp"

#include "trifem/applications.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace trifem;

namespace {

OpenBoundarySpec unit_shell() {
  OpenBoundarySpec ob;
  ob.center = make_vec({0, 0});
  ob.inner = 1.0;
  ob.outer = 2.0;
  ob.interior_radius = 1.0;
  return ob;
}

BVPSpec strip(double length, int nx, int ny) {
  Mesh m = generate_structured(BoxShape{make_vec({0, 0}), make_vec({length, 1})}, std::array<int, 2>{nx, ny});
  m = retag_regions(m, [length](const Point& c, int) { return c(0) < 0.4 * length ? 1 : 2; });
  m = jitter_interior_nodes(m, 0.2 / ny, 3);
  MaterialField e(2);
  e.scalar(1, 1.0).scalar(2, 5.0);
  return {m, standard_triplet(2, e),
          {DirichletCondition::constant(box_tag::xmin, 0.0),
           DirichletCondition::function(box_tag::xmax, [](const Point& x) { return 1.0 + x(1); })}};
}

SolverConfig tight() {
  SolverConfig c;
  c.tol = 1e-13;
  return c;
}

}  // namespace

TEST_CASE("open boundary triplet") {
  MaterialField e(2);
  e.scalar(1, 2.0).scalar(2, 2.0);
  const Triplet base = standard_triplet(2, e);
  const Triplet t = open_boundary_triplet(base, unit_shell());
  CHECK(t.chart.forward(make_vec({4, 0}))(0) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(t.chart.forward(make_vec({0, 4})).norm() == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(t.chart.forward(make_vec({0.5, 0.2})) == make_vec({0.5, 0.2}));
  // Interior unchanged, shell anisotropic.
  CHECK(t.material(1, make_vec({0.3, 0.4})) == base.material(1, make_vec({0.3, 0.4})));
  const Mat shell = t.material(2, make_vec({1.5, 0}));
  CHECK(std::abs(shell(0, 0) - shell(1, 1)) > 0.1);
  CHECK(is_spd(shell));

  OpenBoundarySpec big = unit_shell();
  big.interior_radius = 1.5;
  CHECK(oracle::error_code([&] { open_boundary_triplet(base, big); }) == ErrorCode::RegionNotContained);
  OpenBoundarySpec radii = unit_shell();
  radii.outer = 0.5;
  CHECK(oracle::error_code([&] { open_boundary_triplet(base, radii); }) == ErrorCode::InvalidArgument);
  Triplet curved = base;
  curved.metric = MetricField::constant(make_mat({{2, 0}, {0, 1}}));
  CHECK(oracle::error_code([&] { open_boundary_triplet(curved, unit_shell()); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("exterior dipole") {
  const OpenBoundarySpec ob = unit_shell();
  const std::array<int, 2> div{64, 16};
  const BVPSpec spec = dipole_problem(ob, 1.0, div);
  const Solution s = solve_bvp(spec);
  const auto exact = [&](const Point& y) { return dipole_potential_mapped(ob, y); };
  const L2Error err = l2_error(spec.mesh, s.potential, exact);
  CHECK(err.relative < 0.02);
  // Nodes at mapped radius R correspond to r = 1 / (2 - R).
  for (std::size_t i = 0; i < spec.mesh.num_nodes(); ++i) {
    const Point& y = spec.mesh.node(i);
    if (y.norm() > 1.999) continue;
    const double r = 1.0 / (2.0 - y.norm());
    CHECK(exact(y) == doctest::Approx(y(0) / y.norm() / r).epsilon(1e-12));
  }
}

TEST_CASE("shell energies converge under refinement") {
  // Exact exterior energy of cos(theta)/r outside r = a is 2 pi / (2 a^2).
  const OpenBoundarySpec ob = unit_shell();
  for (double hole : {1.0, 0.5}) {
    const double exact = std::numbers::pi / (hole * hole);
    double previous = 0;
    for (int level = 0; level < 3; ++level) {
      const int k = 1 << level;
      const std::array<int, 2> div{24 * k, 6 * k};
      const Solution s = solve_bvp(dipole_problem(ob, hole, div));
      const double diff = std::abs(s.energy - exact);
      if (level > 0) {
        INFO("hole " << hole << " level " << level);
        CHECK(previous / diff >= 1.8);
      }
      previous = diff;
    }
  }
}

TEST_CASE("interface potential converges") {
  const OpenBoundarySpec ob = unit_shell();
  double previous = 0;
  for (int level = 0; level < 3; ++level) {
    const int k = 1 << level;
    const std::array<int, 2> div{24 * k, 6 * k};
    // Uniform rings keep a node circle on the interface.
    const BVPSpec spec = dipole_problem(ob, 0.5, div, 1.0);
    const Solution s = solve_bvp(spec);
    double worst = 0;
    int count = 0;
    for (std::size_t i = 0; i < spec.mesh.num_nodes(); ++i) {
      const Point& y = spec.mesh.node(i);
      if (std::abs(y.norm() - 1.0) > 1e-9) continue;
      ++count;
      worst = std::max(worst, std::abs(s.potential(i) - dipole_potential(ob.center, y)));
    }
    CHECK(count == 24 * k);
    if (level > 0) CHECK(previous / worst >= 2.0);
    previous = worst;
  }
}

TEST_CASE("reparameterize with a fixed metric") {
  const BVPSpec f = strip(4.0, 24, 8);
  const Solution sf = solve_bvp(f, tight());
  const AssembledSystem af = assemble(f);

  const BVPSpec same = reparameterize_fixed_metric(f, ChartMap::identity(2));
  CHECK(same.mesh.nodes() == f.mesh.nodes());
  CHECK(compare_matrices(assemble(same).stiffness, af.stiffness).frobenius_ratio == 0.0);

  const ChartMap q = ChartMap::rotation(0.9);
  const BVPSpec r = reparameterize_fixed_metric(f, q);
  CHECK(oracle::rel_diff(r.triplet.material(2, make_vec({0.2, 0.3})), 5.0 * Mat::Identity(2, 2)) < 1e-15);
  for (std::size_t i = 0; i < f.mesh.num_nodes(); ++i)
    CHECK((r.mesh.node(i) - q.forward(f.mesh.node(i))).norm() < 1e-15);
  const Solution sr = solve_bvp(r, tight());
  CHECK(sr.energy == doctest::Approx(sf.energy).epsilon(1e-8));
  Eigen::Index imax_f, imax_r, imin_f, imin_r;
  sf.potential.maxCoeff(&imax_f);
  sr.potential.maxCoeff(&imax_r);
  sf.potential.minCoeff(&imin_f);
  sr.potential.minCoeff(&imin_r);
  CHECK(imax_f == imax_r);
  CHECK(sf.potential(imin_f) == doctest::Approx(sr.potential(imin_r)).epsilon(1e-10));

  for (const ChartMap& g : {ChartMap::affine(make_mat({{2, 0.5}, {-0.3, 0.7}}), make_vec({1, 2})),
                            ChartMap::axis_scaling(make_vec({0.25, 3}))}) {
    const Solution sg = solve_bvp(reparameterize_fixed_metric(f, g), tight());
    CHECK(sg.energy == doctest::Approx(sf.energy).epsilon(1e-8));
    CHECK((sg.potential - sf.potential).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("elongated domain compressed by a chart") {
  const BVPSpec f = strip(1000.0, 40, 4);
  const ChartMap g = ChartMap::axis_scaling(make_vec({1e-3, 1}));
  const BVPSpec h = reparameterize_fixed_metric(f, g);
  const Solution sf = solve_bvp(f, tight()), sg = solve_bvp(h, tight());
  const Mat J = make_mat({{1e-3, 0}, {0, 1}});
  const Mat I = Mat::Identity(2, 2);
  double worst = 0, scale = 0;
  for (std::size_t e = 0; e < f.mesh.num_elements(); ++e) {
    worst = std::max(worst, (transform_field(sg.field[e], I, I, J) - sf.field[e]).lpNorm<Eigen::Infinity>());
    scale = std::max(scale, sf.field[e].lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-8 * scale);
  CHECK(sg.energy == doctest::Approx(sf.energy).epsilon(1e-8));
}

TEST_CASE("motion sweep with identity steps") {
  const std::vector<double> gaps{1.0, 1.0, 1.0};
  MotionSweep ms = parallel_plate_sweep(4, 4, gaps, 50.0);
  ms.steps = {ChartMap::identity(2), ChartMap::identity(2), ChartMap::identity(2)};
  ms.keep_matrices = true;
  const auto steps = motion_sweep(ms);
  const SparseSymMatrix base = assemble(ms.base).stiffness;
  for (const auto& s : steps) {
    CHECK(s.changed_entries == 0);
    CHECK(s.changed_elements == 0);
    CHECK(s.stiffness->values() == base.values());
  }
  CHECK(steps[1].solution.iterations <= 1);
}

TEST_CASE("parallel plate sweep") {
  const std::vector<double> gaps{1.0, 1.25, 1.5, 2.0, 1.5};
  MotionSweep ms = parallel_plate_sweep(6, 6, gaps, 1e3);
  ms.keep_matrices = true;
  ms.measure_cold = true;
  const auto steps = motion_sweep(ms);
  REQUIRE(steps.size() == gaps.size());
  // Dof pairs sharing a gap element.
  std::set<std::pair<int, int>> pairs;
  for (const auto& el : ms.base.mesh.elements())
    if (el.region == 1)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) pairs.insert({el.nodes[a], el.nodes[b]});
  std::size_t gap_elements = 0;
  for (const auto& el : ms.base.mesh.elements()) gap_elements += el.region == 1;

  for (std::size_t k = 0; k < steps.size(); ++k) {
    INFO("step " << k);
    const double exact = parallel_plate_energy(gaps[k], 1e3);
    CHECK(std::abs(steps[k].solution.energy - exact) <= 0.01 * exact);
    const SparseSymMatrix full = motion_stiffness(ms, ms.steps[k]);
    CHECK(steps[k].stiffness->values() == full.values());
    if (k > 0) {
      CHECK(steps[k].changed_entries == pairs.size());
      CHECK(steps[k].changed_elements == gap_elements);
      CHECK(*steps[k].cold_iterations >= steps[k].solution.iterations);
    }
  }
  CHECK(steps[0].changed_entries == 0);

  // The fixture reduces to series capacitors.
  CHECK(parallel_plate_energy(1.0, 1.0) == 0.5);
  CHECK(parallel_plate_energy(2.0, 1e300) == doctest::Approx(0.5));
}

TEST_CASE("metric and material modes agree") {
  const std::vector<double> gaps{1.3, 0.8};
  MotionSweep ms = parallel_plate_sweep(5, 5, gaps, 4.0);
  ms.steps.push_back(ChartMap::affine(make_mat({{1.2, 0.3}, {0.1, 0.9}}), make_vec({0.1, 0})));
  for (const auto& step : ms.steps) {
    ms.mode = MotionMode::MetricChange;
    const SparseSymMatrix a = motion_stiffness(ms, step);
    ms.mode = MotionMode::MaterialChange;
    const SparseSymMatrix b = motion_stiffness(ms, step);
    CHECK(compare_matrices(a, b).frobenius_ratio <= 1e-12);
  }
  CHECK(parse_motion_mode("material") == MotionMode::MaterialChange);
  CHECK(to_string(MotionMode::MetricChange) == "metric");
  CHECK(oracle::error_code([] { parse_motion_mode("both"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("motion errors") {
  const std::vector<double> gaps{1.0};
  MotionSweep ms = parallel_plate_sweep(3, 3, gaps, 4.0);
  ms.steps = {ChartMap::affine(make_mat({{1, 0}, {0, -1}}), make_vec({0, 1}))};
  CHECK(oracle::error_code([&] { motion_sweep(ms); }) == ErrorCode::TopologyChange);
  CHECK(oracle::error_code([] { ChartMap::affine(make_mat({{1, 0}, {0, 0}}), make_vec({0, 0})); }) ==
        ErrorCode::SingularJacobian);
  ms.moving_region = 9;
  CHECK(oracle::error_code([&] { motion_sweep(ms); }) == ErrorCode::InvalidSpec);
  CHECK(oracle::error_code([] { parallel_plate_sweep(2, 2, std::vector<double>{-1.0}, 1.0); }) ==
        ErrorCode::InvalidArgument);
}
