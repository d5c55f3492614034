#include "oracles.hpp"

#include "trifem/mesh.hpp"
#include "trifem/mesh_io.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace trifem;

namespace {

const std::filesystem::path data_dir = TRIFEM_TEST_DATA;

Mesh unit_square(int n) {
  const std::array<int, 2> div{n, n};
  return generate_structured(BoxShape{make_vec({0, 0}), make_vec({1, 1})}, div);
}

}  // namespace

TEST_CASE("structured box counts") {
  const Mesh m1 = unit_square(1);
  CHECK(m1.num_nodes() == 4);
  CHECK(m1.num_elements() == 2);
  CHECK(m1.facets().size() == 4);
  for (int n : {2, 5, 8}) {
    const Mesh m = unit_square(n);
    CHECK(m.num_nodes() == std::size_t((n + 1) * (n + 1)));
    CHECK(m.num_elements() == std::size_t(2 * n * n));
    CHECK(m.facets().size() == std::size_t(4 * n));
    CHECK(m.boundary_tags() == std::vector<int>{1, 2, 3, 4});
    double vol = 0;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      CHECK(m.signed_volume(e) > 0);
      vol += m.volume(e);
    }
    CHECK(vol == doctest::Approx(1.0).epsilon(1e-14));
  }
  const std::array<int, 3> d3{2, 3, 1};
  const Mesh c = generate_structured(BoxShape{make_vec({0, 0, 0}), make_vec({1, 2, 3})}, d3);
  CHECK(c.dim() == 3);
  CHECK(c.num_nodes() == 3 * 4 * 2);
  CHECK(c.num_elements() == 6 * 6);
  double vol = 0;
  for (std::size_t e = 0; e < c.num_elements(); ++e) vol += c.volume(e);
  CHECK(vol == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(c.boundary_tags() == std::vector<int>{1, 2, 3, 4, 5, 6});

  const std::array<int, 2> div{2, 2};
  CHECK(oracle::error_code([&] {
          generate_structured(BoxShape{make_vec({0, 0}), make_vec({1, 0})}, div);
        }) == ErrorCode::DegenerateShape);
  const std::array<int, 2> zero{0, 2};
  CHECK(oracle::error_code([&] {
          generate_structured(BoxShape{make_vec({0, 0}), make_vec({1, 1})}, zero);
        }).has_value());
}

TEST_CASE("annulus orientation") {
  const std::array<int, 2> div{8, 2};
  const Mesh m = generate_structured(AnnulusShape{make_vec({0, 0}), 1.0, 2.0}, div);
  CHECK(m.num_elements() == 32);
  for (std::size_t e = 0; e < m.num_elements(); ++e) CHECK(m.signed_volume(e) > 0);
  for (int n : m.boundary_nodes(annulus_tag::inner)) CHECK(m.node(n).norm() == doctest::Approx(1.0));
  for (int n : m.boundary_nodes(annulus_tag::outer)) CHECK(m.node(n).norm() == doctest::Approx(2.0));
}

TEST_CASE("map_mesh") {
  const Mesh m = unit_square(4);
  const Mesh same = map_mesh(m, ChartMap::identity(2));
  CHECK(same.nodes() == m.nodes());

  const Mesh r = map_mesh(m, ChartMap::axis_scaling(make_vec({2, 1})));
  CHECK(r.num_nodes() == m.num_nodes());
  CHECK(r.num_elements() == m.num_elements());
  double xmax = 0, ymax = 0;
  for (const auto& p : r.nodes()) {
    xmax = std::max(xmax, p(0));
    ymax = std::max(ymax, p(1));
  }
  CHECK(xmax == 2.0);
  CHECK(ymax == 1.0);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    CHECK(r.element(e).region == m.element(e).region);
    CHECK(r.element(e).nodes == m.element(e).nodes);
  }
  CHECK(r.boundary_tags() == m.boundary_tags());

  // Affine maps scale volumes by |det A|.
  std::mt19937_64 rng(11);
  for (int k = 0; k < 10; ++k) {
    Mat A = oracle::random_invertible(rng, 2);
    if (A.determinant() < 0) A.col(0) *= -1;
    const Mesh a = map_mesh(m, ChartMap::affine(A, oracle::random_vec(rng, 2)));
    for (std::size_t e = 0; e < m.num_elements(); ++e)
      CHECK(std::abs(a.volume(e) / m.volume(e) - std::abs(A.determinant())) <=
            1e-12 * std::abs(A.determinant()));
  }
  // Reflections are allowed; orientation is normalized.
  const Mesh f = map_mesh(m, ChartMap::axis_scaling(make_vec({-1, 1})));
  for (std::size_t e = 0; e < f.num_elements(); ++e) CHECK(f.signed_volume(e) > 0);

  // Folding map.
  const Mesh ann = generate_structured(AnnulusShape{make_vec({0, 0}), 1.0, 10.0},
                                       std::array<int, 2>{16, 6});
  const Mesh k = map_mesh(ann, ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0));
  for (const auto& p : k.nodes()) CHECK(p.norm() <= 1.9 + 1e-12);
  for (int n : k.boundary_nodes(annulus_tag::outer)) CHECK(k.node(n).norm() == doctest::Approx(1.9));

  CHECK(oracle::error_code([&] {
          map_mesh(m, ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0));
        }) == ErrorCode::PointOutsideDomain);
  std::vector<Point> folded = m.nodes();
  // Push one interior node across its neighbours.
  const int interior = 6;
  folded[interior] = make_vec({0.9, 0.9});
  CHECK(oracle::error_code([&] { with_nodes(m, folded); }) == ErrorCode::DegenerateElement);
}

TEST_CASE("mapped edges are straight approximations") {
  const ChartMap p = ChartMap::polar_stretch(make_vec({0, 0}), 2.0, 1.0);
  const Point a = make_vec({1.0, 0.2}), b = make_vec({0.3, 1.1});
  const Point mid_mapped = 0.5 * (p.forward(a) + p.forward(b));
  const Point mapped_mid = p.forward(0.5 * (a + b));
  CHECK((mid_mapped - mapped_mid).norm() > 1e-3);
  const ChartMap aff = ChartMap::affine(make_mat({{2, 1}, {0, 1}}), make_vec({1, 1}));
  CHECK((0.5 * (aff.forward(a) + aff.forward(b)) - aff.forward(0.5 * (a + b))).norm() < 1e-15);
}

TEST_CASE("quality") {
  const std::vector<Point> eq{make_vec({0, 0}), make_vec({1, 0}), make_vec({0.5, std::sqrt(3.0) / 2})};
  CHECK(aspect_ratio(eq) == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<Point> tet{make_vec({1, 1, 1}), make_vec({1, -1, -1}), make_vec({-1, 1, -1}),
                               make_vec({-1, -1, 1})};
  CHECK(aspect_ratio(tet) == doctest::Approx(1.0).epsilon(1e-14));

  const Mesh m = unit_square(4);
  const QualityReport q = quality(m);
  CHECK(q.aspect_ratio.size() == m.num_elements());
  CHECK(q.max - q.min < 1e-12);
  CHECK(q.min >= 1.0);
  // Right isosceles triangle: R = sqrt(2)/2 h, r = (2 - sqrt 2)/2 h.
  const double expected = (std::sqrt(2.0) / 2) / (2 * (2 - std::sqrt(2.0)) / 2);
  CHECK(q.min == doctest::Approx(expected).epsilon(1e-12));

  const QualityReport s = quality(map_mesh(m, ChartMap::axis_scaling(make_vec({100, 1}))));
  const double growth = s.max / q.max;
  CHECK(growth > 30);
  CHECK(growth < 300);
  CHECK(s.aspect_ratio[s.worst_element] == s.max);
}

TEST_CASE("msh roundtrip") {
  const Mesh m = map_mesh(unit_square(3), ChartMap::rotation(0.3));
  std::stringstream ss;
  write_msh(m, ss);
  const Mesh r = read_msh(ss);
  CHECK(r.num_nodes() == m.num_nodes());
  CHECK(r.nodes() == m.nodes());
  REQUIRE(r.num_elements() == m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    CHECK(r.element(e).nodes == m.element(e).nodes);
    CHECK(r.element(e).region == m.element(e).region);
  }
  REQUIRE(r.facets().size() == m.facets().size());
  for (std::size_t f = 0; f < m.facets().size(); ++f) {
    CHECK(r.facets()[f].nodes == m.facets()[f].nodes);
    CHECK(r.facets()[f].tag == m.facets()[f].tag);
  }

  const Mesh c = generate_structured(BoxShape{make_vec({0, 0, 0}), make_vec({1, 1, 1})},
                                     std::array<int, 3>{2, 2, 2});
  std::stringstream s3;
  write_msh(c, s3);
  const Mesh c2 = read_msh(s3);
  CHECK(c2.dim() == 3);
  CHECK(c2.nodes() == c.nodes());
  CHECK(c2.facets().size() == c.facets().size());
}

TEST_CASE("msh fixture and errors") {
  const Mesh m = read_msh(data_dir / "two_triangles.msh");
  CHECK(m.num_nodes() == 4);
  CHECK(m.num_elements() == 2);
  CHECK(m.facets().size() == 2);
  CHECK(m.region_tags() == std::vector<int>{7});
  CHECK(m.find_boundary_tag("left") == 1);
  CHECK(m.find_boundary_tag("2") == 2);
  CHECK_FALSE(m.find_boundary_tag("top").has_value());

  std::stringstream bad(
      "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 0 0\n$EndNodes\n"
      "$Elements\n1\n1 9 2 0 1 1 1 1 1 1 1\n$EndElements\n");
  try {
    read_msh(bad);
    FAIL("expected UnsupportedVersion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedVersion);
    CHECK(std::string(e.what()).find("type 9") != std::string::npos);
  }
  std::stringstream v4("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
  CHECK(oracle::error_code([&] { read_msh(v4); }) == ErrorCode::UnsupportedVersion);
  std::stringstream trunc("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n");
  try {
    read_msh(trunc);
    FAIL("expected MalformedFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedFile);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
  CHECK(oracle::error_code([&] { read_msh(data_dir / "missing.msh"); }) == ErrorCode::IoError);
}

TEST_CASE("vtk output") {
  const Mesh m = unit_square(2);
  std::vector<double> u(m.num_nodes());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = m.node(i)(0);
  std::vector<double> E(2 * m.num_elements(), 1.0);
  const std::vector<VtkField> nodal{{"u", VtkField::Location::Node, 1, u}};
  std::stringstream a;
  write_vtk(m, nodal, a);
  const std::string sa = a.str();
  CHECK(sa.find("POINT_DATA 9") != std::string::npos);
  CHECK(sa.find("SCALARS u double 1") != std::string::npos);
  CHECK(sa.find("CELL_DATA") == std::string::npos);

  const std::vector<VtkField> cell{{"E", VtkField::Location::Cell, 2, E}};
  std::stringstream b;
  write_vtk(m, cell, b);
  CHECK(b.str().find("CELL_DATA 8") != std::string::npos);
  CHECK(b.str().find("VECTORS E double") != std::string::npos);

  std::stringstream c;
  write_vtk(m, std::span<const VtkField>{}, c);
  CHECK(c.str().find("CELL_TYPES 8") != std::string::npos);
  CHECK(c.str().find("_DATA") == std::string::npos);

  const std::vector<VtkField> wrong{{"u", VtkField::Location::Node, 1, {1.0, 2.0}}};
  std::stringstream d;
  CHECK(oracle::error_code([&] { write_vtk(m, wrong, d); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("retag and jitter") {
  const Mesh m = unit_square(4);
  const Mesh t = retag_regions(m, [](const Point& c, int) { return c(0) < 0.5 ? 1 : 2; });
  CHECK(t.region_tags() == std::vector<int>{1, 2});
  const Mesh j1 = jitter_interior_nodes(m, 0.05, 3), j2 = jitter_interior_nodes(m, 0.05, 3);
  CHECK(j1.nodes() == j2.nodes());
  std::size_t moved = 0;
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    if (j1.node(i) != m.node(i)) {
      ++moved;
      CHECK((j1.node(i) - m.node(i)).lpNorm<Eigen::Infinity>() <= 0.05);
    }
  CHECK(moved == 9);
  for (int tag : m.boundary_tags())
    for (int n : m.boundary_nodes(tag)) CHECK(j1.node(n) == m.node(n));
}
