#include "oracles.hpp"

#include "trifem/geometry.hpp"

#include <doctest.h>

#include <numbers>

using namespace trifem;

namespace {

std::vector<ChartMap> all_families(int dim) {
  std::mt19937_64 rng(7);
  std::vector<ChartMap> c;
  c.push_back(ChartMap::identity(dim));
  c.push_back(ChartMap::affine(oracle::random_invertible(rng, dim), oracle::random_vec(rng, dim)));
  c.push_back(ChartMap::axis_scaling(dim == 2 ? make_vec({2.0, 0.5}) : make_vec({2.0, 0.5, 3.0})));
  if (dim == 2) {
    c.push_back(ChartMap::rotation(0.7));
  } else {
    c.push_back(ChartMap::rotation(make_vec({1.0, 2.0, -0.5}), 0.7));
  }
  c.push_back(ChartMap::polar_stretch(Vec::Zero(dim), 1.7, 2.0));
  c.push_back(ChartMap::kelvin_shell(Vec::Zero(dim), 1.0, 2.0));
  c.push_back(ChartMap::composite({c[2], c[3], c[1]}));
  return c;
}

// Samples kept away from the singular center and inside r >= 1.
Point sample_point(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> R(1.2, 6.0);
  Vec d = oracle::random_vec(rng, dim);
  while (d.norm() < 1e-3) d = oracle::random_vec(rng, dim);
  return R(rng) * d.normalized();
}

}  // namespace

TEST_CASE("eval_forward examples") {
  CHECK(eval_forward(ChartMap::identity(2), make_vec({3, 4})) == make_vec({3, 4}));
  CHECK(eval_forward(ChartMap::axis_scaling(make_vec({2, 1})), make_vec({1, 1})) == make_vec({2, 1}));
  const ChartMap k = ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0);
  const Point y = eval_forward(k, make_vec({2, 0}));
  CHECK(y(0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(y(1) == 0.0);
  // Direction preserved off-axis.
  const Point z = eval_forward(k, make_vec({0, -2}));
  CHECK(z(1) == doctest::Approx(-1.5));
  CHECK(std::abs(z(0)) < 1e-15);
}

TEST_CASE("kelvin shell refuses the interior unless told otherwise") {
  const ChartMap k = ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0);
  try {
    eval_forward(k, make_vec({0.5, 0}));
    FAIL("expected PointOutsideDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PointOutsideDomain);
  }
  const ChartMap kin = ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0, true);
  CHECK(eval_forward(kin, make_vec({0.5, 0.1})) == make_vec({0.5, 0.1}));
  CHECK(kin.jacobian(make_vec({0.5, 0.1})) == Mat::Identity(2, 2));
}

TEST_CASE("eval_inverse examples and roundtrips") {
  CHECK(eval_inverse(ChartMap::identity(2), make_vec({3, 4})) == make_vec({3, 4}));
  const ChartMap k = ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0);
  CHECK(eval_inverse(k, make_vec({1.5, 0}))(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(eval_inverse(k, make_vec({2.0, 0})), Error);
  try {
    eval_inverse(k, make_vec({2.5, 0}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PointOutsideImage);
  }

  std::mt19937_64 rng(11);
  const Mat A = oracle::random_invertible(rng, 2);
  const Vec b = oracle::random_vec(rng, 2);
  const ChartMap aff = ChartMap::affine(A, b);
  for (int i = 0; i < 100; ++i) {
    const Point y = oracle::random_vec(rng, 2, -10, 10);
    const Point x = eval_inverse(aff, y);
    CHECK((x - A.inverse() * (y - b)).norm() <= 1e-12 * (1 + x.norm()));
    CHECK((eval_forward(aff, x) - y).norm() <= 1e-12 * (1 + y.norm()));
  }
  for (int dim : {2, 3})
    for (const auto& c : all_families(dim))
      for (int i = 0; i < 50; ++i) {
        const Point x = sample_point(rng, dim);
        CHECK((c.inverse(c.forward(x)) - x).norm() <= 1e-12 * (1 + x.norm()));
      }
}

TEST_CASE("jacobian examples") {
  std::mt19937_64 rng(3);
  const Mat A = oracle::random_invertible(rng, 3);
  const ChartMap aff = ChartMap::affine(A, make_vec({1, 2, 3}));
  CHECK(jacobian(aff, make_vec({5, -1, 2})).entries == A);
  CHECK(jacobian(ChartMap::axis_scaling(make_vec({2, 1})), make_vec({0.3, 0.1})).entries ==
        make_mat({{2, 0}, {0, 1}}));
  const JacobianMatrix J = jacobian(aff, make_vec({1, 1, 1}));
  CHECK(J.at == make_vec({1, 1, 1}));
}

TEST_CASE("analytic jacobians match central differences") {
  std::mt19937_64 rng(42);
  for (int dim : {2, 3})
    for (const auto& c : all_families(dim)) {
      double worst = 0.0;
      for (int i = 0; i < 100; ++i) {
        const Point x = sample_point(rng, dim);
        worst = std::max(worst, oracle::rel_diff(c.jacobian(x), oracle::fd_jacobian(c, x)));
      }
      INFO(c.name(), " dim ", dim);
      CHECK(worst <= 1e-6);
    }
}

TEST_CASE("composite follows the chain rule") {
  std::mt19937_64 rng(5);
  for (int dim : {2, 3}) {
    const auto fams = all_families(dim);
    for (const auto& g : fams)
      for (const auto& f : fams) {
        if (f.name() == "kelvin_shell" && g.name() == "kelvin_shell") continue;
        const ChartMap gf = ChartMap::composite({g, f});
        for (int i = 0; i < 5; ++i) {
          const Point x = sample_point(rng, dim);
          Point fx;
          try {
            fx = f.forward(x);
            g.jacobian(fx);
          } catch (const Error&) {
            continue;  // f(x) left g's domain
          }
          CHECK((gf.forward(x) - g.forward(fx)).norm() <= 1e-12 * (1 + fx.norm()));
          CHECK(oracle::rel_diff(gf.jacobian(x), g.jacobian(fx) * f.jacobian(x)) <= 1e-12);
        }
      }
  }
}

TEST_CASE("kelvin shell boundary behaviour") {
  const ChartMap k = ChartMap::kelvin_shell(make_vec({0, 0}), 1.0, 2.0);
  CHECK(k.forward(make_vec({1, 0}))(0) == doctest::Approx(1.0).epsilon(1e-15));
  double prev = 1.0;
  for (double r = 1.1; r < 1e6; r *= 1.7) {
    const double R = k.forward(make_vec({r, 0}))(0);
    CHECK(R > prev);
    CHECK(R < 2.0);
    CHECK(R == doctest::Approx(2.0 - 1.0 / r));
    prev = R;
  }
  // Generalized radii fix the inner sphere.
  const ChartMap k2 = ChartMap::kelvin_shell(make_vec({1, 1}), 0.5, 3.0);
  CHECK((k2.forward(make_vec({1.5, 1})) - make_vec({1.5, 1})).norm() < 1e-15);
}

TEST_CASE("push_forward and inner_product") {
  const CoordVector v{make_vec({1, 0}), make_vec({0.2, 0.3})};
  CHECK(push_forward({Mat::Identity(2, 2), make_vec({0, 0})}, v).components == make_vec({1, 0}));
  const CoordVector w = push_forward({2 * Mat::Identity(2, 2), make_vec({0, 0})}, v);
  CHECK(w.components == make_vec({2, 0}));
  CHECK(w.base == v.base);
  const CoordVector ones{make_vec({1, 1}), make_vec({0, 0})};
  CHECK(push_forward({make_mat({{3, 0}, {0, 5}}), make_vec({0, 0})}, ones).components ==
        make_vec({3, 5}));
  CHECK_THROWS_AS(push_forward({Mat::Identity(3, 3), make_vec({0, 0, 0})}, v), Error);

  CHECK(inner_product(Mat::Identity(2, 2), make_vec({1, 0}), make_vec({0, 1})) == 0.0);
  CHECK(inner_product(make_mat({{2, 0}, {0, 3}}), make_vec({1, 2}), make_vec({1, 1})) == 8.0);
  try {
    inner_product(Mat::Identity(2, 2), make_vec({1, 0, 0}), make_vec({0, 1}));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }

  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const Mat S = oracle::random_spd(rng, 3);
    const Vec a = oracle::random_vec(rng, 3), b = oracle::random_vec(rng, 3), c = oracle::random_vec(rng, 3);
    CHECK(inner_product(S, a, b) == doctest::Approx(inner_product(S, b, a)).epsilon(1e-14));
    CHECK(inner_product(S, a, a) > 0);
    CHECK(inner_product(S, Vec(2 * a + c), b) ==
          doctest::Approx(2 * inner_product(S, a, b) + inner_product(S, c, b)).epsilon(1e-12));
  }
}

TEST_CASE("check_isometry") {
  std::vector<Point> samples{make_vec({1.5, 0}), make_vec({-2, 3}), make_vec({0.1, -4})};
  CHECK(check_isometry(ChartMap::rotation(1.1), samples));
  CHECK(check_isometry(ChartMap::translation(make_vec({3, 4})), samples));
  CHECK_FALSE(check_isometry(ChartMap::axis_scaling(make_vec({2, 1})), samples));
  CHECK_FALSE(check_isometry(ChartMap::kelvin_shell(make_vec({0, 0}), 1, 2), samples));
  CHECK(check_isometry(ChartMap::axis_scaling(make_vec({2, 1})), {}));
}

TEST_CASE("singular maps are rejected") {
  try {
    ChartMap::axis_scaling(make_vec({0, 1}));
    FAIL("expected SingularJacobian");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularJacobian);
  }
  CHECK_THROWS_AS(ChartMap::affine(make_mat({{1, 2}, {2, 4}}), make_vec({0, 0})), Error);
}

TEST_CASE("domains") {
  const Domain box(BoxDomain{make_vec({0, 0}), make_vec({1, 1})});
  CHECK(box.contains(make_vec({1, 1})));
  CHECK(box.contains(make_vec({1 + 1e-13, 0.5})));
  CHECK_FALSE(box.contains(make_vec({1.01, 0.5})));
  const Domain ann(AnnulusDomain{make_vec({0, 0}), 1.0, std::numeric_limits<double>::infinity()});
  CHECK(ann.contains(make_vec({100, 0})));
  CHECK_FALSE(ann.contains(make_vec({0.5, 0})));
  const Domain half(HalfSpaceDomain{make_vec({1, 0}), 2.0});
  CHECK(half.contains(make_vec({2, -5})));
  CHECK_FALSE(half.contains(make_vec({1.9, 0})));

  const ChartMap restricted(AxisScalingMap{make_vec({2, 1})}, box);
  CHECK_THROWS_AS(restricted.forward(make_vec({2, 0})), Error);
  CHECK_THROWS_AS(restricted.inverse(make_vec({4, 0})), Error);
}

TEST_CASE("metric fields") {
  const MetricField e = MetricField::euclidean(3);
  CHECK(e(7, make_vec({1, 2, 3})) == Mat::Identity(3, 3));
  CHECK(e.is_euclidean(7));
  CHECK(e.is_uniform(7));
  const MetricField c = MetricField::constant(make_mat({{2, 1}, {1, 2}}));
  CHECK_FALSE(c.is_euclidean(1));
  CHECK_THROWS_AS(MetricField::constant(make_mat({{1, 2}, {2, 1}})), Error);
  CHECK_THROWS_AS(MetricField::constant(make_mat({{1, 0.5}, {0.4, 1}})), Error);
  TensorField empty(2);
  CHECK_THROWS_AS(empty(1, make_vec({0, 0})), Error);
}
