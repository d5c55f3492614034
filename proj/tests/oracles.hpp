// Independent reference computations shared by the tests.
#ifndef TRIFEM_TESTS_ORACLES_HPP
#define TRIFEM_TESTS_ORACLES_HPP

#include "trifem/geometry.hpp"

#include <optional>

#include <cmath>
#include <random>

namespace oracle {

using trifem::Mat;
using trifem::Point;
using trifem::Vec;

// Central differences of chart.forward with step h * max(1, |x|).
inline Mat fd_jacobian(const trifem::ChartMap& chart, const Point& x, double h = 1e-6) {
  const auto n = x.size();
  Mat J(n, n);
  const double step = h * std::max(1.0, x.norm());
  for (Eigen::Index k = 0; k < n; ++k) {
    Point xp = x, xm = x;
    xp(k) += step;
    xm(k) -= step;
    J.col(k) = (chart.forward(xp) - chart.forward(xm)) / (2 * step);
  }
  return J;
}

inline double rel_diff(const Mat& a, const Mat& b) {
  const double s = std::max(a.norm(), b.norm());
  return s > 0 ? (a - b).norm() / s : 0.0;
}

inline Mat random_matrix(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> U(lo, hi);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = U(rng);
  return m;
}

// Well-conditioned random invertible matrix.
inline Mat random_invertible(std::mt19937_64& rng, int n) {
  for (;;) {
    Mat m = random_matrix(rng, n) + 1.5 * Mat::Identity(n, n);
    if (std::abs(m.determinant()) > 0.2) return m;
  }
}

inline Mat random_spd(std::mt19937_64& rng, int n) {
  const Mat a = random_matrix(rng, n);
  return a * a.transpose() + 0.5 * Mat::Identity(n, n);
}

inline Vec random_vec(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> U(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = U(rng);
  return v;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = U(rng);
  return v;
}

// Error code thrown by f(), or nullopt when it returns normally.
template <class F>
std::optional<trifem::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const trifem::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace oracle

#endif
