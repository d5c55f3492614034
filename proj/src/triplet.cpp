#include "trifem/triplet.hpp"

#include <cmath>
#include <limits>

namespace trifem {

namespace {

constexpr double kSingularDet = 1e-300;

double checked_det(const Mat& J, std::string_view what) {
  if (J.rows() != J.cols())
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": Jacobian must be square");
  const double det = J.determinant();
  if (!(std::abs(det) >= kSingularDet))
    throw Error(ErrorCode::SingularJacobian, std::string(what) + ": |det J| below 1e-300");
  return det;
}

void require_square(const Mat& m, Eigen::Index n, std::string_view what) {
  require_dim(m.rows(), n, what);
  require_dim(m.cols(), n, what);
}

}  // namespace

MaterialField& MaterialField::scalar(int region, double value) {
  const auto n = static_cast<Eigen::Index>(dim_);
  const Mat m = value * Mat::Identity(n, n);
  set_region(region, {[m](const Point&) { return m; }, true, "scalar"});
  return *this;
}

MaterialField& MaterialField::tensor(int region, const Mat& value) {
  require_square(value, dim_, "material tensor");
  set_region(region, {[value](const Point&) { return value; }, true, "tensor"});
  return *this;
}

MaterialField& MaterialField::function(int region, TensorFn fn, std::string label) {
  set_region(region, {std::move(fn), false, std::move(label)});
  return *this;
}

Triplet standard_triplet(int dim, MaterialField material) {
  return Triplet{ChartMap::identity(dim), MetricField::euclidean(dim), std::move(material)};
}

Mat transform_material(const Mat& eps_i, const Mat& S_i, const Mat& S_j, const Mat& J) {
  const double det = checked_det(J, "transform_material");
  const auto n = J.rows();
  require_square(eps_i, n, "transform_material eps_i");
  require_square(S_i, n, "transform_material S_i");
  require_square(S_j, n, "transform_material S_j");
  const Mat S_i_inv = S_i.inverse();
  return (J * eps_i * S_i_inv * J.transpose() * S_j) / std::abs(det);
}

Mat transform_material_euclidean(const Mat& eps_f, const Mat& J) {
  const double det = checked_det(J, "transform_material_euclidean");
  require_square(eps_f, J.rows(), "transform_material_euclidean eps_f");
  return (J * eps_f * J.transpose()) / std::abs(det);
}

Mat metric_for_motion(const Mat& J) {
  const double det = checked_det(J, "metric_for_motion");
  const Mat J_inv = J.inverse();
  const Mat S = std::abs(det) * (J_inv.transpose() * J_inv);
  return 0.5 * (S + S.transpose());
}

Vec transform_field(const Vec& E_j, const Mat& S_i, const Mat& S_j, const Mat& J) {
  checked_det(J, "transform_field");
  const auto n = J.rows();
  require_dim(E_j.size(), n, "transform_field E_j");
  require_square(S_i, n, "transform_field S_i");
  require_square(S_j, n, "transform_field S_j");
  return S_i.llt().solve(J.transpose() * (S_j * E_j));
}

FieldVector transform_field(const FieldVector& E_j, const Mat& S_i, const Mat& S_j, const Mat& J) {
  return {transform_field(E_j.components, S_i, S_j, J), E_j.at, {}};
}

double virtual_emf(const Vec& E, const Mat& S, const Vec& dr) {
  require_dim(E.size(), S.rows(), "virtual_emf E");
  require_dim(dr.size(), S.cols(), "virtual_emf dr");
  return E.dot(S * dr);
}

double virtual_emf(const FieldVector& E, const Mat& S, const CoordVector& dr) {
  return virtual_emf(E.components, S, dr.components);
}

Mat effective_coefficient(const Mat& eps, const Mat& S) {
  require_square(eps, S.rows(), "effective_coefficient eps");
  require_square(S, S.rows(), "effective_coefficient S");
  const Mat K = eps * S.inverse();
  const double norm = K.norm();
  const double asym = (K - K.transpose()).norm();
  if (asym > 1e-10 * norm)
    throw Error(ErrorCode::AsymmetricCoefficient,
                "eps S^-1 asymmetry " + std::to_string(asym / norm) + " exceeds 1e-10");
  return 0.5 * (K + K.transpose());
}

EquivalenceReport verify_material_equivalence(const Triplet& t_i, const Triplet& t_j,
                                              std::span<const MaterialSample> samples) {
  require_dim(t_i.dim(), t_j.dim(), "verify_material_equivalence");
  EquivalenceReport report;
  report.deviations.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    const Point y_i = t_i.chart.forward(s.at);
    const Point y_j = t_j.chart.forward(s.at);
    // Jacobian of t_j.chart o t_i.chart^-1 at y_i.
    const Mat J = t_j.chart.jacobian(s.at) * t_i.chart.jacobian(s.at).inverse();
    const Mat expected = transform_material(t_i.material(s.region, y_i),
                                            t_i.metric(s.region, y_i),
                                            t_j.metric(s.region, y_j), J);
    const Mat actual = t_j.material(s.region, y_j);
    const double scale = expected.norm();
    const double dev = (actual - expected).norm() / (scale > 0 ? scale : 1.0);
    report.deviations.push_back(dev);
    if (k == 0 || dev > report.max_deviation) {
      report.max_deviation = dev;
      report.worst_sample = k;
    }
  }
  return report;
}

}  // namespace trifem
