#include "trifem/core.hpp"

#include <sstream>

namespace trifem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorCode::PointOutsideImage: return "PointOutsideImage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::AsymmetricCoefficient: return "AsymmetricCoefficient";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateShape: return "DegenerateShape";
    case ErrorCode::DegenerateElement: return "DegenerateElement";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InterfaceMismatch: return "InterfaceMismatch";
    case ErrorCode::NoSuchInterface: return "NoSuchInterface";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ZeroDiagonal: return "ZeroDiagonal";
    case ErrorCode::RegionNotContained: return "RegionNotContained";
    case ErrorCode::TopologyChange: return "TopologyChange";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void require_dim(Eigen::Index a, Eigen::Index b, std::string_view what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension " << a << " does not match " << b;
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

Mat make_mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
  Mat a(n, m);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    require_dim(static_cast<Eigen::Index>(row.size()), m, "make_mat row");
    Eigen::Index j = 0;
    for (double x : row) a(i, j++) = x;
    ++i;
  }
  return a;
}

}  // namespace trifem
