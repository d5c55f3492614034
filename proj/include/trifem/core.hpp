#ifndef TRIFEM_CORE_HPP
#define TRIFEM_CORE_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace trifem {

// Small dense types. Dimension is a run-time property (2 or 3) but never
// exceeds 3, so storage stays on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

// Chart coordinates of a point. The dimension is fixed per problem.
using Point = Vec;

enum class ErrorCode {
  PointOutsideDomain,
  PointOutsideImage,
  DimensionMismatch,
  SingularJacobian,
  AsymmetricCoefficient,
  InvalidArgument,
  DegenerateShape,
  DegenerateElement,
  InvalidMesh,
  UnsupportedVersion,
  MalformedFile,
  LengthMismatch,
  IoError,
  InterfaceMismatch,
  NoSuchInterface,
  InvalidSpec,
  MaxIterExceeded,
  NotPositiveDefinite,
  ZeroDiagonal,
  RegionNotContained,
  TopologyChange,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Throws DimensionMismatch unless a == b.
void require_dim(Eigen::Index a, Eigen::Index b, std::string_view what);

Vec make_vec(std::initializer_list<double> values);
Mat make_mat(std::initializer_list<std::initializer_list<double>> rows);

}  // namespace trifem

#endif  // TRIFEM_CORE_HPP
