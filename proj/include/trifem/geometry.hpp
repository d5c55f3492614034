#ifndef TRIFEM_GEOMETRY_HPP
#define TRIFEM_GEOMETRY_HPP

#include "trifem/core.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace trifem {

// Relative width of the tolerance band used for domain membership.
inline constexpr double kDomainTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Domain descriptors
// ---------------------------------------------------------------------------

struct Everywhere {};

struct BoxDomain {
  Vec lo;
  Vec hi;
};

// Points whose distance from `center` lies in [rmin, rmax]. rmax may be +inf.
struct AnnulusDomain {
  Point center;
  double rmin = 0.0;
  double rmax = 0.0;
};

// Points with normal . x >= offset.
struct HalfSpaceDomain {
  Vec normal;
  double offset = 0.0;
};

class Domain {
 public:
  using Shape = std::variant<Everywhere, BoxDomain, AnnulusDomain, HalfSpaceDomain>;

  Domain() = default;
  Domain(Shape shape) : shape_(std::move(shape)) {}

  bool contains(const Point& x) const;
  bool is_everywhere() const { return std::holds_alternative<Everywhere>(shape_); }
  const Shape& shape() const { return shape_; }
  std::string describe() const;

 private:
  Shape shape_;
};

// ---------------------------------------------------------------------------
// Chart maps
// ---------------------------------------------------------------------------

class ChartMap;

struct IdentityMap {
  int dim = 2;
};

// y = matrix * x + offset
struct AffineMap {
  Mat matrix;
  Vec offset;
};

struct AxisScalingMap {
  Vec factors;
};

// 2D: rotation by `angle` about the origin (axis is empty).
// 3D: rotation by `angle` about the unit vector `axis`.
struct RotationMap {
  double angle = 0.0;
  Vec axis;
  int dim = 2;
};

// Radial power law about `center`: R = radius * (r / radius)^power.
struct PolarStretchMap {
  Point center;
  double power = 1.0;
  double radius = 1.0;
};

// Shell map R(r) = outer - inner * (outer - inner) / r for r >= inner. It fixes
// the sphere r = inner and sends r -> infinity to R -> outer. With
// identity_inside set, points with r < inner map to themselves.
struct KelvinShellMap {
  Point center;
  double inner = 1.0;
  double outer = 2.0;
  bool identity_inside = false;
};

// members[0] o members[1] o ... o members[k-1]: the last member is applied
// first, and the Jacobian is the ordered product of the member Jacobians.
struct CompositeMap {
  std::vector<ChartMap> members;
};

class ChartMap {
 public:
  using Family = std::variant<IdentityMap, AffineMap, AxisScalingMap, RotationMap,
                              PolarStretchMap, KelvinShellMap, CompositeMap>;

  ChartMap(Family family, Domain domain = {});

  static ChartMap identity(int dim);
  static ChartMap affine(Mat matrix, Vec offset);
  static ChartMap translation(Vec offset);
  static ChartMap axis_scaling(Vec factors);
  static ChartMap rotation(double angle);
  static ChartMap rotation(Vec axis, double angle);
  static ChartMap polar_stretch(Point center, double power, double radius);
  static ChartMap kelvin_shell(Point center, double inner, double outer,
                               bool identity_inside = false);
  // Outermost first: composite({g, f}) is g o f.
  static ChartMap composite(std::vector<ChartMap> members);

  int dim() const { return dim_; }
  const Family& family() const { return family_; }
  const Domain& domain() const { return domain_; }
  std::string name() const;

  // True when the Jacobian is constant everywhere.
  bool is_affine() const;

  Point forward(const Point& x) const;
  Point inverse(const Point& y) const;
  Mat jacobian(const Point& x) const;

 private:
  Family family_;
  Domain domain_;
  int dim_ = 2;
};

// ---------------------------------------------------------------------------
// Tangent bookkeeping
// ---------------------------------------------------------------------------

struct JacobianMatrix {
  Mat entries;
  Point at;
};

struct CoordVector {
  Vec components;
  Point base;
};

Point eval_forward(const ChartMap& chart, const Point& x);
Point eval_inverse(const ChartMap& chart, const Point& y);
JacobianMatrix jacobian(const ChartMap& chart, const Point& x);

// dr_j = J dr_i. The base point is carried over unchanged.
CoordVector push_forward(const JacobianMatrix& J, const CoordVector& v);

double inner_product(const Mat& S, const Vec& v, const Vec& w);
double inner_product(const Mat& S, const CoordVector& v, const CoordVector& w);

// True iff J^T J = I within 1e-10 at every sample. An empty sample list is
// trivially isometric.
bool check_isometry(const ChartMap& chart, std::span<const Point> samples);

// ---------------------------------------------------------------------------
// Tensor fields (metric and material data)
// ---------------------------------------------------------------------------

using TensorFn = std::function<Mat(const Point&)>;
// Optional element-constant value computed from a simplex's vertices;
// nullopt falls back to pointwise evaluation.
using ElementTensorFn = std::function<std::optional<Mat>(std::span<const Point>)>;

// Region-keyed matrix field with an optional default for untagged regions.
class TensorField {
 public:
  struct Entry {
    TensorFn eval;
    bool uniform = false;  // constant over the region
    std::string label;
    ElementTensorFn element = {};
  };

  TensorField() = default;
  explicit TensorField(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  void set_default(Entry entry);
  void set_region(int region, Entry entry);

  const Entry* find(int region) const;
  bool has(int region) const { return find(region) != nullptr; }
  bool is_uniform(int region) const;
  Mat operator()(int region, const Point& x) const;
  std::optional<Mat> element_value(int region, std::span<const Point> vertices) const;

  const std::map<int, Entry>& regions() const { return regions_; }
  const std::optional<Entry>& fallback() const { return default_; }

 protected:
  int dim_ = 2;
  std::map<int, Entry> regions_;
  std::optional<Entry> default_;
};

class MetricField : public TensorField {
 public:
  MetricField() = default;
  explicit MetricField(int dim) : TensorField(dim) {}

  static MetricField euclidean(int dim);
  static MetricField constant(const Mat& S, std::string label = "constant");
  static MetricField function(int dim, TensorFn fn, std::string label);

  bool is_euclidean(int region) const;
};

// Throws InvalidSpec unless S is symmetric (asymmetry <= 1e-14 of its norm)
// and positive definite.
void require_spd(const Mat& S, std::string_view what);
bool is_spd(const Mat& S);

}  // namespace trifem

#endif  // TRIFEM_GEOMETRY_HPP
