#include "trifem/geometry.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace trifem {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string point_str(const Point& x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

[[noreturn]] void outside_domain(const Point& x, const std::string& why) {
  throw Error(ErrorCode::PointOutsideDomain, point_str(x) + " " + why);
}

[[noreturn]] void outside_image(const Point& y, const std::string& why) {
  throw Error(ErrorCode::PointOutsideImage, point_str(y) + " " + why);
}

// Radial map x -> c + R(r) (x - c) / r. Jacobian is
// (R/r) I + (R' - R/r) u u^T with u the unit radial direction.
Mat radial_jacobian(const Vec& offset, double r, double R, double dR) {
  const auto n = offset.size();
  const Vec u = offset / r;
  const double ratio = R / r;
  Mat J = ratio * Mat::Identity(n, n);
  J += (dR - ratio) * (u * u.transpose());
  return J;
}

Mat rotation_matrix(const RotationMap& rot) {
  const double c = std::cos(rot.angle);
  const double s = std::sin(rot.angle);
  if (rot.dim == 2) return make_mat({{c, -s}, {s, c}});
  const Vec& k = rot.axis;
  Mat K(3, 3);
  K << 0, -k(2), k(1), k(2), 0, -k(0), -k(1), k(0), 0;
  // Rodrigues
  return Mat::Identity(3, 3) + s * K + (1 - c) * (K * K);
}

int family_dim(const ChartMap::Family& family) {
  return std::visit(
      Overloaded{
          [](const IdentityMap& m) { return m.dim; },
          [](const AffineMap& m) { return static_cast<int>(m.matrix.rows()); },
          [](const AxisScalingMap& m) { return static_cast<int>(m.factors.size()); },
          [](const RotationMap& m) { return m.dim; },
          [](const PolarStretchMap& m) { return static_cast<int>(m.center.size()); },
          [](const KelvinShellMap& m) { return static_cast<int>(m.center.size()); },
          [](const CompositeMap& m) { return m.members.empty() ? 0 : m.members.front().dim(); },
      },
      family);
}

double kelvin_radius(const KelvinShellMap& k, double r) {
  return k.outer - k.inner * (k.outer - k.inner) / r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

bool Domain::contains(const Point& x) const {
  if (!x.allFinite()) return false;
  return std::visit(
      Overloaded{
          [](const Everywhere&) { return true; },
          [&](const BoxDomain& b) {
            require_dim(x.size(), b.lo.size(), "box domain");
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              const double band = kDomainTolerance * std::max(1.0, b.hi(i) - b.lo(i));
              if (x(i) < b.lo(i) - band || x(i) > b.hi(i) + band) return false;
            }
            return true;
          },
          [&](const AnnulusDomain& a) {
            require_dim(x.size(), a.center.size(), "annulus domain");
            const double r = (x - a.center).norm();
            return r >= a.rmin * (1 - kDomainTolerance) &&
                   r <= a.rmax * (1 + kDomainTolerance);
          },
          [&](const HalfSpaceDomain& h) {
            require_dim(x.size(), h.normal.size(), "half-space domain");
            return h.normal.dot(x) >= h.offset - kDomainTolerance * (1 + std::abs(h.offset));
          },
      },
      shape_);
}

std::string Domain::describe() const {
  return std::visit(
      Overloaded{
          [](const Everywhere&) { return std::string("everywhere"); },
          [](const BoxDomain& b) { return "box " + point_str(b.lo) + "-" + point_str(b.hi); },
          [](const AnnulusDomain& a) {
            std::ostringstream os;
            os << "annulus about " << point_str(a.center) << " r in [" << a.rmin << ", "
               << a.rmax << "]";
            return os.str();
          },
          [](const HalfSpaceDomain& h) {
            std::ostringstream os;
            os << "half-space n=" << point_str(h.normal) << " offset " << h.offset;
            return os.str();
          },
      },
      shape_);
}

// ---------------------------------------------------------------------------
// ChartMap construction
// ---------------------------------------------------------------------------

ChartMap::ChartMap(Family family, Domain domain)
    : family_(std::move(family)), domain_(std::move(domain)), dim_(family_dim(family_)) {
  if (dim_ != 2 && dim_ != 3)
    throw Error(ErrorCode::InvalidArgument,
                "chart dimension must be 2 or 3, got " + std::to_string(dim_));
}

ChartMap ChartMap::identity(int dim) { return ChartMap(IdentityMap{dim}); }

ChartMap ChartMap::affine(Mat matrix, Vec offset) {
  if (matrix.rows() != matrix.cols())
    throw Error(ErrorCode::DimensionMismatch, "affine matrix must be square");
  require_dim(offset.size(), matrix.rows(), "affine offset");
  if (std::abs(matrix.determinant()) < 1e-300)
    throw Error(ErrorCode::SingularJacobian, "affine matrix is singular");
  return ChartMap(AffineMap{std::move(matrix), std::move(offset)});
}

ChartMap ChartMap::translation(Vec offset) {
  const auto n = offset.size();
  return affine(Mat::Identity(n, n), std::move(offset));
}

ChartMap ChartMap::axis_scaling(Vec factors) {
  for (Eigen::Index i = 0; i < factors.size(); ++i)
    if (factors(i) == 0.0 || !std::isfinite(factors(i)))
      throw Error(ErrorCode::SingularJacobian, "axis scaling factor must be finite and nonzero");
  return ChartMap(AxisScalingMap{std::move(factors)});
}

ChartMap ChartMap::rotation(double angle) { return ChartMap(RotationMap{angle, Vec(), 2}); }

ChartMap ChartMap::rotation(Vec axis, double angle) {
  require_dim(axis.size(), 3, "rotation axis");
  const double norm = axis.norm();
  if (!(norm > 0)) throw Error(ErrorCode::InvalidArgument, "rotation axis must be nonzero");
  return ChartMap(RotationMap{angle, axis / norm, 3});
}

ChartMap ChartMap::polar_stretch(Point center, double power, double radius) {
  if (!(power > 0) || !(radius > 0))
    throw Error(ErrorCode::InvalidArgument, "polar stretch needs power > 0 and radius > 0");
  return ChartMap(PolarStretchMap{std::move(center), power, radius});
}

ChartMap ChartMap::kelvin_shell(Point center, double inner, double outer, bool identity_inside) {
  if (!(inner > 0) || !(outer > inner))
    throw Error(ErrorCode::InvalidArgument, "kelvin shell needs 0 < inner < outer");
  return ChartMap(KelvinShellMap{std::move(center), inner, outer, identity_inside});
}

ChartMap ChartMap::composite(std::vector<ChartMap> members) {
  if (members.empty())
    throw Error(ErrorCode::InvalidArgument, "composite chart needs at least one member");
  for (const auto& m : members) require_dim(m.dim(), members.front().dim(), "composite member");
  return ChartMap(CompositeMap{std::move(members)});
}

std::string ChartMap::name() const {
  return std::visit(
      Overloaded{
          [](const IdentityMap&) { return std::string("identity"); },
          [](const AffineMap&) { return std::string("affine"); },
          [](const AxisScalingMap&) { return std::string("axis_scaling"); },
          [](const RotationMap&) { return std::string("rotation"); },
          [](const PolarStretchMap&) { return std::string("polar_stretch"); },
          [](const KelvinShellMap&) { return std::string("kelvin_shell"); },
          [](const CompositeMap& c) {
            std::string s = "composite[";
            for (std::size_t i = 0; i < c.members.size(); ++i)
              s += (i ? "," : "") + c.members[i].name();
            return s + "]";
          },
      },
      family_);
}

bool ChartMap::is_affine() const {
  return std::visit(
      Overloaded{
          [](const PolarStretchMap& p) { return p.power == 1.0; },
          [](const KelvinShellMap&) { return false; },
          [](const CompositeMap& c) {
            for (const auto& m : c.members)
              if (!m.is_affine()) return false;
            return true;
          },
          [](const auto&) { return true; },
      },
      family_);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Point ChartMap::forward(const Point& x) const {
  require_dim(x.size(), dim_, name() + " forward");
  if (!domain_.contains(x)) outside_domain(x, "is outside " + domain_.describe());
  return std::visit(
      Overloaded{
          [&](const IdentityMap&) -> Point { return x; },
          [&](const AffineMap& a) -> Point { return a.matrix * x + a.offset; },
          [&](const AxisScalingMap& s) -> Point { return s.factors.cwiseProduct(x); },
          [&](const RotationMap& r) -> Point { return rotation_matrix(r) * x; },
          [&](const PolarStretchMap& p) -> Point {
            const Vec d = x - p.center;
            const double r = d.norm();
            if (!(r > 0)) outside_domain(x, "is the polar stretch center");
            const double R = p.radius * std::pow(r / p.radius, p.power);
            return p.center + (R / r) * d;
          },
          [&](const KelvinShellMap& k) -> Point {
            const Vec d = x - k.center;
            const double r = d.norm();
            if (r < k.inner * (1 - kDomainTolerance)) {
              if (k.identity_inside) return x;
              outside_domain(x, "lies inside the shell inner radius");
            }
            return k.center + (kelvin_radius(k, r) / r) * d;
          },
          [&](const CompositeMap& c) -> Point {
            Point y = x;
            for (auto it = c.members.rbegin(); it != c.members.rend(); ++it) y = it->forward(y);
            return y;
          },
      },
      family_);
}

Point ChartMap::inverse(const Point& y) const {
  require_dim(y.size(), dim_, name() + " inverse");
  Point x = std::visit(
      Overloaded{
          [&](const IdentityMap&) -> Point { return y; },
          [&](const AffineMap& a) -> Point {
            return a.matrix.partialPivLu().solve(y - a.offset);
          },
          [&](const AxisScalingMap& s) -> Point { return y.cwiseQuotient(s.factors); },
          [&](const RotationMap& r) -> Point { return rotation_matrix(r).transpose() * y; },
          [&](const PolarStretchMap& p) -> Point {
            const Vec d = y - p.center;
            const double R = d.norm();
            if (!(R > 0)) outside_image(y, "is the polar stretch center");
            const double r = p.radius * std::pow(R / p.radius, 1.0 / p.power);
            return p.center + (r / R) * d;
          },
          [&](const KelvinShellMap& k) -> Point {
            const Vec d = y - k.center;
            const double R = d.norm();
            if (R >= k.outer) outside_image(y, "is at or beyond the shell outer radius");
            if (R < k.inner * (1 - kDomainTolerance)) {
              if (k.identity_inside) return y;
              outside_image(y, "lies inside the shell inner radius");
            }
            const double r = k.inner * (k.outer - k.inner) / (k.outer - R);
            return k.center + (r / R) * d;
          },
          [&](const CompositeMap& c) -> Point {
            Point x = y;
            for (const auto& m : c.members) x = m.inverse(x);
            return x;
          },
      },
      family_);
  if (!x.allFinite()) outside_image(y, "has no finite preimage");
  if (!domain_.contains(x)) outside_image(y, "has a preimage outside " + domain_.describe());
  return x;
}

Mat ChartMap::jacobian(const Point& x) const {
  require_dim(x.size(), dim_, name() + " jacobian");
  if (!domain_.contains(x)) outside_domain(x, "is outside " + domain_.describe());
  const auto n = static_cast<Eigen::Index>(dim_);
  return std::visit(
      Overloaded{
          [&](const IdentityMap&) -> Mat { return Mat::Identity(n, n); },
          [&](const AffineMap& a) -> Mat { return a.matrix; },
          [&](const AxisScalingMap& s) -> Mat { return s.factors.asDiagonal(); },
          [&](const RotationMap& r) -> Mat { return rotation_matrix(r); },
          [&](const PolarStretchMap& p) -> Mat {
            const Vec d = x - p.center;
            const double r = d.norm();
            if (!(r > 0)) outside_domain(x, "is the polar stretch center");
            const double q = r / p.radius;
            return radial_jacobian(d, r, p.radius * std::pow(q, p.power),
                                   p.power * std::pow(q, p.power - 1));
          },
          [&](const KelvinShellMap& k) -> Mat {
            const Vec d = x - k.center;
            const double r = d.norm();
            if (r < k.inner * (1 - kDomainTolerance)) {
              if (k.identity_inside) return Mat::Identity(n, n);
              outside_domain(x, "lies inside the shell inner radius");
            }
            const double dR = k.inner * (k.outer - k.inner) / (r * r);
            return radial_jacobian(d, r, kelvin_radius(k, r), dR);
          },
          [&](const CompositeMap& c) -> Mat {
            Mat J = Mat::Identity(n, n);
            Point y = x;
            for (auto it = c.members.rbegin(); it != c.members.rend(); ++it) {
              J = it->jacobian(y) * J;
              y = it->forward(y);
            }
            return J;
          },
      },
      family_);
}

// ---------------------------------------------------------------------------
// Free functions
// ---------------------------------------------------------------------------

Point eval_forward(const ChartMap& chart, const Point& x) { return chart.forward(x); }

Point eval_inverse(const ChartMap& chart, const Point& y) { return chart.inverse(y); }

JacobianMatrix jacobian(const ChartMap& chart, const Point& x) {
  JacobianMatrix J{chart.jacobian(x), x};
  if (std::abs(J.entries.determinant()) == 0.0)
    throw Error(ErrorCode::SingularJacobian, chart.name() + " Jacobian is singular at " +
                                                 point_str(x));
  return J;
}

CoordVector push_forward(const JacobianMatrix& J, const CoordVector& v) {
  require_dim(J.entries.cols(), v.components.size(), "push_forward");
  return {J.entries * v.components, v.base};
}

double inner_product(const Mat& S, const Vec& v, const Vec& w) {
  require_dim(S.rows(), v.size(), "inner_product");
  require_dim(S.cols(), w.size(), "inner_product");
  return v.dot(S * w);
}

double inner_product(const Mat& S, const CoordVector& v, const CoordVector& w) {
  return inner_product(S, v.components, w.components);
}

bool check_isometry(const ChartMap& chart, std::span<const Point> samples) {
  const auto n = static_cast<Eigen::Index>(chart.dim());
  for (const auto& x : samples) {
    const Mat J = chart.jacobian(x);
    if ((J.transpose() * J - Mat::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tensor fields
// ---------------------------------------------------------------------------

void TensorField::set_default(Entry entry) { default_ = std::move(entry); }

void TensorField::set_region(int region, Entry entry) { regions_[region] = std::move(entry); }

const TensorField::Entry* TensorField::find(int region) const {
  if (auto it = regions_.find(region); it != regions_.end()) return &it->second;
  return default_ ? &*default_ : nullptr;
}

bool TensorField::is_uniform(int region) const {
  const Entry* e = find(region);
  return e != nullptr && e->uniform;
}

std::optional<Mat> TensorField::element_value(int region, std::span<const Point> vertices) const {
  const Entry* e = find(region);
  if (e == nullptr || !e->element) return std::nullopt;
  return e->element(vertices);
}

Mat TensorField::operator()(int region, const Point& x) const {
  const Entry* e = find(region);
  if (e == nullptr)
    throw Error(ErrorCode::InvalidSpec, "no tensor data for region " + std::to_string(region));
  Mat m = e->eval(x);
  require_dim(m.rows(), dim_, "tensor field rows");
  require_dim(m.cols(), dim_, "tensor field cols");
  return m;
}

MetricField MetricField::euclidean(int dim) {
  MetricField f(dim);
  const auto n = static_cast<Eigen::Index>(dim);
  f.set_default({[n](const Point&) -> Mat { return Mat::Identity(n, n); }, true, "euclidean"});
  return f;
}

MetricField MetricField::constant(const Mat& S, std::string label) {
  require_spd(S, "constant metric");
  MetricField f(static_cast<int>(S.rows()));
  f.set_default({[S](const Point&) { return S; }, true, std::move(label)});
  return f;
}

MetricField MetricField::function(int dim, TensorFn fn, std::string label) {
  MetricField f(dim);
  f.set_default({std::move(fn), false, std::move(label)});
  return f;
}

bool MetricField::is_euclidean(int region) const {
  const Entry* e = find(region);
  return e != nullptr && e->label == "euclidean";
}

bool is_spd(const Mat& S) {
  if (S.rows() != S.cols() || !S.allFinite()) return false;
  const double norm = S.norm();
  if (!(norm > 0)) return false;
  if ((S - S.transpose()).norm() > 1e-14 * norm) return false;
  Eigen::LLT<Mat> llt(0.5 * (S + S.transpose()));
  return llt.info() == Eigen::Success;
}

void require_spd(const Mat& S, std::string_view what) {
  if (!is_spd(S))
    throw Error(ErrorCode::InvalidSpec, std::string(what) + " is not symmetric positive definite");
}

}  // namespace trifem
