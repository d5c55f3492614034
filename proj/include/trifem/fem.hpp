#ifndef TRIFEM_FEM_HPP
#define TRIFEM_FEM_HPP

#include "trifem/mesh.hpp"
#include "trifem/sparse.hpp"
#include "trifem/triplet.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace trifem {

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

// Fixed potential on the nodes of a boundary tag. `value` receives the node
// coordinates in the chart of the mesh it is applied to.
struct DirichletCondition {
  int tag = 0;
  std::function<double(const Point&)> value;
  std::optional<double> constant_value;

  static DirichletCondition constant(int tag, double v);
  static DirichletCondition function(int tag, std::function<double(const Point&)> fn);

  double operator()(const Point& x) const { return constant_value ? *constant_value : value(x); }
};

struct BVPSpec {
  Mesh mesh;
  Triplet triplet;
  std::vector<DirichletCondition> dirichlet;
};

// Throws InvalidSpec on the first violation: missing Dirichlet data, unknown
// boundary tag, missing region material, dimension mismatch.
void validate(const BVPSpec& spec);

// ---------------------------------------------------------------------------
// Quadrature and element matrices
// ---------------------------------------------------------------------------

using Barycentric = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

struct QuadratureRule {
  std::vector<Barycentric> points;
  std::vector<double> weights;  // sum to 1
};

// 1-point centroid rule, exact for constant coefficients.
QuadratureRule centroid_rule(int dim);
// Degree-2 rule: 3 points in 2D, 4 points in 3D. Points are interior.
QuadratureRule full_rule(int dim);

enum class QuadratureChoice { Auto, Centroid, Full };

using CoefficientFn = std::function<Mat(const Point&)>;

struct SimplexGradients {
  double volume = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 3> grads;  // row a = grad(phi_a)
};

SimplexGradients simplex_gradients(std::span<const Point> vertices);

// Entries int grad(phi_a)^T K grad(phi_b) dx over the simplex.
LocalMatrix local_stiffness(std::span<const Point> vertices, const CoefficientFn& K,
                            const QuadratureRule& rule);

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

// Per-region effective coefficient K = eps S^-1 of a triplet.
class CoefficientModel {
 public:
  explicit CoefficientModel(Triplet triplet) : triplet_(std::move(triplet)) {}

  Mat coefficient(int region, const Point& x) const;
  bool uniform(int region) const;
  // Element-constant material when the field provides one for this simplex.
  std::optional<Mat> element_material(int region, std::span<const Point> vertices) const {
    return triplet_.material.element_value(region, vertices);
  }
  bool metric_uniform(int region) const { return triplet_.metric.is_uniform(region); }
  Mat metric(int region, const Point& x) const { return triplet_.metric(region, x); }
  Mat material(int region, const Point& x) const { return triplet_.material(region, x); }

 private:
  Triplet triplet_;
};

struct AssemblyOptions {
  QuadratureChoice quadrature = QuadratureChoice::Auto;
  // Element matrices may be computed by several workers; accumulation stays
  // sequential in element order, so results do not depend on this.
  int threads = 1;
};

QuadratureRule select_rule(int dim, bool uniform, QuadratureChoice choice);

// Material and rule actually used on one element. An element-constant
// material with a uniform metric integrates exactly with the centroid rule.
struct ElementCoefficient {
  std::optional<Mat> material;
  QuadratureRule rule;
  Mat eps(int region, const Point& x, const CoefficientModel& model) const {
    return material ? *material : model.material(region, x);
  }
};
ElementCoefficient element_coefficient(const CoefficientModel& model, int region,
                                       std::span<const Point> vertices, QuadratureChoice choice);

// Stiffness of one mesh element; errors are prefixed with the element id.
LocalMatrix element_stiffness(const Mesh& mesh, std::size_t e, const CoefficientModel& model,
                              QuadratureChoice choice);

// Element matrices for every element of `mesh`, in element order.
std::vector<LocalMatrix> local_matrices(const Mesh& mesh, const CoefficientModel& model,
                                        const AssemblyOptions& options = {});

// Connectivity of a global system: element -> dofs, and for every local entry
// (a, b) the position of (dof_a, dof_b) in the CSR value array.
class AssemblyLayout {
 public:
  AssemblyLayout() = default;
  AssemblyLayout(std::size_t num_dofs, int nodes_per_element,
                 std::vector<std::array<int, 4>> element_dofs);

  static AssemblyLayout for_mesh(const Mesh& mesh);

  std::size_t num_dofs() const { return num_dofs_; }
  std::size_t num_elements() const { return element_dofs_.size(); }
  int nodes_per_element() const { return nv_; }
  const std::array<int, 4>& element_dofs(std::size_t e) const { return element_dofs_[e]; }

  SparseSymMatrix zero_matrix() const { return pattern_; }

  // Sums all element matrices in element order, row-major within an element.
  SparseSymMatrix accumulate(std::span<const LocalMatrix> locals) const;

  // Recomputes exactly the entries touched by `changed` elements, summing all
  // contributions in the same order as accumulate(), so the result is
  // bitwise identical to a full accumulation. Returns the number of stored
  // entries recomputed.
  std::size_t reaccumulate(std::span<const LocalMatrix> locals,
                           std::span<const std::size_t> changed, SparseSymMatrix& A) const;

 private:
  std::size_t num_dofs_ = 0;
  int nv_ = 3;
  std::vector<std::array<int, 4>> element_dofs_;
  std::vector<std::array<std::size_t, 16>> scatter_;
  SparseSymMatrix pattern_;
};

struct DirichletData {
  std::vector<char> fixed;
  Vector values;
};

// Nodal Dirichlet data. A node on several tags takes the value of the
// condition declared first.
DirichletData dirichlet_values(const Mesh& mesh, std::span<const DirichletCondition> conditions);

struct LinearSystem {
  SparseSymMatrix matrix;
  Vector rhs;
};

// Symmetric elimination: fixed rows and columns become identity, their values
// move to the right-hand side. The dof numbering is unchanged.
LinearSystem eliminate_dirichlet(const SparseSymMatrix& stiffness, const DirichletData& dirichlet);

struct AssembledSystem {
  AssemblyLayout layout;
  std::vector<LocalMatrix> locals;
  SparseSymMatrix stiffness;  // before elimination
  DirichletData dirichlet;
  LinearSystem system;        // after elimination
};

AssembledSystem assemble(const BVPSpec& spec, const AssemblyOptions& options = {});

// ---------------------------------------------------------------------------
// Post-processing
// ---------------------------------------------------------------------------

struct Solution {
  Vector potential;
  std::vector<Vec> field;  // constant E per element
  double energy = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

// E = -S^-1 grad(u) with S taken at the element centroid.
FieldVector element_field(const Vector& potential, const BVPSpec& spec, std::size_t element);
std::vector<Vec> element_fields(const Vector& potential, const BVPSpec& spec);

// W = sum over elements of int E^T S eps E dx in the coordinate measure, with
// the same quadrature selection as assembly. No factor 1/2.
double energy(const Vector& potential, const BVPSpec& spec, const AssemblyOptions& options = {});
double energy(const Solution& sol, const BVPSpec& spec, const AssemblyOptions& options = {});

// P1 interpolation; nullopt when x is outside every element.
std::optional<double> interpolate(const Mesh& mesh, const Vector& u, const Point& x);

}  // namespace trifem

#endif  // TRIFEM_FEM_HPP
