#ifndef TRIFEM_TRIPLET_HPP
#define TRIFEM_TRIPLET_HPP

#include "trifem/geometry.hpp"

#include <string>
#include <vector>

namespace trifem {

// Material parameters per region, expressed in the chart of the owning
// triplet and relative to that triplet's metric.
class MaterialField : public TensorField {
 public:
  MaterialField() = default;
  explicit MaterialField(int dim) : TensorField(dim) {}

  MaterialField& scalar(int region, double value);
  MaterialField& tensor(int region, const Mat& value);
  MaterialField& function(int region, TensorFn fn, std::string label = "function");
};

// One representative {chart, metric, material} of a material-equivalence
// class. `chart` maps the universal (standard) chart into this triplet's
// codomain.
struct Triplet {
  ChartMap chart = ChartMap::identity(2);
  MetricField metric;
  MaterialField material;

  int dim() const { return chart.dim(); }
};

// Scalar-material triplet in the standard parameterization.
Triplet standard_triplet(int dim, MaterialField material);

struct FieldVector {
  Vec components;
  Point at;
  std::string frame;
};

// eps_j = J eps_i S_i^-1 J^T S_j |J^-1|, with J the Jacobian of the transition
// from chart i to chart j.
Mat transform_material(const Mat& eps_i, const Mat& S_i, const Mat& S_j, const Mat& J);

// Fixed Euclidean metric on both sides: eps_g = J eps_f J^T / |J|.
Mat transform_material_euclidean(const Mat& eps_f, const Mat& J);

// Metric that keeps scalar material parameters unchanged under the transition
// with Jacobian J: S_g = |J| J^-T J^-1.
Mat metric_for_motion(const Mat& J);

// E_i = S_i^-1 J^T S_j E_j. The result keeps E_j's point; `frame` is left
// empty for the caller to fill in.
FieldVector transform_field(const FieldVector& E_j, const Mat& S_i, const Mat& S_j, const Mat& J);
Vec transform_field(const Vec& E_j, const Mat& S_i, const Mat& S_j, const Mat& J);

// dU = E^T S dr
double virtual_emf(const Vec& E, const Mat& S, const Vec& dr);
double virtual_emf(const FieldVector& E, const Mat& S, const CoordVector& dr);

// K = eps S^-1, symmetrized. Throws AsymmetricCoefficient when the product is
// asymmetric beyond 1e-10 relative before symmetrization.
Mat effective_coefficient(const Mat& eps, const Mat& S);

struct MaterialSample {
  Point at;  // universal chart coordinates
  int region = 0;
};

struct EquivalenceReport {
  std::vector<double> deviations;  // one per sample, relative Frobenius
  double max_deviation = 0.0;
  std::size_t worst_sample = 0;
};

// Checks t_j.material against transform_material applied to t_i's data at
// each sample, using the Jacobian of t_j.chart o t_i.chart^-1.
EquivalenceReport verify_material_equivalence(const Triplet& t_i, const Triplet& t_j,
                                              std::span<const MaterialSample> samples);

}  // namespace trifem

#endif  // TRIFEM_TRIPLET_HPP
