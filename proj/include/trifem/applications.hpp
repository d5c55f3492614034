#ifndef TRIFEM_APPLICATIONS_HPP
#define TRIFEM_APPLICATIONS_HPP

#include "trifem/fem.hpp"
#include "trifem/solver.hpp"

#include <optional>
#include <vector>

namespace trifem {

// ---------------------------------------------------------------------------
// Open boundaries
// ---------------------------------------------------------------------------

// Everything within `interior_radius` of `center` is modelled as is; the
// exterior r >= inner is compressed into the shell inner <= R < outer, and
// the sphere R = outer stands for infinity.
struct OpenBoundarySpec {
  Point center;
  double inner = 1.0;
  double outer = 2.0;
  double interior_radius = 1.0;
  int infinity_tag = annulus_tag::outer;
};

// Composes base.chart with the shell map and replaces every material by its
// pointwise Euclidean transform on the shell; points with R < inner keep
// their material. Throws RegionNotContained when the interior does not fit
// inside `inner`, InvalidArgument for bad radii, InvalidSpec when the base
// metric is not Euclidean.
Triplet open_boundary_triplet(const Triplet& base, const OpenBoundarySpec& ob);

// Exterior dipole u = cos(theta)/r outside `hole` in 2D, shell-mapped per
// `ob`. The mesh covers hole <= R <= outer, with divisions {angular, radial}.
// Elements with centroid radius below ob.inner get region 1, shell elements
// region 2; when hole == ob.inner the whole mesh is region 2. Boundary tags:
// annulus_tag::inner carries u = cos(theta)/hole, the outer circle u = 0.
// Rings cluster toward the image of infinity by `grading` (see AnnulusShape).
BVPSpec dipole_problem(const OpenBoundarySpec& ob, double hole, std::span<const int> divisions,
                       double grading = 2.0);

// Analytic dipole potential at a point of the original (unmapped) chart.
double dipole_potential(const Point& center, const Point& x);

// Analytic potential expressed at a point of the shell-mapped chart.
double dipole_potential_mapped(const OpenBoundarySpec& ob, const Point& y);

struct L2Error {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / ||exact||
};

// L2 norm of u_h - exact over the mesh in its own coordinate measure,
// integrated with the degree-2 rule.
L2Error l2_error(const Mesh& m, const Vector& u, const std::function<double(const Point&)>& exact);

// ---------------------------------------------------------------------------
// Reparameterization with a fixed Euclidean metric
// ---------------------------------------------------------------------------

// Maps the mesh through g, hardwires the Euclidean metric, and transforms
// materials pointwise so the new triplet is equivalent to the old one.
// Dirichlet values are carried over (evaluated at g^-1 of the new nodes).
BVPSpec reparameterize_fixed_metric(const BVPSpec& spec, const ChartMap& g);

// ---------------------------------------------------------------------------
// Motion sweeps
// ---------------------------------------------------------------------------

enum class MotionMode { MetricChange, MaterialChange };

std::string_view to_string(MotionMode mode);
MotionMode parse_motion_mode(std::string_view name);  // "metric" | "material"

// The base mesh is the reference configuration. Step k deforms the moving
// region by steps[k] (reference -> physical); other regions move rigidly, so
// their coefficients never change.
struct MotionSweep {
  BVPSpec base;
  int moving_region = 1;
  std::vector<ChartMap> steps;
  MotionMode mode = MotionMode::MetricChange;
  SolverConfig solver;
  AssemblyOptions assembly;
  bool warm_start = true;
  bool reuse_preconditioner = true;
  // Also solve every step from zero with a fresh preconditioner and record
  // the iteration count.
  bool measure_cold = false;
  bool keep_matrices = false;
};

struct MotionStep {
  Solution solution;
  double seconds = 0.0;
  std::size_t changed_entries = 0;   // relative to the previous step (base for step 0)
  std::size_t changed_elements = 0;
  std::optional<int> cold_iterations;
  std::optional<SparseSymMatrix> stiffness;  // when keep_matrices is set
};

// Throws SingularJacobian when a step map is singular on an element and
// TopologyChange when it folds or flattens an element.
std::vector<MotionStep> motion_sweep(const MotionSweep& ms);

// The triplet used at one step: the base triplet with the moving region's
// metric (metric mode) or material (material mode) replaced.
Triplet motion_triplet(const MotionSweep& ms, const ChartMap& step);

// Full assembly of the stiffness at one step, for comparison with the sweep.
SparseSymMatrix motion_stiffness(const MotionSweep& ms, const ChartMap& step);

// Parallel-plate fixture on [0, width] x [0, 2]: region 1 is the gap
// 0 <= y <= 1, region 2 a block of permittivity `block_eps` above it. Bottom
// (y = 0) held at 0, top at `voltage`; side walls insulating. Steps stretch
// the gap by each factor in `gaps` along y.
MotionSweep parallel_plate_sweep(int nx, int ny, std::span<const double> gaps, double block_eps,
                                 double voltage = 1.0, double width = 1.0);

// Series-capacitor energy of the parallel-plate fixture at gap d:
// width * V^2 / (d + 1 / block_eps).
double parallel_plate_energy(double d, double block_eps, double voltage = 1.0, double width = 1.0);

}  // namespace trifem

#endif  // TRIFEM_APPLICATIONS_HPP
