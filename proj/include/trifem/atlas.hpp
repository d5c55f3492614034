#ifndef TRIFEM_ATLAS_HPP
#define TRIFEM_ATLAS_HPP

#include "trifem/fem.hpp"
#include "trifem/solver.hpp"

#include <utility>
#include <vector>

namespace trifem {

// One chart of an atlas. `to_universal` maps this region's coordinates into
// the universal chart; `mesh` is drawn in this region's coordinates.
struct AtlasRegion {
  int id = 0;
  ChartMap to_universal = ChartMap::identity(2);
  Mesh mesh;
};

// Shared boundary between two regions, given by a boundary tag on each side.
struct AtlasInterface {
  int region_a = 0;
  int tag_a = 0;
  int region_b = 0;
  int tag_b = 0;
};

struct Atlas {
  std::vector<AtlasRegion> regions;
  std::vector<AtlasInterface> interfaces;

  int dim() const;
  // Position in `regions`; throws InvalidArgument for an unknown id.
  std::size_t index_of(int region_id) const;
  const AtlasRegion& region(int region_id) const { return regions[index_of(region_id)]; }
};

// Builds a region from a mesh given in universal coordinates by pulling every
// node back through `to_universal`.
AtlasRegion region_from_universal(int id, const ChartMap& to_universal, const Mesh& universal_mesh);

struct GlobalIndex {
  std::vector<std::vector<int>> dof;  // [region position][node]
  std::size_t num_dofs = 0;
};

// Node-matching tolerance: 1e-9 of the universal bounding-box diagonal.
double dedup_tolerance(const Atlas& a);

// Regions are numbered in declaration order, nodes in node order; an
// interface node adopts the dof of its partner in an earlier region. Throws
// InterfaceMismatch listing unmatched nodes and their nearest distances.
GlobalIndex build_global_index(const Atlas& a);

// `from`-side interface nodes expressed in the `to` region's coordinates via
// the universal chart. Throws NoSuchInterface.
std::vector<std::pair<int, Point>> map_interface_nodes(const Atlas& a, int from, int to);

// Fixed potential on a boundary tag of one region; the value function
// receives universal coordinates.
struct AtlasDirichlet {
  int region = 0;
  int tag = 0;
  std::function<double(const Point&)> value;
};

// Laplace problem on an atlas. Metric and material are given in the universal
// chart, keyed by element region tag; each chart may carry its own metric
// (Euclidean when absent). Chart materials follow the equivalence transform.
struct AtlasProblem {
  Atlas atlas;
  MetricField universal_metric;
  MaterialField universal_material;
  std::map<int, MetricField> chart_metric;  // keyed by atlas region id
  std::vector<AtlasDirichlet> dirichlet;
};

// The triplet seen by one region. Its chart field holds the region's map to
// the universal chart.
Triplet region_triplet(const AtlasProblem& p, std::size_t region_position);

struct AtlasSolution {
  GlobalIndex index;
  Vector potential;                  // per global dof
  std::vector<Vector> region_potential;  // per region, per local node
  double energy = 0.0;
  int iterations = 0;
};

struct AtlasSystem {
  GlobalIndex index;
  AssemblyLayout layout;
  SparseSymMatrix stiffness;
  DirichletData dirichlet;
  LinearSystem system;
};

AtlasSystem assemble_atlas(const AtlasProblem& p, const AssemblyOptions& options = {});
AtlasSolution solve_atlas(const AtlasProblem& p, const SolverConfig& cfg = {},
                          const AssemblyOptions& options = {});

}  // namespace trifem

#endif  // TRIFEM_ATLAS_HPP
