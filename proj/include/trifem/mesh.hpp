#ifndef TRIFEM_MESH_HPP
#define TRIFEM_MESH_HPP

#include "trifem/geometry.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace trifem {

// Simplex with dim+1 used vertex slots; unused slots are -1.
struct Element {
  std::array<int, 4> nodes{-1, -1, -1, -1};
  int region = 0;
};

// Boundary facet with dim used vertex slots; unused slots are -1.
struct BoundaryFacet {
  std::array<int, 3> nodes{-1, -1, -1};
  int tag = 0;
};

// Simplicial mesh in one chart codomain. Construction validates indices,
// rejects degenerate simplices, flips negatively oriented elements, and checks
// that every boundary facet belongs to exactly one element.
class Mesh {
 public:
  Mesh() = default;
  Mesh(int dim, std::vector<Point> nodes, std::vector<Element> elements,
       std::vector<BoundaryFacet> facets);

  int dim() const { return dim_; }
  int vertices_per_element() const { return dim_ + 1; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_elements() const { return elements_.size(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<BoundaryFacet>& facets() const { return facets_; }

  const Point& node(std::size_t i) const { return nodes_[i]; }
  const Element& element(std::size_t e) const { return elements_[e]; }

  std::vector<Point> element_vertices(std::size_t e) const;
  Point centroid(std::size_t e) const;
  double signed_volume(std::size_t e) const;
  double volume(std::size_t e) const { return std::abs(signed_volume(e)); }

  // Sorted distinct tags.
  std::vector<int> boundary_tags() const;
  std::vector<int> region_tags() const;
  bool has_boundary_tag(int tag) const;
  // Sorted node indices on facets carrying `tag`.
  std::vector<int> boundary_nodes(int tag) const;

  // Optional human-readable names for boundary tags and regions.
  std::map<std::string, int> boundary_names;
  std::map<std::string, int> region_names;

  // Resolves a tag given either as a name or as a decimal integer. Returns
  // nullopt when neither matches.
  std::optional<int> find_boundary_tag(const std::string& name_or_number) const;

 private:
  int dim_ = 2;
  std::vector<Point> nodes_;
  std::vector<Element> elements_;
  std::vector<BoundaryFacet> facets_;
};

double simplex_signed_volume(std::span<const Point> vertices);

struct QualityReport {
  std::vector<double> aspect_ratio;  // circumradius / (dim * inradius), >= 1
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t worst_element = 0;
};

double aspect_ratio(std::span<const Point> vertices);
QualityReport quality(const Mesh& m);

// ---------------------------------------------------------------------------
// Structured generation
// ---------------------------------------------------------------------------

struct BoxShape {
  Vec lo;
  Vec hi;
};

struct AnnulusShape {
  Point center;
  double inner = 1.0;
  double outer = 2.0;
  // Radial node spacing: r_k = outer - (outer - inner) (1 - k/n)^grading.
  // 1 is uniform; larger values cluster rings toward the outer circle.
  double grading = 1.0;
};

using MeshShape = std::variant<BoxShape, AnnulusShape>;

// Box facet tags: 2D left=1 right=2 bottom=3 top=4; 3D xmin..zmax = 1..6.
// Annulus facet tags: inner=1 outer=2. All elements get region 1.
namespace box_tag {
inline constexpr int xmin = 1, xmax = 2, ymin = 3, ymax = 4, zmin = 5, zmax = 6;
}
namespace annulus_tag {
inline constexpr int inner = 1, outer = 2;
}

struct MeshingOptions {
  // Generation fails with DegenerateElement when any element's aspect ratio
  // exceeds this bound.
  double max_aspect_ratio = 1e4;
};

// Box: divisions per axis; 2 triangles per cell in 2D, 6 tetrahedra (Kuhn
// split) per cell in 3D. Annulus: divisions = {angular, radial}.
Mesh generate_structured(const MeshShape& shape, std::span<const int> divisions,
                         const MeshingOptions& options = {});

// Relabels element regions by `tag_of(centroid, old_region)`.
Mesh retag_regions(const Mesh& m, const std::function<int(const Point&, int)>& tag_of);

// Moves every node through `chart`. Throws DegenerateElement when the mapped
// mesh folds (mixed or zero element orientations).
Mesh map_mesh(const Mesh& m, const ChartMap& chart);

// Moves nodes to explicit positions; same folding checks as map_mesh.
Mesh with_nodes(const Mesh& m, std::vector<Point> nodes);

// Displaces every node not on a boundary facet by a uniform random offset of
// at most `amplitude` per coordinate. Deterministic for a given seed.
Mesh jitter_interior_nodes(const Mesh& m, double amplitude, std::uint64_t seed);

}  // namespace trifem

#endif  // TRIFEM_MESH_HPP
