#include "trifem/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace trifem {

namespace {

using FacetKey = std::array<int, 3>;

FacetKey sorted_key(std::span<const int> nodes) {
  FacetKey key{-1, -1, -1};
  std::copy(nodes.begin(), nodes.end(), key.begin());
  std::sort(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(nodes.size()));
  return key;
}

// Facets of a simplex, as index lists into its vertex slots.
std::vector<std::vector<int>> local_facets(int dim) {
  if (dim == 2) return {{1, 2}, {0, 2}, {0, 1}};
  return {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
}

std::map<FacetKey, int> facet_counts(int dim, const std::vector<Element>& elements) {
  std::map<FacetKey, int> counts;
  const auto lf = local_facets(dim);
  std::vector<int> buf(static_cast<std::size_t>(dim));
  for (const auto& el : elements) {
    for (const auto& f : lf) {
      for (std::size_t i = 0; i < f.size(); ++i) buf[i] = el.nodes[static_cast<std::size_t>(f[i])];
      ++counts[sorted_key(buf)];
    }
  }
  return counts;
}

double max_edge(std::span<const Point> v) {
  double h = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) h = std::max(h, (v[i] - v[j]).norm());
  return h;
}

bool is_degenerate(std::span<const Point> v, double signed_vol) {
  const double h = max_edge(v);
  const int dim = static_cast<int>(v.size()) - 1;
  return !(std::abs(signed_vol) > 1e-13 * std::pow(h, dim)) || !std::isfinite(signed_vol);
}

std::string element_desc(std::size_t e) { return "element " + std::to_string(e); }

}  // namespace

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

double simplex_signed_volume(std::span<const Point> v) {
  const auto n = static_cast<Eigen::Index>(v.size()) - 1;
  Mat E(n, n);
  for (Eigen::Index i = 0; i < n; ++i) E.col(i) = v[static_cast<std::size_t>(i + 1)] - v[0];
  return E.determinant() / (n == 2 ? 2.0 : 6.0);
}

Mesh::Mesh(int dim, std::vector<Point> nodes, std::vector<Element> elements,
           std::vector<BoundaryFacet> facets)
    : dim_(dim), nodes_(std::move(nodes)), elements_(std::move(elements)),
      facets_(std::move(facets)) {
  if (dim_ != 2 && dim_ != 3)
    throw Error(ErrorCode::InvalidMesh, "mesh dimension must be 2 or 3");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].size() != dim_)
      throw Error(ErrorCode::InvalidMesh, "node " + std::to_string(i) + " has wrong dimension");
    if (!nodes_[i].allFinite())
      throw Error(ErrorCode::InvalidMesh, "node " + std::to_string(i) + " is not finite");
  }
  const auto nv = static_cast<std::size_t>(dim_ + 1);
  const auto nn = static_cast<int>(nodes_.size());
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    auto& el = elements_[e];
    for (std::size_t k = 0; k < 4; ++k) {
      const int id = el.nodes[k];
      if (k < nv && (id < 0 || id >= nn))
        throw Error(ErrorCode::InvalidMesh, element_desc(e) + " references node " +
                                                std::to_string(id) + " out of range");
      if (k >= nv) el.nodes[k] = -1;
    }
    const double vol = signed_volume(e);
    const auto verts = element_vertices(e);
    if (is_degenerate(verts, vol))
      throw Error(ErrorCode::DegenerateElement, element_desc(e) + " has (near) zero volume");
    if (vol < 0) std::swap(el.nodes[0], el.nodes[1]);
  }
  const auto counts = facet_counts(dim_, elements_);
  const auto nf = static_cast<std::size_t>(dim_);
  for (std::size_t f = 0; f < facets_.size(); ++f) {
    auto& facet = facets_[f];
    for (std::size_t k = 0; k < 3; ++k) {
      const int id = facet.nodes[k];
      if (k < nf && (id < 0 || id >= nn))
        throw Error(ErrorCode::InvalidMesh,
                    "boundary facet " + std::to_string(f) + " references node out of range");
      if (k >= nf) facet.nodes[k] = -1;
    }
    const auto key = sorted_key(std::span<const int>(facet.nodes.data(), nf));
    auto it = counts.find(key);
    if (it == counts.end() || it->second != 1)
      throw Error(ErrorCode::InvalidMesh, "boundary facet " + std::to_string(f) +
                                              " is not a facet of exactly one element");
  }
}

std::vector<Point> Mesh::element_vertices(std::size_t e) const {
  std::vector<Point> v;
  v.reserve(static_cast<std::size_t>(dim_ + 1));
  for (int k = 0; k <= dim_; ++k)
    v.push_back(nodes_[static_cast<std::size_t>(elements_[e].nodes[static_cast<std::size_t>(k)])]);
  return v;
}

Point Mesh::centroid(std::size_t e) const {
  Point c = Point::Zero(dim_);
  for (int k = 0; k <= dim_; ++k)
    c += nodes_[static_cast<std::size_t>(elements_[e].nodes[static_cast<std::size_t>(k)])];
  return c / (dim_ + 1);
}

double Mesh::signed_volume(std::size_t e) const {
  return simplex_signed_volume(element_vertices(e));
}

std::vector<int> Mesh::boundary_tags() const {
  std::set<int> tags;
  for (const auto& f : facets_) tags.insert(f.tag);
  return {tags.begin(), tags.end()};
}

std::vector<int> Mesh::region_tags() const {
  std::set<int> tags;
  for (const auto& e : elements_) tags.insert(e.region);
  return {tags.begin(), tags.end()};
}

bool Mesh::has_boundary_tag(int tag) const {
  return std::any_of(facets_.begin(), facets_.end(),
                     [tag](const BoundaryFacet& f) { return f.tag == tag; });
}

std::vector<int> Mesh::boundary_nodes(int tag) const {
  std::set<int> ids;
  for (const auto& f : facets_)
    if (f.tag == tag)
      for (int k = 0; k < dim_; ++k) ids.insert(f.nodes[static_cast<std::size_t>(k)]);
  return {ids.begin(), ids.end()};
}

std::optional<int> Mesh::find_boundary_tag(const std::string& name_or_number) const {
  if (auto it = boundary_names.find(name_or_number); it != boundary_names.end())
    return it->second;
  int value = 0;
  const char* first = name_or_number.data();
  const char* last = first + name_or_number.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc() && ptr == last && !name_or_number.empty()) return value;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Quality
// ---------------------------------------------------------------------------

double aspect_ratio(std::span<const Point> v) {
  if (v.size() == 3) {
    const double a = (v[1] - v[2]).norm();
    const double b = (v[0] - v[2]).norm();
    const double c = (v[0] - v[1]).norm();
    const double area = std::abs(simplex_signed_volume(v));
    const double circum = a * b * c / (4.0 * area);
    const double in = area / (0.5 * (a + b + c));
    return circum / (2.0 * in);
  }
  const double vol = std::abs(simplex_signed_volume(v));
  double faces = 0.0;
  for (const auto& f : local_facets(3)) {
    const Vec e1 = v[static_cast<std::size_t>(f[1])] - v[static_cast<std::size_t>(f[0])];
    const Vec e2 = v[static_cast<std::size_t>(f[2])] - v[static_cast<std::size_t>(f[0])];
    faces += 0.5 * Eigen::Vector3d(e1(0), e1(1), e1(2)).cross(Eigen::Vector3d(e2(0), e2(1), e2(2))).norm();
  }
  const double in = 3.0 * vol / faces;
  Mat A(3, 3);
  Vec rhs(3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Vec d = v[static_cast<std::size_t>(i + 1)] - v[0];
    A.row(i) = 2.0 * d.transpose();
    rhs(i) = d.squaredNorm();
  }
  const Vec center_offset = A.partialPivLu().solve(rhs);
  return center_offset.norm() / (3.0 * in);
}

QualityReport quality(const Mesh& m) {
  QualityReport q;
  q.aspect_ratio.reserve(m.num_elements());
  double sum = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const double ar = aspect_ratio(m.element_vertices(e));
    q.aspect_ratio.push_back(ar);
    sum += ar;
    if (e == 0 || ar < q.min) q.min = ar;
    if (e == 0 || ar > q.max) {
      q.max = ar;
      q.worst_element = e;
    }
  }
  if (m.num_elements() > 0) q.mean = sum / static_cast<double>(m.num_elements());
  return q;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

std::vector<BoundaryFacet> exterior_facets(int dim, const std::vector<Element>& elements,
                                           const std::function<int(std::span<const int>)>& tag_of) {
  const auto counts = facet_counts(dim, elements);
  std::vector<BoundaryFacet> out;
  const auto lf = local_facets(dim);
  for (const auto& el : elements) {
    for (const auto& f : lf) {
      BoundaryFacet bf;
      for (std::size_t i = 0; i < f.size(); ++i) bf.nodes[i] = el.nodes[static_cast<std::size_t>(f[i])];
      const auto key = sorted_key(std::span<const int>(bf.nodes.data(), f.size()));
      if (counts.at(key) != 1) continue;
      bf.tag = tag_of(std::span<const int>(bf.nodes.data(), f.size()));
      out.push_back(bf);
    }
  }
  return out;
}

Mesh generate_box(const BoxShape& box, std::span<const int> div) {
  const auto dim = static_cast<int>(box.lo.size());
  if (dim != 2 && dim != 3) throw Error(ErrorCode::DegenerateShape, "box must be 2D or 3D");
  require_dim(box.hi.size(), dim, "box corners");
  if (static_cast<int>(div.size()) != dim)
    throw Error(ErrorCode::InvalidArgument, "box needs one division count per axis");
  for (int a = 0; a < dim; ++a) {
    if (div[static_cast<std::size_t>(a)] < 1)
      throw Error(ErrorCode::InvalidArgument, "divisions must be >= 1");
    if (!(box.hi(a) > box.lo(a)))
      throw Error(ErrorCode::DegenerateShape, "box has zero or negative extent along axis " +
                                                  std::to_string(a));
  }
  const int nx = div[0], ny = div[1], nz = dim == 3 ? div[2] : 0;
  auto coord = [&](int axis, int i) {
    const int n = div[static_cast<std::size_t>(axis)];
    if (i == n) return box.hi(axis);
    return box.lo(axis) + (box.hi(axis) - box.lo(axis)) * static_cast<double>(i) / n;
  };
  std::vector<Point> nodes;
  auto id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        Point p(dim);
        p(0) = coord(0, i);
        p(1) = coord(1, j);
        if (dim == 3) p(2) = coord(2, k);
        nodes.push_back(p);
      }
  std::vector<Element> elements;
  if (dim == 2) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int p00 = id(i, j, 0), p10 = id(i + 1, j, 0), p01 = id(i, j + 1, 0),
                  p11 = id(i + 1, j + 1, 0);
        elements.push_back({{p00, p10, p11, -1}, 1});
        elements.push_back({{p00, p11, p01, -1}, 1});
      }
  } else {
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
          for (const auto& p : perms) {
            std::array<int, 3> c{i, j, k};
            Element el;
            el.region = 1;
            el.nodes[0] = id(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              ++c[static_cast<std::size_t>(p[s])];
              el.nodes[static_cast<std::size_t>(s + 1)] = id(c[0], c[1], c[2]);
            }
            elements.push_back(el);
          }
  }
  auto tag_of = [&](std::span<const int> f) {
    for (int axis = 0; axis < dim; ++axis) {
      for (int side = 0; side < 2; ++side) {
        const double plane = side == 0 ? box.lo(axis) : box.hi(axis);
        const bool on = std::all_of(f.begin(), f.end(), [&](int n) {
          return nodes[static_cast<std::size_t>(n)](axis) == plane;
        });
        if (on) return 1 + 2 * axis + side;
      }
    }
    throw Error(ErrorCode::InvalidMesh, "exterior facet not on a box side");
  };
  auto facets = exterior_facets(dim, elements, tag_of);
  Mesh m(dim, std::move(nodes), std::move(elements), std::move(facets));
  if (dim == 2) {
    m.boundary_names = {{"left", 1}, {"right", 2}, {"bottom", 3}, {"top", 4}};
  } else {
    m.boundary_names = {{"xmin", 1}, {"xmax", 2}, {"ymin", 3}, {"ymax", 4}, {"zmin", 5}, {"zmax", 6}};
  }
  m.region_names = {{"domain", 1}};
  return m;
}

Mesh generate_annulus(const AnnulusShape& a, std::span<const int> div) {
  require_dim(a.center.size(), 2, "annulus center");
  if (div.size() != 2) throw Error(ErrorCode::InvalidArgument, "annulus needs {angular, radial}");
  const int nt = div[0], nr = div[1];
  if (nt < 3 || nr < 1) throw Error(ErrorCode::InvalidArgument, "annulus needs >= 3 angular and >= 1 radial divisions");
  if (!(a.inner > 0) || !(a.outer > a.inner))
    throw Error(ErrorCode::DegenerateShape, "annulus needs 0 < inner < outer");
  if (!(a.grading >= 1.0)) throw Error(ErrorCode::InvalidArgument, "annulus grading must be >= 1");
  std::vector<Point> nodes;
  auto id = [&](int k, int m) { return (m % nt) + nt * k; };
  for (int k = 0; k <= nr; ++k) {
    const double s = 1.0 - static_cast<double>(k) / nr;
    const double r = k == nr ? a.outer : a.outer - (a.outer - a.inner) * std::pow(s, a.grading);
    for (int m = 0; m < nt; ++m) {
      const double t = 2.0 * std::numbers::pi * m / nt;
      nodes.push_back(a.center + r * make_vec({std::cos(t), std::sin(t)}));
    }
  }
  std::vector<Element> elements;
  for (int k = 0; k < nr; ++k)
    for (int m = 0; m < nt; ++m) {
      const int p0 = id(k, m), p1 = id(k + 1, m), p2 = id(k + 1, m + 1), p3 = id(k, m + 1);
      elements.push_back({{p0, p1, p2, -1}, 1});
      elements.push_back({{p0, p2, p3, -1}, 1});
    }
  auto tag_of = [&](std::span<const int> f) {
    return f[0] < nt ? annulus_tag::inner : annulus_tag::outer;
  };
  auto facets = exterior_facets(2, elements, tag_of);
  Mesh m(2, std::move(nodes), std::move(elements), std::move(facets));
  m.boundary_names = {{"inner", annulus_tag::inner}, {"outer", annulus_tag::outer}};
  m.region_names = {{"domain", 1}};
  return m;
}

}  // namespace

Mesh generate_structured(const MeshShape& shape, std::span<const int> divisions,
                         const MeshingOptions& options) {
  Mesh m = std::holds_alternative<BoxShape>(shape)
               ? generate_box(std::get<BoxShape>(shape), divisions)
               : generate_annulus(std::get<AnnulusShape>(shape), divisions);
  const auto q = quality(m);
  if (q.max > options.max_aspect_ratio) {
    std::ostringstream os;
    os << "element " << q.worst_element << " has aspect ratio " << q.max << " above the limit "
       << options.max_aspect_ratio;
    throw Error(ErrorCode::DegenerateElement, os.str());
  }
  return m;
}

Mesh retag_regions(const Mesh& m, const std::function<int(const Point&, int)>& tag_of) {
  auto elements = m.elements();
  for (std::size_t e = 0; e < elements.size(); ++e)
    elements[e].region = tag_of(m.centroid(e), elements[e].region);
  Mesh out(m.dim(), m.nodes(), std::move(elements), m.facets());
  out.boundary_names = m.boundary_names;
  out.region_names = m.region_names;
  return out;
}

Mesh with_nodes(const Mesh& m, std::vector<Point> nodes) {
  if (nodes.size() != m.num_nodes())
    throw Error(ErrorCode::LengthMismatch, "node count changed");
  auto elements = m.elements();
  int sign = 0;
  for (std::size_t e = 0; e < elements.size(); ++e) {
    std::vector<Point> v;
    for (int k = 0; k <= m.dim(); ++k)
      v.push_back(nodes[static_cast<std::size_t>(elements[e].nodes[static_cast<std::size_t>(k)])]);
    const double vol = simplex_signed_volume(v);
    const int s = is_degenerate(v, vol) ? 0 : (vol > 0 ? 1 : -1);
    if (s == 0 || (sign != 0 && s != sign))
      throw Error(ErrorCode::DegenerateElement,
                  element_desc(e) + " is folded or collapsed by the node map");
    sign = s;
  }
  Mesh out(m.dim(), std::move(nodes), std::move(elements), m.facets());
  out.boundary_names = m.boundary_names;
  out.region_names = m.region_names;
  return out;
}

Mesh map_mesh(const Mesh& m, const ChartMap& chart) {
  require_dim(chart.dim(), m.dim(), "map_mesh");
  std::vector<Point> nodes;
  nodes.reserve(m.num_nodes());
  for (const auto& p : m.nodes()) nodes.push_back(chart.forward(p));
  return with_nodes(m, std::move(nodes));
}

Mesh jitter_interior_nodes(const Mesh& m, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter amplitude must be >= 0");
  std::vector<char> on_boundary(m.num_nodes(), 0);
  for (const auto& f : m.facets())
    for (int k = 0; k < m.dim(); ++k) on_boundary[static_cast<std::size_t>(f.nodes[static_cast<std::size_t>(k)])] = 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amplitude, amplitude);
  std::vector<Point> nodes = m.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (on_boundary[i]) continue;
    for (Eigen::Index k = 0; k < nodes[i].size(); ++k) nodes[i](k) += U(rng);
  }
  return with_nodes(m, std::move(nodes));
}

}  // namespace trifem
