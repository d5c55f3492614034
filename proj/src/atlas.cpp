#include "trifem/atlas.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace trifem {

int Atlas::dim() const { return regions.empty() ? 2 : regions.front().mesh.dim(); }

std::size_t Atlas::index_of(int region_id) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].id == region_id) return i;
  throw Error(ErrorCode::InvalidArgument, "atlas has no region " + std::to_string(region_id));
}

AtlasRegion region_from_universal(int id, const ChartMap& to_universal, const Mesh& universal_mesh) {
  std::vector<Point> nodes;
  nodes.reserve(universal_mesh.num_nodes());
  for (const auto& x : universal_mesh.nodes()) nodes.push_back(to_universal.inverse(x));
  return AtlasRegion{id, to_universal, with_nodes(universal_mesh, std::move(nodes))};
}

namespace {

std::vector<Point> universal_nodes(const AtlasRegion& r) {
  std::vector<Point> out;
  out.reserve(r.mesh.num_nodes());
  for (const auto& y : r.mesh.nodes()) out.push_back(r.to_universal.forward(y));
  return out;
}

// Interface nodes of region at `pos` shared with the region at `other`, per
// declared interface.
struct Side {
  std::size_t pos;
  int tag;
  std::size_t other;
  int other_tag;
};

std::vector<Side> sides_of(const Atlas& a, std::size_t pos) {
  std::vector<Side> out;
  for (const auto& itf : a.interfaces) {
    const std::size_t pa = a.index_of(itf.region_a), pb = a.index_of(itf.region_b);
    if (pa == pos) out.push_back({pa, itf.tag_a, pb, itf.tag_b});
    if (pb == pos) out.push_back({pb, itf.tag_b, pa, itf.tag_a});
  }
  return out;
}

}  // namespace

double dedup_tolerance(const Atlas& a) {
  const int d = a.dim();
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (const auto& r : a.regions)
    for (const auto& x : universal_nodes(r)) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
  if (!lo.allFinite()) return 0.0;
  return 1e-9 * (hi - lo).norm();
}

GlobalIndex build_global_index(const Atlas& a) {
  for (const auto& itf : a.interfaces) {
    for (auto [id, tag] : {std::pair{itf.region_a, itf.tag_a}, std::pair{itf.region_b, itf.tag_b}}) {
      const auto& r = a.region(id);
      if (!r.mesh.has_boundary_tag(tag))
        throw Error(ErrorCode::InvalidSpec, "region " + std::to_string(id) +
                                                " has no boundary tag " + std::to_string(tag));
    }
    if (itf.region_a == itf.region_b)
      throw Error(ErrorCode::InvalidSpec, "interface joins region " +
                                              std::to_string(itf.region_a) + " to itself");
  }
  const double tol = dedup_tolerance(a);
  std::vector<std::vector<Point>> X;
  for (const auto& r : a.regions) X.push_back(universal_nodes(r));

  GlobalIndex g;
  g.dof.resize(a.regions.size());
  std::ostringstream mismatch;
  std::size_t unmatched = 0;
  auto report = [&](int region, int node, double dist) {
    if (unmatched++ < 20)
      mismatch << "\n  region " << region << " node " << node << ": nearest partner at distance "
               << dist;
  };

  for (std::size_t p = 0; p < a.regions.size(); ++p) {
    const auto& r = a.regions[p];
    g.dof[p].assign(r.mesh.num_nodes(), -1);
    // Interface nodes whose partner region comes earlier adopt its dofs.
    for (const Side& s : sides_of(a, p)) {
      if (s.other > p) continue;
      const auto partner = a.regions[s.other].mesh.boundary_nodes(s.other_tag);
      std::vector<char> hit(partner.size(), 0);
      for (int i : r.mesh.boundary_nodes(s.tag)) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t k = 0; k < partner.size(); ++k) {
          const double d = (X[p][static_cast<std::size_t>(i)] -
                            X[s.other][static_cast<std::size_t>(partner[k])]).norm();
          if (d < best) {
            best = d;
            arg = k;
          }
        }
        if (best > tol) {
          report(r.id, i, best);
          continue;
        }
        hit[arg] = 1;
        auto& slot = g.dof[p][static_cast<std::size_t>(i)];
        if (slot < 0) slot = g.dof[s.other][static_cast<std::size_t>(partner[arg])];
      }
      for (std::size_t k = 0; k < partner.size(); ++k) {
        if (hit[k]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int i : r.mesh.boundary_nodes(s.tag))
          best = std::min(best, (X[p][static_cast<std::size_t>(i)] -
                                 X[s.other][static_cast<std::size_t>(partner[k])]).norm());
        report(a.regions[s.other].id, partner[k], best);
      }
    }
    for (auto& slot : g.dof[p])
      if (slot < 0) slot = static_cast<int>(g.num_dofs++);
  }
  if (unmatched > 0)
    throw Error(ErrorCode::InterfaceMismatch,
                std::to_string(unmatched) + " unmatched interface node(s), tolerance " +
                    std::to_string(tol) + ":" + mismatch.str());
  return g;
}

std::vector<std::pair<int, Point>> map_interface_nodes(const Atlas& a, int from, int to) {
  for (const auto& itf : a.interfaces) {
    int tag;
    if (itf.region_a == from && itf.region_b == to) {
      tag = itf.tag_a;
    } else if (itf.region_b == from && itf.region_a == to) {
      tag = itf.tag_b;
    } else {
      continue;
    }
    const auto& rf = a.region(from);
    const auto& rt = a.region(to);
    std::vector<std::pair<int, Point>> out;
    for (int i : rf.mesh.boundary_nodes(tag))
      out.emplace_back(i, rt.to_universal.inverse(rf.to_universal.forward(rf.mesh.node(static_cast<std::size_t>(i)))));
    return out;
  }
  throw Error(ErrorCode::NoSuchInterface, "no interface between regions " + std::to_string(from) +
                                              " and " + std::to_string(to));
}

Triplet region_triplet(const AtlasProblem& p, std::size_t pos) {
  const AtlasRegion& r = p.atlas.regions.at(pos);
  const int d = r.mesh.dim();
  const auto it = p.chart_metric.find(r.id);
  MetricField S_c = it != p.chart_metric.end() ? it->second : MetricField::euclidean(d);
  MaterialField eps(d);
  const ChartMap T = r.to_universal;
  for (int tag : r.mesh.region_tags()) {
    if (!p.universal_material.has(tag))
      throw Error(ErrorCode::InvalidSpec, "no universal material for region tag " + std::to_string(tag));
    if (!p.universal_metric.has(tag))
      throw Error(ErrorCode::InvalidSpec, "no universal metric for region tag " + std::to_string(tag));
    const MetricField S_u = p.universal_metric;
    const MaterialField eps_u = p.universal_material;
    eps.function(
        tag,
        [=](const Point& y) {
          const Point x = T.forward(y);
          // Transition universal -> chart has Jacobian (dT)^-1.
          const Mat J = T.jacobian(y).inverse();
          return transform_material(eps_u(tag, x), S_u(tag, x), S_c(tag, y), J);
        },
        "atlas");
    TensorField::Entry e = *eps.find(tag);
    e.uniform = T.is_affine() && S_u.is_uniform(tag) && eps_u.is_uniform(tag) && S_c.is_uniform(tag);
    eps.set_region(tag, e);
  }
  return Triplet{T, std::move(S_c), std::move(eps)};
}

AtlasSystem assemble_atlas(const AtlasProblem& p, const AssemblyOptions& options) {
  const Atlas& a = p.atlas;
  if (a.regions.empty()) throw Error(ErrorCode::InvalidSpec, "atlas has no regions");
  if (p.dirichlet.empty())
    throw Error(ErrorCode::InvalidSpec, "at least one Dirichlet boundary tag is required");
  AtlasSystem s;
  s.index = build_global_index(a);
  std::vector<std::array<int, 4>> edofs;
  std::vector<LocalMatrix> locals;
  for (std::size_t pos = 0; pos < a.regions.size(); ++pos) {
    const auto& m = a.regions[pos].mesh;
    const CoefficientModel model(region_triplet(p, pos));
    auto loc = local_matrices(m, model, options);
    locals.insert(locals.end(), loc.begin(), loc.end());
    for (const auto& el : m.elements()) {
      std::array<int, 4> d{-1, -1, -1, -1};
      for (int k = 0; k <= m.dim(); ++k)
        d[static_cast<std::size_t>(k)] = s.index.dof[pos][static_cast<std::size_t>(el.nodes[static_cast<std::size_t>(k)])];
      edofs.push_back(d);
    }
  }
  s.layout = AssemblyLayout(s.index.num_dofs, a.dim() + 1, std::move(edofs));
  s.stiffness = s.layout.accumulate(locals);

  s.dirichlet.fixed.assign(s.index.num_dofs, 0);
  s.dirichlet.values = Vector::Zero(static_cast<Eigen::Index>(s.index.num_dofs));
  for (const auto& bc : p.dirichlet) {
    const std::size_t pos = a.index_of(bc.region);
    const auto& r = a.regions[pos];
    if (!r.mesh.has_boundary_tag(bc.tag))
      throw Error(ErrorCode::InvalidSpec, "region " + std::to_string(bc.region) +
                                              " has no boundary tag " + std::to_string(bc.tag));
    for (int i : r.mesh.boundary_nodes(bc.tag)) {
      const auto k = static_cast<std::size_t>(s.index.dof[pos][static_cast<std::size_t>(i)]);
      if (s.dirichlet.fixed[k]) continue;
      s.dirichlet.fixed[k] = 1;
      s.dirichlet.values(static_cast<Eigen::Index>(k)) =
          bc.value(r.to_universal.forward(r.mesh.node(static_cast<std::size_t>(i))));
    }
  }
  s.system = eliminate_dirichlet(s.stiffness, s.dirichlet);
  return s;
}

AtlasSolution solve_atlas(const AtlasProblem& p, const SolverConfig& cfg,
                          const AssemblyOptions& options) {
  const AtlasSystem s = assemble_atlas(p, options);
  const SolveResult r = solve(s.system.matrix, s.system.rhs, cfg);
  if (r.status == SolveStatus::MaxIterExceeded)
    throw Error(ErrorCode::MaxIterExceeded, "CG did not converge on the atlas system");
  AtlasSolution sol;
  sol.index = s.index;
  sol.potential = r.x;
  sol.iterations = r.iterations;
  sol.energy = quadratic_form(s.stiffness, r.x);
  for (const auto& dofs : s.index.dof) {
    Vector u(static_cast<Eigen::Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) u(static_cast<Eigen::Index>(i)) = r.x(dofs[i]);
    sol.region_potential.push_back(std::move(u));
  }
  return sol;
}

}  // namespace trifem
