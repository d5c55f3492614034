#include "trifem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace trifem {

DirichletCondition DirichletCondition::constant(int tag, double v) {
  DirichletCondition c;
  c.tag = tag;
  c.constant_value = v;
  c.value = [v](const Point&) { return v; };
  return c;
}

DirichletCondition DirichletCondition::function(int tag, std::function<double(const Point&)> fn) {
  DirichletCondition c;
  c.tag = tag;
  c.value = std::move(fn);
  return c;
}

void validate(const BVPSpec& spec) {
  const Mesh& m = spec.mesh;
  if (spec.triplet.dim() != m.dim())
    throw Error(ErrorCode::InvalidSpec, "triplet dimension " + std::to_string(spec.triplet.dim()) +
                                            " does not match mesh dimension " +
                                            std::to_string(m.dim()));
  if (spec.dirichlet.empty())
    throw Error(ErrorCode::InvalidSpec, "at least one Dirichlet boundary tag is required");
  for (const auto& d : spec.dirichlet) {
    if (!m.has_boundary_tag(d.tag))
      throw Error(ErrorCode::InvalidSpec,
                  "Dirichlet boundary tag " + std::to_string(d.tag) + " does not exist in the mesh");
    if (!d.constant_value && !d.value)
      throw Error(ErrorCode::InvalidSpec,
                  "Dirichlet condition on tag " + std::to_string(d.tag) + " has no value");
  }
  for (int r : m.region_tags()) {
    if (!spec.triplet.material.has(r))
      throw Error(ErrorCode::InvalidSpec, "no material for region " + std::to_string(r));
    if (!spec.triplet.metric.has(r))
      throw Error(ErrorCode::InvalidSpec, "no metric for region " + std::to_string(r));
  }
}

// ---------------------------------------------------------------------------

QuadratureRule centroid_rule(int dim) {
  QuadratureRule q;
  q.points.push_back(Barycentric::Constant(dim + 1, 1.0 / (dim + 1)));
  q.weights.push_back(1.0);
  return q;
}

QuadratureRule full_rule(int dim) {
  QuadratureRule q;
  if (dim == 2) {
    for (int k = 0; k < 3; ++k) {
      Barycentric b = Barycentric::Constant(3, 1.0 / 6.0);
      b(k) = 2.0 / 3.0;
      q.points.push_back(b);
      q.weights.push_back(1.0 / 3.0);
    }
  } else if (dim == 3) {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    for (int k = 0; k < 4; ++k) {
      Barycentric p = Barycentric::Constant(4, b);
      p(k) = a;
      q.points.push_back(p);
      q.weights.push_back(0.25);
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "quadrature dimension must be 2 or 3");
  }
  return q;
}

QuadratureRule select_rule(int dim, bool uniform, QuadratureChoice choice) {
  switch (choice) {
    case QuadratureChoice::Centroid: return centroid_rule(dim);
    case QuadratureChoice::Full: return full_rule(dim);
    case QuadratureChoice::Auto: break;
  }
  return uniform ? centroid_rule(dim) : full_rule(dim);
}

SimplexGradients simplex_gradients(std::span<const Point> v) {
  const auto n = static_cast<Eigen::Index>(v.size()) - 1;
  if (n != 2 && n != 3)
    throw Error(ErrorCode::InvalidArgument, "simplex must have 3 or 4 vertices");
  Mat E = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require_dim(v[static_cast<std::size_t>(i + 1)].size(), n, "simplex vertex");
    E.col(i) = v[static_cast<std::size_t>(i + 1)] - v[0];
  }
  // Explicit cofactors keep the gradients exact up to one rounding per entry.
  Mat adj(n, n);
  double det;
  if (n == 2) {
    adj << E(1, 1), -E(0, 1), -E(1, 0), E(0, 0);
    det = E(0, 0) * E(1, 1) - E(0, 1) * E(1, 0);
  } else {
    adj(0, 0) = E(1, 1) * E(2, 2) - E(1, 2) * E(2, 1);
    adj(0, 1) = E(0, 2) * E(2, 1) - E(0, 1) * E(2, 2);
    adj(0, 2) = E(0, 1) * E(1, 2) - E(0, 2) * E(1, 1);
    adj(1, 0) = E(1, 2) * E(2, 0) - E(1, 0) * E(2, 2);
    adj(1, 1) = E(0, 0) * E(2, 2) - E(0, 2) * E(2, 0);
    adj(1, 2) = E(0, 2) * E(1, 0) - E(0, 0) * E(1, 2);
    adj(2, 0) = E(1, 0) * E(2, 1) - E(1, 1) * E(2, 0);
    adj(2, 1) = E(0, 1) * E(2, 0) - E(0, 0) * E(2, 1);
    adj(2, 2) = E(0, 0) * E(1, 1) - E(0, 1) * E(1, 0);
    det = E(0, 0) * adj(0, 0) + E(0, 1) * adj(1, 0) + E(0, 2) * adj(2, 0);
  }
  double hmax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) hmax = std::max(hmax, E.col(i).norm());
  if (!(std::abs(det) > 1e-13 * std::pow(hmax, static_cast<double>(n))))
    throw Error(ErrorCode::DegenerateElement, "degenerate simplex (determinant " +
                                                  std::to_string(det) + ")");
  SimplexGradients g;
  g.volume = std::abs(det) / (n == 2 ? 2.0 : 6.0);
  g.grads.resize(n + 1, n);
  // Rows of E^-1 are the gradients of phi_1..phi_n.
  g.grads.bottomRows(n) = adj / det;
  g.grads.row(0) = -g.grads.bottomRows(n).colwise().sum();
  return g;
}

LocalMatrix local_stiffness(std::span<const Point> vertices, const CoefficientFn& K,
                            const QuadratureRule& rule) {
  const SimplexGradients g = simplex_gradients(vertices);
  const auto n = static_cast<Eigen::Index>(vertices.size()) - 1;
  Mat Kq = Mat::Zero(n, n);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    Point x = Point::Zero(n);
    for (std::size_t a = 0; a < vertices.size(); ++a)
      x += rule.points[q](static_cast<Eigen::Index>(a)) * vertices[a];
    const Mat k = K(x);
    require_dim(k.rows(), n, "coefficient rows");
    require_dim(k.cols(), n, "coefficient cols");
    Kq += rule.weights[q] * k;
  }
  LocalMatrix A = g.volume * (g.grads * Kq * g.grads.transpose());
  return 0.5 * (A + A.transpose());
}

// ---------------------------------------------------------------------------

Mat CoefficientModel::coefficient(int region, const Point& x) const {
  return effective_coefficient(material(region, x), metric(region, x));
}

bool CoefficientModel::uniform(int region) const {
  return triplet_.metric.is_uniform(region) && triplet_.material.is_uniform(region);
}

ElementCoefficient element_coefficient(const CoefficientModel& model, int region,
                                       std::span<const Point> vertices, QuadratureChoice choice) {
  ElementCoefficient c;
  c.material = model.element_material(region, vertices);
  const bool constant = model.uniform(region) || (c.material && model.metric_uniform(region));
  c.rule = select_rule(static_cast<int>(vertices.size()) - 1, constant, choice);
  return c;
}

LocalMatrix element_stiffness(const Mesh& mesh, std::size_t e, const CoefficientModel& model,
                              QuadratureChoice choice) {
  const int region = mesh.element(e).region;
  try {
    const auto verts = mesh.element_vertices(e);
    const ElementCoefficient c = element_coefficient(model, region, verts, choice);
    if (!c.material)
      return local_stiffness(verts, [&](const Point& x) { return model.coefficient(region, x); }, c.rule);
    return local_stiffness(
        verts, [&](const Point& x) { return effective_coefficient(*c.material, model.metric(region, x)); },
        c.rule);
  } catch (const Error& err) {
    throw Error(err.code(), "element " + std::to_string(e) + ": " + err.what());
  }
}

namespace {

void compute_range(const Mesh& mesh, const CoefficientModel& model, const AssemblyOptions& options,
                   std::size_t first, std::size_t last, std::vector<LocalMatrix>& out) {
  for (std::size_t e = first; e < last; ++e) out[e] = element_stiffness(mesh, e, model, options.quadrature);
}

}  // namespace

std::vector<LocalMatrix> local_matrices(const Mesh& mesh, const CoefficientModel& model,
                                        const AssemblyOptions& options) {
  const std::size_t ne = mesh.num_elements();
  std::vector<LocalMatrix> out(ne);
  const auto workers = static_cast<std::size_t>(std::max(1, options.threads));
  if (workers == 1 || ne < 2 * workers) {
    compute_range(mesh, model, options, 0, ne, out);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (ne + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t first = std::min(ne, w * chunk), last = std::min(ne, first + chunk);
    pool.emplace_back([&, w, first, last] {
      try {
        compute_range(mesh, model, options, first, last, out);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // The lowest failing chunk holds the lowest failing element.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------

AssemblyLayout::AssemblyLayout(std::size_t num_dofs, int nodes_per_element,
                               std::vector<std::array<int, 4>> element_dofs)
    : num_dofs_(num_dofs), nv_(nodes_per_element), element_dofs_(std::move(element_dofs)) {
  if (nv_ < 1 || nv_ > 4) throw Error(ErrorCode::InvalidArgument, "nodes per element must be 1..4");
  std::vector<std::vector<int>> adj(num_dofs_);
  for (std::size_t e = 0; e < element_dofs_.size(); ++e)
    for (int a = 0; a < nv_; ++a) {
      const int i = element_dofs_[e][static_cast<std::size_t>(a)];
      if (i < 0 || static_cast<std::size_t>(i) >= num_dofs_)
        throw Error(ErrorCode::InvalidArgument,
                    "element " + std::to_string(e) + " references dof " + std::to_string(i));
      for (int b = 0; b < nv_; ++b) adj[static_cast<std::size_t>(i)].push_back(element_dofs_[e][static_cast<std::size_t>(b)]);
    }
  std::vector<std::size_t> rp{0};
  std::vector<int> cols;
  for (std::size_t i = 0; i < num_dofs_; ++i) {
    auto& row = adj[i];
    row.push_back(static_cast<int>(i));
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    cols.insert(cols.end(), row.begin(), row.end());
    rp.push_back(cols.size());
  }
  const std::size_t nnz = cols.size();
  pattern_ = SparseSymMatrix(num_dofs_, std::move(rp), std::move(cols), std::vector<double>(nnz, 0.0));
  scatter_.resize(element_dofs_.size());
  for (std::size_t e = 0; e < element_dofs_.size(); ++e)
    for (int a = 0; a < nv_; ++a)
      for (int b = 0; b < nv_; ++b)
        scatter_[e][static_cast<std::size_t>(a * nv_ + b)] =
            *pattern_.position(static_cast<std::size_t>(element_dofs_[e][static_cast<std::size_t>(a)]),
                               static_cast<std::size_t>(element_dofs_[e][static_cast<std::size_t>(b)]));
}

AssemblyLayout AssemblyLayout::for_mesh(const Mesh& mesh) {
  std::vector<std::array<int, 4>> dofs;
  dofs.reserve(mesh.num_elements());
  for (const auto& el : mesh.elements()) dofs.push_back(el.nodes);
  return AssemblyLayout(mesh.num_nodes(), mesh.vertices_per_element(), std::move(dofs));
}

SparseSymMatrix AssemblyLayout::accumulate(std::span<const LocalMatrix> locals) const {
  if (locals.size() != element_dofs_.size())
    throw Error(ErrorCode::LengthMismatch, "expected " + std::to_string(element_dofs_.size()) +
                                               " element matrices, got " +
                                               std::to_string(locals.size()));
  SparseSymMatrix A = pattern_;
  auto& v = A.values();
  for (std::size_t e = 0; e < locals.size(); ++e)
    for (int a = 0; a < nv_; ++a)
      for (int b = 0; b < nv_; ++b)
        v[scatter_[e][static_cast<std::size_t>(a * nv_ + b)]] += locals[e](a, b);
  return A;
}

std::size_t AssemblyLayout::reaccumulate(std::span<const LocalMatrix> locals,
                                         std::span<const std::size_t> changed,
                                         SparseSymMatrix& A) const {
  if (locals.size() != element_dofs_.size())
    throw Error(ErrorCode::LengthMismatch, "element matrix count does not match layout");
  if (!A.same_pattern(pattern_))
    throw Error(ErrorCode::InvalidArgument, "matrix pattern does not match layout");
  std::vector<char> dirty(pattern_.nnz(), 0);
  const std::size_t slots = static_cast<std::size_t>(nv_ * nv_);
  for (std::size_t e : changed) {
    if (e >= element_dofs_.size())
      throw Error(ErrorCode::InvalidArgument, "changed element " + std::to_string(e) + " out of range");
    for (std::size_t s = 0; s < slots; ++s) dirty[scatter_[e][s]] = 1;
  }
  auto& v = A.values();
  std::size_t count = 0;
  for (std::size_t k = 0; k < dirty.size(); ++k)
    if (dirty[k]) {
      v[k] = 0.0;
      ++count;
    }
  if (count == 0) return 0;
  for (std::size_t e = 0; e < locals.size(); ++e)
    for (int a = 0; a < nv_; ++a)
      for (int b = 0; b < nv_; ++b) {
        const std::size_t k = scatter_[e][static_cast<std::size_t>(a * nv_ + b)];
        if (dirty[k]) v[k] += locals[e](a, b);
      }
  return count;
}

// ---------------------------------------------------------------------------

DirichletData dirichlet_values(const Mesh& mesh, std::span<const DirichletCondition> conditions) {
  DirichletData d;
  d.fixed.assign(mesh.num_nodes(), 0);
  d.values = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (const auto& c : conditions)
    for (int i : mesh.boundary_nodes(c.tag)) {
      const auto k = static_cast<std::size_t>(i);
      if (d.fixed[k]) continue;
      d.fixed[k] = 1;
      d.values(i) = c(mesh.node(k));
    }
  return d;
}

LinearSystem eliminate_dirichlet(const SparseSymMatrix& K, const DirichletData& d) {
  if (d.fixed.size() != K.size() || static_cast<std::size_t>(d.values.size()) != K.size())
    throw Error(ErrorCode::DimensionMismatch, "Dirichlet data size does not match matrix");
  LinearSystem s;
  s.matrix = K;
  s.rhs = Vector::Zero(static_cast<Eigen::Index>(K.size()));
  auto& v = s.matrix.values();
  const auto& rp = K.row_ptr();
  const auto& cols = K.cols();
  for (std::size_t i = 0; i < K.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (d.fixed[i]) {
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
        v[k] = static_cast<std::size_t>(cols[k]) == i ? 1.0 : 0.0;
      s.rhs(ii) = d.values(ii);
      continue;
    }
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(cols[k]);
      if (d.fixed[j]) {
        s.rhs(ii) -= v[k] * d.values(cols[k]);
        v[k] = 0.0;
      }
    }
  }
  return s;
}

AssembledSystem assemble(const BVPSpec& spec, const AssemblyOptions& options) {
  validate(spec);
  AssembledSystem out;
  out.layout = AssemblyLayout::for_mesh(spec.mesh);
  out.locals = local_matrices(spec.mesh, CoefficientModel(spec.triplet), options);
  out.stiffness = out.layout.accumulate(out.locals);
  out.dirichlet = dirichlet_values(spec.mesh, spec.dirichlet);
  out.system = eliminate_dirichlet(out.stiffness, out.dirichlet);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Vec element_gradient(const Vector& u, const Mesh& m, std::size_t e, double* volume = nullptr) {
  const auto g = simplex_gradients(m.element_vertices(e));
  Vec grad = Vec::Zero(m.dim());
  for (int a = 0; a <= m.dim(); ++a)
    grad += u(m.element(e).nodes[static_cast<std::size_t>(a)]) * g.grads.row(a).transpose();
  if (volume) *volume = g.volume;
  return grad;
}

void require_potential(const Vector& u, const Mesh& m) {
  if (static_cast<std::size_t>(u.size()) != m.num_nodes())
    throw Error(ErrorCode::DimensionMismatch, "potential has " + std::to_string(u.size()) +
                                                  " entries, mesh has " +
                                                  std::to_string(m.num_nodes()) + " nodes");
}

}  // namespace

FieldVector element_field(const Vector& u, const BVPSpec& spec, std::size_t e) {
  require_potential(u, spec.mesh);
  if (e >= spec.mesh.num_elements())
    throw Error(ErrorCode::InvalidArgument, "element " + std::to_string(e) + " out of range");
  const Point c = spec.mesh.centroid(e);
  const Mat S = spec.triplet.metric(spec.mesh.element(e).region, c);
  FieldVector E;
  E.components = -S.llt().solve(element_gradient(u, spec.mesh, e));
  E.at = c;
  E.frame = spec.triplet.chart.name();
  return E;
}

std::vector<Vec> element_fields(const Vector& u, const BVPSpec& spec) {
  std::vector<Vec> out;
  out.reserve(spec.mesh.num_elements());
  for (std::size_t e = 0; e < spec.mesh.num_elements(); ++e)
    out.push_back(element_field(u, spec, e).components);
  return out;
}

double energy(const Vector& u, const BVPSpec& spec, const AssemblyOptions& options) {
  const Mesh& m = spec.mesh;
  require_potential(u, m);
  const CoefficientModel model(spec.triplet);
  double W = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const int region = m.element(e).region;
    const auto verts = m.element_vertices(e);
    const ElementCoefficient c = element_coefficient(model, region, verts, options.quadrature);
    const QuadratureRule& rule = c.rule;
    double vol = 0.0;
    const Vec grad = element_gradient(u, m, e, &vol);
    double w = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Point x = Point::Zero(m.dim());
      for (std::size_t a = 0; a < verts.size(); ++a)
        x += rule.points[q](static_cast<Eigen::Index>(a)) * verts[a];
      const Mat S = model.metric(region, x);
      const Vec E = -S.llt().solve(grad);
      w += rule.weights[q] * E.dot(S * (c.eps(region, x, model) * E));
    }
    W += vol * w;
  }
  return W;
}

double energy(const Solution& sol, const BVPSpec& spec, const AssemblyOptions& options) {
  return energy(sol.potential, spec, options);
}

std::optional<double> interpolate(const Mesh& m, const Vector& u, const Point& x) {
  require_potential(u, m);
  require_dim(x.size(), m.dim(), "interpolation point");
  const auto n = static_cast<Eigen::Index>(m.dim());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto v = m.element_vertices(e);
    Mat E(n, n);
    for (Eigen::Index i = 0; i < n; ++i) E.col(i) = v[static_cast<std::size_t>(i + 1)] - v[0];
    const Vec l = E.partialPivLu().solve(x - v[0]);
    const double l0 = 1.0 - l.sum();
    const double tol = -1e-12;
    if (l0 < tol || (l.array() < tol).any()) continue;
    double val = l0 * u(m.element(e).nodes[0]);
    for (Eigen::Index i = 0; i < n; ++i)
      val += l(i) * u(m.element(e).nodes[static_cast<std::size_t>(i + 1)]);
    return val;
  }
  return std::nullopt;
}

}  // namespace trifem
