#include "trifem/applications.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace trifem {

namespace {

bool metric_is_euclidean(const MetricField& S) {
  for (const auto& [r, e] : S.regions())
    if (e.label != "euclidean") return false;
  return !S.fallback() || S.fallback()->label == "euclidean";
}

// Applies `wrap` to every entry of a field, keeping region keys.
template <class Field, class Wrap>
Field rewrap(const Field& in, Wrap wrap) {
  Field out(in.dim());
  for (const auto& [r, e] : in.regions()) out.set_region(r, wrap(r, e));
  if (in.fallback()) out.set_default(wrap(0, *in.fallback()));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Triplet open_boundary_triplet(const Triplet& base, const OpenBoundarySpec& ob) {
  if (!(ob.inner > 0.0 && ob.outer > ob.inner))
    throw Error(ErrorCode::InvalidArgument, "open boundary needs 0 < inner < outer");
  if (!(ob.interior_radius >= 0.0) || ob.interior_radius > ob.inner * (1 + kDomainTolerance))
    throw Error(ErrorCode::RegionNotContained,
                "interior radius " + std::to_string(ob.interior_radius) +
                    " exceeds shell inner radius " + std::to_string(ob.inner));
  require_dim(ob.center.size(), base.dim(), "open boundary center");
  if (!metric_is_euclidean(base.metric))
    throw Error(ErrorCode::InvalidSpec, "open boundary requires a Euclidean base metric");

  const ChartMap shell = ChartMap::kelvin_shell(ob.center, ob.inner, ob.outer, true);
  const Point c = ob.center;
  const double a = ob.inner, b = ob.outer;
  auto wrap = [&](int, const TensorField::Entry& e) {
    TensorFn f = e.eval;
    TensorField::Entry out;
    out.label = "shell(" + e.label + ")";
    out.uniform = false;
    out.eval = [f, shell, c, a](const Point& y) -> Mat {
      if ((y - c).norm() < a) return f(y);
      const Point x = shell.inverse(y);
      return transform_material_euclidean(f(x), shell.jacobian(x));
    };
    // Shell elements away from the image of infinity use the Jacobian of the
    // affine map between the element and its node-mapped preimage. Pointwise
    // values would charge the radial gradient with the huge tangential
    // coefficient wherever the element's frame deviates from the polar one.
    if (e.uniform)
      out.element = [f, shell, c, a, b](std::span<const Point> v) -> std::optional<Mat> {
        const double tol = 1e-12 * b;
        for (const auto& y : v) {
          const double r = (y - c).norm();
          if (r < a - tol || r > b - 1e-9 * b) return std::nullopt;
        }
        const auto n = static_cast<Eigen::Index>(v.size()) - 1;
        Mat Ey(n, n), Ex(n, n);
        const Point x0 = shell.inverse(v[0]);
        for (Eigen::Index k = 0; k < n; ++k) {
          Ey.col(k) = v[k + 1] - v[0];
          Ex.col(k) = shell.inverse(v[k + 1]) - x0;
        }
        return transform_material_euclidean(f(x0), Ey * Ex.inverse());
      };
    return out;
  };
  Triplet t;
  t.chart = ChartMap::composite({shell, base.chart});
  t.metric = base.metric;
  t.material = rewrap(base.material, wrap);
  return t;
}

double dipole_potential(const Point& center, const Point& x) {
  const Vec d = x - center;
  const double r = d.norm();
  return d(0) / (r * r);
}

double dipole_potential_mapped(const OpenBoundarySpec& ob, const Point& y) {
  const ChartMap shell = ChartMap::kelvin_shell(ob.center, ob.inner, ob.outer, true);
  if ((y - ob.center).norm() >= ob.outer) return 0.0;
  return dipole_potential(ob.center, shell.inverse(y));
}

BVPSpec dipole_problem(const OpenBoundarySpec& ob, double hole, std::span<const int> divisions,
                       double grading) {
  require_dim(ob.center.size(), 2, "dipole center");
  if (!(hole > 0.0 && hole <= ob.inner))
    throw Error(ErrorCode::InvalidArgument, "dipole hole radius must lie in (0, inner]");
  Mesh m = generate_structured(AnnulusShape{ob.center, hole, ob.outer, grading}, divisions);
  const Point c = ob.center;
  const double a = ob.inner;
  m = retag_regions(m, [c, a](const Point& x, int) { return (x - c).norm() < a ? 1 : 2; });
  MaterialField eps(2);
  eps.scalar(1, 1.0).scalar(2, 1.0);
  OpenBoundarySpec spec = ob;
  spec.interior_radius = hole < a ? a : hole;
  BVPSpec out{std::move(m), open_boundary_triplet(standard_triplet(2, eps), spec), {}};
  out.dirichlet.push_back(DirichletCondition::function(
      annulus_tag::inner, [c](const Point& x) { return dipole_potential(c, x); }));
  out.dirichlet.push_back(DirichletCondition::constant(ob.infinity_tag, 0.0));
  return out;
}

L2Error l2_error(const Mesh& m, const Vector& u, const std::function<double(const Point&)>& exact) {
  require_dim(u.size(), static_cast<Eigen::Index>(m.num_nodes()), "potential");
  const QuadratureRule rule = full_rule(m.dim());
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto v = m.element_vertices(e);
    const double vol = m.volume(e);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Point x = Point::Zero(m.dim());
      double uh = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double l = rule.points[q](static_cast<Eigen::Index>(k));
        x += l * v[k];
        uh += l * u(m.element(e).nodes[k]);
      }
      const double ue = exact(x);
      err2 += vol * rule.weights[q] * (uh - ue) * (uh - ue);
      ref2 += vol * rule.weights[q] * ue * ue;
    }
  }
  L2Error out;
  out.absolute = std::sqrt(err2);
  out.relative = ref2 > 0 ? out.absolute / std::sqrt(ref2) : out.absolute;
  return out;
}

// ---------------------------------------------------------------------------

BVPSpec reparameterize_fixed_metric(const BVPSpec& spec, const ChartMap& g) {
  require_dim(g.dim(), spec.mesh.dim(), "reparameterization map");
  BVPSpec out;
  out.mesh = map_mesh(spec.mesh, g);
  const int d = spec.mesh.dim();
  out.triplet.chart = ChartMap::composite({g, spec.triplet.chart});
  out.triplet.metric = MetricField::euclidean(d);
  const MetricField S_f = spec.triplet.metric;
  const bool affine = g.is_affine();
  const auto n = static_cast<Eigen::Index>(d);
  auto wrap = [&](int region, const TensorField::Entry& e) {
    TensorFn f = e.eval;
    TensorField::Entry w;
    w.label = "reparameterized(" + e.label + ")";
    w.uniform = affine && e.uniform && S_f.is_uniform(region);
    w.eval = [f, g, S_f, region, n](const Point& y) -> Mat {
      const Point x = g.inverse(y);
      return transform_material(f(x), S_f(region, x), Mat::Identity(n, n), g.jacobian(x));
    };
    return w;
  };
  out.triplet.material = rewrap(spec.triplet.material, wrap);
  for (const auto& c : spec.dirichlet) {
    if (c.constant_value) {
      out.dirichlet.push_back(c);
      continue;
    }
    auto fn = c.value;
    out.dirichlet.push_back(
        DirichletCondition::function(c.tag, [fn, g](const Point& y) { return fn(g.inverse(y)); }));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(MotionMode mode) {
  return mode == MotionMode::MetricChange ? "metric" : "material";
}

MotionMode parse_motion_mode(std::string_view name) {
  if (name == "metric") return MotionMode::MetricChange;
  if (name == "material") return MotionMode::MaterialChange;
  throw Error(ErrorCode::InvalidArgument,
              "unknown motion mode '" + std::string(name) + "' (expected metric, material)");
}

Triplet motion_triplet(const MotionSweep& ms, const ChartMap& step) {
  const Triplet& base = ms.base.triplet;
  const int r = ms.moving_region;
  require_dim(step.dim(), base.dim(), "motion step map");
  if (!base.metric.is_euclidean(r))
    throw Error(ErrorCode::InvalidSpec,
                "motion requires a Euclidean metric on region " + std::to_string(r));
  const TensorField::Entry* eps = base.material.find(r);
  if (eps == nullptr)
    throw Error(ErrorCode::InvalidSpec, "no material for moving region " + std::to_string(r));
  const bool uniform = step.is_affine() && eps->uniform;
  // Transition physical -> reference has Jacobian (d step)^-1.
  auto transition = [step](const Point& x) -> Mat {
    const Mat Jf = step.jacobian(x);
    const double det = Jf.determinant();
    if (!(std::abs(det) > 1e-300) || !std::isfinite(det))
      throw Error(ErrorCode::SingularJacobian, "step map is singular");
    return Jf.inverse();
  };
  Triplet t = base;
  if (std::holds_alternative<IdentityMap>(step.family())) return t;
  if (ms.mode == MotionMode::MetricChange) {
    t.metric.set_region(r, {[transition](const Point& x) { return metric_for_motion(transition(x)); },
                            uniform, "motion"});
    // The material keeps its physical values, read at the moved point.
    TensorFn f = eps->eval;
    t.material.set_region(r, {[f, step](const Point& x) { return f(step.forward(x)); }, uniform,
                              eps->label});
  } else {
    TensorFn f = eps->eval;
    t.material.set_region(r, {[f, step, transition](const Point& x) {
                                return transform_material_euclidean(f(step.forward(x)), transition(x));
                              },
                              uniform, "motion(" + eps->label + ")"});
  }
  return t;
}

namespace {

void check_topology(const Mesh& m, int region, const ChartMap& step) {
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    if (m.element(e).region != region) continue;
    auto v = m.element_vertices(e);
    const double before = simplex_signed_volume(v);
    for (auto& p : v) p = step.forward(p);
    const double after = simplex_signed_volume(v);
    if (!(after * before > 0.0) ||
        std::abs(after) <= 1e-13 * std::abs(before))
      throw Error(ErrorCode::TopologyChange,
                  "step map folds or flattens element " + std::to_string(e));
  }
}

std::vector<LocalMatrix> region_locals(const Mesh& m, int region, const CoefficientModel& model,
                                       const AssemblyOptions& opt, std::vector<std::size_t>& ids) {
  std::vector<LocalMatrix> out;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    if (m.element(e).region != region) continue;
    out.push_back(element_stiffness(m, e, model, opt.quadrature));
    ids.push_back(e);
  }
  return out;
}

}  // namespace

SparseSymMatrix motion_stiffness(const MotionSweep& ms, const ChartMap& step) {
  BVPSpec s = ms.base;
  s.triplet = motion_triplet(ms, step);
  return assemble(s, ms.assembly).stiffness;
}

std::vector<MotionStep> motion_sweep(const MotionSweep& ms) {
  using clock = std::chrono::steady_clock;
  validate(ms.base);
  validate(ms.solver);
  const Mesh& m = ms.base.mesh;
  bool has_region = false;
  for (const auto& el : m.elements()) has_region |= el.region == ms.moving_region;
  if (!has_region)
    throw Error(ErrorCode::InvalidSpec, "moving region " + std::to_string(ms.moving_region) +
                                            " has no elements");

  AssembledSystem sys = assemble(ms.base, ms.assembly);
  std::vector<MotionStep> out;
  std::optional<Vector> previous;
  std::optional<Preconditioner> M;

  for (std::size_t k = 0; k < ms.steps.size(); ++k) {
    const auto t0 = clock::now();
    const ChartMap& step = ms.steps[k];
    MotionStep res;
    if (!std::holds_alternative<IdentityMap>(step.family())) {
      check_topology(m, ms.moving_region, step);
      const CoefficientModel model(motion_triplet(ms, step));
      std::vector<std::size_t> ids;
      auto fresh = region_locals(m, ms.moving_region, model, ms.assembly, ids);
      std::vector<std::size_t> changed;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        LocalMatrix& old = sys.locals[ids[i]];
        if (old.size() != fresh[i].size() || (old.array() != fresh[i].array()).any()) {
          old = fresh[i];
          changed.push_back(ids[i]);
        }
      }
      res.changed_elements = changed.size();
      res.changed_entries = sys.layout.reaccumulate(sys.locals, changed, sys.stiffness);
    } else {
      // Identity restores the reference coefficients.
      std::vector<std::size_t> ids;
      auto fresh = region_locals(m, ms.moving_region, CoefficientModel(ms.base.triplet), ms.assembly, ids);
      std::vector<std::size_t> changed;
      for (std::size_t i = 0; i < ids.size(); ++i)
        if ((sys.locals[ids[i]].array() != fresh[i].array()).any()) {
          sys.locals[ids[i]] = fresh[i];
          changed.push_back(ids[i]);
        }
      res.changed_elements = changed.size();
      res.changed_entries = sys.layout.reaccumulate(sys.locals, changed, sys.stiffness);
    }
    sys.system = eliminate_dirichlet(sys.stiffness, sys.dirichlet);

    if (!M || !ms.reuse_preconditioner)
      M = build_preconditioner(sys.system.matrix, ms.solver.preconditioner);
    SolverConfig cfg = ms.solver;
    if (ms.warm_start && previous) cfg.warm_start = previous;
    const SolveResult r = solve(sys.system.matrix, sys.system.rhs, cfg, *M);
    if (r.status == SolveStatus::MaxIterExceeded)
      throw Error(ErrorCode::MaxIterExceeded, "CG did not converge at motion step " + std::to_string(k));
    res.solution.potential = r.x;
    res.solution.iterations = r.iterations;
    res.solution.residual = r.residual;
    res.solution.energy = quadratic_form(sys.stiffness, r.x);
    res.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    previous = r.x;

    if (ms.measure_cold) {
      SolverConfig cold = ms.solver;
      cold.warm_start.reset();
      res.cold_iterations =
          solve(sys.system.matrix, sys.system.rhs, cold,
                build_preconditioner(sys.system.matrix, ms.solver.preconditioner))
              .iterations;
    }
    if (ms.keep_matrices) res.stiffness = sys.stiffness;
    out.push_back(std::move(res));
  }
  return out;
}

MotionSweep parallel_plate_sweep(int nx, int ny, std::span<const double> gaps, double block_eps,
                                 double voltage, double width) {
  if (!(block_eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "block permittivity must be positive");
  const std::array<int, 2> div{nx, 2 * ny};
  Mesh m = generate_structured(BoxShape{make_vec({0.0, 0.0}), make_vec({width, 2.0})}, div);
  m = retag_regions(m, [](const Point& x, int) { return x(1) < 1.0 ? 1 : 2; });
  m.region_names = {{"gap", 1}, {"block", 2}};
  MaterialField eps(2);
  eps.scalar(1, 1.0).scalar(2, block_eps);
  MotionSweep ms;
  ms.base = BVPSpec{std::move(m), standard_triplet(2, eps),
                    {DirichletCondition::constant(box_tag::ymin, 0.0),
                     DirichletCondition::constant(box_tag::ymax, voltage)}};
  ms.moving_region = 1;
  for (double d : gaps) {
    if (!(d > 0.0)) throw Error(ErrorCode::InvalidArgument, "gap factors must be positive");
    ms.steps.push_back(ChartMap::axis_scaling(make_vec({1.0, d})));
  }
  return ms;
}

double parallel_plate_energy(double d, double block_eps, double voltage, double width) {
  return width * voltage * voltage / (d + 1.0 / block_eps);
}

}  // namespace trifem
