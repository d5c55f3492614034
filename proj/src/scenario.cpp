#include "trifem/scenario.hpp"

#include "trifem/mesh_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace trifem {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// JSON access with path diagnostics
// ---------------------------------------------------------------------------

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ScenarioError(path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ScenarioError(join(path, k), "unknown field");
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(join(path, key), "required field is missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ScenarioError(path, "expected an integer");
  return j.get<int>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ScenarioError(path, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ScenarioError(path, "expected true or false");
  return j.get<bool>();
}

double number_or(const json& obj, const std::string& key, const std::string& path, double dflt) {
  const auto it = obj.find(key);
  return it == obj.end() ? dflt : number(*it, join(path, key));
}

Vec vector_of(const json& j, const std::string& path, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ScenarioError(path, "expected an array of " + std::to_string(dim) + " numbers");
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = number(j[static_cast<std::size_t>(i)], index_path(path, static_cast<std::size_t>(i)));
  return v;
}

Mat matrix_of(const json& j, const std::string& path, int dim) {
  const std::string shape = std::to_string(dim) + "x" + std::to_string(dim);
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ScenarioError(path, "expected a " + shape + " matrix");
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const auto row_path = index_path(path, static_cast<std::size_t>(i));
    const Vec row = vector_of(j[static_cast<std::size_t>(i)], row_path, dim);
    m.row(i) = row.transpose();
  }
  return m;
}

std::vector<int> int_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(integer(j[i], index_path(path, i)));
  return out;
}

template <class F>
auto wrap_errors(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioError(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_validation(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidMesh:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::MalformedFile:
    case ErrorCode::LengthMismatch:
    case ErrorCode::IoError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DegenerateShape:
    case ErrorCode::RegionNotContained:
    case ErrorCode::NoSuchInterface:
    case ErrorCode::InterfaceMismatch:
      return true;
    default:
      return false;
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out << text;
}

std::vector<double> flatten(const std::vector<Vec>& v) {
  std::vector<double> out;
  for (const auto& x : v) out.insert(out.end(), x.data(), x.data() + x.size());
  return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void write_solution_outputs(const json& outputs, const Mesh& mesh, const Vector& u,
                            const std::vector<Vec>& E, const SparseSymMatrix* stiffness,
                            json& written) {
  if (outputs.contains("vtk")) {
    const fs::path p = string(outputs["vtk"], "outputs.vtk");
    const std::vector<VtkField> fields{
        {"u", VtkField::Location::Node, 1, to_std(u)},
        {"E", VtkField::Location::Cell, mesh.dim(), flatten(E)}};
    write_vtk(mesh, fields, p);
    written.push_back(p.string());
  }
  if (outputs.contains("csv")) {
    const fs::path p = string(outputs["csv"], "outputs.csv");
    const auto vals = to_std(u);
    write_probe_csv(mesh.nodes(), vals, p);
    written.push_back(p.string());
  }
  if (outputs.contains("matrix") && stiffness) {
    const fs::path p = string(outputs["matrix"], "outputs.matrix");
    write_matrix_market(*stiffness, p);
    written.push_back(p.string());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario pieces
// ---------------------------------------------------------------------------

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ScenarioError("--set", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (p.empty()) throw ScenarioError("--set", "empty path component in '" + key + "'");
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (...) {
        throw ScenarioError("--set " + key, "array index expected at '" + p + "'");
      }
      if (idx >= node->size()) throw ScenarioError("--set " + key, "index " + p + " out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ScenarioError("--set " + key, "'" + p + "' is not inside an object");
      node = &(*node)[p];
    }
    if (last) *node = value;
  }
}

ChartMap parse_chart(const json& j, const std::string& path, int dim) {
  if (j.is_string()) {
    if (j.get<std::string>() == "identity") return ChartMap::identity(dim);
    throw ScenarioError(path, "unknown chart '" + j.get<std::string>() + "'");
  }
  if (!j.is_object()) throw ScenarioError(path, "expected a chart object");
  const std::string family = string(require(j, "family", path), join(path, "family"));
  return wrap_errors(path, [&]() -> ChartMap {
    if (family == "identity") {
      check_object(j, path, {"family"});
      return ChartMap::identity(dim);
    }
    if (family == "affine") {
      check_object(j, path, {"family", "matrix", "offset"});
      const Mat A = matrix_of(require(j, "matrix", path), join(path, "matrix"), dim);
      const Vec b = j.contains("offset") ? vector_of(j["offset"], join(path, "offset"), dim) : Vec::Zero(dim);
      return ChartMap::affine(A, b);
    }
    if (family == "translation") {
      check_object(j, path, {"family", "offset"});
      return ChartMap::translation(vector_of(require(j, "offset", path), join(path, "offset"), dim));
    }
    if (family == "axis_scaling") {
      check_object(j, path, {"family", "factors"});
      return ChartMap::axis_scaling(vector_of(require(j, "factors", path), join(path, "factors"), dim));
    }
    if (family == "rotation") {
      check_object(j, path, {"family", "angle", "axis"});
      const double angle = number(require(j, "angle", path), join(path, "angle"));
      if (dim == 2) {
        if (j.contains("axis")) throw ScenarioError(join(path, "axis"), "2D rotations take no axis");
        return ChartMap::rotation(angle);
      }
      return ChartMap::rotation(vector_of(require(j, "axis", path), join(path, "axis"), 3), angle);
    }
    if (family == "polar_stretch") {
      check_object(j, path, {"family", "center", "power", "radius"});
      return ChartMap::polar_stretch(vector_of(require(j, "center", path), join(path, "center"), dim),
                                     number(require(j, "power", path), join(path, "power")),
                                     number(require(j, "radius", path), join(path, "radius")));
    }
    if (family == "kelvin_shell") {
      check_object(j, path, {"family", "center", "inner", "outer", "identity_inside"});
      return ChartMap::kelvin_shell(
          vector_of(require(j, "center", path), join(path, "center"), dim),
          number(require(j, "inner", path), join(path, "inner")),
          number(require(j, "outer", path), join(path, "outer")),
          j.contains("identity_inside") && boolean(j["identity_inside"], join(path, "identity_inside")));
    }
    if (family == "composite") {
      check_object(j, path, {"family", "members"});
      const json& ms = require(j, "members", path);
      if (!ms.is_array() || ms.empty())
        throw ScenarioError(join(path, "members"), "expected a non-empty array of charts");
      std::vector<ChartMap> members;
      for (std::size_t i = 0; i < ms.size(); ++i)
        members.push_back(parse_chart(ms[i], index_path(join(path, "members"), i), dim));
      return ChartMap::composite(std::move(members));
    }
    throw ScenarioError(join(path, "family"),
                        "unknown chart family '" + family +
                            "' (expected identity, affine, translation, axis_scaling, rotation, "
                            "polar_stretch, kelvin_shell, composite)");
  });
}

MetricField parse_metric(const json& j, const std::string& path, int dim) {
  if (j.is_null()) return MetricField::euclidean(dim);
  if (j.is_string()) {
    if (j.get<std::string>() == "euclidean") return MetricField::euclidean(dim);
    throw ScenarioError(path, "unknown metric '" + j.get<std::string>() + "'");
  }
  if (j.is_object() && j.contains("from_motion")) {
    // The chart maps the physical coordinates into this chart.
    check_object(j, path, {"from_motion"});
    const ChartMap t = parse_chart(j["from_motion"], join(path, "from_motion"), dim);
    MetricField f(dim);
    f.set_default({[t](const Point& y) { return metric_for_motion(t.jacobian(t.inverse(y))); },
                   t.is_affine(), "from_motion"});
    return f;
  }
  check_object(j, path, {"constant"});
  const Mat S = matrix_of(require(j, "constant", path), join(path, "constant"), dim);
  return wrap_errors(join(path, "constant"), [&] { return MetricField::constant(S); });
}

MaterialField parse_materials(const json& j, const std::string& path, int dim) {
  if (!j.is_object() || j.empty())
    throw ScenarioError(path, "expected an object mapping region ids to materials");
  MaterialField f(dim);
  for (const auto& [key, v] : j.items()) {
    const std::string p = join(path, key);
    auto entry = [&]() -> TensorField::Entry {
      Mat m;
      if (v.is_number()) {
        m = v.get<double>() * Mat::Identity(dim, dim);
      } else if (v.is_array()) {
        m = matrix_of(v, p, dim);
      } else {
        throw ScenarioError(p, "expected a number or a " + std::to_string(dim) + "x" +
                                   std::to_string(dim) + " matrix");
      }
      if (!is_spd(m)) throw ScenarioError(p, "material must be symmetric positive definite");
      return {[m](const Point&) { return m; }, true, v.is_number() ? "scalar" : "tensor"};
    }();
    if (key == "default") {
      f.set_default(entry);
      continue;
    }
    int region = 0;
    try {
      std::size_t used = 0;
      region = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (...) {
      throw ScenarioError(p, "material keys must be region ids or \"default\"");
    }
    f.set_region(region, entry);
  }
  return f;
}

Triplet parse_triplet(const json& j, const std::string& path, int dim) {
  check_object(j, path, {"chart", "metric", "materials"});
  Triplet t;
  t.chart = j.contains("chart") ? parse_chart(j["chart"], join(path, "chart"), dim) : ChartMap::identity(dim);
  t.metric = parse_metric(j.contains("metric") ? j["metric"] : json(), join(path, "metric"), dim);
  t.material = parse_materials(require(j, "materials", path), join(path, "materials"), dim);
  return t;
}

Mesh load_mesh(const json& j, const std::string& path, int dim, const fs::path& base_dir,
               std::optional<std::uint64_t> seed) {
  check_object(j, path, {"file", "shape", "lo", "hi", "center", "inner", "outer", "grading", "divisions",
                         "jitter", "seed", "regions", "max_aspect_ratio", "map"});
  Mesh m;
  if (j.contains("file")) {
    fs::path f = string(j["file"], join(path, "file"));
    if (f.is_relative()) f = base_dir / f;
    if (!fs::exists(f)) throw ScenarioError(join(path, "file"), "file not found: " + f.string());
    m = read_msh(f);
    if (m.dim() != dim)
      throw ScenarioError(join(path, "file"), "mesh dimension " + std::to_string(m.dim()) +
                                                  " does not match scenario dimension " +
                                                  std::to_string(dim));
  } else {
    const std::string shape = string(require(j, "shape", path), join(path, "shape"));
    const auto div = int_list(require(j, "divisions", path), join(path, "divisions"));
    MeshingOptions opt;
    opt.max_aspect_ratio = number_or(j, "max_aspect_ratio", path, opt.max_aspect_ratio);
    if (shape == "box") {
      if (static_cast<int>(div.size()) != dim)
        throw ScenarioError(join(path, "divisions"), "expected " + std::to_string(dim) + " divisions");
      const Vec lo = vector_of(require(j, "lo", path), join(path, "lo"), dim);
      const Vec hi = vector_of(require(j, "hi", path), join(path, "hi"), dim);
      m = generate_structured(BoxShape{lo, hi}, div, opt);
    } else if (shape == "annulus") {
      if (dim != 2) throw ScenarioError(join(path, "shape"), "annulus meshes are 2D");
      const Point c = j.contains("center") ? vector_of(j["center"], join(path, "center"), 2) : Vec::Zero(2);
      m = generate_structured(AnnulusShape{c, number(require(j, "inner", path), join(path, "inner")),
                                           number(require(j, "outer", path), join(path, "outer")),
                                           number_or(j, "grading", path, 1.0)},
                              div, opt);
    } else {
      throw ScenarioError(join(path, "shape"), "unknown shape '" + shape + "' (expected box, annulus)");
    }
  }
  if (j.contains("regions")) {
    const json& rs = j["regions"];
    const std::string rp = join(path, "regions");
    if (!rs.is_array()) throw ScenarioError(rp, "expected an array of {id, lo, hi}");
    struct Box {
      int id;
      Vec lo, hi;
    };
    std::vector<Box> boxes;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto p = index_path(rp, i);
      check_object(rs[i], p, {"id", "lo", "hi"});
      boxes.push_back({integer(require(rs[i], "id", p), join(p, "id")),
                       vector_of(require(rs[i], "lo", p), join(p, "lo"), dim),
                       vector_of(require(rs[i], "hi", p), join(p, "hi"), dim)});
    }
    // Later boxes win.
    m = retag_regions(m, [&](const Point& x, int old) {
      int r = old;
      for (const auto& b : boxes)
        if ((x.array() >= b.lo.array()).all() && (x.array() <= b.hi.array()).all()) r = b.id;
      return r;
    });
  }
  if (j.contains("jitter")) {
    const double amp = number(j["jitter"], join(path, "jitter"));
    std::uint64_t s = 0;
    if (j.contains("seed")) s = static_cast<std::uint64_t>(integer(j["seed"], join(path, "seed")));
    if (seed) s = *seed;
    m = wrap_errors(join(path, "jitter"), [&] { return jitter_interior_nodes(m, amp, s); });
  }
  if (j.contains("map")) {
    const ChartMap g = parse_chart(j["map"], join(path, "map"), dim);
    m = map_mesh(m, g);
  }
  return m;
}

std::vector<DirichletCondition> parse_boundary(const json& j, const std::string& path,
                                               const Mesh& mesh) {
  if (!j.is_array() || j.empty())
    throw ScenarioError(path, "expected a non-empty array of {tag, value}");
  std::vector<DirichletCondition> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = index_path(path, i);
    check_object(j[i], p, {"tag", "value"});
    const json& t = require(j[i], "tag", p);
    std::optional<int> tag;
    std::string shown;
    if (t.is_number_integer()) {
      tag = t.get<int>();
      shown = std::to_string(*tag);
      if (!mesh.has_boundary_tag(*tag)) tag.reset();
    } else if (t.is_string()) {
      shown = t.get<std::string>();
      tag = mesh.find_boundary_tag(shown);
      if (tag && !mesh.has_boundary_tag(*tag)) tag.reset();
    } else {
      throw ScenarioError(join(p, "tag"), "expected an integer tag or a boundary name");
    }
    if (!tag) throw ScenarioError(join(p, "tag"), "boundary tag '" + shown + "' does not exist in the mesh");
    const json& v = require(j[i], "value", p);
    if (v.is_number()) {
      out.push_back(DirichletCondition::constant(*tag, v.get<double>()));
    } else if (v.is_object() && v.contains("linear")) {
      check_object(v, join(p, "value"), {"linear"});
      const Vec c = vector_of(v["linear"], join(join(p, "value"), "linear"), mesh.dim() + 1);
      out.push_back(DirichletCondition::function(*tag, [c](const Point& x) {
        return c(0) + c.tail(c.size() - 1).dot(x);
      }));
    } else {
      throw ScenarioError(join(p, "value"), "expected a number or {\"linear\": [c0, c1, ...]}");
    }
  }
  return out;
}

SolverConfig parse_solver(const json& j, const std::string& path) {
  SolverConfig cfg;
  if (j.is_null()) return cfg;
  check_object(j, path, {"tol", "max_iter", "preconditioner"});
  cfg.tol = number_or(j, "tol", path, cfg.tol);
  if (j.contains("max_iter")) cfg.max_iter = integer(j["max_iter"], join(path, "max_iter"));
  if (j.contains("preconditioner")) {
    const auto p = join(path, "preconditioner");
    cfg.preconditioner = wrap_errors(p, [&] { return parse_preconditioner(string(j["preconditioner"], p)); });
  }
  wrap_errors(path, [&] {
    validate(cfg);
    return 0;
  });
  return cfg;
}

AssemblyOptions parse_assembly(const json& j, const std::string& path) {
  AssemblyOptions opt;
  if (j.is_null()) return opt;
  check_object(j, path, {"quadrature", "threads"});
  if (j.contains("quadrature")) {
    const auto q = string(j["quadrature"], join(path, "quadrature"));
    if (q == "auto") {
      opt.quadrature = QuadratureChoice::Auto;
    } else if (q == "centroid") {
      opt.quadrature = QuadratureChoice::Centroid;
    } else if (q == "full") {
      opt.quadrature = QuadratureChoice::Full;
    } else {
      throw ScenarioError(join(path, "quadrature"), "expected auto, centroid or full");
    }
  }
  if (j.contains("threads")) {
    opt.threads = integer(j["threads"], join(path, "threads"));
    if (opt.threads < 1) throw ScenarioError(join(path, "threads"), "must be at least 1");
  }
  return opt;
}

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

namespace {

struct Context {
  json doc;
  fs::path base_dir;
  int dim = 2;
  RunOptions options;
  std::ostream& out;
  json report;
};

const json& section(const json& doc, const char* key) {
  static const json null;
  const auto it = doc.find(key);
  return it == doc.end() ? null : *it;
}

void run_solve(Context& c) {
  check_object(c.doc, "", {"problem", "mode", "dimension", "mesh", "triplet", "boundary", "solver",
                           "assembly", "outputs", "reparameterize", "atlas"});
  const SolverConfig cfg = parse_solver(section(c.doc, "solver"), "solver");
  const AssemblyOptions opt = parse_assembly(section(c.doc, "assembly"), "assembly");
  const json& outputs = section(c.doc, "outputs");
  json written = json::array();

  if (c.doc.contains("atlas")) {
    const json& a = c.doc["atlas"];
    check_object(a, "atlas", {"regions", "interfaces", "metric", "materials", "boundary"});
    AtlasProblem p;
    const json& rs = require(a, "regions", "atlas");
    if (!rs.is_array() || rs.empty()) throw ScenarioError("atlas.regions", "expected a non-empty array");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto path = index_path("atlas.regions", i);
      check_object(rs[i], path, {"id", "chart", "mesh", "metric"});
      AtlasRegion r;
      r.id = integer(require(rs[i], "id", path), join(path, "id"));
      r.to_universal = rs[i].contains("chart") ? parse_chart(rs[i]["chart"], join(path, "chart"), c.dim)
                                               : ChartMap::identity(c.dim);
      r.mesh = load_mesh(require(rs[i], "mesh", path), join(path, "mesh"), c.dim, c.base_dir, c.options.seed);
      if (rs[i].contains("metric"))
        p.chart_metric[r.id] = parse_metric(rs[i]["metric"], join(path, "metric"), c.dim);
      p.atlas.regions.push_back(std::move(r));
    }
    const json& is = section(a, "interfaces");
    for (std::size_t i = 0; i < is.size(); ++i) {
      const auto path = index_path("atlas.interfaces", i);
      check_object(is[i], path, {"regions", "tags"});
      const auto r = int_list(require(is[i], "regions", path), join(path, "regions"));
      const auto t = int_list(require(is[i], "tags", path), join(path, "tags"));
      if (r.size() != 2 || t.size() != 2) throw ScenarioError(path, "expected two regions and two tags");
      p.atlas.interfaces.push_back({r[0], t[0], r[1], t[1]});
    }
    p.universal_metric = parse_metric(section(a, "metric"), "atlas.metric", c.dim);
    p.universal_material = parse_materials(require(a, "materials", "atlas"), "atlas.materials", c.dim);
    const json& bs = require(a, "boundary", "atlas");
    if (!bs.is_array() || bs.empty()) throw ScenarioError("atlas.boundary", "expected a non-empty array");
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const auto path = index_path("atlas.boundary", i);
      check_object(bs[i], path, {"region", "tag", "value"});
      const int region = integer(require(bs[i], "region", path), join(path, "region"));
      const std::size_t pos = wrap_errors(join(path, "region"), [&] { return p.atlas.index_of(region); });
      json single = json::array({{{"tag", require(bs[i], "tag", path)}, {"value", require(bs[i], "value", path)}}});
      auto conds = parse_boundary(single, path, p.atlas.regions[pos].mesh);
      auto cond = conds.front();
      p.dirichlet.push_back({region, cond.tag, [cond](const Point& x) { return cond(x); }});
    }
    const AtlasSolution sol = solve_atlas(p, cfg, opt);
    c.report["results"] = {{"energy", sol.energy},
                           {"iterations", sol.iterations},
                           {"num_dofs", sol.index.num_dofs},
                           {"regions", p.atlas.regions.size()}};
    c.out << "atlas solve: " << sol.index.num_dofs << " dofs, energy " << fmt17(sol.energy) << "\n";
    return;
  }

  const Mesh mesh = load_mesh(require(c.doc, "mesh", ""), "mesh", c.dim, c.base_dir, c.options.seed);
  BVPSpec spec{mesh, parse_triplet(require(c.doc, "triplet", ""), "triplet", c.dim),
               parse_boundary(require(c.doc, "boundary", ""), "boundary", mesh)};
  if (c.doc.contains("reparameterize"))
    spec = reparameterize_fixed_metric(spec, parse_chart(c.doc["reparameterize"], "reparameterize", c.dim));
  validate(spec);
  const AssembledSystem sys = assemble(spec, opt);
  const SolveResult r = solve(sys.system.matrix, sys.system.rhs, cfg);
  if (r.status == SolveStatus::MaxIterExceeded)
    throw Error(ErrorCode::MaxIterExceeded, "CG stopped after " + std::to_string(r.iterations) +
                                                " iterations, relative residual " + fmt17(r.residual));
  const auto E = element_fields(r.x, spec);
  const double W = quadratic_form(sys.stiffness, r.x);
  c.report["results"] = {{"energy", W},
                         {"iterations", r.iterations},
                         {"residual", r.residual},
                         {"num_nodes", spec.mesh.num_nodes()},
                         {"num_elements", spec.mesh.num_elements()},
                         {"u_min", r.x.minCoeff()},
                         {"u_max", r.x.maxCoeff()},
                         {"preconditioner_fallback", r.preconditioner_fallback}};
  if (!outputs.is_null()) write_solution_outputs(outputs, spec.mesh, r.x, E, &sys.stiffness, written);
  c.report["outputs"] = written;
  c.out << "solve: " << spec.mesh.num_nodes() << " nodes, " << spec.mesh.num_elements()
        << " elements, " << r.iterations << " iterations, energy " << fmt17(W) << "\n";
}

void run_equivalence(Context& c) {
  check_object(c.doc, "", {"problem", "mode", "dimension", "mesh", "triplets", "tolerance",
                           "assembly", "outputs"});
  const AssemblyOptions opt = parse_assembly(section(c.doc, "assembly"), "assembly");
  const Mesh mesh = load_mesh(require(c.doc, "mesh", ""), "mesh", c.dim, c.base_dir, c.options.seed);
  const json& ts = require(c.doc, "triplets", "");
  if (!ts.is_array() || ts.size() != 2) throw ScenarioError("triplets", "expected exactly two triplets");
  const double tol = number_or(c.doc, "tolerance", "", 1e-12);

  Triplet A = parse_triplet(ts[0], "triplets[0]", c.dim);
  Triplet B;
  if (ts[1].is_object() && ts[1].contains("materials") && ts[1]["materials"] == "equivalent") {
    // Derive B's materials from A through the transition map.
    json tb = ts[1];
    tb["materials"] = json{{"default", 1.0}};
    B = parse_triplet(tb, "triplets[1]", c.dim);
    MaterialField derived(c.dim);
    for (int region : mesh.region_tags()) {
      if (!A.material.has(region))
        throw ScenarioError("triplets[0].materials", "no material for region " + std::to_string(region));
      derived.function(region, [A, Bc = B.chart, SB = B.metric, region](const Point& y) {
        const Point xu = Bc.inverse(y);
        const Point xa = A.chart.forward(xu);
        const Mat J = Bc.jacobian(xu) * A.chart.jacobian(xu).inverse();
        return transform_material(A.material(region, xa), A.metric(region, xa), SB(region, y), J);
      }, "equivalent");
    }
    B.material = derived;
  } else {
    B = parse_triplet(ts[1], "triplets[1]", c.dim);
  }

  std::vector<MaterialSample> samples;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    samples.push_back({mesh.centroid(e), mesh.element(e).region});
  const EquivalenceReport eq = verify_material_equivalence(A, B, samples);

  const AssemblyLayout layout = AssemblyLayout::for_mesh(mesh);
  const Mesh mA = map_mesh(mesh, A.chart);
  const Mesh mB = map_mesh(mesh, B.chart);
  const SparseSymMatrix KA = layout.accumulate(local_matrices(mA, CoefficientModel(A), opt));
  const SparseSymMatrix KB = layout.accumulate(local_matrices(mB, CoefficientModel(B), opt));
  const MatrixComparison mc = compare_matrices(KA, KB);

  const bool pass = eq.max_deviation <= tol && mc.frobenius_ratio <= tol;
  c.report["results"] = {{"material_max_deviation", eq.max_deviation},
                         {"worst_sample", eq.worst_sample},
                         {"matrix_frobenius_ratio", mc.frobenius_ratio},
                         {"matrix_max_entry_deviation", mc.max_entry_deviation},
                         {"matrix_worst_entry", {mc.row, mc.col}},
                         {"tolerance", tol},
                         {"equivalent", pass}};
  json written = json::array();
  const json& outputs = section(c.doc, "outputs");
  if (outputs.contains("matrix")) {
    const fs::path p = string(outputs["matrix"], "outputs.matrix");
    write_matrix_market(KA, p);
    written.push_back(p.string());
  }
  c.report["outputs"] = written;
  c.out << "equivalence-check: material deviation " << fmt17(eq.max_deviation)
        << ", matrix Frobenius ratio " << fmt17(mc.frobenius_ratio) << " -> "
        << (pass ? "equivalent" : "NOT equivalent") << "\n";
  if (!pass) c.report["exit_code"] = exit_code::check_failed;
}

void run_open_boundary(Context& c) {
  check_object(c.doc, "", {"problem", "mode", "dimension", "open_boundary", "solver", "assembly", "outputs"});
  if (c.dim != 2) throw ScenarioError("dimension", "open-boundary scenarios are 2D");
  const SolverConfig cfg = parse_solver(section(c.doc, "solver"), "solver");
  const AssemblyOptions opt = parse_assembly(section(c.doc, "assembly"), "assembly");
  const json& j = require(c.doc, "open_boundary", "");
  const std::string path = "open_boundary";
  check_object(j, path, {"center", "inner", "outer", "hole", "divisions", "grading"});
  OpenBoundarySpec ob;
  ob.center = j.contains("center") ? vector_of(j["center"], join(path, "center"), 2) : Vec::Zero(2);
  ob.inner = number_or(j, "inner", path, 1.0);
  ob.outer = number_or(j, "outer", path, 2.0);
  const double hole = number_or(j, "hole", path, ob.inner);
  ob.interior_radius = hole;
  const auto div = int_list(require(j, "divisions", path), join(path, "divisions"));
  const double grading = number_or(j, "grading", path, 2.0);
  const BVPSpec spec = wrap_errors(path, [&] { return dipole_problem(ob, hole, div, grading); });
  const Solution sol = solve_bvp(spec, cfg, opt);
  const L2Error err = l2_error(spec.mesh, sol.potential,
                               [&](const Point& y) { return dipole_potential_mapped(ob, y); });
  c.report["results"] = {{"energy", sol.energy},
                         {"iterations", sol.iterations},
                         {"num_elements", spec.mesh.num_elements()},
                         {"l2_error", err.absolute},
                         {"relative_l2_error", err.relative}};
  json written = json::array();
  const json& outputs = section(c.doc, "outputs");
  if (!outputs.is_null()) write_solution_outputs(outputs, spec.mesh, sol.potential, sol.field, nullptr, written);
  c.report["outputs"] = written;
  c.out << "open-boundary: " << spec.mesh.num_elements() << " elements, relative L2 error "
        << fmt17(err.relative) << "\n";
}

void run_motion(Context& c) {
  check_object(c.doc, "", {"problem", "mode", "dimension", "motion", "mesh", "triplet", "boundary",
                           "solver", "assembly", "outputs"});
  const json& j = require(c.doc, "motion", "");
  const std::string path = "motion";
  check_object(j, path, {"fixture", "nx", "ny", "gaps", "block_eps", "voltage", "width", "mode",
                         "warm_start", "reuse_preconditioner", "moving_region", "steps"});
  MotionSweep ms;
  if (j.contains("fixture")) {
    const auto fixture = string(j["fixture"], join(path, "fixture"));
    if (fixture != "parallel_plate")
      throw ScenarioError(join(path, "fixture"), "unknown fixture '" + fixture + "' (expected parallel_plate)");
    if (c.dim != 2) throw ScenarioError("dimension", "the parallel_plate fixture is 2D");
    std::vector<double> gaps;
    const json& g = require(j, "gaps", path);
    if (!g.is_array() || g.empty()) throw ScenarioError(join(path, "gaps"), "expected a non-empty array");
    for (std::size_t i = 0; i < g.size(); ++i) gaps.push_back(number(g[i], index_path(join(path, "gaps"), i)));
    const int nx = j.contains("nx") ? integer(j["nx"], join(path, "nx")) : 4;
    const int ny = j.contains("ny") ? integer(j["ny"], join(path, "ny")) : 8;
    ms = wrap_errors(path, [&] {
      return parallel_plate_sweep(nx, ny, gaps, number_or(j, "block_eps", path, 1e6),
                                  number_or(j, "voltage", path, 1.0), number_or(j, "width", path, 1.0));
    });
  } else {
    const Mesh mesh = load_mesh(require(c.doc, "mesh", ""), "mesh", c.dim, c.base_dir, c.options.seed);
    ms.base = BVPSpec{mesh, parse_triplet(require(c.doc, "triplet", ""), "triplet", c.dim),
                      parse_boundary(require(c.doc, "boundary", ""), "boundary", mesh)};
    ms.moving_region = integer(require(j, "moving_region", path), join(path, "moving_region"));
    const json& st = require(j, "steps", path);
    if (!st.is_array() || st.empty()) throw ScenarioError(join(path, "steps"), "expected a non-empty array of charts");
    for (std::size_t i = 0; i < st.size(); ++i)
      ms.steps.push_back(parse_chart(st[i], index_path(join(path, "steps"), i), c.dim));
  }
  if (j.contains("mode")) {
    const auto p = join(path, "mode");
    ms.mode = wrap_errors(p, [&] { return parse_motion_mode(string(j["mode"], p)); });
  }
  if (j.contains("warm_start")) ms.warm_start = boolean(j["warm_start"], join(path, "warm_start"));
  if (j.contains("reuse_preconditioner"))
    ms.reuse_preconditioner = boolean(j["reuse_preconditioner"], join(path, "reuse_preconditioner"));
  ms.solver = parse_solver(section(c.doc, "solver"), "solver");
  ms.assembly = parse_assembly(section(c.doc, "assembly"), "assembly");
  validate(ms.base);

  const auto steps = motion_sweep(ms);
  std::ostringstream csv;
  csv << "step,energy,iterations,changed_entries,changed_elements";
  if (c.options.timing) csv << ",seconds";
  csv << "\n";
  json rows = json::array();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    csv << k << "," << fmt17(s.solution.energy) << "," << s.solution.iterations << ","
        << s.changed_entries << "," << s.changed_elements;
    if (c.options.timing) csv << "," << fmt17(s.seconds);
    csv << "\n";
    json row = {{"step", k},
                {"energy", s.solution.energy},
                {"iterations", s.solution.iterations},
                {"changed_entries", s.changed_entries},
                {"changed_elements", s.changed_elements}};
    if (c.options.timing) row["seconds"] = s.seconds;
    rows.push_back(row);
  }
  c.report["results"] = {{"steps", rows}, {"mode", std::string(to_string(ms.mode))}};
  json written = json::array();
  const json& outputs = section(c.doc, "outputs");
  if (outputs.contains("csv")) {
    const fs::path p = string(outputs["csv"], "outputs.csv");
    write_text(p, csv.str());
    written.push_back(p.string());
  } else {
    c.out << csv.str();
  }
  if (outputs.contains("vtk") && !steps.empty()) {
    const fs::path p = string(outputs["vtk"], "outputs.vtk");
    const std::vector<VtkField> fields{
        {"u", VtkField::Location::Node, 1, to_std(steps.back().solution.potential)}};
    write_vtk(ms.base.mesh, fields, p);
    written.push_back(p.string());
  }
  c.report["outputs"] = written;
  c.out << "motion: " << steps.size() << " steps\n";
}

fs::path default_report_path(const fs::path& scenario) {
  return fs::path(scenario.stem().string() + ".report.json");
}

}  // namespace

int run_scenario(const fs::path& file, const std::string& mode, const RunOptions& options,
                 std::ostream& out, std::ostream& err) {
  Context c{json::object(), file.parent_path(), 2, options, out, json::object()};
  c.report["scenario"] = file.string();
  c.report["mode"] = mode;
  fs::path report_path = options.report.value_or(default_report_path(file));
  int code = exit_code::ok;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::ifstream in(file);
    if (!in) throw ScenarioError("scenario", "cannot read " + file.string());
    try {
      c.doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::MalformedFile, file.string() + ": " + e.what());
    }
    if (!c.doc.is_object()) throw ScenarioError("scenario", "top level must be an object");
    for (const auto& s : options.set) apply_override(c.doc, s);
    if (options.tol) c.doc["solver"]["tol"] = *options.tol;
    if (options.quadrature) c.doc["assembly"]["quadrature"] = *options.quadrature;
    if (options.threads) c.doc["assembly"]["threads"] = *options.threads;
    if (options.sequential) c.doc["assembly"]["threads"] = 1;
    if (c.doc.contains("outputs") && c.doc["outputs"].contains("report") && !options.report)
      report_path = string(c.doc["outputs"]["report"], "outputs.report");
    if (c.doc.contains("outputs")) {
      json& o = c.doc["outputs"];
      if (!o.is_object()) throw ScenarioError("outputs", "expected an object");
      check_object(o, "outputs", {"vtk", "csv", "matrix", "report"});
      o.erase("report");
    }
    const std::string declared = string(require(c.doc, "mode", ""), "mode");
    if (declared != mode)
      throw ScenarioError("mode", "scenario declares '" + declared + "' but was run as '" + mode + "'");
    if (c.doc.contains("problem")) c.report["problem"] = string(c.doc["problem"], "problem");
    if (c.doc.contains("dimension")) {
      c.dim = integer(c.doc["dimension"], "dimension");
      if (c.dim != 2 && c.dim != 3) throw ScenarioError("dimension", "must be 2 or 3");
    }
    if (mode == "solve") {
      run_solve(c);
    } else if (mode == "equivalence-check") {
      run_equivalence(c);
    } else if (mode == "open-boundary") {
      run_open_boundary(c);
    } else if (mode == "motion") {
      run_motion(c);
    } else {
      throw ScenarioError("mode", "unknown mode '" + mode + "'");
    }
    if (c.report.contains("exit_code")) code = c.report["exit_code"].get<int>();
    c.report["status"] = code == exit_code::ok ? "ok" : "check_failed";
  } catch (const ScenarioError& e) {
    code = exit_code::validation;
    c.report["status"] = "validation_error";
    c.report["error"] = {{"code", std::string(to_string(e.code()))}, {"field", e.path()}, {"message", e.what()}};
    err << "error: " << e.what() << "\n";
  } catch (const Error& e) {
    code = is_validation(e.code()) ? exit_code::validation : exit_code::numerical;
    c.report["status"] = code == exit_code::validation ? "validation_error" : "numerical_failure";
    c.report["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
  }
  c.report["exit_code"] = code;
  if (options.timing)
    c.report["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_text(report_path, c.report.dump(2) + "\n");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (code == exit_code::ok) code = exit_code::validation;
  }
  return code;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

int mesh_gen(const std::string& shape, const std::vector<int>& div, const std::vector<double>& lo,
             const std::vector<double>& hi, const std::vector<double>& center, double inner,
             double outer, double jitter, std::uint64_t seed, double max_ar, const fs::path& output,
             std::ostream& out) {
  Mesh m;
  MeshingOptions opt;
  opt.max_aspect_ratio = max_ar;
  if (shape == "box") {
    const auto d = static_cast<int>(div.size());
    if (d != 2 && d != 3) throw Error(ErrorCode::InvalidArgument, "--div needs 2 or 3 values for a box");
    Vec l = Vec::Zero(d), h = Vec::Ones(d);
    if (!lo.empty()) {
      if (static_cast<int>(lo.size()) != d) throw Error(ErrorCode::InvalidArgument, "--lo must match --div");
      for (int i = 0; i < d; ++i) l(i) = lo[static_cast<std::size_t>(i)];
    }
    if (!hi.empty()) {
      if (static_cast<int>(hi.size()) != d) throw Error(ErrorCode::InvalidArgument, "--hi must match --div");
      for (int i = 0; i < d; ++i) h(i) = hi[static_cast<std::size_t>(i)];
    }
    m = generate_structured(BoxShape{l, h}, div, opt);
  } else if (shape == "annulus") {
    Point c = Vec::Zero(2);
    if (!center.empty()) {
      if (center.size() != 2) throw Error(ErrorCode::InvalidArgument, "--center needs 2 values");
      c = make_vec({center[0], center[1]});
    }
    m = generate_structured(AnnulusShape{c, inner, outer}, div, opt);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown shape '" + shape + "' (expected box, annulus)");
  }
  if (jitter > 0) m = jitter_interior_nodes(m, jitter, seed);
  if (output.extension() == ".vtk") {
    write_vtk(m, std::span<const VtkField>{}, output);
  } else {
    write_msh(m, output);
  }
  out << "wrote " << output.string() << ": " << m.num_nodes() << " nodes, " << m.num_elements()
      << (m.dim() == 2 ? " triangles" : " tetrahedra") << "\n";
  return exit_code::ok;
}

int mesh_convert(const fs::path& in, const fs::path& output, std::ostream& out) {
  const Mesh m = read_msh(in);
  if (output.extension() == ".vtk") {
    std::vector<double> regions;
    for (const auto& e : m.elements()) regions.push_back(e.region);
    const std::vector<VtkField> fields{{"region", VtkField::Location::Cell, 1, regions}};
    write_vtk(m, fields, output);
  } else {
    write_msh(m, output);
  }
  out << "wrote " << output.string() << "\n";
  return exit_code::ok;
}

int mesh_quality(const fs::path& in, bool as_json, std::ostream& out) {
  const Mesh m = read_msh(in);
  const QualityReport q = quality(m);
  if (as_json) {
    out << json{{"elements", m.num_elements()},
                {"min", q.min},
                {"max", q.max},
                {"mean", q.mean},
                {"worst_element", q.worst_element}}
               .dump(2)
        << "\n";
  } else {
    out << "elements: " << m.num_elements() << "\n"
        << "aspect_ratio min: " << fmt17(q.min) << "\n"
        << "aspect_ratio max: " << fmt17(q.max) << "\n"
        << "aspect_ratio mean: " << fmt17(q.mean) << "\n"
        << "worst_element: " << q.worst_element << "\n";
  }
  return exit_code::ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chart-independent finite element solver for electrostatic boundary value problems",
               "trifem"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string scenario;
  std::optional<std::string> report;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", scenario, "Scenario JSON file")->required();
    sub->add_option("--set", opts.set, "Override a scenario field: dotted.path=value");
    sub->add_option("--seed", seed, "Seed for randomized fixture generation");
    sub->add_option("--quadrature", opts.quadrature, "auto, centroid or full")
        ->check(CLI::IsMember({"auto", "centroid", "full"}));
    sub->add_option("--tol", opts.tol, "Relative residual target of the solver");
    sub->add_option("--threads", opts.threads, "Workers for element matrices")->check(CLI::PositiveNumber);
    sub->add_flag("--sequential", opts.sequential, "Force single-threaded assembly");
    sub->add_flag("--timing", opts.timing, "Record wall times in reports and CSV");
    sub->add_option("--report", report, "Path of the JSON report");
  };
  std::vector<std::pair<CLI::App*, std::string>> modes;
  for (const char* name : {"solve", "equivalence-check", "open-boundary", "motion"}) {
    auto* sub = app.add_subcommand(name, std::string("Run a '") + name + "' scenario");
    add_common(sub);
    modes.emplace_back(sub, name);
  }

  auto* mesh = app.add_subcommand("mesh", "Mesh tools");
  mesh->require_subcommand(1);
  auto* gen = mesh->add_subcommand("gen", "Generate a structured mesh");
  std::string shape = "box", output, input;
  std::vector<int> div;
  std::vector<double> lo, hi, center;
  double inner = 1.0, outer = 2.0, jitter = 0.0, max_ar = MeshingOptions{}.max_aspect_ratio;
  gen->add_option("--shape", shape, "box or annulus")->check(CLI::IsMember({"box", "annulus"}));
  gen->add_option("--div", div, "Divisions per axis (box) or angular radial (annulus)")->required();
  gen->add_option("--lo", lo, "Box lower corner");
  gen->add_option("--hi", hi, "Box upper corner");
  gen->add_option("--center", center, "Annulus center");
  gen->add_option("--inner", inner, "Annulus inner radius");
  gen->add_option("--outer", outer, "Annulus outer radius");
  gen->add_option("--jitter", jitter, "Random interior node displacement");
  gen->add_option("--seed", seed, "Seed for --jitter");
  gen->add_option("--max-aspect-ratio", max_ar, "Quality gate");
  gen->add_option("-o,--output", output, "Output .msh or .vtk")->required();
  auto* conv = mesh->add_subcommand("convert", "Convert an MSH mesh to MSH or VTK");
  conv->add_option("input", input, "Input .msh")->required();
  conv->add_option("output", output, "Output .msh or .vtk")->required();
  auto* qual = mesh->add_subcommand("quality", "Report element aspect ratios");
  bool as_json = false;
  qual->add_option("input", input, "Input .msh")->required();
  qual->add_flag("--json", as_json, "Print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? exit_code::ok : exit_code::usage;
  }

  try {
    for (const auto& [sub, name] : modes) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) opts.seed = seed;
      if (report) opts.report = fs::path(*report);
      return run_scenario(scenario, name, opts, out, err);
    }
    if (gen->parsed())
      return mesh_gen(shape, div, lo, hi, center, inner, outer, jitter, seed, max_ar, output, out);
    if (conv->parsed()) return mesh_convert(input, output, out);
    if (qual->parsed()) return mesh_quality(input, as_json, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return is_validation(e.code()) ? exit_code::validation : exit_code::numerical;
  }
  err << app.help();
  return exit_code::usage;
}

}  // namespace trifem
