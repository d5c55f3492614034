#include "trifem/mesh_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace trifem {

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::string expect(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::MalformedFile, "line " + std::to_string(number_) + ": " + msg);
  }

  int number() const { return number_; }

 private:
  std::istream& in_;
  int number_ = 0;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  const auto b = s.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

long parse_count(LineReader& r, const std::string& line) {
  std::istringstream is(line);
  long n = -1;
  if (!(is >> n) || n < 0) r.fail("expected a non-negative count");
  return n;
}

struct RawElement {
  int type = 0;
  int physical = 0;
  std::vector<long> nodes;
};

}  // namespace

Mesh read_msh(std::istream& in) {
  LineReader r(in);
  std::string line;
  bool have_format = false;
  std::map<std::pair<int, int>, std::string> names;  // (dim, tag) -> name
  std::vector<Point> coords3;
  std::unordered_map<long, int> node_index;
  std::vector<RawElement> raw;

  while (r.next(line)) {
    const std::string section = trim(line);
    if (section == "$MeshFormat") {
      std::istringstream is(r.expect("format header"));
      std::string version;
      int file_type = -1, data_size = 0;
      if (!(is >> version >> file_type >> data_size)) r.fail("malformed $MeshFormat header");
      if (version != "2.2") throw Error(ErrorCode::UnsupportedVersion, "MSH version " + version);
      if (file_type != 0) throw Error(ErrorCode::UnsupportedVersion, "binary MSH files");
      if (trim(r.expect("$EndMeshFormat")) != "$EndMeshFormat") r.fail("expected $EndMeshFormat");
      have_format = true;
    } else if (section == "$PhysicalNames") {
      const long n = parse_count(r, r.expect("physical name count"));
      for (long i = 0; i < n; ++i) {
        const std::string l = r.expect("physical name");
        std::istringstream is(l);
        int dim = 0, tag = 0;
        if (!(is >> dim >> tag)) r.fail("malformed physical name");
        const auto q1 = l.find('"');
        const auto q2 = l.rfind('"');
        if (q1 == std::string::npos || q2 == q1) r.fail("physical name must be quoted");
        names[{dim, tag}] = l.substr(q1 + 1, q2 - q1 - 1);
      }
      if (trim(r.expect("$EndPhysicalNames")) != "$EndPhysicalNames")
        r.fail("expected $EndPhysicalNames");
    } else if (section == "$Nodes") {
      if (!have_format) r.fail("$Nodes before $MeshFormat");
      const long n = parse_count(r, r.expect("node count"));
      coords3.reserve(static_cast<std::size_t>(n));
      for (long i = 0; i < n; ++i) {
        std::istringstream is(r.expect("node"));
        long id = 0;
        double x = 0, y = 0, z = 0;
        if (!(is >> id >> x >> y >> z)) r.fail("malformed node line");
        if (!node_index.emplace(id, static_cast<int>(coords3.size())).second)
          r.fail("duplicate node id " + std::to_string(id));
        coords3.push_back(make_vec({x, y, z}));
      }
      if (trim(r.expect("$EndNodes")) != "$EndNodes") r.fail("expected $EndNodes");
    } else if (section == "$Elements") {
      if (!have_format) r.fail("$Elements before $MeshFormat");
      const long n = parse_count(r, r.expect("element count"));
      for (long i = 0; i < n; ++i) {
        std::istringstream is(r.expect("element"));
        long id = 0;
        int type = 0, ntags = 0;
        if (!(is >> id >> type >> ntags) || ntags < 0) r.fail("malformed element line");
        int nv = 0;
        switch (type) {
          case 1: nv = 2; break;
          case 2: nv = 3; break;
          case 4: nv = 4; break;
          case 15: nv = 1; break;
          default:
            throw Error(ErrorCode::UnsupportedVersion,
                        "line " + std::to_string(r.number()) + ": element type " +
                            std::to_string(type) + " is not supported");
        }
        RawElement el;
        el.type = type;
        for (int t = 0; t < ntags; ++t) {
          int tag = 0;
          if (!(is >> tag)) r.fail("missing element tag");
          if (t == 0) el.physical = tag;
        }
        for (int k = 0; k < nv; ++k) {
          long node = 0;
          if (!(is >> node)) r.fail("missing element node");
          auto it = node_index.find(node);
          if (it == node_index.end()) r.fail("unknown node id " + std::to_string(node));
          el.nodes.push_back(it->second);
        }
        if (type != 15) raw.push_back(std::move(el));
      }
      if (trim(r.expect("$EndElements")) != "$EndElements") r.fail("expected $EndElements");
    } else if (!section.empty() && section[0] == '$') {
      const std::string end = "$End" + section.substr(1);
      while (true) {
        if (trim(r.expect(end.c_str())) == end) break;
      }
    } else {
      r.fail("unexpected content '" + section + "'");
    }
  }
  if (!have_format) throw Error(ErrorCode::MalformedFile, "missing $MeshFormat section");

  const bool has_tets = std::any_of(raw.begin(), raw.end(), [](const RawElement& e) { return e.type == 4; });
  const int dim = has_tets ? 3 : 2;
  std::vector<Point> nodes;
  nodes.reserve(coords3.size());
  for (std::size_t i = 0; i < coords3.size(); ++i) {
    if (dim == 2) {
      if (coords3[i](2) != 0.0)
        throw Error(ErrorCode::MalformedFile, "2D mesh node " + std::to_string(i) + " has nonzero z");
      nodes.push_back(coords3[i].head(2));
    } else {
      nodes.push_back(coords3[i]);
    }
  }
  const int cell_type = dim == 2 ? 2 : 4;
  const int facet_type = dim == 2 ? 1 : 2;
  std::vector<Element> elements;
  std::vector<BoundaryFacet> facets;
  for (const auto& e : raw) {
    if (e.type == cell_type) {
      Element el;
      el.region = e.physical;
      for (std::size_t k = 0; k < e.nodes.size(); ++k) el.nodes[k] = static_cast<int>(e.nodes[k]);
      elements.push_back(el);
    } else if (e.type == facet_type) {
      BoundaryFacet f;
      f.tag = e.physical;
      for (std::size_t k = 0; k < e.nodes.size(); ++k) f.nodes[k] = static_cast<int>(e.nodes[k]);
      facets.push_back(f);
    }
  }
  if (elements.empty()) throw Error(ErrorCode::MalformedFile, "no simplex elements found");
  Mesh m(dim, std::move(nodes), std::move(elements), std::move(facets));
  for (const auto& [key, name] : names) {
    if (key.first == dim) m.region_names[name] = key.second;
    if (key.first == dim - 1) m.boundary_names[name] = key.second;
  }
  return m;
}

Mesh read_msh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_msh(in);
}

void write_msh(const Mesh& m, std::ostream& out) {
  const int dim = m.dim();
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  const std::size_t nnames = m.boundary_names.size() + m.region_names.size();
  if (nnames > 0) {
    out << "$PhysicalNames\n" << nnames << "\n";
    for (const auto& [name, tag] : m.boundary_names)
      out << dim - 1 << " " << tag << " \"" << name << "\"\n";
    for (const auto& [name, tag] : m.region_names)
      out << dim << " " << tag << " \"" << name << "\"\n";
    out << "$EndPhysicalNames\n";
  }
  out << "$Nodes\n" << m.num_nodes() << "\n";
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const auto& p = m.node(i);
    out << i + 1 << " " << fmt17(p(0)) << " " << fmt17(p(1)) << " "
        << (dim == 3 ? fmt17(p(2)) : std::string("0")) << "\n";
  }
  out << "$EndNodes\n$Elements\n" << m.facets().size() + m.num_elements() << "\n";
  std::size_t id = 1;
  for (const auto& f : m.facets()) {
    out << id++ << " " << (dim == 2 ? 1 : 2) << " 2 " << f.tag << " " << f.tag;
    for (int k = 0; k < dim; ++k) out << " " << f.nodes[static_cast<std::size_t>(k)] + 1;
    out << "\n";
  }
  for (const auto& e : m.elements()) {
    out << id++ << " " << (dim == 2 ? 2 : 4) << " 2 " << e.region << " " << e.region;
    for (int k = 0; k <= dim; ++k) out << " " << e.nodes[static_cast<std::size_t>(k)] + 1;
    out << "\n";
  }
  out << "$EndElements\n";
}

void write_msh(const Mesh& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_msh(m, out);
}

void write_vtk(const Mesh& m, std::span<const VtkField> fields, std::ostream& out) {
  const int dim = m.dim();
  for (const auto& f : fields) {
    const std::size_t count =
        f.location == VtkField::Location::Node ? m.num_nodes() : m.num_elements();
    if (f.components != 1 && f.components != dim)
      throw Error(ErrorCode::LengthMismatch, "field " + f.name + " must have 1 or dim components");
    if (f.values.size() != count * static_cast<std::size_t>(f.components))
      throw Error(ErrorCode::LengthMismatch,
                  "field " + f.name + " has " + std::to_string(f.values.size()) +
                      " values, expected " + std::to_string(count * static_cast<std::size_t>(f.components)));
  }
  out << "# vtk DataFile Version 3.0\ntrifem\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.num_nodes() << " double\n";
  for (const auto& p : m.nodes())
    out << fmt17(p(0)) << " " << fmt17(p(1)) << " " << (dim == 3 ? fmt17(p(2)) : "0") << "\n";
  const int nv = dim + 1;
  out << "CELLS " << m.num_elements() << " " << m.num_elements() * static_cast<std::size_t>(nv + 1)
      << "\n";
  for (const auto& e : m.elements()) {
    out << nv;
    for (int k = 0; k < nv; ++k) out << " " << e.nodes[static_cast<std::size_t>(k)];
    out << "\n";
  }
  out << "CELL_TYPES " << m.num_elements() << "\n";
  for (std::size_t e = 0; e < m.num_elements(); ++e) out << (dim == 2 ? 5 : 10) << "\n";

  auto emit = [&](VtkField::Location where) {
    for (const auto& f : fields) {
      if (f.location != where) continue;
      const std::size_t count = f.values.size() / static_cast<std::size_t>(f.components);
      if (f.components == 1) {
        out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : f.values) out << fmt17(v) << "\n";
      } else {
        out << "VECTORS " << f.name << " double\n";
        for (std::size_t i = 0; i < count; ++i) {
          for (int c = 0; c < 3; ++c) {
            const double v = c < f.components
                                 ? f.values[i * static_cast<std::size_t>(f.components) + static_cast<std::size_t>(c)]
                                 : 0.0;
            out << (c ? " " : "") << fmt17(v);
          }
          out << "\n";
        }
      }
    }
  };
  auto any_at = [&](VtkField::Location where) {
    return std::any_of(fields.begin(), fields.end(), [&](const VtkField& f) { return f.location == where; });
  };
  if (any_at(VtkField::Location::Node)) {
    out << "POINT_DATA " << m.num_nodes() << "\n";
    emit(VtkField::Location::Node);
  }
  if (any_at(VtkField::Location::Cell)) {
    out << "CELL_DATA " << m.num_elements() << "\n";
    emit(VtkField::Location::Cell);
  }
}

void write_vtk(const Mesh& m, std::span<const VtkField> fields, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_vtk(m, fields, out);
}

void write_probe_csv(std::span<const Point> points, std::span<const double> values,
                     std::ostream& out) {
  if (points.size() != values.size())
    throw Error(ErrorCode::LengthMismatch, "probe points and values differ in length");
  const auto dim = points.empty() ? 2 : points.front().size();
  out << (dim == 3 ? "x,y,z,value\n" : "x,y,value\n");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (Eigen::Index c = 0; c < points[i].size(); ++c) out << fmt17(points[i](c)) << ",";
    out << fmt17(values[i]) << "\n";
  }
}

void write_probe_csv(std::span<const Point> points, std::span<const double> values,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_probe_csv(points, values, out);
}

}  // namespace trifem
