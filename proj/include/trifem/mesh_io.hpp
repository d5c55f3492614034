#ifndef TRIFEM_MESH_IO_HPP
#define TRIFEM_MESH_IO_HPP

#include "trifem/mesh.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trifem {

// Gmsh MSH 2.2 ASCII. Supported element types: 1 (2-node line), 2 (3-node
// triangle), 4 (4-node tetrahedron); type 15 (point) is skipped. Physical tags
// become region / boundary tags and $PhysicalNames become mesh names.
Mesh read_msh(std::istream& in);
Mesh read_msh(const std::filesystem::path& path);
void write_msh(const Mesh& m, std::ostream& out);
void write_msh(const Mesh& m, const std::filesystem::path& path);

struct VtkField {
  enum class Location { Node, Cell };
  std::string name;
  Location location = Location::Node;
  int components = 1;  // 1 for scalars, otherwise the mesh dimension
  std::vector<double> values;  // row-major, components per entry
};

// Legacy ASCII unstructured grid. Vectors are padded to 3 components.
void write_vtk(const Mesh& m, std::span<const VtkField> fields, std::ostream& out);
void write_vtk(const Mesh& m, std::span<const VtkField> fields, const std::filesystem::path& path);

// "x,y[,z],value" rows at 17 significant digits.
void write_probe_csv(std::span<const Point> points, std::span<const double> values,
                     std::ostream& out);
void write_probe_csv(std::span<const Point> points, std::span<const double> values,
                     const std::filesystem::path& path);

}  // namespace trifem

#endif  // TRIFEM_MESH_IO_HPP
