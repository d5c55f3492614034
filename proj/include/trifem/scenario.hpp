#ifndef TRIFEM_SCENARIO_HPP
#define TRIFEM_SCENARIO_HPP

#include "trifem/applications.hpp"
#include "trifem/atlas.hpp"
#include "trifem/fem.hpp"
#include "trifem/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace trifem {

using json = nlohmann::json;

// Exit codes of the command-line tool.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int validation = 2;
inline constexpr int numerical = 3;
inline constexpr int usage = 64;
}  // namespace exit_code

// Validation problems carry the JSON path of the offending field, e.g.
// "triplet.materials.2: expected a number or a 2x2 matrix".
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& path, const std::string& message)
      : Error(ErrorCode::InvalidSpec, path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Command-line overrides shared by all scenario modes.
struct RunOptions {
  std::vector<std::string> set;  // "dotted.path=value"
  std::optional<std::uint64_t> seed;
  std::optional<std::string> quadrature;
  std::optional<double> tol;
  std::optional<int> threads;
  bool sequential = false;
  bool timing = false;
  std::optional<std::filesystem::path> report;
};

// Applies one "a.b.c=value" override. The value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(json& doc, const std::string& assignment);

// Pieces of the scenario format, exposed for reuse and testing. `path` is
// the JSON path used in diagnostics.
ChartMap parse_chart(const json& j, const std::string& path, int dim);
MetricField parse_metric(const json& j, const std::string& path, int dim);
MaterialField parse_materials(const json& j, const std::string& path, int dim);
Triplet parse_triplet(const json& j, const std::string& path, int dim);
Mesh load_mesh(const json& j, const std::string& path, int dim,
               const std::filesystem::path& base_dir, std::optional<std::uint64_t> seed);
std::vector<DirichletCondition> parse_boundary(const json& j, const std::string& path,
                                               const Mesh& mesh);
SolverConfig parse_solver(const json& j, const std::string& path);
AssemblyOptions parse_assembly(const json& j, const std::string& path);

// Runs one scenario file and writes its report. Returns an exit code.
int run_scenario(const std::filesystem::path& file, const std::string& mode,
                 const RunOptions& options, std::ostream& out, std::ostream& err);

// Full command-line entry point (argv[0] is the program name).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace trifem

#endif  // TRIFEM_SCENARIO_HPP
