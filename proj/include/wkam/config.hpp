#pragma once

// Instance configuration: JSON with an explicit schema version. Unknown keys
// are errors. Every default is resolved at parse time, so serializing a
// parsed config writes the complete set of values a run used.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "wkam/aubry.hpp"

namespace wkam {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct HamiltonianConfig {
  HamiltonianKind kind = HamiltonianKind::quadratic_minus_potential;
  Potential potential;
  std::string table_file;  // as written in the config
  double p_min = 0.0;
  double p_max = 0.0;
};

enum class ExperimentKind {
  critical_value,
  infimum_curve,
  verdict,
  epsilon_sensitivity,
  lemma55,
  divergence,
  verification
};
const char* to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::critical_value;
  std::vector<Eigen::VectorXd> points;  // verdict, epsilon_sensitivity, lemma55, divergence
  int points_per_axis = 32;             // infimum_curve
  std::vector<int> multiples{2, 4, 8};  // epsilon_sensitivity, in grid steps
  int index = 0;                        // divergence
  Eigen::VectorXd b;                    // divergence
  int rest_steps = 0;                   // divergence
  int closure_steps = 4;                // divergence
  int delta_steps = 1;                  // divergence: tau^0 >> delta_steps * D in D_i
  int j_max = 30;                       // divergence
  int mc_levels = 10;                   // divergence
  std::size_t samples = 20000;          // divergence MC, verification
};

struct ChecksConfig {
  std::optional<double> beta;
  double beta_tol = 2e-2;
  std::vector<Eigen::VectorXd> members;
  std::vector<Eigen::VectorXd> non_members;
  std::optional<Eigen::VectorXd> curve_argmin;
  double curve_tol = 1e-9;
  double member_width_max = 2e-2;
  double non_member_width_min = 0.1;
};

struct InstanceConfig {
  std::string name;
  int dimension = 1;
  Eigen::MatrixXd coupling;
  std::vector<HamiltonianConfig> hamiltonians;
  double velocity_bound = 0.0;  // 0 selects 3 * lipschitz_estimate
  double grid_step = 1.0 / 16.0;
  FenchelGrids fenchel;
  CriticalValueOptions critical;
  std::optional<double> beta;  // known critical value; skips the sweep
  std::uint64_t seed = 1;      // Monte Carlo seed
  SearchOptions search;
  VerdictOptions verdict;      // its search and scan members are ignored
  ScanOptions scan;
  ChecksConfig checks;
  std::vector<ExperimentConfig> experiments;
  std::filesystem::path base_dir;  // for relative table paths; not serialized
};

/// Throws ConfigError on schema violations, unknown keys or invalid values.
InstanceConfig parse_config(const Json& json, const std::filesystem::path& base_dir = {});
InstanceConfig load_config(const std::filesystem::path& path);
Json serialize_config(const InstanceConfig& config);

/// Reads a tabulated Hamiltonian: one CSV row per x node, one column per p node.
HamiltonianTableData load_table(const std::filesystem::path& path, double p_min, double p_max);

HamiltonianSpec build_hamiltonian(const InstanceConfig& config);
/// Validates the coupling and Hamiltonians and tabulates L.
SystemInstance build_instance(const InstanceConfig& config);

}  // namespace wkam
