#pragma once

// Experiment orchestration, report assembly and plot-data tables.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wkam/config.hpp"

namespace wkam {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config's Monte Carlo seed
  int jobs = 1;
  bool verify_only = false;           // run only the verification experiments
};

struct RunOutcome {
  Json report;  // deterministic given config and seeds
  Json timing;  // wall-clock seconds per experiment
  bool checks_passed = true;
  bool errors = false;
};

/// Runs the config's experiments in stage order (critical value, scans,
/// verdicts, verification suites), keeping declaration order within a stage.
/// Failures of one experiment are recorded without aborting the others.
RunOutcome run_experiments(const InstanceConfig& config, const RunOptions& options = {});

/// Invariant suites on the instance: semigroup, path measure, stopping
/// matrices, push-forward, Fenchel-Young and iteration identities.
Json verification_suite(const SystemInstance& instance, std::size_t samples, std::uint64_t seed);

/// One field of a CSV file, quoted per RFC 4180 when needed.
std::string csv_field(const std::string& value);
std::string csv_number(double value);

/// Plot tables derived from a report, one CSV file each. Returns the files
/// written; an empty results section writes nothing.
std::vector<std::filesystem::path> emit_plots(const Json& report,
                                              const std::filesystem::path& directory);

/// report.json, timing.json and the plot tables.
std::vector<std::filesystem::path> write_outputs(const RunOutcome& outcome,
                                                 const std::filesystem::path& directory);

}  // namespace wkam
