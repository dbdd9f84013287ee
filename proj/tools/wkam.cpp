#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "wkam/runner.hpp"

namespace {

std::filesystem::path default_out() {
  if (const char* env = std::getenv("WKAM_OUT_DIR"); env && *env) return env;
  return "wkam_out";
}

int run_command(const std::string& config_path, const std::string& out_dir,
                const wkam::RunOptions& options, bool check) {
  wkam::InstanceConfig config;
  try {
    config = wkam::load_config(config_path);
  } catch (const wkam::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  wkam::RunOutcome outcome;
  try {
    outcome = wkam::run_experiments(config, options);
  } catch (const wkam::Error& e) {
    // Only instance construction can throw here; experiments record their own failures.
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  const auto dir = out_dir.empty() ? default_out() : std::filesystem::path(out_dir);
  for (const auto& path : wkam::write_outputs(outcome, dir)) std::cout << path.string() << "\n";
  for (const auto& c : outcome.report["checks"])
    std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "\n";
  for (const auto& e : outcome.report["errors"])
    std::cerr << "experiment " << e["id"] << " (" << e["kind"].get<std::string>()
              << ") failed: " << e["message"].get<std::string>() << "\n";
  if (check && !outcome.checks_passed) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly coupled Hamilton-Jacobi systems: critical values and Aubry set tests"};
  app.require_subcommand(1);

  std::string config_path, out_dir, report_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool check = false;

  auto* run = app.add_subcommand("run", "run the config's experiments and write the report");
  run->add_option("config", config_path, "instance config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (default $WKAM_OUT_DIR or ./wkam_out)");
  auto* seed_opt = run->add_option("--seed", seed, "Monte Carlo seed override");
  run->add_flag("--check", check, "exit 2 when an acceptance check fails");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "run only the invariant suites");
  verify->add_option("config", config_path, "instance config (JSON)")->required()->check(CLI::ExistingFile);
  verify->add_option("--out", out_dir, "output directory");
  verify->add_option("--seed", seed, "Monte Carlo seed override");

  auto* plots = app.add_subcommand("plots", "write plot tables from a report");
  plots->add_option("report", report_path, "report.json")->required()->check(CLI::ExistingFile);
  plots->add_option("--out", out_dir, "output directory (default: next to the report)");

  CLI11_PARSE(app, argc, argv);

  wkam::RunOptions options;
  options.jobs = jobs;
  if (*seed_opt || (verify->parsed() && verify->count("--seed"))) options.seed = seed;

  if (run->parsed()) return run_command(config_path, out_dir, options, check);
  if (verify->parsed()) {
    options.verify_only = true;
    return run_command(config_path, out_dir, options, true);
  }

  std::ifstream in(report_path);
  wkam::Json report;
  try {
    report = wkam::Json::parse(in);
    const auto dir = out_dir.empty() ? std::filesystem::path(report_path).parent_path()
                                     : std::filesystem::path(out_dir);
    for (const auto& path : wkam::emit_plots(report, dir.empty() ? "." : dir))
      std::cout << path.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "plots: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
