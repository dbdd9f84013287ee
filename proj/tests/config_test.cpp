#include <gtest/gtest.h>

#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "support.hpp"
#include "wkam/runner.hpp"

namespace wkam {
namespace {

namespace fs = std::filesystem;
using test::source_dir;

Json twowell_json() {
  std::ifstream in(source_dir() / "configs" / "twowell.json");
  return Json::parse(in);
}

Json small_config() {
  Json j = twowell_json();
  j["experiments"] = Json::array();
  j["experiments"].push_back({{"kind", "critical_value"}});
  j["checks"] = {{"beta", 1.0}};
  return j;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wkam_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Config, RoundTrip) {
  const auto config = load_config(source_dir() / "configs" / "twowell.json");
  EXPECT_EQ(config.name, "twowell");
  EXPECT_EQ(config.experiments.size(), 7u);
  EXPECT_DOUBLE_EQ(config.verdict.epsilon, 0.25);
  const Json once = serialize_config(config);
  const Json twice = serialize_config(parse_config(once, source_dir() / "configs"));
  EXPECT_EQ(once.dump(), twice.dump());
}

TEST(Config, UnknownKeysAreErrors) {
  Json top = twowell_json();
  top["grid_stepp"] = 0.1;
  try {
    parse_config(top);
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("grid_stepp"), std::string::npos) << e.what();
  }
  Json nested = twowell_json();
  nested["experiments"][1]["point_per_axis"] = 8;
  EXPECT_THROW(parse_config(nested), ConfigError);
  Json check = twowell_json();
  check["checks"]["bta"] = 1.0;
  EXPECT_THROW(parse_config(check), ConfigError);
}

TEST(Config, SchemaVersion) {
  Json j = twowell_json();
  j["schema_version"] = 2;
  EXPECT_THROW(parse_config(j), ConfigError);
  j.erase("schema_version");
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, InvalidValues) {
  Json j = twowell_json();
  j["experiments"][2]["points"] = Json::array({Json::array({0.1, 0.2})});
  EXPECT_THROW(parse_config(j), ConfigError);
  j = twowell_json();
  j["grid_step"] = 0.1;
  EXPECT_THROW(build_instance(parse_config(j)), Error);
  j = twowell_json();
  j["experiments"][0]["kind"] = "nonsense";
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, RowSumViolationNamesTheRow) {
  Json j = twowell_json();
  j["coupling"] = Json::array({Json::array({1.0, -1.0}), Json::array({-1.0, 0.5})});
  try {
    parse_config(j);
    FAIL() << "no error";
  } catch (const RowSumViolation& e) {
    EXPECT_EQ(e.row(), 1);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(Config, TableHamiltonian) {
  const fs::path dir = scratch("table");
  {
    std::ofstream out(dir / "h.csv");
    for (int ix = 0; ix < 8; ++ix) {
      for (int ip = 0; ip <= 64; ++ip) {
        const double p = -4.0 + ip * 0.125;
        out << (ip ? "," : "") << 0.5 * p * p;
      }
      out << "\n";
    }
  }
  Json j = small_config();
  j["hamiltonians"][1] = {{"kind", "table"}, {"file", "h.csv"}, {"p_min", -4.0}, {"p_max", 4.0}};
  j["velocity_bound"] = 2.0;
  const auto config = parse_config(j, dir);
  const auto h = build_hamiltonian(config);
  EXPECT_EQ(h.component(1).table.x_points, 8);
  EXPECT_EQ(h.component(1).table.p_points, 65);
  EXPECT_NEAR(h(1, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, 1.0)), 0.5,
              1e-12);
  j["hamiltonians"][1]["file"] = "missing.csv";
  EXPECT_THROW(parse_config(j, dir), ConfigError);
}

TEST(Csv, Quoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02e23}) {
    const std::string s = csv_number(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
}

TEST(Plots, EmptyResultsWriteNoTables) {
  Json j = small_config();
  j["experiments"] = Json::array();
  const auto outcome = run_experiments(parse_config(j));
  EXPECT_TRUE(outcome.report["results"].empty());
  const fs::path dir = scratch("empty");
  EXPECT_TRUE(emit_plots(outcome.report, dir).empty());
  const auto written = write_outputs(outcome, dir);
  ASSERT_EQ(written.size(), 2u);
  EXPECT_EQ(written[0].filename(), "report.json");
  EXPECT_EQ(written[1].filename(), "timing.json");
}

TEST(Plots, CsvUsesCrlf) {
  Json j = small_config();
  j["experiments"] = Json::array({{{"kind", "infimum_curve"}, {"points_per_axis", 4}}});
  j["checks"] = Json::object();
  const auto outcome = run_experiments(parse_config(j));
  const fs::path dir = scratch("crlf");
  const auto files = emit_plots(outcome.report, dir);
  ASSERT_EQ(files.size(), 1u);
  std::ifstream in(files[0], std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text.rfind("y,raw,clamped", 0), 0u) << text.substr(0, 40);
  std::size_t lines = 0;
  for (std::size_t k = 0; k < text.size(); ++k)
    if (text[k] == '\n') {
      ++lines;
      EXPECT_EQ(text[k - 1], '\r');
    }
  EXPECT_EQ(lines, 5u);
}

TEST(Runner, FailuresAreRecordedNotFatal) {
  Json j = small_config();
  j["experiments"].push_back({{"kind", "divergence"}, {"points", {{0.5}}}, {"index", 1},
                              {"b", {0.0, 0.0}}, {"samples", 100}});
  const auto outcome = run_experiments(parse_config(j));
  EXPECT_TRUE(outcome.errors);
  ASSERT_EQ(outcome.report["errors"].size(), 1u);
  EXPECT_EQ(outcome.report["errors"][0]["kind"], "divergence");
  EXPECT_TRUE(outcome.report["results"][0].contains("result"));
  EXPECT_TRUE(outcome.report["results"][1].contains("error"));
}

TEST(Runner, SeedOverrideOnlyMovesMonteCarlo) {
  Json j = small_config();
  j["beta"] = 1.0;
  j["experiments"] = Json::array({{{"kind", "divergence"}, {"points", {{0.5}}}, {"index", 1},
                                   {"b", {0.0, 0.5}}, {"j_max", 12}, {"mc_levels", 3},
                                   {"samples", 2000}}});
  const auto config = parse_config(j);
  const auto a = run_experiments(config);
  const auto b = run_experiments(config);
  EXPECT_EQ(a.report.dump(), b.report.dump());
  RunOptions options;
  options.seed = 7;
  const auto c = run_experiments(config, options);
  EXPECT_EQ(c.report["seeds"]["monte_carlo"], 7);
  const auto& ra = a.report["results"][0]["result"];
  const auto& rc = c.report["results"][0]["result"];
  EXPECT_EQ(ra["mu"], rc["mu"]);
  EXPECT_EQ(ra["table"][2][1], rc["table"][2][1]);
  EXPECT_NE(ra["table"][2][6], rc["table"][2][6]);
}

// Exact-DP fields of the reference run. WKAM_UPDATE_GOLDEN=1 rewrites the file.
const std::vector<std::string> kPinned{
    "/results/0/result/beta",
    "/results/0/result/lower",
    "/results/1/result/argmin",
    "/results/1/result/minimum",
    "/results/2/result/verdicts/0/verdict",
    "/results/2/result/verdicts/1/verdict",
    "/results/2/result/verdicts/2/verdict",
    "/results/2/result/verdicts/0/scan/width",
    "/results/2/result/verdicts/1/scan/width",
    "/results/2/result/verdicts/1/characteristic/raw",
    "/results/4/result/points/0/agree",
    "/results/5/result/mu",
    "/results/5/result/rho",
    "/results/5/result/limit",
    "/results/5/result/first_failure",
    "/results/5/result/table/0/1",
    "/results/5/result/table/10/1",
    "/results/5/result/table/50/1",
    "/results/5/result/table/100/1",
};

void expect_close(const Json& got, const Json& want, const std::string& where) {
  if (want.is_number_float()) {
    ASSERT_TRUE(got.is_number()) << where;
    const double g = got.get<double>(), w = want.get<double>();
    EXPECT_LE(std::abs(g - w), 1e-9 * std::max(1.0, std::abs(w))) << where;
  } else if (want.is_array()) {
    ASSERT_EQ(got.size(), want.size()) << where;
    for (std::size_t k = 0; k < want.size(); ++k) expect_close(got[k], want[k], where);
  } else {
    EXPECT_EQ(got, want) << where;
  }
}

TEST(Golden, TwoWellReport) {
  const auto config = load_config(source_dir() / "configs" / "twowell.json");
  RunOptions options;
  options.jobs = 4;
  const auto outcome = run_experiments(config, options);
  EXPECT_TRUE(outcome.checks_passed);
  EXPECT_FALSE(outcome.errors);
  const fs::path golden = source_dir() / "tests" / "data" / "twowell_golden.json";
  if (const char* update = std::getenv("WKAM_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    Json out = Json::object();
    for (const auto& p : kPinned) out[p] = outcome.report.at(Json::json_pointer(p));
    std::ofstream(golden) << out.dump(2) << "\n";
    GTEST_SKIP() << "golden file rewritten";
  }
  std::ifstream in(golden);
  ASSERT_TRUE(in) << golden;
  const Json want = Json::parse(in);
  for (const auto& p : kPinned) {
    ASSERT_TRUE(want.contains(p)) << p;
    expect_close(outcome.report.at(Json::json_pointer(p)), want[p], p);
  }
}

int run_cli(const std::string& args) {
  const std::string command = std::string(WKAM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const auto write = [&](const std::string& name, const Json& j) {
    std::ofstream(dir / name) << j.dump();
    return (dir / name).string();
  };
  const std::string out = " --out " + (dir / "out").string();
  EXPECT_EQ(run_cli("run " + write("ok.json", small_config()) + out + " --check"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));

  Json bad = small_config();
  bad["unexpected"] = true;
  EXPECT_EQ(run_cli("run " + write("bad.json", bad) + out), 1);

  Json failing = small_config();
  failing["checks"]["beta"] = 5.0;
  const std::string path = write("failing.json", failing);
  EXPECT_EQ(run_cli("run " + path + out), 0);
  EXPECT_EQ(run_cli("run " + path + out + " --check"), 2);

  EXPECT_NE(run_cli("run " + (dir / "absent.json").string()), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_EQ(run_cli("plots " + (dir / "out" / "report.json").string()), 0);
}

}  // namespace
}  // namespace wkam
