#include "wkam/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>

#include "wkam/iteration.hpp"
#include "wkam/parallel.hpp"

namespace wkam {

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

// Non-finite values would serialize as null; keep them readable instead.
Json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

Json infimum_json(const InfimumEstimate& e) {
  return {{"raw", num(e.raw)},
          {"clamped", num(e.clamped)},
          {"std_error", e.std_error},
          {"witness", e.witness ? Json(e.witness->describe()) : Json()},
          {"evaluations", e.evaluations},
          {"budget_exhausted", e.budget_exhausted}};
}

Json scan_json(const ScanResult& s) {
  Json intervals = Json::array();
  for (const auto& [lo, hi] : s.intervals) intervals.push_back({lo, hi});
  Json table = Json::array();
  for (std::size_t k = 0; k < s.s.size(); ++k)
    table.push_back({s.s[k], num(s.min_objective[k]), static_cast<bool>(s.surviving[k])});
  return {{"direction", vec(s.direction)},
          {"step", s.step},
          {"width", s.width},
          {"intervals", intervals},
          {"truncated", s.truncated},
          {"refinements", s.refinements},
          {"evaluations", s.evaluations},
          {"budget_exhausted", s.budget_exhausted},
          {"columns", {"s", "min_objective", "surviving"}},
          {"table", table}};
}

Json aubry_json(const AubryReport& r) {
  Json per = Json::array();
  for (const auto& e : r.per_index) per.push_back(infimum_json(e));
  return {{"y", vec(r.y)},
          {"epsilon", r.epsilon},
          {"beta", r.beta},
          {"verdict", to_string(r.verdict)},
          {"reason", r.reason},
          {"b", vec(r.b)},
          {"characteristic", infimum_json(r.characteristic)},
          {"per_index", per},
          {"dichotomy_consistent", r.dichotomy_consistent},
          {"tolerances",
           {{"member_tol", r.member_tol},
            {"interior_tol", r.interior_tol},
            {"line_tol", r.line_tol}}},
          {"family", r.family},
          {"budget", r.budget},
          {"scan", scan_json(r.scan)}};
}

double torus_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double out = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double d = std::abs(a(k) - b(k)) - std::floor(std::abs(a(k) - b(k)));
    out = std::max(out, std::min(d, 1.0 - d));
  }
  return out;
}

int stage(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::critical_value: return 0;
    case ExperimentKind::infimum_curve: return 1;
    case ExperimentKind::verdict:
    case ExperimentKind::epsilon_sensitivity:
    case ExperimentKind::lemma55: return 2;
    case ExperimentKind::divergence:
    case ExperimentKind::verification: return 3;
  }
  return 4;
}

class Runner {
 public:
  Runner(const InstanceConfig& config, const RunOptions& options)
      : config_(config), options_(options), seed_(options.seed.value_or(config.seed)) {}

  RunOutcome run() {
    RunOutcome out;
    Json resolved = serialize_config(config_);
    resolved["seed"] = seed_;
    out.report["schema_version"] = kSchemaVersion;
    out.report["generator"] = {{"name", "wkam"}, {"version", kVersion},
                               {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                             std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                             std::to_string(EIGEN_MINOR_VERSION)}};
    out.report["config"] = resolved;
    out.report["seeds"] = {{"monte_carlo", seed_}, {"search", config_.search.seed}};

    const auto start = std::chrono::steady_clock::now();
    instance_.emplace(build_instance(config_));
    timing_["instance"] = seconds_since(start);
    out.report["instance"] = {{"velocity_bound", instance_->velocity_bound()},
                              {"grid_step", instance_->grid_step()},
                              {"dimension", instance_->dimension()},
                              {"count", instance_->count()}};

    std::vector<std::size_t> order(config_.experiments.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return stage(config_.experiments[a].kind) < stage(config_.experiments[b].kind);
    });

    Json results = Json::array();
    for (std::size_t k : order) {
      const auto& e = config_.experiments[k];
      if (options_.verify_only && e.kind != ExperimentKind::verification) continue;
      const auto t0 = std::chrono::steady_clock::now();
      Json entry{{"id", k}, {"kind", to_string(e.kind)}};
      try {
        entry["result"] = dispatch(e);
      } catch (const std::exception& error) {
        entry["error"] = error.what();
        errors_.push_back({{"id", k}, {"kind", to_string(e.kind)}, {"message", error.what()}});
      }
      timing_[std::to_string(k) + ":" + to_string(e.kind)] = seconds_since(t0);
      results.push_back(entry);
    }
    out.report["results"] = results;
    out.report["beta"] = beta_ ? Json{{"value", *beta_}, {"method", to_string(beta_method_)}} : Json();
    out.report["checks"] = checks_;
    out.report["errors"] = errors_;

    out.errors = !errors_.empty();
    out.checks_passed = !out.errors;
    for (const auto& c : checks_) out.checks_passed = out.checks_passed && c["passed"].get<bool>();
    timing_["total"] = seconds_since(start);
    out.timing = {{"unit", "seconds"}, {"wall_clock", timing_}};
    return out;
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  }

  void check(const std::string& name, bool passed, Json detail) {
    checks_.push_back({{"name", name}, {"passed", passed}, {"detail", std::move(detail)}});
  }

  SearchOptions search_options(double epsilon) const {
    return search_options_for(config_.search, epsilon, config_.grid_step);
  }

  VerdictOptions verdict_options(double epsilon) const {
    VerdictOptions v = config_.verdict;
    v.epsilon = epsilon;
    v.search = config_.search;
    v.scan = config_.scan;
    return v;
  }

  double beta() {
    if (beta_) return *beta_;
    if (config_.beta) {
      beta_ = *config_.beta;
      beta_method_ = CriticalValueMethod::oracle;
    } else {
      beta_ = critical_value(instance_->hamiltonian(), instance_->coupling(), config_.critical).beta;
    }
    return *beta_;
  }

  Json dispatch(const ExperimentConfig& e) {
    switch (e.kind) {
      case ExperimentKind::critical_value: return run_critical_value();
      case ExperimentKind::infimum_curve: return run_curve(e);
      case ExperimentKind::verdict: return run_verdict(e);
      case ExperimentKind::epsilon_sensitivity: return run_epsilon(e);
      case ExperimentKind::lemma55: return run_lemma55(e);
      case ExperimentKind::divergence: return run_divergence(e);
      case ExperimentKind::verification: return run_verification(e);
    }
    return {};
  }

  Json run_critical_value() {
    if (config_.beta) {
      const double b = beta();
      return {{"beta", b}, {"method", to_string(CriticalValueMethod::oracle)}};
    }
    const auto r = critical_value(instance_->hamiltonian(), instance_->coupling(), config_.critical);
    beta_ = r.beta;
    if (config_.checks.beta)
      check("critical_value", std::abs(r.beta - *config_.checks.beta) <= config_.checks.beta_tol,
            {{"beta", r.beta}, {"expected", *config_.checks.beta}, {"tol", config_.checks.beta_tol}});
    return {{"beta", r.beta},
            {"method", to_string(r.method)},
            {"x_points", r.x_points},
            {"tolerance", r.tolerance},
            {"lower", r.lower},
            {"sweeps", r.sweeps},
            {"max_violation", r.max_violation}};
  }

  std::vector<Eigen::VectorXd> curve_points(int n) const {
    std::vector<Eigen::VectorXd> out;
    if (config_.dimension == 1) {
      for (int k = 0; k < n; ++k) out.push_back(Eigen::VectorXd::Constant(1, double(k) / n));
    } else {
      for (int k1 = 0; k1 < n; ++k1)
        for (int k2 = 0; k2 < n; ++k2) out.push_back(Eigen::Vector2d(double(k1) / n, double(k2) / n));
    }
    return out;
  }

  Json run_curve(const ExperimentConfig& e) {
    const double b = beta();
    const auto points = curve_points(e.points_per_axis);
    const auto values =
        infimum_curve(*instance_, points, b, search_options(config_.verdict.epsilon), options_.jobs);
    Json table = Json::array();
    std::size_t best = 0;
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto& v = values[k];
      table.push_back({vec(points[k]), num(v.raw), num(v.clamped), v.evaluations,
                       v.budget_exhausted, v.witness ? v.witness->describe() : ""});
      if (v.raw < values[best].raw) best = k;
    }
    if (config_.checks.curve_argmin) {
      const double d = torus_distance(points[best], *config_.checks.curve_argmin);
      check("infimum_curve_argmin", d <= config_.checks.curve_tol,
            {{"argmin", vec(points[best])}, {"expected", vec(*config_.checks.curve_argmin)}});
    }
    return {{"beta", b},
            {"epsilon", config_.verdict.epsilon},
            {"argmin", vec(points[best])},
            {"minimum", num(values[best].raw)},
            {"columns", {"y", "raw", "clamped", "evaluations", "budget_exhausted", "witness"}},
            {"table", table}};
  }

  std::vector<AubryReport> verdicts(const std::vector<Eigen::VectorXd>& points, double epsilon) {
    const double b = beta();
    std::vector<AubryReport> out(points.size());
    parallel_for(points.size(), options_.jobs, [&](std::size_t k) {
      out[k] = aubry_verdict(*instance_, points[k], b, verdict_options(epsilon));
    });
    return out;
  }

  Json run_verdict(const ExperimentConfig& e) {
    const auto reports = verdicts(e.points, config_.verdict.epsilon);
    Json out = Json::array();
    for (const auto& r : reports) {
      out.push_back(aubry_json(r));
      for (const auto& y : config_.checks.members)
        if (torus_distance(y, r.y) == 0.0)
          check("member", r.verdict == Verdict::member && r.scan.width <= config_.checks.member_width_max,
                {{"y", vec(r.y)}, {"verdict", to_string(r.verdict)}, {"width", r.scan.width}});
      for (const auto& y : config_.checks.non_members)
        if (torus_distance(y, r.y) == 0.0)
          check("non_member",
                r.verdict == Verdict::non_member &&
                    r.scan.width >= config_.checks.non_member_width_min,
                {{"y", vec(r.y)}, {"verdict", to_string(r.verdict)}, {"width", r.scan.width}});
    }
    return {{"verdicts", out}};
  }

  Json run_epsilon(const ExperimentConfig& e) {
    Json table = Json::array();
    for (int k : e.multiples) {
      const double epsilon = k * config_.grid_step;
      for (const auto& r : verdicts(e.points, epsilon))
        table.push_back({vec(r.y), epsilon, num(r.characteristic.raw), r.scan.width,
                         to_string(r.verdict)});
    }
    return {{"columns", {"y", "epsilon", "characteristic", "width", "verdict"}}, {"table", table}};
  }

  Json run_lemma55(const ExperimentConfig& e) {
    const double b = beta();
    const auto reports = verdicts(e.points, config_.verdict.epsilon);
    std::vector<Json> rows(e.points.size());
    parallel_for(e.points.size(), options_.jobs, [&](std::size_t k) {
      const auto& r = reports[k];
      CycleSearch search(*instance_, r.y, search_options(config_.verdict.epsilon));
      const auto l = lemma55_equivalence(search, b, r.b, config_.verdict.member_tol);
      Json per = Json::array();
      for (const auto& p : l.per_index) per.push_back(infimum_json(p));
      rows[k] = {{"y", vec(r.y)},
                 {"verdict", to_string(r.verdict)},
                 {"b", vec(r.b)},
                 {"tolerance", config_.verdict.member_tol},
                 {"per_index", per},
                 {"characteristic", infimum_json(l.characteristic)},
                 {"per_index_small", l.per_index_small},
                 {"characteristic_small", l.characteristic_small},
                 {"agree", l.agree},
                 {"glued", l.glued_description},
                 {"glued_characteristic", l.glued_characteristic},
                 {"glued_combination", l.glued_combination},
                 {"identity_residual", l.identity_residual},
                 {"witness_residual", l.witness_residual},
                 {"max_per_index", l.max_per_index},
                 {"glued_bound", l.glued_bound}};
    });
    Json out = Json::array();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = rows[k];
      if (reports[k].verdict == Verdict::member)
        check("lemma55",
              row["agree"].get<bool>() && row["identity_residual"].get<double>() <= 1e-9 &&
                  row["glued_bound"].get<bool>(),
              {{"y", row["y"]}, {"identity_residual", row["identity_residual"]}});
      out.push_back(row);
    }
    return {{"points", out}};
  }

  Json run_divergence(const ExperimentConfig& e) {
    const double alpha = beta();
    const int m = instance_->count();
    const auto seed = resting_seed(m, e.index, instance_->dimension(), instance_->grid_step(),
                                   e.rest_steps, e.closure_steps);
    const double delta = e.delta_steps * instance_->grid_step();
    const auto d =
        divergence_experiment(*instance_, e.points[0], e.b, alpha, *seed, e.index, e.j_max, delta);
    const auto mc = divergence_monte_carlo(*instance_, e.points[0], e.b, alpha, seed, e.index,
                                           e.mc_levels, e.samples, seed_);
    Json table = Json::array();
    int first_failure = -1;
    for (const auto& row : d.rows) {
      if (!row.holds && first_failure < 0) first_failure = row.j;
      const bool sampled = row.j <= e.mc_levels;
      table.push_back({row.j, row.value, row.bound, row.increment, row.predicted_increment, row.holds,
                       sampled ? Json(mc[row.j].value) : Json(),
                       sampled ? Json(mc[row.j].std_error) : Json()});
    }
    bool early = true;
    for (const auto& row : d.rows)
      if (row.j <= 10) early = early && row.holds;
    check("divergence_bound_j_le_10", early, {{"first_failure", first_failure}});
    return {{"y", vec(e.points[0])},
            {"index", e.index},
            {"b", vec(e.b)},
            {"alpha", alpha},
            {"seed", seed->rule().describe()},
            {"mu", d.mu},
            {"rho", d.rho},
            {"delta", d.delta},
            {"limit", num(d.limit)},
            {"holds_all", d.holds()},
            {"first_failure", first_failure},
            {"mc_samples", e.samples},
            {"columns",
             {"j", "value", "bound", "increment", "predicted_increment", "holds", "mc_value",
              "mc_std_error"}},
            {"table", table}};
  }

  Json run_verification(const ExperimentConfig& e) {
    Json suite = verification_suite(*instance_, e.samples, seed_);
    for (const auto& [name, value] : suite.items())
      check("verification:" + name, value["passed"].get<bool>(), Json());
    return suite;
  }

  const InstanceConfig& config_;
  RunOptions options_;
  std::uint64_t seed_;
  std::optional<SystemInstance> instance_;
  std::optional<double> beta_;
  CriticalValueMethod beta_method_ = CriticalValueMethod::discrete_subsolution;
  Json checks_ = Json::array();
  Json errors_ = Json::array();
  Json timing_ = Json::object();
};

double z_score(double count, double n, double p) {
  const double sd = std::sqrt(n * p * (1.0 - p));
  return sd > 0.0 ? (count - n * p) / sd : (count == n * p ? 0.0 : 1e9);
}

}  // namespace

RunOutcome run_experiments(const InstanceConfig& config, const RunOptions& options) {
  return Runner(config, options).run();
}

Json verification_suite(const SystemInstance& instance, std::size_t samples, std::uint64_t seed) {
  const auto& a = instance.coupling();
  const int m = a.size();
  const double step = instance.grid_step();
  Json out;

  {
    double stochastic = 0.0, minimum = 1.0, law = 0.0;
    const std::vector<double> times{0.25, 0.5, 1.0, 2.0};
    for (double s : times) {
      const Eigen::MatrixXd p = semigroup(a, s).matrix();
      stochastic = std::max(stochastic, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
      minimum = std::min(minimum, p.minCoeff());
      for (double t : times)
        law = std::max(law, (semigroup(a, s + t).matrix() - p * semigroup(a, t).matrix())
                                .cwiseAbs()
                                .maxCoeff());
    }
    out["semigroup"] = {{"stochastic_error", stochastic},
                        {"min_entry", minimum},
                        {"law_error", law},
                        {"passed", stochastic <= 1e-10 && minimum > 0.0 && law <= 1e-9}};
  }

  {
    PathSampler sampler(a, seed, 1);
    const auto uniform = ProbabilityVectord::uniform(m);
    const std::vector<double> times{0.25, 0.5, 1.0};
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(times.size(), m);
    for (std::size_t s = 0; s < samples; ++s) {
      const JumpPath path = sampler.sample(uniform, 1.0);
      for (std::size_t k = 0; k < times.size(); ++k) counts(k, path(times[k])) += 1.0;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto law = marginal_pushforward(a, uniform, times[k]).vector();
      for (int j = 0; j < m; ++j)
        worst = std::max(worst, std::abs(z_score(counts(k, j), samples, law(j))));
    }
    out["marginals"] = {{"samples", samples}, {"max_z", worst}, {"passed", worst <= 3.0}};
  }

  {
    const int offset = 4;
    const GridStoppingTime tau(step, 16, rules::switch_count(1), std::vector<int>(m, offset));
    const auto exact = stopping_matrix(a, tau);
    const auto sampled = stopping_matrix_monte_carlo(a, tau, samples, seed + 2);
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double se = sampled.std_error(i, j);
        const double diff = std::abs(sampled.matrix(i, j) - exact.matrix(i, j));
        worst = std::max(worst, se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : 1e9));
      }
    const double rho = rho_bound(a, offset * step);
    const auto c = characteristic_vector(exact.matrix);
    out["stopping"] = {{"rule", tau.rule().describe()},
                       {"max_z", worst},
                       {"min_entry", exact.matrix.matrix().minCoeff()},
                       {"rho", rho},
                       {"characteristic_residual", c.residual},
                       {"passed", worst <= 3.0 && exact.matrix.matrix().minCoeff() > rho &&
                                      c.residual <= 1e-10}};

    const auto push =
        verify_shift_pushforward(a, ProbabilityVectord::uniform(m), tau, samples, seed + 3);
    out["pushforward"] = {{"cylinders", push.checks.size()},
                          {"max_z", push.max_deviation},
                          {"passed", push.passed()}};
  }

  {
    Rng rng = Rng::split(seed, 4);
    const int n = instance.dimension();
    const double bound = instance.velocity_bound();
    const auto& l = instance.lagrangian();
    // Tabulated L is a lower envelope in p plus an interpolation error in
    // (x, q); both are controlled by the grid steps.
    const double tol = 1e-2;
    double worst = std::numeric_limits<double>::infinity();
    const std::size_t triples = 10000;
    for (std::size_t s = 0; s < triples; ++s) {
      const int i = static_cast<int>(rng.uniform() * m) % m;
      Eigen::VectorXd x(n), q(n), p(n);
      for (int k = 0; k < n; ++k) {
        x(k) = rng.uniform();
        q(k) = (2.0 * rng.uniform() - 1.0) * bound;
        p(k) = (2.0 * rng.uniform() - 1.0) * bound;
      }
      const double lv = l(i, x, q);
      if (LagrangianTable::is_sentinel(lv)) continue;
      const double h = instance.hamiltonian()(i, x, p);
      if (!std::isfinite(h)) continue;
      worst = std::min(worst, lv + h - p.dot(q));
    }
    out["fenchel_young"] = {{"triples", triples},
                            {"min_gap", num(worst)},
                            {"tolerance", tol},
                            {"passed", worst >= -tol}};
  }

  {
    auto seed_cycle = std::make_shared<const AdaptedCycle>(
        step, 8, rules::first_hitting(0), policies::zero(instance.dimension()), std::vector<int>{4},
        std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(instance.dimension())});
    const IteratedCycle it(seed_cycle, 5);
    const auto r = verify_iteration(a, it, std::min<std::size_t>(samples, 10000), seed + 5);
    out["iteration"] = {{"level", r.level},
                        {"samples", r.samples},
                        {"lemma_residual", r.lemma_residual},
                        {"cycle_residual", r.cycle_residual},
                        {"flow_mismatches", r.flow_mismatches},
                        {"passed", r.lemma_residual <= 1e-12 && r.cycle_residual <= 1e-10 &&
                                       r.flow_mismatches == 0}};
  }
  return out;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

namespace {

std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return csv_field(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return csv_number(v.get<double>());
  if (v.is_array()) {
    std::string joined;
    for (std::size_t k = 0; k < v.size(); ++k)
      joined += (k ? " " : "") + (v[k].is_number() ? csv_number(v[k].get<double>()) : v[k].dump());
    return csv_field(joined);
  }
  return csv_field(v.dump());
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
    std::string line;
    for (std::size_t k = 0; k < header.size(); ++k) line += (k ? "," : "") + csv_field(header[k]);
    out_ << line << "\r\n";
  }
  void row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t k = 0; k < cells.size(); ++k) line += (k ? "," : "") + cells[k];
    out_ << line << "\r\n";
  }

 private:
  std::ofstream out_;
};

std::vector<std::string> header_of(const Json& columns) {
  std::vector<std::string> out;
  for (const auto& c : columns) out.push_back(c.get<std::string>());
  return out;
}

void dump_table(const Json& result, const std::filesystem::path& path,
                std::vector<std::filesystem::path>& written) {
  CsvFile file(path, header_of(result["columns"]));
  for (const auto& r : result["table"]) {
    std::vector<std::string> cells;
    for (const auto& v : r) cells.push_back(cell(v));
    file.row(cells);
  }
  written.push_back(path);
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const Json& report,
                                              const std::filesystem::path& directory) {
  std::vector<std::filesystem::path> written;
  if (!report.contains("results")) throw Error("report has no results section");
  const Json& results = report["results"];
  if (results.empty()) return written;
  std::filesystem::create_directories(directory);

  std::vector<Json> widths;
  for (const auto& entry : results) {
    if (!entry.contains("result")) continue;
    const std::string kind = entry["kind"];
    const std::string id = std::to_string(entry["id"].get<int>());
    const Json& r = entry["result"];
    if (kind == "infimum_curve") {
      dump_table(r, directory / ("infimum_curve_" + id + ".csv"), written);
    } else if (kind == "divergence") {
      dump_table(r, directory / ("divergence_" + id + ".csv"), written);
    } else if (kind == "epsilon_sensitivity") {
      dump_table(r, directory / ("epsilon_sensitivity_" + id + ".csv"), written);
    } else if (kind == "verdict") {
      int k = 0;
      for (const auto& v : r["verdicts"]) {
        dump_table(v["scan"], directory / ("scan_" + id + "_" + std::to_string(k++) + ".csv"),
                   written);
        widths.push_back({v["y"], v["scan"]["width"], v["characteristic"]["raw"], v["verdict"]});
      }
    }
  }
  if (!widths.empty()) {
    const auto path = directory / "widths.csv";
    CsvFile file(path, {"y", "width", "characteristic", "verdict"});
    for (const auto& w : widths) {
      std::vector<std::string> cells;
      for (const auto& v : w) cells.push_back(cell(v));
      file.row(cells);
    }
    written.push_back(path);
  }
  return written;
}

std::vector<std::filesystem::path> write_outputs(const RunOutcome& outcome,
                                                 const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  auto write = [&](const std::string& name, const Json& json) {
    const auto path = directory / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << json.dump(2) << "\n";
    return path;
  };
  std::vector<std::filesystem::path> written{write("report.json", outcome.report),
                                             write("timing.json", outcome.timing)};
  const auto tables = emit_plots(outcome.report, directory);
  written.insert(written.end(), tables.begin(), tables.end());
  return written;
}

}  // namespace wkam
