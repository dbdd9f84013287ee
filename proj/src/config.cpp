#include "wkam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace wkam {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::critical_value: return "critical_value";
    case ExperimentKind::infimum_curve: return "infimum_curve";
    case ExperimentKind::verdict: return "verdict";
    case ExperimentKind::epsilon_sensitivity: return "epsilon_sensitivity";
    case ExperimentKind::lemma55: return "lemma55";
    case ExperimentKind::divergence: return "divergence";
    case ExperimentKind::verification: return "verification";
  }
  return "?";
}

namespace {

// Object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(const Json& json, std::string where) : json_(json), where_(std::move(where)) {
    if (!json_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(where_ + ": " + message);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return json_.contains(key) && !json_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    if (!has(key)) fail("missing key '" + key + "'");
    return json_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  template <typename T>
  T get(const std::string& key) {
    const Json& v = at(key);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      fail("key '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (has(key)) target = get<T>(key);
  }

  void finish() const {
    for (const auto& [key, value] : json_.items())
      if (!seen_.count(key)) fail("unknown key '" + key + "'");
  }

 private:
  const Json& json_;
  std::string where_;
  std::set<std::string> seen_;
};

Eigen::VectorXd to_vector(const Json& json, const std::string& where) {
  if (!json.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Eigen::VectorXd v(json.size());
  for (std::size_t k = 0; k < json.size(); ++k) {
    if (!json[k].is_number()) throw ConfigError(where + ": expected numbers");
    v(k) = json[k].get<double>();
  }
  return v;
}

std::vector<Eigen::VectorXd> to_points(const Json& json, const std::string& where, int dimension) {
  if (!json.is_array()) throw ConfigError(where + ": expected an array of points");
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : json) {
    out.push_back(to_vector(p, where));
    if (out.back().size() != dimension)
      throw ConfigError(where + ": point dimension must be " + std::to_string(dimension));
  }
  return out;
}

Json from_vector(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

Json from_points(const std::vector<Eigen::VectorXd>& points) {
  Json out = Json::array();
  for (const auto& p : points) out.push_back(from_vector(p));
  return out;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

Potential parse_potential(const Json& json, const std::string& where, int dimension) {
  Reader r(json, where);
  Potential out;
  r.read("constant", out.constant);
  if (r.has("terms")) {
    const Json& terms = r.at("terms");
    require(terms.is_array(), where + ".terms: expected an array");
    for (std::size_t k = 0; k < terms.size(); ++k) {
      Reader t(terms[k], where + ".terms[" + std::to_string(k) + "]");
      CosineTerm term;
      term.amplitude = t.get<double>("amplitude");
      const auto wave = t.get<std::vector<int>>("wave");
      require(static_cast<int>(wave.size()) == dimension, t.path("wave") + ": wrong dimension");
      term.wave = Eigen::Map<const Eigen::VectorXi>(wave.data(), dimension);
      t.read("phase", term.phase);
      t.finish();
      out.terms.push_back(term);
    }
  }
  r.finish();
  return out;
}

HamiltonianConfig parse_hamiltonian(const Json& json, const std::string& where, int dimension) {
  Reader r(json, where);
  HamiltonianConfig out;
  const auto kind = r.get<std::string>("kind");
  if (kind == "quadratic_minus_potential") {
    out.kind = HamiltonianKind::quadratic_minus_potential;
    out.potential = parse_potential(r.at("potential"), r.path("potential"), dimension);
  } else if (kind == "table") {
    out.kind = HamiltonianKind::table;
    out.table_file = r.get<std::string>("file");
    out.p_min = r.get<double>("p_min");
    out.p_max = r.get<double>("p_max");
    require(out.p_max > out.p_min, where + ": p_max must exceed p_min");
  } else {
    r.fail("unknown Hamiltonian kind '" + kind + "'");
  }
  r.finish();
  return out;
}

ExperimentConfig parse_experiment(const Json& json, const std::string& where, int dimension,
                                  int m) {
  Reader r(json, where);
  ExperimentConfig out;
  const auto kind = r.get<std::string>("kind");
  auto points = [&](bool required) {
    if (required || r.has("points")) out.points = to_points(r.at("points"), r.path("points"), dimension);
  };
  if (kind == "critical_value") {
    out.kind = ExperimentKind::critical_value;
  } else if (kind == "infimum_curve") {
    out.kind = ExperimentKind::infimum_curve;
    r.read("points_per_axis", out.points_per_axis);
    require(out.points_per_axis >= 2, where + ": points_per_axis must be >= 2");
  } else if (kind == "verdict") {
    out.kind = ExperimentKind::verdict;
    points(true);
  } else if (kind == "epsilon_sensitivity") {
    out.kind = ExperimentKind::epsilon_sensitivity;
    points(true);
    r.read("multiples", out.multiples);
    for (int k : out.multiples) require(k >= 1, where + ": multiples must be >= 1");
  } else if (kind == "lemma55") {
    out.kind = ExperimentKind::lemma55;
    points(true);
  } else if (kind == "divergence") {
    out.kind = ExperimentKind::divergence;
    points(true);
    require(out.points.size() == 1, where + ": divergence takes one point");
    r.read("index", out.index);
    require(out.index >= 0 && out.index < m, where + ": index out of range");
    out.b = to_vector(r.at("b"), r.path("b"));
    require(out.b.size() == m, where + ": b must have one entry per index");
    r.read("rest_steps", out.rest_steps);
    r.read("closure_steps", out.closure_steps);
    r.read("delta_steps", out.delta_steps);
    r.read("j_max", out.j_max);
    r.read("mc_levels", out.mc_levels);
    r.read("samples", out.samples);
    require(out.rest_steps >= 0 && out.closure_steps >= 1 && out.delta_steps >= 1 &&
                out.delta_steps <= out.rest_steps + out.closure_steps && out.j_max >= 0 &&
                out.mc_levels >= 0 && out.mc_levels <= out.j_max,
            where + ": invalid divergence parameters");
  } else if (kind == "verification") {
    out.kind = ExperimentKind::verification;
    r.read("samples", out.samples);
    require(out.samples >= 100, where + ": samples must be >= 100");
  } else {
    r.fail("unknown experiment kind '" + kind + "'");
  }
  r.finish();
  return out;
}

Json serialize_experiment(const ExperimentConfig& e) {
  Json out;
  out["kind"] = to_string(e.kind);
  switch (e.kind) {
    case ExperimentKind::critical_value: break;
    case ExperimentKind::infimum_curve: out["points_per_axis"] = e.points_per_axis; break;
    case ExperimentKind::verdict:
    case ExperimentKind::lemma55: out["points"] = from_points(e.points); break;
    case ExperimentKind::epsilon_sensitivity:
      out["points"] = from_points(e.points);
      out["multiples"] = e.multiples;
      break;
    case ExperimentKind::divergence:
      out["points"] = from_points(e.points);
      out["index"] = e.index;
      out["b"] = from_vector(e.b);
      out["rest_steps"] = e.rest_steps;
      out["closure_steps"] = e.closure_steps;
      out["delta_steps"] = e.delta_steps;
      out["j_max"] = e.j_max;
      out["mc_levels"] = e.mc_levels;
      out["samples"] = e.samples;
      break;
    case ExperimentKind::verification: out["samples"] = e.samples; break;
  }
  return out;
}

}  // namespace

InstanceConfig parse_config(const Json& json, const std::filesystem::path& base_dir) {
  Reader r(json, "config");
  InstanceConfig c;
  c.base_dir = base_dir;
  const int version = r.get<int>("schema_version");
  if (version != kSchemaVersion)
    r.fail("schema_version " + std::to_string(version) + " is not supported (expected " +
           std::to_string(kSchemaVersion) + ")");
  r.read("name", c.name);
  r.read("dimension", c.dimension);
  require(c.dimension == 1 || c.dimension == 2, "config.dimension must be 1 or 2");

  const Json& rows = r.at("coupling");
  require(rows.is_array() && !rows.empty(), "config.coupling: expected a non-empty array of rows");
  const int m = static_cast<int>(rows.size());
  require(m <= 8, "config.coupling: at most 8 indices");
  c.coupling.resize(m, m);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd row = to_vector(rows[i], "config.coupling[" + std::to_string(i) + "]");
    require(row.size() == m, "config.coupling: row " + std::to_string(i) + " has the wrong length");
    c.coupling.row(i) = row.transpose();
  }
  validate_coupling(c.coupling);

  const Json& hs = r.at("hamiltonians");
  require(hs.is_array() && static_cast<int>(hs.size()) == m,
          "config.hamiltonians: expected one entry per coupling row");
  for (int i = 0; i < m; ++i)
    c.hamiltonians.push_back(
        parse_hamiltonian(hs[i], "config.hamiltonians[" + std::to_string(i) + "]", c.dimension));

  r.read("velocity_bound", c.velocity_bound);
  require(c.velocity_bound >= 0.0, "config.velocity_bound must be >= 0");
  r.read("grid_step", c.grid_step);
  require(c.grid_step > 0.0 && std::ldexp(1.0, -std::ilogb(1.0 / c.grid_step)) == c.grid_step,
          "config.grid_step must be a power of two");

  c.fenchel = FenchelGrids::defaults(c.dimension);
  if (r.has("fenchel")) {
    Reader f(r.at("fenchel"), "config.fenchel");
    f.read("x_points", c.fenchel.x_points);
    f.read("q_intervals", c.fenchel.q_intervals);
    f.read("p_intervals", c.fenchel.p_intervals);
    f.read("initial_radius", c.fenchel.initial_radius);
    f.read("max_expansions", c.fenchel.max_expansions);
    f.finish();
  }
  require(c.fenchel.x_points >= 4 && c.fenchel.q_intervals >= 2 && c.fenchel.p_intervals >= 2,
          "config.fenchel: grids too small");

  c.critical.x_points = c.dimension == 1 ? 128 : 32;
  if (r.has("critical_value")) {
    Reader f(r.at("critical_value"), "config.critical_value");
    f.read("x_points", c.critical.x_points);
    f.read("tolerance", c.critical.tolerance);
    f.read("max_sweeps", c.critical.max_sweeps);
    f.read("feasibility_drop", c.critical.feasibility_drop);
    f.read("convergence", c.critical.convergence);
    f.finish();
  }
  require(c.critical.x_points >= 4 && c.critical.tolerance > 0.0,
          "config.critical_value: invalid options");
  if (r.has("beta")) c.beta = r.get<double>("beta");
  r.read("seed", c.seed);

  if (r.has("search")) {
    Reader s(r.at("search"), "config.search");
    auto& f = c.search.family;
    s.read("bound_steps", f.bound_steps);
    s.read("deterministic_steps", f.deterministic_steps);
    s.read("first_hitting", f.first_hitting);
    s.read("switch_counts", f.switch_counts);
    s.read("max_winding", f.max_winding);
    s.read("loop_blocks", f.loop_blocks);
    s.read("index_feedback", f.index_feedback);
    s.read("budget", c.search.budget);
    s.read("top_combos", c.search.top_combos);
    s.read("restarts", c.search.restarts);
    s.read("initial_step", c.search.initial_step);
    s.read("min_step", c.search.min_step);
    s.read("seed", c.search.seed);
    s.read("history_cap", c.search.history_cap);
    s.finish();
    require(f.bound_steps >= 1 && f.max_winding >= 0 && f.loop_blocks >= 1 &&
                f.loop_blocks <= 8 && c.search.budget >= 1 && c.search.min_step > 0.0 &&
                c.search.initial_step >= c.search.min_step,
            "config.search: invalid options");
  }

  if (r.has("verdict")) {
    Reader v(r.at("verdict"), "config.verdict");
    v.read("epsilon", c.verdict.epsilon);
    v.read("member_tol", c.verdict.member_tol);
    v.read("interior_tol", c.verdict.interior_tol);
    v.read("line_tol", c.verdict.line_tol);
    v.finish();
  }
  if (c.verdict.epsilon == 0.0) c.verdict.epsilon = 4.0 * c.grid_step;
  require(c.verdict.epsilon > 0.0 && c.verdict.member_tol > 0.0 && c.verdict.interior_tol > 0.0,
          "config.verdict: invalid tolerances");

  if (r.has("scan")) {
    Reader s(r.at("scan"), "config.scan");
    s.read("s_min", c.scan.s_min);
    s.read("s_max", c.scan.s_max);
    s.read("steps", c.scan.steps);
    s.read("tolerance", c.scan.tolerance);
    s.read("refinements", c.scan.refinements);
    s.finish();
  }
  require(c.scan.s_max > c.scan.s_min && c.scan.steps >= 2, "config.scan: invalid range");
  if (c.verdict.line_tol == 0.0)
    c.verdict.line_tol = 2.0 * (c.scan.s_max - c.scan.s_min) / (c.scan.steps - 1);

  if (r.has("checks")) {
    Reader k(r.at("checks"), "config.checks");
    if (k.has("beta")) c.checks.beta = k.get<double>("beta");
    k.read("beta_tol", c.checks.beta_tol);
    if (k.has("members")) c.checks.members = to_points(k.at("members"), k.path("members"), c.dimension);
    if (k.has("non_members"))
      c.checks.non_members = to_points(k.at("non_members"), k.path("non_members"), c.dimension);
    if (k.has("curve_argmin")) {
      c.checks.curve_argmin = to_vector(k.at("curve_argmin"), k.path("curve_argmin"));
      require(c.checks.curve_argmin->size() == c.dimension, "config.checks.curve_argmin: wrong dimension");
    }
    k.read("curve_tol", c.checks.curve_tol);
    k.read("member_width_max", c.checks.member_width_max);
    k.read("non_member_width_min", c.checks.non_member_width_min);
    k.finish();
  }

  if (r.has("experiments")) {
    const Json& list = r.at("experiments");
    require(list.is_array(), "config.experiments: expected an array");
    for (std::size_t k = 0; k < list.size(); ++k)
      c.experiments.push_back(parse_experiment(
          list[k], "config.experiments[" + std::to_string(k) + "]", c.dimension, m));
  }
  r.finish();

  for (std::size_t i = 0; i < c.hamiltonians.size(); ++i) {
    const auto& h = c.hamiltonians[i];
    if (h.kind != HamiltonianKind::table) continue;
    require(c.dimension == 1, "config.hamiltonians: tables are supported for dimension 1 only");
    const auto file = base_dir / h.table_file;
    require(std::filesystem::exists(file), "config.hamiltonians[" + std::to_string(i) +
                                               "]: table file '" + file.string() + "' not found");
  }
  return c;
}

InstanceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  Json json;
  try {
    json = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(json, path.parent_path());
}

Json serialize_config(const InstanceConfig& c) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["name"] = c.name;
  out["dimension"] = c.dimension;
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < c.coupling.rows(); ++i)
    rows.push_back(from_vector(c.coupling.row(i).transpose()));
  out["coupling"] = rows;
  Json hs = Json::array();
  for (const auto& h : c.hamiltonians) {
    Json e;
    e["kind"] = to_string(h.kind);
    if (h.kind == HamiltonianKind::table) {
      e["file"] = h.table_file;
      e["p_min"] = h.p_min;
      e["p_max"] = h.p_max;
    } else {
      Json terms = Json::array();
      for (const auto& t : h.potential.terms) {
        Json term;
        term["amplitude"] = t.amplitude;
        term["wave"] = std::vector<int>(t.wave.data(), t.wave.data() + t.wave.size());
        term["phase"] = t.phase;
        terms.push_back(term);
      }
      e["potential"] = {{"constant", h.potential.constant}, {"terms", terms}};
    }
    hs.push_back(e);
  }
  out["hamiltonians"] = hs;
  out["velocity_bound"] = c.velocity_bound;
  out["grid_step"] = c.grid_step;
  out["fenchel"] = {{"x_points", c.fenchel.x_points},
                    {"q_intervals", c.fenchel.q_intervals},
                    {"p_intervals", c.fenchel.p_intervals},
                    {"initial_radius", c.fenchel.initial_radius},
                    {"max_expansions", c.fenchel.max_expansions}};
  out["critical_value"] = {{"x_points", c.critical.x_points},
                           {"tolerance", c.critical.tolerance},
                           {"max_sweeps", c.critical.max_sweeps},
                           {"feasibility_drop", c.critical.feasibility_drop},
                           {"convergence", c.critical.convergence}};
  out["beta"] = c.beta ? Json(*c.beta) : Json();
  out["seed"] = c.seed;
  const auto& f = c.search.family;
  out["search"] = {{"bound_steps", f.bound_steps},
                   {"deterministic_steps", f.deterministic_steps},
                   {"first_hitting", f.first_hitting},
                   {"switch_counts", f.switch_counts},
                   {"max_winding", f.max_winding},
                   {"loop_blocks", f.loop_blocks},
                   {"index_feedback", f.index_feedback},
                   {"budget", c.search.budget},
                   {"top_combos", c.search.top_combos},
                   {"restarts", c.search.restarts},
                   {"initial_step", c.search.initial_step},
                   {"min_step", c.search.min_step},
                   {"seed", c.search.seed},
                   {"history_cap", c.search.history_cap}};
  out["verdict"] = {{"epsilon", c.verdict.epsilon},
                    {"member_tol", c.verdict.member_tol},
                    {"interior_tol", c.verdict.interior_tol},
                    {"line_tol", c.verdict.line_tol}};
  out["scan"] = {{"s_min", c.scan.s_min},
                 {"s_max", c.scan.s_max},
                 {"steps", c.scan.steps},
                 {"tolerance", c.scan.tolerance},
                 {"refinements", c.scan.refinements}};
  Json checks;
  checks["beta"] = c.checks.beta ? Json(*c.checks.beta) : Json();
  checks["beta_tol"] = c.checks.beta_tol;
  checks["members"] = from_points(c.checks.members);
  checks["non_members"] = from_points(c.checks.non_members);
  checks["curve_argmin"] = c.checks.curve_argmin ? from_vector(*c.checks.curve_argmin) : Json();
  checks["curve_tol"] = c.checks.curve_tol;
  checks["member_width_max"] = c.checks.member_width_max;
  checks["non_member_width_min"] = c.checks.non_member_width_min;
  out["checks"] = checks;
  Json list = Json::array();
  for (const auto& e : c.experiments) list.push_back(serialize_experiment(e));
  out["experiments"] = list;
  return out;
}

HamiltonianTableData load_table(const std::filesystem::path& path, double p_min, double p_max) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table '" + path.string() + "'");
  HamiltonianTableData out;
  out.p_min = p_min;
  out.p_max = p_max;
  out.source = path.string();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string cell;
    int columns = 0;
    while (std::getline(row, cell, ',')) {
      try {
        out.values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("table '" + path.string() + "': bad number '" + cell + "'");
      }
      ++columns;
    }
    if (out.x_points == 0) out.p_points = columns;
    if (columns != out.p_points)
      throw ConfigError("table '" + path.string() + "': ragged row " + std::to_string(out.x_points));
    ++out.x_points;
  }
  if (out.x_points < 2 || out.p_points < 3)
    throw ConfigError("table '" + path.string() + "': too small");
  return out;
}

HamiltonianSpec build_hamiltonian(const InstanceConfig& config) {
  std::vector<HamiltonianComponent> components;
  for (const auto& h : config.hamiltonians) {
    HamiltonianComponent c;
    c.kind = h.kind;
    c.potential = h.potential;
    if (h.kind == HamiltonianKind::table)
      c.table = load_table(config.base_dir / h.table_file, h.p_min, h.p_max);
    components.push_back(std::move(c));
  }
  return HamiltonianSpec(config.dimension, std::move(components));
}

SystemInstance build_instance(const InstanceConfig& config) {
  auto a = validate_coupling(config.coupling);
  HamiltonianSpec h = build_hamiltonian(config);
  double bound = config.velocity_bound;
  if (bound == 0.0) bound = 3.0 * lipschitz_estimate(h, config.fenchel.x_points);
  return SystemInstance(std::move(a), std::move(h), bound, config.grid_step, config.fenchel);
}

}  // namespace wkam
