// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "wkam/iteration.hpp"
#include "wkam/runner.hpp"

namespace {

using namespace wkam;
namespace fs = std::filesystem;

constexpr double kStep = 1.0 / 16.0;

struct Outcome {
  bool passed = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Eigen::MatrixXd symmetric2() {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -1, 1;
  return a;
}

Eigen::MatrixXd random_coupling(Rng& rng, int m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j && (j == (i + 1) % m || rng.uniform() < 0.5)) a(i, j) = -(0.1 + 1.9 * rng.uniform());
  for (int i = 0; i < m; ++i) a(i, i) = -a.row(i).sum();
  return a;
}

StoppingRulePtr random_table(Rng& rng, int m, int steps, bool may_stop_at_zero) {
  std::vector<std::uint8_t> decisions(static_cast<std::size_t>(steps) * m * m);
  for (std::size_t k = 0; k < decisions.size(); ++k) {
    const bool at_zero = k < static_cast<std::size_t>(m * m);
    decisions[k] = (at_zero && !may_stop_at_zero) ? 0 : rng.uniform() < 0.3;
  }
  return rules::table(m, std::move(decisions), steps);
}

double z_score(double hits, double n, double p) {
  const double sigma = std::sqrt(n * p * (1.0 - p));
  return sigma > 0.0 ? (hits - n * p) / sigma : (hits == n * p ? 0.0 : 1e9);
}

void semigroup_suite(Outcome& out) {
  Rng rng(101);
  double stochastic = 0.0, law = 0.0, min_entry = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = validate_coupling(random_coupling(rng, 2 + trial % 4));
    for (double t : {0.01, 0.1, 1.0, 5.0}) {
      const Eigen::MatrixXd p = semigroup(a, t).matrix();
      stochastic = std::max(stochastic, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
      min_entry = std::min(min_entry, p.minCoeff());
      for (double s : {0.05, 0.7}) {
        const Eigen::MatrixXd joint = semigroup(a, s + t).matrix();
        law = std::max(law, (joint - semigroup(a, s).matrix() * p).cwiseAbs().maxCoeff());
      }
    }
  }
  out.detail << "row-sum error " << stochastic << ", min entry " << min_entry
             << ", semigroup-law error " << law;
  out.require(stochastic <= 1e-10, "stochasticity");
  out.require(min_entry > 0.0, "strict positivity");
  out.require(law <= 1e-9, "semigroup law");
}

void measure_suite(Outcome& out) {
  const auto a = validate_coupling(symmetric2());
  const ProbabilityVectord initial(Eigen::RowVector2d(0.8, 0.2));
  PathSampler sampler(a, 202);
  const int n = 100000;
  const std::vector<double> times{0.25, 0.5, 1.0};
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 2);
  // Conditional law on {w(0.3) = 1} at time 0.8.
  Eigen::RowVector2d conditional = Eigen::RowVector2d::Zero();
  int on_event = 0;
  for (int s = 0; s < n; ++s) {
    const JumpPath path = sampler.sample(initial, 1.0);
    for (int k = 0; k < 3; ++k) counts(k, path(times[k])) += 1.0;
    if (path(0.3) == 1) {
      ++on_event;
      conditional(path(0.8)) += 1.0;
    }
  }
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto law = marginal_pushforward(a, initial, times[k]).vector();
    for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(z_score(counts(k, j), n, law(j))));
  }
  const Eigen::RowVectorXd predicted = semigroup(a, 0.5).matrix().row(1);
  double worst_conditional = 0.0;
  for (int j = 0; j < 2; ++j)
    worst_conditional =
        std::max(worst_conditional, std::abs(z_score(conditional(j), on_event, predicted(j))));
  out.detail << "marginal max |z| " << worst << ", conditional max |z| " << worst_conditional;
  out.require(worst <= 3.0, "marginals");
  out.require(worst_conditional <= 3.0, "conditional law");
}

void stopping_suite(Outcome& out) {
  const auto a2 = validate_coupling(symmetric2());
  PathSampler sampler(a2, 303);
  const double cap = 2.0;
  auto hitting = [&](const JumpPath& p) { return first_hitting_time(p, 1, cap); };
  bool dyadic_ok = true;
  for (int level : {4, 6, 8}) {
    const auto approx = dyadic_approximation(hitting, cap, level);
    for (int s = 0; s < 10000; ++s) {
      const JumpPath path = sampler.sample(ProbabilityVectord::uniform(2), cap);
      const double gap = approx.value(path) - hitting(path);
      dyadic_ok = dyadic_ok && gap >= 0.0 && gap <= std::ldexp(1.0, -level);
    }
  }
  out.require(dyadic_ok, "dyadic error");

  Rng rng(2);
  const auto a3 = validate_coupling(random_coupling(rng, 3));
  double worst_dp = 0.0;
  for (const auto& rule :
       {rules::first_hitting(2), rules::switch_count(2), random_table(rng, 3, 6, true)}) {
    const GridStoppingTime tau(kStep, 12, rule, {1, 0, 3});
    const auto exact = stopping_matrix(a3, tau);
    const auto mc = stopping_matrix_monte_carlo(a3, tau, 100000, 7);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double se = mc.std_error(i, j);
        const double diff = std::abs(mc.matrix(i, j) - exact.matrix(i, j));
        worst_dp = std::max(worst_dp, se > 0.0 ? diff / se : (diff > 1e-12 ? 1e9 : 0.0));
      }
  }
  out.require(worst_dp <= 3.0, "DP vs MC");

  Rng tables(9);
  double margin = 1.0, residual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + trial % 3;
    const auto a = validate_coupling(random_coupling(tables, m));
    const int offset = 1 + trial % 4;
    const GridStoppingTime tau(kStep, 6, random_table(tables, m, 6, false),
                               std::vector<int>(m, offset));
    const auto matrix = stopping_matrix(a, tau).matrix;
    margin = std::min(margin, matrix.matrix().minCoeff() - rho_bound(a, offset * kStep));
    const auto c = characteristic_vector(matrix);
    residual = std::max(residual, c.unique ? c.residual : 1.0);
  }
  out.require(margin > 0.0, "rho strict");
  out.require(residual <= 1e-10, "characteristic residual");

  const GridStoppingTime tau(kStep, 16, rules::switch_count(1), {4, 4});
  const auto push = verify_shift_pushforward(a2, ProbabilityVectord(Eigen::RowVector2d(0.8, 0.2)),
                                             tau, 100000, 5);
  out.require(push.checks.size() == 12 && push.passed(), "push-forward");
  out.detail << "DP vs MC max |z| " << worst_dp << ", min(e^{-A tau}) - rho " << margin
             << ", characteristic residual " << residual << ", push-forward max |z| "
             << push.max_deviation;
}

void fenchel_suite(Outcome& out) {
  HamiltonianComponent free;
  const auto quadratic = fenchel_transform(HamiltonianSpec(1, {free}), 4.0);
  const double hp0 = 2.0 * quadratic.momentum_radius(0) / quadratic.grids().p_intervals;
  double dual = 0.0;
  for (int k = 0; k < quadratic.q_points(); ++k)
    dual = std::max(dual, std::abs(quadratic.node(0, {k % quadratic.grids().x_points}, {k}) -
                                   0.5 * std::pow(quadratic.q_node(k), 2)));
  out.require(dual <= hp0 * hp0, "self-duality");

  HamiltonianComponent well;
  well.potential.terms.push_back({1.0, Eigen::VectorXi::Constant(1, 1), 0.0});
  HamiltonianComponent shallow;
  shallow.potential.constant = 0.2;
  shallow.potential.terms.push_back({0.5, Eigen::VectorXi::Constant(1, 1), 0.3});
  const HamiltonianSpec h(1, {well, shallow});
  const double bound = 6.0;
  const auto table = fenchel_transform(h, bound);
  Rng rng(404);
  double young = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const int i = s % 2;
    const int ix = static_cast<int>(rng.uniform() * table.grids().x_points);
    const int iq = static_cast<int>(rng.uniform() * table.q_points());
    const int ip = static_cast<int>(rng.uniform() * (table.grids().p_intervals + 1));
    const double radius = table.momentum_radius(i);
    const double p = -radius + ip * 2.0 * radius / table.grids().p_intervals;
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, table.x_node(ix));
    young = std::min(young, table.node(i, {ix}, {iq}) + h(i, x, Eigen::VectorXd::Constant(1, p)) -
                                p * table.q_node(iq));
  }
  out.require(young >= -1e-9, "Fenchel-Young");

  double biconjugate = 0.0, allowed = 1e300;
  for (int i = 0; i < 2; ++i) {
    const double hp = 2.0 * table.momentum_radius(i) / table.grids().p_intervals;
    const double tolerance = 2.0 * (hp + table.q_step()) * (bound + table.momentum_radius(i));
    allowed = std::min(allowed, tolerance);
    for (int ix = 0; ix < table.grids().x_points; ix += 4) {
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, table.x_node(ix));
      for (double p = -4.0; p <= 4.0; p += 0.25) {
        double best = -1e300;
        for (int k = 0; k < table.q_points(); ++k)
          best = std::max(best, p * table.q_node(k) - table.node(i, {ix}, {k}));
        biconjugate = std::max(biconjugate,
                               std::abs(best - h(i, x, Eigen::VectorXd::Constant(1, p))) / tolerance);
      }
    }
  }
  out.require(biconjugate <= 1.0, "biconjugate");
  out.detail << "self-duality error " << dual << " (h_p^2 = " << hp0 * hp0
             << "), min Fenchel-Young gap " << young << ", biconjugate error / bound "
             << biconjugate;
}

const SystemInstance& twowell_instance(const InstanceConfig& config) {
  static const SystemInstance instance = build_instance(config);
  return instance;
}

void iteration_suite(const InstanceConfig& config, Outcome& out) {
  const auto& instance = twowell_instance(config);
  const auto seed = std::make_shared<const AdaptedCycle>(
      kStep, 8, rules::switch_count(1),
      policies::index_feedback({Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -0.5)}),
      std::vector<int>{4}, std::vector<Eigen::VectorXd>{Eigen::VectorXd::Ones(1)});
  const auto check = verify_iteration(instance.coupling(), iterate(seed, 5, 20.0), 10000, 505);
  out.require(check.lemma_residual <= 1e-12, "iterate identity");
  out.require(check.cycle_residual <= 1e-10, "cycle residual");
  out.require(check.flow_mismatches == 0, "flow composition");

  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::Vector2d b(0.0, 0.5);
  const auto resting = resting_seed(2, 1, 1, kStep, 0, 4);
  const auto report = divergence_experiment(instance, y, b, 1.0, *resting, 1, 10, kStep);
  const auto mc = divergence_monte_carlo(instance, y, b, 1.0, resting, 1, 10, 20000, 506);
  double slack = -1e300;
  for (int j = 0; j <= 10; ++j) {
    slack = std::max(slack, report.rows[j].value - report.rows[j].bound);
    slack = std::max(slack, mc[j].value - report.rows[j].bound - 3.0 * mc[j].std_error);
  }
  out.require(report.holds() && slack <= 1e-9, "divergence bound for j <= 10");
  out.detail << "iterate residual " << check.lemma_residual << ", cycle residual "
             << check.cycle_residual << ", max_j (I_j - bound) " << slack << " with mu "
             << report.mu << ", rho " << report.rho;
}

struct OracleState {
  double beta = 0.0;
  std::vector<Eigen::VectorXd> members;
  std::vector<Eigen::VectorXd> bs;
};

void weak_kam_suite(const InstanceConfig& config, OracleState& state, Outcome& out) {
  const auto& instance = twowell_instance(config);
  const auto cv = critical_value(instance.hamiltonian(), instance.coupling(), config.critical);
  state.beta = cv.beta;
  out.require(std::abs(cv.beta - 1.0) <= 2e-2, "beta");

  VerdictOptions options = config.verdict;
  options.search = config.search;
  options.scan = config.scan;
  const auto bottom = aubry_verdict(instance, Eigen::VectorXd::Constant(1, 0.5), cv.beta, options);
  const auto top = aubry_verdict(instance, Eigen::VectorXd::Constant(1, 0.0), cv.beta, options);
  out.require(bottom.verdict == Verdict::member, "member at 0.5");
  out.require(top.verdict == Verdict::non_member, "non_member at 0.0");
  out.require(bottom.scan.width <= 0.02, "width at 0.5");
  out.require(top.scan.width >= 0.1, "width at 0.0");
  for (const auto* r : {&bottom, &top})
    if (r->verdict == Verdict::member) {
      state.members.push_back(r->y);
      state.bs.push_back(r->b);
    }

  std::vector<Eigen::VectorXd> points;
  for (int k = 0; k < 32; ++k) points.push_back(Eigen::VectorXd::Constant(1, k / 32.0));
  const auto curve = infimum_curve(instance, points, cv.beta,
                                   search_options_for(config.search, options.epsilon, kStep), 4);
  std::size_t argmin = 0;
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k].raw < curve[argmin].raw) argmin = k;
  out.require(std::abs(points[argmin](0) - 0.5) <= 1e-12, "curve argmin");
  out.detail << "beta " << cv.beta << ", verdicts " << to_string(bottom.verdict) << "/"
             << to_string(top.verdict) << ", widths " << bottom.scan.width << "/"
             << top.scan.width << ", curve argmin " << points[argmin](0);
}

void equivalence_suite(const InstanceConfig& config, const OracleState& state, Outcome& out) {
  out.require(!state.members.empty(), "no detected members");
  const auto& instance = twowell_instance(config);
  double identity = 0.0;
  for (std::size_t k = 0; k < state.members.size(); ++k) {
    CycleSearch search(instance, state.members[k],
                       search_options_for(config.search, config.verdict.epsilon, kStep));
    const auto r = lemma55_equivalence(search, state.beta, state.bs[k], config.verdict.member_tol);
    out.require(r.agree && r.per_index_small && r.characteristic_small, "infima agree");
    out.require(r.glued_bound, "glued bound");
    identity = std::max(identity, r.identity_residual);
  }
  out.require(identity <= 1e-9, "glued identity");
  out.detail << state.members.size() << " member(s), glued identity residual " << identity;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

void reproducibility_suite(const InstanceConfig& config, Outcome& out) {
  const fs::path root = fs::temp_directory_path() / "wkam_acceptance";
  fs::remove_all(root);
  RunOptions options;
  options.jobs = 4;
  for (const char* run : {"first", "second"}) write_outputs(run_experiments(config, options), root / run);
  const std::string first = slurp(root / "first" / "report.json");
  const std::string second = slurp(root / "second" / "report.json");
  out.require(!first.empty() && first == second, "report bytes differ");
  out.detail << "report.json " << first.size() << " bytes, identical across two runs";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path config_path =
      argc > 1 ? fs::path(argv[1]) : fs::path(WKAM_SOURCE_DIR) / "configs" / "twowell.json";
  const InstanceConfig config = load_config(config_path);
  OracleState state;

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"semigroup", semigroup_suite},
      {"path measure", measure_suite},
      {"stopping times", stopping_suite},
      {"Fenchel transform", fenchel_suite},
      {"iteration and divergence", [&](Outcome& o) { iteration_suite(config, o); }},
      {"weak KAM oracle (TwoWell)", [&](Outcome& o) { weak_kam_suite(config, state, o); }},
      {"per-index/characteristic equivalence", [&](Outcome& o) { equivalence_suite(config, state, o); }},
      {"reproducibility", [&](Outcome& o) { reproducibility_suite(config, o); }},
  };

  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome outcome;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[k].second(outcome);
    } catch (const std::exception& e) {
      outcome.passed = false;
      outcome.detail << " [exception: " << e.what() << "]";
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && outcome.passed;
    std::printf("%s %zu %s: %s (%.1f s)\n", outcome.passed ? "PASS" : "FAIL", k + 1,
                criteria[k].first.c_str(), outcome.detail.str().c_str(), seconds);
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
