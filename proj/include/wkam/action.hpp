#pragma once

// Adapted controls, tau-cycles and the random action functional
//   E_a[ int_0^tau L_{w(s)}(x + I(Xi)(s), -Xi(s)) + alpha ds ],
// evaluated exactly by dynamic programming over grid index histories or by
// Monte Carlo over continuous-time paths, plus the subsolution and
// admissibility tests built on it.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wkam/lagrangian.hpp"
#include "wkam/stopping.hpp"

namespace wkam {

/// Everything the action layer needs about one weakly coupled system.
class SystemInstance {
 public:
  SystemInstance(CouplingMatrixd a, HamiltonianSpec h, double velocity_bound, double grid_step,
                 const FenchelGrids& grids);

  const CouplingMatrixd& coupling() const { return a_; }
  const HamiltonianSpec& hamiltonian() const { return h_; }
  const LagrangianTable& lagrangian() const { return *l_; }
  int dimension() const { return h_.dimension(); }
  int count() const { return a_.size(); }
  double velocity_bound() const { return bound_; }
  double grid_step() const { return step_; }
  /// e^{-A D}.
  const Eigen::MatrixXd& step_transition() const { return p_; }
  /// (i, j) entry: E_i[time spent in l during [0, D]; w(D) = j].
  const Eigen::MatrixXd& step_occupation(int l) const { return occupation_.at(l); }
  /// Same with the time weighted by (s / D)^k, k = 1 or 2.
  const Eigen::MatrixXd& step_moment(int l, int k) const { return moments_.at(l).at(k - 1); }

  /// L_i(x, q) + alpha with the table's sentinel turned into an error.
  double running_cost(int i, const Eigen::VectorXd& x, const Eigen::VectorXd& q) const;

 private:
  CouplingMatrixd a_;
  HamiltonianSpec h_;
  std::shared_ptr<const LagrangianTable> l_;
  double bound_;
  double step_;
  Eigen::MatrixXd p_;
  std::vector<Eigen::MatrixXd> occupation_;
  std::vector<std::array<Eigen::MatrixXd, 2>> moments_;
};

/// Grid feedback control: the velocity on [kD, (k+1)D) is a function of the
/// indices observed at steps 0..k, carried in a finite memory.
class VelocityPolicy {
 public:
  virtual ~VelocityPolicy() = default;
  virtual Memory start(int index) const = 0;
  virtual Memory observe(const Memory& memory, int step, int index) const = 0;
  virtual Eigen::VectorXd velocity(const Memory& memory, int step) const = 0;
  virtual std::string describe() const = 0;
};

using VelocityPolicyPtr = std::shared_ptr<const VelocityPolicy>;

namespace policies {

VelocityPolicyPtr zero(int dimension);
/// Block k of `steps_per_block` grid steps uses blocks[k]; the last block
/// repeats until the stop.
VelocityPolicyPtr loop(std::vector<Eigen::VectorXd> blocks, int steps_per_block);
/// Velocity determined by the index currently observed.
VelocityPolicyPtr index_feedback(std::vector<Eigen::VectorXd> by_index);
/// Runs policies[w(0)].
VelocityPolicyPtr per_index(std::vector<VelocityPolicyPtr> by_index);

}  // namespace policies

/// tau-cycle built from a grid stopping rule, a feedback velocity and a
/// deterministic closing segment. After the rule stops with accumulated lift
/// l, the closure runs for closure_steps grid steps at the constant velocity
/// (target - l) / T_c, so the lift at tau_total equals the target exactly.
/// closure_steps and targets are either uniform (one entry) or given per
/// starting index.
class AdaptedCycle {
 public:
  AdaptedCycle(double grid_step, int bound_steps, StoppingRulePtr rule, VelocityPolicyPtr policy,
               std::vector<int> closure_steps, std::vector<Eigen::VectorXd> targets);

  double grid_step() const { return step_; }
  int bound_steps() const { return bound_steps_; }
  const StoppingRule& rule() const { return *rule_; }
  const StoppingRulePtr& rule_ptr() const { return rule_; }
  const VelocityPolicy& policy() const { return *policy_; }
  const VelocityPolicyPtr& policy_ptr() const { return policy_; }
  int dimension() const { return static_cast<int>(targets_.front().size()); }

  int closure_steps(int start) const;
  const Eigen::VectorXd& target(int start) const;
  /// True when every target is an integer vector, i.e. Xi closes on the torus.
  bool is_cycle() const;

  /// tau_total = (rule stop step + closure steps) * D.
  GridStoppingTime total_time() const;
  double bound() const { return total_time().bound(); }

  /// Closing velocity for an accumulated lift.
  Eigen::VectorXd closure_velocity(int start, const Eigen::VectorXd& lift) const;

  /// Piecewise-constant velocity of this cycle along a path, up to
  /// tau_total(path).
  std::vector<ControlPiece<double>> control(const JumpPath& path) const;

 private:
  double step_;
  int bound_steps_;
  StoppingRulePtr rule_;
  VelocityPolicyPtr policy_;
  std::vector<int> closure_;
  std::vector<Eigen::VectorXd> targets_;
};

/// Per-start-index summary of one cycle at one base point. Sufficient for
/// every objective in this library, since they are all affine in (alpha, b)
/// and linear in the initial law.
struct CycleEvaluation {
  Eigen::VectorXd cost;       // E_i int L ds (alpha excluded)
  Eigen::VectorXd duration;   // E_i tau_total
  Eigen::MatrixXd terminal;   // P_i(w(tau_total) = j) = e^{-A tau_total}
  /// Monte Carlo only: per start index, covariance of the per-path vector
  /// (cost, duration, one-hot terminal index).
  std::vector<Eigen::MatrixXd> covariance;
  EvaluationMethod method = EvaluationMethod::exact_dp;
  std::size_t samples = 0;  // per start index
  std::uint64_t seed = 0;
  std::size_t states = 0;   // DP states visited
};

struct ActionEstimate {
  double value = 0.0;
  double std_error = 0.0;
  EvaluationMethod method = EvaluationMethod::exact_dp;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
};

struct ActionOptions {
  enum class Method { automatic, exact_dp, monte_carlo };
  Method method = Method::automatic;
  std::size_t history_cap = 200000;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
};

/// Evaluates the cycle from base point x for every starting index.
CycleEvaluation evaluate_cycle(const SystemInstance& instance, const Eigen::VectorXd& x,
                               const AdaptedCycle& cycle, const ActionOptions& options = {});
CycleEvaluation evaluate_cycle_dp(const SystemInstance& instance, const Eigen::VectorXd& x,
                                  const AdaptedCycle& cycle, std::size_t history_cap);
CycleEvaluation evaluate_cycle_monte_carlo(const SystemInstance& instance,
                                           const Eigen::VectorXd& x, const AdaptedCycle& cycle,
                                           std::size_t samples, std::uint64_t seed);

/// int_0^T L_{w(s)}(x + lift(s), -xi(s)) ds along one path, T the total
/// control duration, by Simpson's rule on panels of at most one grid step
/// inside every piece where both the index and the velocity are constant.
double path_action(const SystemInstance& instance, const Eigen::VectorXd& x,
                   const std::vector<ControlPiece<double>>& control, const JumpPath& path);

/// E_a[int (L + alpha) ds].
ActionEstimate action_value(const CycleEvaluation& eval, const ProbabilityVectord& a,
                            double alpha);
ActionEstimate action(const SystemInstance& instance, const TorusPointd& x,
                      const ProbabilityVectord& a, const AdaptedCycle& cycle, double alpha,
                      const ActionOptions& options = {});

/// E_i[int (L + alpha) ds - b_i + b_{w(tau)}].
ActionEstimate index_objective(const CycleEvaluation& eval, int i, double alpha,
                               const Eigen::VectorXd& b);
/// E_a[int (L + alpha) ds] with a the characteristic vector of tau_total.
ActionEstimate characteristic_objective(const CycleEvaluation& eval, double alpha);

/// u : T^N -> R^m on the uniform periodic grid, multilinear in between.
struct GridFunction {
  int dimension = 1;
  int points = 0;
  Eigen::MatrixXd values;  // m x points^N, row-major multi-index
  double operator()(int i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
};

struct BatteryElement {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  ProbabilityVectord a;
  std::shared_ptr<const AdaptedCycle> cycle;  // targets are w + (y - x)
};

struct SubsolutionReport {
  /// action - E[u_{w(0)}(x) - u_{w(tau)}(y)] per element; a subsolution
  /// has every slack >= 0 up to numerical error.
  std::vector<double> slacks;
  std::vector<double> std_errors;
  double min_slack = 0.0;
  std::size_t argmin = 0;
};

SubsolutionReport subsolution_test(const SystemInstance& instance, const GridFunction& u,
                                   double alpha, const std::vector<BatteryElement>& battery,
                                   const ActionOptions& options = {});
/// Same with the left side a.(u(x) - u(y)), a the characteristic vector of
/// each element's tau_total (the element's own initial law is ignored).
SubsolutionReport characteristic_subsolution_test(const SystemInstance& instance,
                                                  const GridFunction& u, double alpha,
                                                  const std::vector<BatteryElement>& battery,
                                                  const ActionOptions& options = {});

/// Parameterized member of the searched cycle family.
struct CycleSpec {
  enum class Rule { deterministic, first_hitting, switch_count };
  enum class Family { zero, loop, feedback };
  Rule rule = Rule::deterministic;
  int parameter = 0;
  Family family = Family::zero;
  std::vector<Eigen::VectorXd> velocities;  // loop blocks or per-index values
  Eigen::VectorXi winding;
  std::string describe() const;
};

const char* to_string(CycleSpec::Rule rule);
const char* to_string(CycleSpec::Family family);

/// The searched family: grid stopping templates x windings x velocity
/// families, every cycle closed by a tail of closure_steps grid steps
/// (so tau_total >> closure_steps * D).
struct SearchFamily {
  int bound_steps = 16;
  std::vector<int> deterministic_steps{0, 1, 2, 4, 8, 16};
  bool first_hitting = true;
  std::vector<int> switch_counts{1};
  int max_winding = 2;
  int loop_blocks = 4;  // at most 8
  bool index_feedback = true;
  int closure_steps = 4;
  std::string describe() const;
};

struct SearchOptions {
  SearchFamily family;
  std::size_t budget = 3000;  // cycle evaluations
  int top_combos = 3;
  int restarts = 3;           // random restarts on top of the zero start
  double initial_step = 1.0;
  double min_step = 1.0 / 32.0;
  std::uint64_t seed = 1;
  std::size_t history_cap = 200000;
};

struct SearchResult {
  double best = std::numeric_limits<double>::infinity();
  std::optional<CycleSpec> witness;
  std::optional<CycleEvaluation> witness_eval;
  std::size_t evaluations = 0;
  bool budget_exhausted = false;
  std::string family;
};

/// Cache of cycle evaluations at one base point. Objectives are affine in
/// (alpha, b), so one cache serves every b at the same y.
class CycleSearch {
 public:
  CycleSearch(const SystemInstance& instance, Eigen::VectorXd y, SearchOptions options);

  const SystemInstance& instance() const { return instance_; }
  const SearchOptions& options() const { return options_; }
  const Eigen::VectorXd& base_point() const { return y_; }
  AdaptedCycle build(const CycleSpec& spec) const;
  /// Evaluation, or nullopt when a velocity leaves [-M, M]^N.
  const std::optional<CycleEvaluation>& evaluate(const CycleSpec& spec);

  /// Minimizes objective(evaluation) over the family: enumeration of rules
  /// and windings at zero velocity, then coordinate descent over loop and
  /// feedback velocities from the best combinations.
  SearchResult minimize(const std::function<double(const CycleEvaluation&)>& objective);

  /// Every evaluation made so far.
  std::vector<std::pair<CycleSpec, CycleEvaluation>> pool() const;
  std::size_t evaluations() const { return evaluations_; }

 private:
  std::vector<CycleSpec> combos() const;

  const SystemInstance& instance_;
  Eigen::VectorXd y_;
  SearchOptions options_;
  std::map<std::string, std::optional<CycleEvaluation>> cache_;
  std::vector<CycleSpec> specs_;
  std::size_t evaluations_ = 0;
};

struct AdmissibilityResult {
  bool violated = false;
  double min_objective = 0.0;
  int index = 0;  // starting index of the minimum
  std::optional<CycleSpec> witness;
  bool budget_exhausted = false;
  std::size_t evaluations = 0;
  double tolerance = 1e-3;
  std::string family;
};

/// One-sided test of b in F_alpha(y): searches for a cycle and index with
/// E_i[int (L + alpha) ds - b_i + b_{w(tau)}] < -tolerance.
AdmissibilityResult admissibility_test(CycleSearch& search, const Eigen::VectorXd& b,
                                       double alpha, double tolerance = 1e-3);
AdmissibilityResult admissibility_test(const SystemInstance& instance, const TorusPointd& y,
                                       const Eigen::VectorXd& b, double alpha,
                                       const SearchOptions& options = {},
                                       double tolerance = 1e-3);

}  // namespace wkam
