#pragma once

// Bounded stopping times realized as decision rules on a dyadic observation
// grid, their transition matrices e^{-A tau}, characteristic vectors and the
// push-forward check phi_tau # P_a = P_{a e^{-A tau}}.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wkam/markov.hpp"
#include "wkam/paths.hpp"

namespace wkam {

/// Finite summary of the observed index history w(0), w(D), ..., w(kD).
using Memory = std::vector<int>;

/// Nonanticipating stop/continue rule, expressed as an automaton over grid
/// observations. The decision at step k sees only the memory built from the
/// observations at steps 0..k, which is what makes {tau <= t} F_t-measurable.
class StoppingRule {
 public:
  virtual ~StoppingRule() = default;
  /// Memory after observing w(0) = index.
  virtual Memory start(int index) const = 0;
  /// Memory after additionally observing w(step * D) = index.
  virtual Memory observe(const Memory& memory, int step, int index) const = 0;
  virtual bool stop(const Memory& memory, int step) const = 0;
  virtual std::string describe() const = 0;
};

using StoppingRulePtr = std::shared_ptr<const StoppingRule>;

namespace rules {

/// Stops at the given step for every history.
StoppingRulePtr deterministic(int step);
/// Stops at the first grid step where the observed index equals `target`.
StoppingRulePtr first_hitting(int target);
/// Stops once `switches` index changes have been observed on the grid.
StoppingRulePtr switch_count(int switches);
/// Decision table indexed by (step, previous index, current index); entries
/// are 0/1, row-major with shape steps x m x m.
StoppingRulePtr table(int m, std::vector<std::uint8_t> decisions, int steps);
/// Arbitrary predicate of the full observed history.
StoppingRulePtr history(std::function<bool(std::span<const int>)> predicate,
                        std::string name);
/// Runs rules[w(0)] on D_{w(0)}.
StoppingRulePtr per_index(std::vector<StoppingRulePtr> rules_by_index);
/// `rule` on D_i, immediate stop elsewhere.
StoppingRulePtr vanishing_outside(int m, int i, StoppingRulePtr rule);

}  // namespace rules

/// tau = (first stop step) * D + offset_{w(0)}, with a forced stop at
/// `bound_steps`. A positive offset eps realizes tau >> eps: tau - eps is the
/// grid stopping time itself. D must be a power of two so that all values are
/// exact binary fractions.
class GridStoppingTime {
 public:
  GridStoppingTime(double grid_step, int bound_steps, StoppingRulePtr rule,
                   std::vector<int> offset_steps = {});

  double grid_step() const { return step_; }
  int bound_steps() const { return bound_steps_; }
  const StoppingRule& rule() const { return *rule_; }
  const StoppingRulePtr& rule_ptr() const { return rule_; }
  const std::vector<int>& offsets() const { return offsets_; }
  /// Offset for paths starting in `start`, in grid steps.
  int offset_steps(int start) const;
  int max_offset_steps() const;
  /// Upper bound of tau over all paths.
  double bound() const { return (bound_steps_ + max_offset_steps()) * step_; }

  /// First stopping step of the grid part, given w(0), w(D), ... (the span
  /// may be shorter than bound_steps + 1 only if the rule stops earlier).
  int stop_step(std::span<const int> grid_history) const;
  /// Total steps including the offset.
  int total_steps(const JumpPath& path) const;
  double value(const JumpPath& path) const { return total_steps(path) * step_; }

 private:
  double step_;
  int bound_steps_;
  StoppingRulePtr rule_;
  std::vector<int> offsets_;
};

/// tau_n = ceil(2^n tau) / 2^n for a bounded random time given as a path
/// functional. Grid points map to themselves, so tau_n >= tau and
/// tau_n - tau < 2^-n.
class DyadicStoppingTime {
 public:
  DyadicStoppingTime(std::function<double(const JumpPath&)> source, double bound, int level);
  int level() const { return level_; }
  double grid_step() const { return std::ldexp(1.0, -level_); }
  double bound() const { return bound_; }
  double value(const JumpPath& path) const;
  double source_value(const JumpPath& path) const { return source_(path); }

 private:
  std::function<double(const JumpPath&)> source_;
  double bound_;
  int level_;
};

DyadicStoppingTime dyadic_approximation(std::function<double(const JumpPath&)> tau,
                                        double bound, int level);

/// Continuous-time first hitting time of `target`, capped at `cap`.
double first_hitting_time(const JumpPath& path, int target, double cap);

enum class EvaluationMethod { exact_dp, monte_carlo };
const char* to_string(EvaluationMethod method);

struct StoppingMatrixOptions {
  std::size_t history_cap = 1000000;
  bool allow_monte_carlo = true;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
};

struct StoppingMatrix {
  StochasticMatrixd matrix;
  /// Entrywise standard errors; zero for the exact DP.
  Eigen::MatrixXd std_error;
  EvaluationMethod method = EvaluationMethod::exact_dp;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// e^{-A tau}: row i is the law of w(tau) under P_i. Exact by dynamic
/// programming over (memory, index) states on the grid; falls back to Monte
/// Carlo when the state count exceeds the cap.
StoppingMatrix stopping_matrix(const CouplingMatrixd& a, const GridStoppingTime& tau,
                               const StoppingMatrixOptions& options = {});
StoppingMatrix stopping_matrix_monte_carlo(const CouplingMatrixd& a,
                                           const GridStoppingTime& tau,
                                           std::size_t samples, std::uint64_t seed);

/// a with a e^{-A tau} = a.
inline PerronResult<double> characteristic_vector(const StochasticMatrixd& m) {
  return perron_vector(m);
}

/// Smallest entry of e^{-A eps}: every tau >> eps in D_i has
/// (e^{-A tau})_{ij} >= this value for all j.
double rho_bound(const CouplingMatrixd& a, double epsilon);

struct CylinderCheck {
  Cylinder cylinder;
  double expected = 0.0;
  double empirical = 0.0;
  double z_score = 0.0;
};

struct PushforwardReport {
  double max_deviation = 0.0;  // max |z| over the battery
  double sigma_bound = 3.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  ProbabilityVectord shifted_initial;  // a e^{-A tau}
  std::vector<CylinderCheck> checks;
  bool passed() const { return max_deviation <= sigma_bound; }
};

/// Twelve cylinders for m = 2 (six one-time and six two-time events); for
/// other m, one-time cylinders at two times for every index plus two-time
/// cylinders on the diagonal.
std::vector<Cylinder> default_cylinder_battery(int m);

/// Samples P_a, shifts each path by tau(w) and compares the cylinder
/// frequencies of the shifted paths with P_{a e^{-A tau}}.
PushforwardReport verify_shift_pushforward(const CouplingMatrixd& a,
                                           const ProbabilityVectord& initial,
                                           const GridStoppingTime& tau, std::size_t samples,
                                           std::uint64_t seed,
                                           const std::vector<Cylinder>& battery = {});

}  // namespace wkam
