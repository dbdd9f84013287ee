#pragma once

// Iterates tau^j, Xi^j of a seed cycle, evaluated by replaying the seed on
// the shifted paths, and the divergence sequence I_j of a negative seed.

#include <memory>
#include <vector>

#include "wkam/action.hpp"

namespace wkam {

/// Level-j iterate of a seed cycle:
///   tau^{j+1}(w) = tau^0(w) + tau^j(phi_{tau^0}(w)),
/// and Xi^{j+1} follows Xi^j up to tau^j, then the seed on the shifted path.
class IteratedCycle {
 public:
  IteratedCycle(std::shared_ptr<const AdaptedCycle> seed, int level);

  const AdaptedCycle& seed() const { return *seed_; }
  const std::shared_ptr<const AdaptedCycle>& seed_ptr() const { return seed_; }
  int level() const { return level_; }
  /// Bound of tau^j: (j + 1) times the seed bound.
  double bound() const { return (level_ + 1) * seed_->bound(); }

  /// tau^0 on one path.
  double seed_time(const JumpPath& path) const;
  /// tau^j by the defining recursion, shifting the shifted path.
  double recursive_time(const JumpPath& path) const { return recursive_time(path, level_); }
  double recursive_time(const JumpPath& path, int level) const;
  /// Phase boundaries t_0 = 0, t_{r+1} = t_r + tau^0(phi_{t_r}(w)), r <= j,
  /// each shift taken from the original path. t_{j+1} = tau^j(w).
  std::vector<double> phase_times(const JumpPath& path) const;
  double stopping_time(const JumpPath& path) const { return phase_times(path).back(); }

  /// Xi^j along the path, one run of the seed control per phase.
  std::vector<ControlPiece<double>> control(const JumpPath& path) const;
  /// Sum of the seed targets over the phases: the lift Xi^j must reach.
  Eigen::VectorXd target(const JumpPath& path) const;

 private:
  std::shared_ptr<const AdaptedCycle> seed_;
  int level_;
};

/// Level-j iterate; throws HorizonExceeded when (j + 1) * bound(seed)
/// exceeds the sampler horizon.
IteratedCycle iterate(std::shared_ptr<const AdaptedCycle> seed, int level, double horizon);

struct IterationCheck {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  int level = 0;
  /// max |tau^{j+1}(w) - tau^j(w) - tau^0(phi_{tau^j}(w))|, over levels <= j.
  double lemma_residual = 0.0;
  /// max |lift of Xi^j at tau^j - accumulated target|.
  double cycle_residual = 0.0;
  /// Grid points where phi_{tau^{j-1}}(phi_{tau^0}(w)) and phi_{tau^j}(w)
  /// disagree, summed over paths.
  std::size_t flow_mismatches = 0;
  /// min over paths and levels of tau^{l+1} - tau^l.
  double min_growth = 0.0;
};

/// Replays `samples` paths drawn from the uniform initial law.
IterationCheck verify_iteration(const CouplingMatrixd& a, const IteratedCycle& it,
                                std::size_t samples, std::uint64_t seed);
/// Cycle residual only.
IterationCheck verify_cycle_property(const CouplingMatrixd& a, const IteratedCycle& it,
                                     std::size_t samples, std::uint64_t seed);

/// Resting seed in D_i: zero velocity, rest for rest_steps grid steps plus a
/// closure of closure_steps, immediate stop outside D_i.
std::shared_ptr<const AdaptedCycle> resting_seed(int m, int i, int dimension, double grid_step,
                                                 int rest_steps, int closure_steps);

struct DivergenceRow {
  int j = 0;
  double value = 0.0;      // I_j
  double std_error = 0.0;  // 0 for the exact evaluation
  double bound = 0.0;      // -mu (1 + rho j)
  double increment = 0.0;  // I_j - I_{j-1}
  double predicted_increment = 0.0;  // -mu (e^{-A tau^{j-1}})_{ii}
  bool holds = false;      // I_j <= bound + 3 std_error + tolerance
};

struct DivergenceReport {
  int index = 0;
  double mu = 0.0;
  double rho = 0.0;
  double delta = 0.0;
  double limit = 0.0;  // -mu / (1 - p) when the return probability p < 1
  std::vector<DivergenceRow> rows;
  bool holds() const;
};

/// I_j = E_i[int_0^{tau^j} (L + alpha) ds - b_i + b_{w(tau^j)}] for j <= j_max.
/// The seed must be a cycle with tau^0 vanishing outside D_i. Evaluated
/// exactly: because every phase returns to y, the strong Markov property
/// gives I_j = sum_{r<=j} (P^r c)_i - b_i + (P^{j+1} b)_i with P = e^{-A tau^0}
/// and c the seed's per-index cost.
DivergenceReport divergence_experiment(const SystemInstance& instance, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& b, double alpha,
                                       const AdaptedCycle& seed, int i, int j_max, double delta,
                                       double tolerance = 1e-9);

/// Monte Carlo replay of I_j for the same seed, used as a cross-check.
std::vector<ActionEstimate> divergence_monte_carlo(const SystemInstance& instance,
                                                   const Eigen::VectorXd& y,
                                                   const Eigen::VectorXd& b, double alpha,
                                                   std::shared_ptr<const AdaptedCycle> seed,
                                                   int i, int j_max, std::size_t samples,
                                                   std::uint64_t seed_value);

}  // namespace wkam
