#include "wkam/iteration.hpp"

#include <algorithm>
#include <cmath>

namespace wkam {

IteratedCycle::IteratedCycle(std::shared_ptr<const AdaptedCycle> seed, int level)
    : seed_(std::move(seed)), level_(level) {
  if (!seed_) throw InvalidArgument("IteratedCycle: missing seed");
  if (level_ < 0) throw InvalidArgument("IteratedCycle: level must be >= 0");
}

double IteratedCycle::seed_time(const JumpPath& path) const {
  return seed_->total_time().value(path);
}

double IteratedCycle::recursive_time(const JumpPath& path, int level) const {
  const double first = seed_time(path);
  if (level == 0) return first;
  return first + recursive_time(shift(path, first), level - 1);
}

std::vector<double> IteratedCycle::phase_times(const JumpPath& path) const {
  std::vector<double> times{0.0};
  for (int r = 0; r <= level_; ++r)
    times.push_back(times.back() + seed_time(shift(path, times.back())));
  return times;
}

std::vector<ControlPiece<double>> IteratedCycle::control(const JumpPath& path) const {
  const std::vector<double> times = phase_times(path);
  std::vector<ControlPiece<double>> pieces;
  for (int r = 0; r <= level_; ++r) {
    if (times[r + 1] == times[r]) continue;
    const auto phase = seed_->control(shift(path, times[r]));
    pieces.insert(pieces.end(), phase.begin(), phase.end());
  }
  return pieces;
}

Eigen::VectorXd IteratedCycle::target(const JumpPath& path) const {
  const std::vector<double> times = phase_times(path);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(seed_->dimension());
  for (int r = 0; r <= level_; ++r)
    if (times[r + 1] > times[r]) total += seed_->target(path(times[r]));
  return total;
}

IteratedCycle iterate(std::shared_ptr<const AdaptedCycle> seed, int level, double horizon) {
  IteratedCycle it(std::move(seed), level);
  if (it.bound() > horizon)
    throw HorizonExceeded("iterate: (j + 1) * bound(tau^0) exceeds the horizon");
  return it;
}

namespace {

IterationCheck run_checks(const CouplingMatrixd& a, const IteratedCycle& it, std::size_t samples,
                          std::uint64_t seed, bool full) {
  if (samples == 0) throw InvalidArgument("iteration check: need samples");
  const int j = it.level();
  const double window = 1.0;
  const double horizon = it.bound() + window;
  const double probe = it.seed().grid_step() / 4.0;

  IterationCheck report;
  report.samples = samples;
  report.seed = seed;
  report.level = j;
  report.min_growth = std::numeric_limits<double>::infinity();

  PathSampler sampler(a, seed, 0);
  const auto uniform = ProbabilityVectord::uniform(a.size());
  for (std::size_t s = 0; s < samples; ++s) {
    const JumpPath path = sampler.sample(uniform, horizon);
    const std::vector<double> phases = it.phase_times(path);
    const double tau = phases.back();

    const auto lift =
        integrate_control(it.control(path), tau, it.seed().dimension()).lift;
    report.cycle_residual =
        std::max(report.cycle_residual, (lift - it.target(path)).cwiseAbs().maxCoeff());
    if (!full) continue;

    for (int l = 0; l < j; ++l) {
      const double current = it.recursive_time(path, l);
      const double next = it.recursive_time(path, l + 1);
      const double lemma = current + it.seed_time(shift(path, current));
      report.lemma_residual = std::max(report.lemma_residual, std::abs(next - lemma));
      report.min_growth = std::min(report.min_growth, next - current);
    }
    report.lemma_residual = std::max(report.lemma_residual, std::abs(it.recursive_time(path) - tau));

    if (j >= 1) {
      const double first = it.seed_time(path);
      const JumpPath once = shift(path, first);
      const JumpPath composed = shift(once, it.recursive_time(once, j - 1));
      const JumpPath direct = shift(path, tau);
      const double common = std::min(composed.horizon(), direct.horizon());
      const int points = static_cast<int>(std::floor(common / probe));
      const auto lhs = composed.grid_values(probe, points);
      const auto rhs = direct.grid_values(probe, points);
      for (int k = 0; k <= points; ++k)
        if (lhs[k] != rhs[k]) ++report.flow_mismatches;
    }
  }
  if (j == 0) report.min_growth = 0.0;
  return report;
}

}  // namespace

IterationCheck verify_iteration(const CouplingMatrixd& a, const IteratedCycle& it,
                                std::size_t samples, std::uint64_t seed) {
  return run_checks(a, it, samples, seed, true);
}

IterationCheck verify_cycle_property(const CouplingMatrixd& a, const IteratedCycle& it,
                                     std::size_t samples, std::uint64_t seed) {
  return run_checks(a, it, samples, seed, false);
}

std::shared_ptr<const AdaptedCycle> resting_seed(int m, int i, int dimension, double grid_step,
                                                 int rest_steps, int closure_steps) {
  std::vector<int> closure(m, 0);
  closure.at(i) = closure_steps;
  return std::make_shared<const AdaptedCycle>(
      grid_step, rest_steps, rules::vanishing_outside(m, i, rules::deterministic(rest_steps)),
      policies::zero(dimension), std::move(closure),
      std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(dimension)});
}

bool DivergenceReport::holds() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.holds; });
}

DivergenceReport divergence_experiment(const SystemInstance& instance, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& b, double alpha,
                                       const AdaptedCycle& seed, int i, int j_max, double delta,
                                       double tolerance) {
  const int m = instance.count();
  if (i < 0 || i >= m || b.size() != m) throw InvalidArgument("divergence: bad index or b");
  if (j_max < 0) throw InvalidArgument("divergence: j_max must be >= 0");
  if (!seed.is_cycle()) throw InvalidArgument("divergence: the seed must be a cycle");
  if (seed.closure_steps(i) * seed.grid_step() < delta)
    throw InvalidArgument("divergence: the seed is not >> delta in D_i");

  const CycleEvaluation eval = evaluate_cycle_dp(instance, y, seed, 1000000);
  for (int s = 0; s < m; ++s)
    if (s != i && eval.duration(s) != 0.0)
      throw InvalidArgument("divergence: tau^0 must vanish outside D_i");
  const Eigen::VectorXd c = eval.cost + alpha * eval.duration;
  const Eigen::MatrixXd& p = eval.terminal;

  DivergenceReport report;
  report.index = i;
  report.delta = delta;
  report.mu = -(c(i) - b(i) + p.row(i).dot(b));
  if (!(report.mu > 0.0))
    throw SeedNotNegative("divergence: the seed objective is not negative");
  report.rho = rho_bound(instance.coupling(), delta);
  const double ret = p(i, i);
  report.limit = ret < 1.0 ? -report.mu / (1.0 - ret) : -std::numeric_limits<double>::infinity();

  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m, m);  // P^j
  Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(m);
  double previous = 0.0;
  for (int j = 0; j <= j_max; ++j) {
    cumulative += power * c;
    const Eigen::MatrixXd next = power * p;
    DivergenceRow row;
    row.j = j;
    row.value = cumulative(i) - b(i) + next.row(i).dot(b);
    row.bound = -report.mu * (1.0 + report.rho * j);
    if (j > 0) {
      row.increment = row.value - previous;
      row.predicted_increment = -report.mu * power(i, i);
    }
    row.holds = row.value <= row.bound + tolerance;
    report.rows.push_back(row);
    previous = row.value;
    power = next;
  }
  return report;
}

std::vector<ActionEstimate> divergence_monte_carlo(const SystemInstance& instance,
                                                   const Eigen::VectorXd& y,
                                                   const Eigen::VectorXd& b, double alpha,
                                                   std::shared_ptr<const AdaptedCycle> seed,
                                                   int i, int j_max, std::size_t samples,
                                                   std::uint64_t seed_value) {
  if (samples < 2) throw InvalidArgument("divergence_monte_carlo: need samples >= 2");
  const IteratedCycle it(seed, j_max);
  PathSampler sampler(instance.coupling(), seed_value, static_cast<std::uint64_t>(i));
  std::vector<double> sum(j_max + 1, 0.0), square(j_max + 1, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const JumpPath path = sampler.sample_from(i, std::max(it.bound(), seed->grid_step()));
    const std::vector<double> times = it.phase_times(path);
    double running = 0.0;
    for (int r = 0; r <= j_max; ++r) {
      if (times[r + 1] > times[r]) {
        const JumpPath phase = shift(path, times[r]);
        running += path_action(instance, y, seed->control(phase), phase) +
                   alpha * (times[r + 1] - times[r]);
      }
      const double sample = running - b(i) + b(path(times[r + 1]));
      sum[r] += sample;
      square[r] += sample * sample;
    }
  }
  std::vector<ActionEstimate> out;
  const double n = static_cast<double>(samples);
  for (int r = 0; r <= j_max; ++r) {
    ActionEstimate e;
    e.value = sum[r] / n;
    e.std_error = std::sqrt(std::max(0.0, (square[r] - n * e.value * e.value) / (n - 1.0)) / n);
    e.method = EvaluationMethod::monte_carlo;
    e.samples = samples;
    e.seed = seed_value;
    out.push_back(e);
  }
  return out;
}

}  // namespace wkam
