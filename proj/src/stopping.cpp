#include "wkam/stopping.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace wkam {

namespace {

bool is_dyadic_step(double step) {
  int exponent = 0;
  const double mantissa = std::frexp(step, &exponent);
  return step > 0.0 && step <= 1.0 && mantissa == 0.5;
}

class DeterministicRule final : public StoppingRule {
 public:
  explicit DeterministicRule(int step) : step_(step) {}
  Memory start(int) const override { return {}; }
  Memory observe(const Memory& memory, int, int) const override { return memory; }
  bool stop(const Memory&, int step) const override { return step >= step_; }
  std::string describe() const override { return "deterministic(" + std::to_string(step_) + ")"; }

 private:
  int step_;
};

class FirstHittingRule final : public StoppingRule {
 public:
  explicit FirstHittingRule(int target) : target_(target) {}
  Memory start(int index) const override { return {index == target_ ? 1 : 0}; }
  Memory observe(const Memory&, int, int index) const override {
    return {index == target_ ? 1 : 0};
  }
  bool stop(const Memory& memory, int) const override { return memory[0] == 1; }
  std::string describe() const override {
    return "first_hitting(" + std::to_string(target_) + ")";
  }

 private:
  int target_;
};

class SwitchCountRule final : public StoppingRule {
 public:
  explicit SwitchCountRule(int switches) : switches_(switches) {}
  Memory start(int index) const override { return {index, 0}; }
  Memory observe(const Memory& memory, int, int index) const override {
    const int count = std::min(switches_, memory[1] + (index != memory[0] ? 1 : 0));
    return {index, count};
  }
  bool stop(const Memory& memory, int) const override { return memory[1] >= switches_; }
  std::string describe() const override {
    return "switch_count(" + std::to_string(switches_) + ")";
  }

 private:
  int switches_;
};

class TableRule final : public StoppingRule {
 public:
  TableRule(int m, std::vector<std::uint8_t> decisions, int steps)
      : m_(m), steps_(steps), decisions_(std::move(decisions)) {
    if (decisions_.size() != static_cast<std::size_t>(steps) * m * m)
      throw InvalidArgument("table rule: decisions must have steps * m * m entries");
  }
  Memory start(int index) const override { return {index, index}; }
  Memory observe(const Memory& memory, int, int index) const override {
    return {memory[1], index};
  }
  bool stop(const Memory& memory, int step) const override {
    if (step >= steps_) return true;
    return decisions_[(static_cast<std::size_t>(step) * m_ + memory[0]) * m_ + memory[1]] != 0;
  }
  std::string describe() const override { return "table(" + std::to_string(steps_) + ")"; }

 private:
  int m_;
  int steps_;
  std::vector<std::uint8_t> decisions_;
};

class HistoryRule final : public StoppingRule {
 public:
  HistoryRule(std::function<bool(std::span<const int>)> predicate, std::string name)
      : predicate_(std::move(predicate)), name_(std::move(name)) {}
  Memory start(int index) const override { return {index}; }
  Memory observe(const Memory& memory, int, int index) const override {
    Memory next = memory;
    next.push_back(index);
    return next;
  }
  bool stop(const Memory& memory, int) const override { return predicate_(memory); }
  std::string describe() const override { return "history(" + name_ + ")"; }

 private:
  std::function<bool(std::span<const int>)> predicate_;
  std::string name_;
};

class PerIndexRule final : public StoppingRule {
 public:
  explicit PerIndexRule(std::vector<StoppingRulePtr> rules) : rules_(std::move(rules)) {}
  Memory start(int index) const override {
    Memory memory{index};
    const Memory inner = rules_.at(index)->start(index);
    memory.insert(memory.end(), inner.begin(), inner.end());
    return memory;
  }
  Memory observe(const Memory& memory, int step, int index) const override {
    const Memory inner = rules_[memory[0]]->observe(tail(memory), step, index);
    Memory next{memory[0]};
    next.insert(next.end(), inner.begin(), inner.end());
    return next;
  }
  bool stop(const Memory& memory, int step) const override {
    return rules_[memory[0]]->stop(tail(memory), step);
  }
  std::string describe() const override {
    std::ostringstream out;
    out << "per_index(";
    for (std::size_t i = 0; i < rules_.size(); ++i)
      out << (i ? "; " : "") << i << ": " << rules_[i]->describe();
    out << ')';
    return out.str();
  }

 private:
  static Memory tail(const Memory& memory) { return Memory(memory.begin() + 1, memory.end()); }
  std::vector<StoppingRulePtr> rules_;
};

}  // namespace

namespace rules {

StoppingRulePtr deterministic(int step) {
  if (step < 0) throw InvalidArgument("deterministic rule: step must be >= 0");
  return std::make_shared<DeterministicRule>(step);
}
StoppingRulePtr first_hitting(int target) { return std::make_shared<FirstHittingRule>(target); }
StoppingRulePtr switch_count(int switches) {
  if (switches < 1) throw InvalidArgument("switch_count rule: need at least one switch");
  return std::make_shared<SwitchCountRule>(switches);
}
StoppingRulePtr table(int m, std::vector<std::uint8_t> decisions, int steps) {
  return std::make_shared<TableRule>(m, std::move(decisions), steps);
}
StoppingRulePtr history(std::function<bool(std::span<const int>)> predicate, std::string name) {
  return std::make_shared<HistoryRule>(std::move(predicate), std::move(name));
}
StoppingRulePtr per_index(std::vector<StoppingRulePtr> rules_by_index) {
  return std::make_shared<PerIndexRule>(std::move(rules_by_index));
}
StoppingRulePtr vanishing_outside(int m, int i, StoppingRulePtr rule) {
  std::vector<StoppingRulePtr> by_index(m, deterministic(0));
  by_index.at(i) = std::move(rule);
  return per_index(std::move(by_index));
}

}  // namespace rules

GridStoppingTime::GridStoppingTime(double grid_step, int bound_steps, StoppingRulePtr rule,
                                   std::vector<int> offset_steps)
    : step_(grid_step),
      bound_steps_(bound_steps),
      rule_(std::move(rule)),
      offsets_(std::move(offset_steps)) {
  if (!is_dyadic_step(step_))
    throw InvalidArgument("GridStoppingTime: grid step must be 2^-n");
  if (bound_steps_ < 0) throw InvalidArgument("GridStoppingTime: bound must be >= 0");
  if (!rule_) throw InvalidArgument("GridStoppingTime: missing rule");
  for (int o : offsets_)
    if (o < 0) throw InvalidArgument("GridStoppingTime: offsets must be >= 0");
}

int GridStoppingTime::offset_steps(int start) const {
  if (offsets_.empty()) return 0;
  if (offsets_.size() == 1) return offsets_[0];
  return offsets_.at(static_cast<std::size_t>(start));
}

int GridStoppingTime::max_offset_steps() const {
  int out = 0;
  for (int o : offsets_) out = std::max(out, o);
  return out;
}

int GridStoppingTime::stop_step(std::span<const int> grid_history) const {
  if (grid_history.empty()) throw HorizonExceeded("stop_step: empty history");
  Memory memory = rule_->start(grid_history[0]);
  for (int k = 0;; ++k) {
    if (k == bound_steps_ || rule_->stop(memory, k)) return k;
    if (static_cast<std::size_t>(k + 1) >= grid_history.size())
      throw HorizonExceeded("stop_step: history ends before the rule stops");
    memory = rule_->observe(memory, k + 1, grid_history[k + 1]);
  }
}

int GridStoppingTime::total_steps(const JumpPath& path) const {
  const int available = static_cast<int>(std::floor(path.horizon() / step_ + 1e-9));
  const int steps = std::min(available, bound_steps_);
  const std::vector<int> history = path.grid_values(step_, steps);
  const int k = stop_step(history);
  const int total = k + offset_steps(path.initial_index());
  if (total * step_ > path.horizon() * (1.0 + 1e-15))
    throw HorizonExceeded("stopping time exceeds the path horizon");
  return total;
}

DyadicStoppingTime::DyadicStoppingTime(std::function<double(const JumpPath&)> source,
                                       double bound, int level)
    : source_(std::move(source)), bound_(bound), level_(level) {
  if (!(bound_ >= 0.0) || !std::isfinite(bound_))
    throw UnboundedInput("dyadic approximation needs a finite bound");
  if (level_ < 0 || level_ > 52) throw InvalidArgument("dyadic level out of range");
}

double DyadicStoppingTime::value(const JumpPath& path) const {
  const double tau = source_(path);
  if (!std::isfinite(tau) || tau < 0.0 || tau > bound_)
    throw UnboundedInput("random time outside [0, bound] on a path");
  const double scale = std::ldexp(1.0, level_);
  return std::ceil(tau * scale) / scale;
}

DyadicStoppingTime dyadic_approximation(std::function<double(const JumpPath&)> tau,
                                        double bound, int level) {
  return DyadicStoppingTime(std::move(tau), bound, level);
}

double first_hitting_time(const JumpPath& path, int target, double cap) {
  if (path.initial_index() == target) return 0.0;
  const auto& times = path.jump_times();
  const auto& indices = path.post_jump_indices();
  for (std::size_t k = 0; k < times.size() && times[k] <= cap; ++k)
    if (indices[k] == target) return times[k];
  return cap;
}

const char* to_string(EvaluationMethod method) {
  return method == EvaluationMethod::exact_dp ? "exact_dp" : "monte_carlo";
}

StoppingMatrix stopping_matrix(const CouplingMatrixd& a, const GridStoppingTime& tau,
                               const StoppingMatrixOptions& options) {
  const int m = a.size();
  const Eigen::MatrixXd step = semigroup(a, tau.grid_step()).matrix();
  Eigen::MatrixXd result(m, m);

  for (int i = 0; i < m; ++i) {
    std::map<std::pair<Memory, int>, double> frontier;
    frontier[{tau.rule().start(i), i}] = 1.0;
    Eigen::RowVectorXd stopped = Eigen::RowVectorXd::Zero(m);
    for (int k = 0; !frontier.empty(); ++k) {
      std::map<std::pair<Memory, int>, double> next;
      for (const auto& [key, mass] : frontier) {
        const auto& [memory, index] = key;
        if (k == tau.bound_steps() || tau.rule().stop(memory, k)) {
          stopped(index) += mass;
          continue;
        }
        for (int j = 0; j < m; ++j)
          next[{tau.rule().observe(memory, k + 1, j), j}] += mass * step(index, j);
      }
      if (next.size() > options.history_cap) {
        if (!options.allow_monte_carlo)
          throw HistoryExplosion("stopping_matrix: history count exceeds the cap");
        return stopping_matrix_monte_carlo(a, tau, options.samples, options.seed);
      }
      frontier = std::move(next);
    }
    const int offset = tau.offset_steps(i);
    if (offset > 0) stopped = stopped * semigroup(a, offset * tau.grid_step()).matrix();
    result.row(i) = stopped / stopped.sum();
  }

  StoppingMatrix out;
  out.matrix = StochasticMatrixd(std::move(result));
  out.std_error = Eigen::MatrixXd::Zero(m, m);
  out.method = EvaluationMethod::exact_dp;
  return out;
}

StoppingMatrix stopping_matrix_monte_carlo(const CouplingMatrixd& a,
                                           const GridStoppingTime& tau, std::size_t samples,
                                           std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("stopping_matrix_monte_carlo: need samples");
  const int m = a.size();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    PathSampler sampler(a, seed, static_cast<std::uint64_t>(i));
    for (std::size_t s = 0; s < samples; ++s) {
      const JumpPath path = sampler.sample_from(i, std::max(tau.bound(), tau.grid_step()));
      counts(i, path(tau.value(path))) += 1.0;
    }
  }
  const double n = static_cast<double>(samples);
  Eigen::MatrixXd p = counts / n;
  StoppingMatrix out;
  out.std_error = (p.array() * (1.0 - p.array()) / n).sqrt().matrix();
  out.matrix = StochasticMatrixd(std::move(p));
  out.method = EvaluationMethod::monte_carlo;
  out.samples = samples;
  out.seed = seed;
  return out;
}

double rho_bound(const CouplingMatrixd& a, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("rho_bound: epsilon must be > 0");
  return semigroup(a, epsilon).matrix().minCoeff();
}

std::vector<Cylinder> default_cylinder_battery(int m) {
  std::vector<Cylinder> battery;
  if (m == 2) {
    for (double t : {0.0, 0.3, 0.8})
      for (int j = 0; j < 2; ++j) battery.emplace_back(std::vector<double>{t}, std::vector<int>{j});
    for (int j0 = 0; j0 < 2; ++j0)
      for (int j1 = 0; j1 < 2; ++j1)
        battery.emplace_back(std::vector<double>{0.1, 0.6}, std::vector<int>{j0, j1});
    battery.emplace_back(std::vector<double>{0.0, 0.5}, std::vector<int>{0, 1});
    battery.emplace_back(std::vector<double>{0.0, 0.5}, std::vector<int>{1, 1});
    return battery;
  }
  for (double t : {0.0, 0.5})
    for (int j = 0; j < m; ++j) battery.emplace_back(std::vector<double>{t}, std::vector<int>{j});
  for (int j = 0; j < m; ++j)
    battery.emplace_back(std::vector<double>{0.1, 0.6}, std::vector<int>{j, j});
  return battery;
}

PushforwardReport verify_shift_pushforward(const CouplingMatrixd& a,
                                           const ProbabilityVectord& initial,
                                           const GridStoppingTime& tau, std::size_t samples,
                                           std::uint64_t seed,
                                           const std::vector<Cylinder>& battery_in) {
  const std::vector<Cylinder> battery =
      battery_in.empty() ? default_cylinder_battery(a.size()) : battery_in;
  double window = 0.0;
  for (const auto& c : battery) window = std::max(window, c.times().back());
  const double horizon = tau.bound() + window + tau.grid_step();

  std::vector<std::size_t> hits(battery.size(), 0);
  PathSampler sampler(a, seed, 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const JumpPath path = sampler.sample(initial, horizon);
    const JumpPath shifted = shift(path, tau.value(path));
    for (std::size_t c = 0; c < battery.size(); ++c)
      if (battery[c].contains(shifted)) ++hits[c];
  }

  const StoppingMatrix transition = stopping_matrix(a, tau);
  Eigen::RowVectorXd moved = initial.vector() * transition.matrix.matrix();
  moved /= moved.sum();

  PushforwardReport report;
  report.samples = samples;
  report.seed = seed;
  report.shifted_initial = ProbabilityVectord(moved);
  const double n = static_cast<double>(samples);
  for (std::size_t c = 0; c < battery.size(); ++c) {
    CylinderCheck check{battery[c], 0.0, 0.0, 0.0};
    check.expected = cylinder_probability(a, report.shifted_initial, battery[c]);
    check.empirical = static_cast<double>(hits[c]) / n;
    const double sigma = std::sqrt(check.expected * (1.0 - check.expected) / n);
    if (sigma > 0.0) {
      check.z_score = (check.empirical - check.expected) / sigma;
    } else {
      check.z_score = check.empirical == check.expected
                          ? 0.0
                          : std::numeric_limits<double>::infinity();
    }
    report.max_deviation = std::max(report.max_deviation, std::abs(check.z_score));
    report.checks.push_back(std::move(check));
  }
  return report;
}

}  // namespace wkam
