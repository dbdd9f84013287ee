#include "wkam/action.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace wkam {

namespace {

bool is_dyadic(double step) {
  int exponent = 0;
  return step > 0.0 && step <= 1.0 && std::frexp(step, &exponent) == 0.5;
}

class ZeroPolicy final : public VelocityPolicy {
 public:
  explicit ZeroPolicy(int n) : n_(n) {}
  Memory start(int) const override { return {}; }
  Memory observe(const Memory& memory, int, int) const override { return memory; }
  Eigen::VectorXd velocity(const Memory&, int) const override { return Eigen::VectorXd::Zero(n_); }
  std::string describe() const override { return "zero"; }

 private:
  int n_;
};

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream out;
  out.precision(17);
  out << '(';
  for (Eigen::Index k = 0; k < v.size(); ++k) out << (k ? "," : "") << v(k);
  out << ')';
  return out.str();
}

class LoopPolicy final : public VelocityPolicy {
 public:
  LoopPolicy(std::vector<Eigen::VectorXd> blocks, int steps_per_block)
      : blocks_(std::move(blocks)), per_block_(steps_per_block) {
    if (blocks_.empty() || per_block_ < 1)
      throw InvalidArgument("loop policy: need blocks and steps_per_block >= 1");
  }
  Memory start(int) const override { return {}; }
  Memory observe(const Memory& memory, int, int) const override { return memory; }
  Eigen::VectorXd velocity(const Memory&, int step) const override {
    const std::size_t block = std::min<std::size_t>(step / per_block_, blocks_.size() - 1);
    return blocks_[block];
  }
  std::string describe() const override {
    std::string out = "loop[" + std::to_string(per_block_) + "](";
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      out += (k ? ";" : "") + format_vector(blocks_[k]);
    return out + ")";
  }

 private:
  std::vector<Eigen::VectorXd> blocks_;
  int per_block_;
};

class FeedbackPolicy final : public VelocityPolicy {
 public:
  explicit FeedbackPolicy(std::vector<Eigen::VectorXd> by_index) : by_index_(std::move(by_index)) {
    if (by_index_.empty()) throw InvalidArgument("feedback policy: no velocities");
  }
  Memory start(int index) const override { return {index}; }
  Memory observe(const Memory&, int, int index) const override { return {index}; }
  Eigen::VectorXd velocity(const Memory& memory, int) const override {
    return by_index_.at(memory[0]);
  }
  std::string describe() const override {
    std::string out = "feedback(";
    for (std::size_t k = 0; k < by_index_.size(); ++k)
      out += (k ? ";" : "") + format_vector(by_index_[k]);
    return out + ")";
  }

 private:
  std::vector<Eigen::VectorXd> by_index_;
};

class PerIndexPolicy final : public VelocityPolicy {
 public:
  explicit PerIndexPolicy(std::vector<VelocityPolicyPtr> by_index) : by_index_(std::move(by_index)) {}
  Memory start(int index) const override {
    Memory memory{index};
    const Memory inner = by_index_.at(index)->start(index);
    memory.insert(memory.end(), inner.begin(), inner.end());
    return memory;
  }
  Memory observe(const Memory& memory, int step, int index) const override {
    const Memory inner = by_index_[memory[0]]->observe(tail(memory), step, index);
    Memory next{memory[0]};
    next.insert(next.end(), inner.begin(), inner.end());
    return next;
  }
  Eigen::VectorXd velocity(const Memory& memory, int step) const override {
    return by_index_[memory[0]]->velocity(tail(memory), step);
  }
  std::string describe() const override {
    std::string out = "per_index(";
    for (std::size_t i = 0; i < by_index_.size(); ++i)
      out += (i ? "; " : "") + std::to_string(i) + ": " + by_index_[i]->describe();
    return out + ")";
  }

 private:
  static Memory tail(const Memory& memory) { return Memory(memory.begin() + 1, memory.end()); }
  std::vector<VelocityPolicyPtr> by_index_;
};

// Grid replay of a cycle along one path.
struct Replay {
  int stop_step = 0;
  std::vector<Eigen::VectorXd> velocities;  // one per grid step before the stop
  Eigen::VectorXd lift;                     // at the stop
  Eigen::VectorXd closure;                  // closing velocity
  int closure_steps = 0;
};

Replay replay(const AdaptedCycle& cycle, const JumpPath& path) {
  const int start = path.initial_index();
  const double step = cycle.grid_step();
  const int available = static_cast<int>(std::floor(path.horizon() / step + 1e-9));
  const std::vector<int> history = path.grid_values(step, std::min(available, cycle.bound_steps()));
  Memory stop_memory = cycle.rule().start(start);
  Memory policy_memory = cycle.policy().start(start);
  Replay out;
  out.lift = Eigen::VectorXd::Zero(cycle.dimension());
  for (int k = 0;; ++k) {
    if (k == cycle.bound_steps() || cycle.rule().stop(stop_memory, k)) {
      out.stop_step = k;
      break;
    }
    if (static_cast<std::size_t>(k + 1) >= history.size())
      throw HorizonExceeded("cycle replay: path horizon shorter than the cycle");
    const Eigen::VectorXd v = cycle.policy().velocity(policy_memory, k);
    out.velocities.push_back(v);
    out.lift += v * step;
    stop_memory = cycle.rule().observe(stop_memory, k + 1, history[k + 1]);
    policy_memory = cycle.policy().observe(policy_memory, k + 1, history[k + 1]);
  }
  out.closure_steps = cycle.closure_steps(start);
  out.closure = cycle.closure_velocity(start, out.lift);
  return out;
}

}  // namespace

SystemInstance::SystemInstance(CouplingMatrixd a, HamiltonianSpec h, double velocity_bound,
                               double grid_step, const FenchelGrids& grids)
    : a_(std::move(a)), h_(std::move(h)), bound_(velocity_bound), step_(grid_step) {
  if (a_.size() != h_.count())
    throw InvalidArgument("SystemInstance: coupling size and Hamiltonian count differ");
  if (!is_dyadic(step_)) throw InvalidArgument("SystemInstance: grid step must be 2^-n");
  if (!(bound_ > 0.0)) throw InvalidArgument("SystemInstance: velocity bound must be > 0");
  h_.validate(grids.x_points, 4.0 * bound_, grids.p_intervals + 1, bound_);
  l_ = std::make_shared<const LagrangianTable>(fenchel_transform(h_, bound_, grids));
  p_ = semigroup(a_, step_).matrix();
  const int m = a_.size();
  for (int l = 0; l < m; ++l)
    occupation_.push_back(occupation_integral(a_, Eigen::VectorXd::Unit(m, l), step_));

  // Gauss-Legendre on [0, D] by Golub-Welsch; the integrands are entire.
  constexpr int kNodes = 16;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(kNodes, kNodes);
  for (int k = 1; k < kNodes; ++k)
    jacobi(k, k - 1) = jacobi(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  moments_.assign(m, {Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m)});
  for (int k = 0; k < kNodes; ++k) {
    const double u = 0.5 * (solver.eigenvalues()(k) + 1.0);
    const double w = 0.5 * step_ * 2.0 * std::pow(solver.eigenvectors()(0, k), 2);
    const Eigen::MatrixXd before = semigroup(a_, u * step_).matrix();
    const Eigen::MatrixXd after = semigroup(a_, (1.0 - u) * step_).matrix();
    for (int l = 0; l < m; ++l) {
      const Eigen::MatrixXd through = before.col(l) * after.row(l);
      moments_[l][0] += w * u * through;
      moments_[l][1] += w * u * u * through;
    }
  }
}

double SystemInstance::running_cost(int i, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& q) const {
  const double value = (*l_)(i, x, q);
  if (LagrangianTable::is_sentinel(value))
    throw SentinelVelocity("velocity outside the finite region of L_" + std::to_string(i));
  return value;
}

namespace policies {

VelocityPolicyPtr zero(int dimension) { return std::make_shared<ZeroPolicy>(dimension); }
VelocityPolicyPtr loop(std::vector<Eigen::VectorXd> blocks, int steps_per_block) {
  return std::make_shared<LoopPolicy>(std::move(blocks), steps_per_block);
}
VelocityPolicyPtr index_feedback(std::vector<Eigen::VectorXd> by_index) {
  return std::make_shared<FeedbackPolicy>(std::move(by_index));
}
VelocityPolicyPtr per_index(std::vector<VelocityPolicyPtr> by_index) {
  return std::make_shared<PerIndexPolicy>(std::move(by_index));
}

}  // namespace policies

AdaptedCycle::AdaptedCycle(double grid_step, int bound_steps, StoppingRulePtr rule,
                           VelocityPolicyPtr policy, std::vector<int> closure_steps,
                           std::vector<Eigen::VectorXd> targets)
    : step_(grid_step),
      bound_steps_(bound_steps),
      rule_(std::move(rule)),
      policy_(std::move(policy)),
      closure_(std::move(closure_steps)),
      targets_(std::move(targets)) {
  if (!is_dyadic(step_)) throw InvalidArgument("AdaptedCycle: grid step must be 2^-n");
  if (bound_steps_ < 0) throw InvalidArgument("AdaptedCycle: negative bound");
  if (!rule_ || !policy_) throw InvalidArgument("AdaptedCycle: missing rule or policy");
  if (closure_.empty() || targets_.empty())
    throw InvalidArgument("AdaptedCycle: closure steps and targets are required");
  for (int c : closure_)
    if (c < 0) throw InvalidArgument("AdaptedCycle: closure steps must be >= 0");
  for (const auto& t : targets_)
    if (t.size() != targets_.front().size() || !t.allFinite())
      throw InvalidArgument("AdaptedCycle: targets must be finite and share one dimension");
}

int AdaptedCycle::closure_steps(int start) const {
  return closure_.size() == 1 ? closure_[0] : closure_.at(start);
}

const Eigen::VectorXd& AdaptedCycle::target(int start) const {
  return targets_.size() == 1 ? targets_[0] : targets_.at(start);
}

bool AdaptedCycle::is_cycle() const {
  for (const auto& t : targets_)
    for (Eigen::Index k = 0; k < t.size(); ++k)
      if (t(k) != std::round(t(k))) return false;
  return true;
}

GridStoppingTime AdaptedCycle::total_time() const {
  return GridStoppingTime(step_, bound_steps_, rule_, closure_);
}

Eigen::VectorXd AdaptedCycle::closure_velocity(int start, const Eigen::VectorXd& lift) const {
  const int steps = closure_steps(start);
  const Eigen::VectorXd gap = target(start) - lift;
  if (steps == 0) {
    if (gap.cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("AdaptedCycle: no closure time left to reach the target");
    return Eigen::VectorXd::Zero(lift.size());
  }
  return gap / (steps * step_);
}

std::vector<ControlPiece<double>> AdaptedCycle::control(const JumpPath& path) const {
  const Replay r = replay(*this, path);
  std::vector<ControlPiece<double>> pieces;
  for (const auto& v : r.velocities) pieces.push_back({v, step_});
  if (r.closure_steps > 0) pieces.push_back({r.closure, r.closure_steps * step_});
  return pieces;
}

namespace {

// (k, j) entry: E_k[int_0^D L_{w(s)}(x + s v, -v) ds; w(D) = j], with each
// L_l replaced by its quadratic interpolant in s through s = 0, D/2, D.
Eigen::MatrixXd step_cost(const SystemInstance& instance, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& v) {
  const int m = instance.count();
  const double step = instance.grid_step();
  const Eigen::VectorXd q = -v;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  for (int l = 0; l < m; ++l) {
    const double f0 = instance.running_cost(l, x, q);
    const double fm = instance.running_cost(l, x + 0.5 * step * v, q);
    const double f1 = instance.running_cost(l, x + step * v, q);
    c += f0 * instance.step_occupation(l) + (4.0 * fm - 3.0 * f0 - f1) * instance.step_moment(l, 1) +
         (2.0 * f0 + 2.0 * f1 - 4.0 * fm) * instance.step_moment(l, 2);
  }
  return c;
}

struct StateKey {
  Memory stop;
  Memory policy;
  int index;
  std::vector<double> lift;
  auto operator<=>(const StateKey&) const = default;
};

struct StateMass {
  double mass = 0.0;
  double cost = 0.0;
};

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

CycleEvaluation evaluate_cycle_dp(const SystemInstance& instance, const Eigen::VectorXd& x,
                                  const AdaptedCycle& cycle, std::size_t history_cap) {
  const int m = instance.count();
  const int n = instance.dimension();
  const double step = instance.grid_step();
  if (cycle.grid_step() != step)
    throw InvalidArgument("evaluate_cycle: cycle grid step differs from the instance");
  if (cycle.dimension() != n || x.size() != n)
    throw InvalidArgument("evaluate_cycle: dimension mismatch");
  const Eigen::MatrixXd& p = instance.step_transition();

  CycleEvaluation out;
  out.cost = Eigen::VectorXd::Zero(m);
  out.duration = Eigen::VectorXd::Zero(m);
  out.terminal = Eigen::MatrixXd::Zero(m, m);
  out.method = EvaluationMethod::exact_dp;

  for (int i = 0; i < m; ++i) {
    std::map<StateKey, StateMass> frontier;
    frontier[{cycle.rule().start(i), cycle.policy().start(i), i, std::vector<double>(n, 0.0)}] = {
        1.0, 0.0};
    // Stopped mass grouped by lift: the closure only depends on the lift.
    std::map<std::vector<double>, Eigen::RowVectorXd> stopped;
    double cost = 0.0;
    double duration = 0.0;
    const int closure = cycle.closure_steps(i);

    for (int k = 0; !frontier.empty(); ++k) {
      std::map<StateKey, StateMass> next;
      for (const auto& [key, state] : frontier) {
        if (k == cycle.bound_steps() || cycle.rule().stop(key.stop, k)) {
          auto [it, inserted] = stopped.try_emplace(key.lift, Eigen::RowVectorXd::Zero(m));
          it->second(key.index) += state.mass;
          cost += state.cost;
          duration += state.mass * (k + closure) * step;
          continue;
        }
        const Eigen::VectorXd lift = to_eigen(key.lift);
        const Eigen::VectorXd v = cycle.policy().velocity(key.policy, k);
        const Eigen::MatrixXd c = step_cost(instance, x + lift, v);
        const std::vector<double> moved = to_std(lift + step * v);
        for (int j = 0; j < m; ++j) {
          StateMass& target = next[{cycle.rule().observe(key.stop, k + 1, j),
                                    cycle.policy().observe(key.policy, k + 1, j), j, moved}];
          target.mass += state.mass * p(key.index, j);
          target.cost += state.cost * p(key.index, j) + state.mass * c(key.index, j);
        }
      }
      out.states += next.size();
      if (next.size() > history_cap)
        throw HistoryExplosion("evaluate_cycle: history count exceeds the cap");
      frontier = std::move(next);
    }

    Eigen::RowVectorXd terminal = Eigen::RowVectorXd::Zero(m);
    for (const auto& [lift_std, mass_row] : stopped) {
      const Eigen::VectorXd lift = to_eigen(lift_std);
      const Eigen::VectorXd v = cycle.closure_velocity(i, lift);
      Eigen::RowVectorXd mass = mass_row;
      for (int c = 0; c < closure; ++c) {
        cost += (mass * step_cost(instance, x + lift + c * step * v, v)).sum();
        mass = mass * p;
      }
      terminal += mass;
    }
    out.cost(i) = cost;
    out.duration(i) = duration;
    out.terminal.row(i) = terminal / terminal.sum();
  }
  return out;
}

double path_action(const SystemInstance& instance, const Eigen::VectorXd& x,
                   const std::vector<ControlPiece<double>>& control, const JumpPath& path) {
  const double step = instance.grid_step();
  double cost = 0.0;
  double t0 = 0.0;
  Eigen::VectorXd lift = Eigen::VectorXd::Zero(instance.dimension());
  for (const auto& segment : control) {
    if (segment.duration <= 0.0) continue;
    const Eigen::VectorXd& v = segment.velocity;
    const Eigen::VectorXd q = -v;
    for (const auto& piece : path.pieces(t0, t0 + segment.duration)) {
      // Simpson panels no longer than one grid step.
      const int panels =
          std::max(1, static_cast<int>(std::ceil((piece.end - piece.start) / step - 1e-9)));
      const double length = (piece.end - piece.start) / panels;
      for (int k = 0; k < panels; ++k) {
        const Eigen::VectorXd at = x + lift + (piece.start + k * length - t0) * v;
        const double f0 = instance.running_cost(piece.index, at, q);
        const double f1 = instance.running_cost(piece.index, at + 0.5 * length * v, q);
        const double f2 = instance.running_cost(piece.index, at + length * v, q);
        cost += length / 6.0 * (f0 + 4.0 * f1 + f2);
      }
    }
    lift += segment.duration * v;
    t0 += segment.duration;
  }
  return cost;
}

CycleEvaluation evaluate_cycle_monte_carlo(const SystemInstance& instance,
                                           const Eigen::VectorXd& x, const AdaptedCycle& cycle,
                                           std::size_t samples, std::uint64_t seed) {
  const int m = instance.count();
  const double step = instance.grid_step();
  if (samples < 2) throw InvalidArgument("evaluate_cycle_monte_carlo: need samples >= 2");
  if (cycle.grid_step() != step || cycle.dimension() != instance.dimension())
    throw InvalidArgument("evaluate_cycle: cycle does not match the instance");
  const double horizon = std::max(cycle.bound(), step);
  const int width = 2 + m;

  CycleEvaluation out;
  out.cost = Eigen::VectorXd::Zero(m);
  out.duration = Eigen::VectorXd::Zero(m);
  out.terminal = Eigen::MatrixXd::Zero(m, m);
  out.method = EvaluationMethod::monte_carlo;
  out.samples = samples;
  out.seed = seed;

  for (int i = 0; i < m; ++i) {
    PathSampler sampler(instance.coupling(), seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(width);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(width, width);
    Eigen::VectorXd row(width);
    for (std::size_t s = 0; s < samples; ++s) {
      const JumpPath path = sampler.sample_from(i, horizon);
      const auto control = cycle.control(path);
      double total = 0.0;
      for (const auto& piece : control) total += piece.duration;
      const double cost = path_action(instance, x, control, path);
      row.setZero();
      row(0) = cost;
      row(1) = total;
      row(2 + path(total)) = 1.0;
      sum += row;
      outer += row * row.transpose();
    }
    const double count = static_cast<double>(samples);
    const Eigen::VectorXd mean = sum / count;
    out.cost(i) = mean(0);
    out.duration(i) = mean(1);
    out.terminal.row(i) = mean.tail(m).transpose();
    out.covariance.push_back((outer - count * mean * mean.transpose()) / (count - 1.0));
  }
  return out;
}

CycleEvaluation evaluate_cycle(const SystemInstance& instance, const Eigen::VectorXd& x,
                               const AdaptedCycle& cycle, const ActionOptions& options) {
  using Method = ActionOptions::Method;
  if (options.method == Method::monte_carlo)
    return evaluate_cycle_monte_carlo(instance, x, cycle, options.samples, options.seed);
  try {
    return evaluate_cycle_dp(instance, x, cycle, options.history_cap);
  } catch (const HistoryExplosion&) {
    if (options.method == Method::exact_dp) throw;
    return evaluate_cycle_monte_carlo(instance, x, cycle, options.samples, options.seed);
  }
}

namespace {

ActionEstimate combine(const CycleEvaluation& eval, const Eigen::RowVectorXd& weights,
                       const Eigen::VectorXd& direction,
                       const std::vector<Eigen::VectorXd>& offsets) {
  // value = sum_i weights_i (direction . mean_i) + offsets
  ActionEstimate out;
  out.method = eval.method;
  out.seed = eval.seed;
  out.samples = eval.samples;
  double variance = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) == 0.0) continue;
    Eigen::VectorXd w = direction;
    if (!offsets.empty()) w.tail(offsets[i].size()) += offsets[i];
    Eigen::VectorXd mean(w.size());
    mean << eval.cost(i), eval.duration(i), eval.terminal.row(i).transpose();
    out.value += weights(i) * w.dot(mean);
    if (eval.method == EvaluationMethod::monte_carlo)
      variance += weights(i) * weights(i) * w.dot(eval.covariance[i] * w) /
                  static_cast<double>(eval.samples);
  }
  out.std_error = std::sqrt(std::max(variance, 0.0));
  return out;
}

Eigen::VectorXd base_direction(int m, double alpha) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(2 + m);
  d(0) = 1.0;
  d(1) = alpha;
  return d;
}

}  // namespace

ActionEstimate action_value(const CycleEvaluation& eval, const ProbabilityVectord& a,
                            double alpha) {
  const int m = static_cast<int>(eval.cost.size());
  if (a.size() != m) throw InvalidArgument("action: initial law has the wrong size");
  return combine(eval, a.vector(), base_direction(m, alpha), {});
}

ActionEstimate action(const SystemInstance& instance, const TorusPointd& x,
                      const ProbabilityVectord& a, const AdaptedCycle& cycle, double alpha,
                      const ActionOptions& options) {
  return action_value(evaluate_cycle(instance, x.coordinates(), cycle, options), a, alpha);
}

ActionEstimate index_objective(const CycleEvaluation& eval, int i, double alpha,
                               const Eigen::VectorXd& b) {
  const int m = static_cast<int>(eval.cost.size());
  if (b.size() != m) throw InvalidArgument("objective: b has the wrong size");
  Eigen::VectorXd direction = base_direction(m, alpha);
  direction.tail(m) = b;
  Eigen::RowVectorXd weights = Eigen::RowVectorXd::Zero(m);
  weights(i) = 1.0;
  ActionEstimate out = combine(eval, weights, direction, {});
  out.value -= b(i);
  return out;
}

ActionEstimate characteristic_objective(const CycleEvaluation& eval, double alpha) {
  Eigen::MatrixXd t = eval.terminal;
  for (Eigen::Index i = 0; i < t.rows(); ++i) t.row(i) /= t.row(i).sum();
  const auto perron = characteristic_vector(StochasticMatrixd(t));
  return combine(eval, perron.vector.vector(), base_direction(static_cast<int>(t.rows()), alpha),
                 {});
}

double GridFunction::operator()(int i, const Eigen::VectorXd& x) const {
  if (x.size() != dimension) throw InvalidArgument("GridFunction: dimension mismatch");
  std::vector<int> lo(dimension);
  std::vector<double> w(dimension);
  for (int d = 0; d < dimension; ++d) {
    const double s = TorusPointd::wrap(x(d)) * points;
    const double f = std::floor(s);
    lo[d] = static_cast<int>(f) % points;
    w[d] = s - f;
  }
  double value = 0.0;
  for (int c = 0; c < (1 << dimension); ++c) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (int d = 0; d < dimension; ++d) {
      const bool up = (c >> d) & 1;
      weight *= up ? w[d] : 1.0 - w[d];
      flat = flat * points + static_cast<std::size_t>(up ? (lo[d] + 1) % points : lo[d]);
    }
    if (weight != 0.0) value += weight * values(i, static_cast<Eigen::Index>(flat));
  }
  return value;
}

Eigen::VectorXd GridFunction::operator()(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(values.rows());
  for (Eigen::Index i = 0; i < values.rows(); ++i) out(i) = (*this)(static_cast<int>(i), x);
  return out;
}

namespace {

SubsolutionReport run_battery(const SystemInstance& instance, const GridFunction& u, double alpha,
                              const std::vector<BatteryElement>& battery,
                              const ActionOptions& options, bool characteristic) {
  SubsolutionReport report;
  report.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < battery.size(); ++e) {
    const auto& element = battery[e];
    const CycleEvaluation eval = evaluate_cycle(instance, element.x, *element.cycle, options);
    const Eigen::VectorXd ux = u(element.x);
    const Eigen::VectorXd uy = u(element.y);
    ActionEstimate act;
    double lhs = 0.0;
    if (characteristic) {
      Eigen::MatrixXd t = eval.terminal;
      for (Eigen::Index i = 0; i < t.rows(); ++i) t.row(i) /= t.row(i).sum();
      const auto a = characteristic_vector(StochasticMatrixd(t)).vector;
      act = action_value(eval, a, alpha);
      lhs = a.vector().dot(ux - uy);
    } else {
      act = action_value(eval, element.a, alpha);
      lhs = element.a.vector().dot(ux) - element.a.vector() * (eval.terminal * uy);
    }
    report.slacks.push_back(act.value - lhs);
    report.std_errors.push_back(act.std_error);
    if (report.slacks.back() < report.min_slack) {
      report.min_slack = report.slacks.back();
      report.argmin = e;
    }
  }
  return report;
}

}  // namespace

SubsolutionReport subsolution_test(const SystemInstance& instance, const GridFunction& u,
                                   double alpha, const std::vector<BatteryElement>& battery,
                                   const ActionOptions& options) {
  return run_battery(instance, u, alpha, battery, options, false);
}

SubsolutionReport characteristic_subsolution_test(const SystemInstance& instance,
                                                  const GridFunction& u, double alpha,
                                                  const std::vector<BatteryElement>& battery,
                                                  const ActionOptions& options) {
  return run_battery(instance, u, alpha, battery, options, true);
}

const char* to_string(CycleSpec::Rule rule) {
  switch (rule) {
    case CycleSpec::Rule::deterministic: return "deterministic";
    case CycleSpec::Rule::first_hitting: return "first_hitting";
    case CycleSpec::Rule::switch_count: return "switch_count";
  }
  return "?";
}

const char* to_string(CycleSpec::Family family) {
  switch (family) {
    case CycleSpec::Family::zero: return "zero";
    case CycleSpec::Family::loop: return "loop";
    case CycleSpec::Family::feedback: return "feedback";
  }
  return "?";
}

std::string CycleSpec::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << to_string(rule) << '(' << parameter << ") " << to_string(family) << " w=(";
  for (Eigen::Index k = 0; k < winding.size(); ++k) out << (k ? "," : "") << winding(k);
  out << ')';
  if (!velocities.empty()) {
    out << " v=";
    for (std::size_t k = 0; k < velocities.size(); ++k)
      out << (k ? ";" : "") << format_vector(velocities[k]);
  }
  return out.str();
}

std::string SearchFamily::describe() const {
  std::ostringstream out;
  out << "bound_steps=" << bound_steps << " deterministic={";
  for (std::size_t k = 0; k < deterministic_steps.size(); ++k)
    out << (k ? "," : "") << deterministic_steps[k];
  out << "} first_hitting=" << (first_hitting ? "yes" : "no") << " switch_count={";
  for (std::size_t k = 0; k < switch_counts.size(); ++k) out << (k ? "," : "") << switch_counts[k];
  out << "} max_winding=" << max_winding << " loop_blocks=" << loop_blocks
      << " index_feedback=" << (index_feedback ? "yes" : "no")
      << " closure_steps=" << closure_steps;
  return out.str();
}

CycleSearch::CycleSearch(const SystemInstance& instance, Eigen::VectorXd y, SearchOptions options)
    : instance_(instance), y_(std::move(y)), options_(std::move(options)) {
  if (y_.size() != instance_.dimension()) throw InvalidArgument("CycleSearch: bad base point");
  const auto& f = options_.family;
  if (f.closure_steps < 1) throw InvalidArgument("CycleSearch: closure needs at least one step");
  if (f.loop_blocks < 0 || f.loop_blocks > 8)
    throw InvalidArgument("CycleSearch: loop_blocks must lie in [0, 8]");
  for (int k : f.deterministic_steps)
    if (k < 0 || k > f.bound_steps)
      throw InvalidArgument("CycleSearch: deterministic step outside [0, bound_steps]");
}

AdaptedCycle CycleSearch::build(const CycleSpec& spec) const {
  const auto& f = options_.family;
  const int n = instance_.dimension();
  StoppingRulePtr rule;
  int horizon = f.bound_steps;
  switch (spec.rule) {
    case CycleSpec::Rule::deterministic:
      rule = rules::deterministic(spec.parameter);
      horizon = spec.parameter;
      break;
    case CycleSpec::Rule::first_hitting:
      rule = rules::first_hitting(spec.parameter);
      break;
    case CycleSpec::Rule::switch_count:
      rule = rules::switch_count(spec.parameter);
      break;
  }
  VelocityPolicyPtr policy;
  switch (spec.family) {
    case CycleSpec::Family::zero:
      policy = policies::zero(n);
      break;
    case CycleSpec::Family::loop: {
      const int blocks = static_cast<int>(spec.velocities.size());
      policy = policies::loop(spec.velocities, std::max(1, (horizon + blocks - 1) / blocks));
      break;
    }
    case CycleSpec::Family::feedback:
      policy = policies::index_feedback(spec.velocities);
      break;
  }
  return AdaptedCycle(instance_.grid_step(), f.bound_steps, rule, policy, {f.closure_steps},
                      {spec.winding.cast<double>()});
}

const std::optional<CycleEvaluation>& CycleSearch::evaluate(const CycleSpec& spec) {
  const std::string key = spec.describe();
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  ++evaluations_;
  std::optional<CycleEvaluation> eval;
  try {
    eval = evaluate_cycle_dp(instance_, y_, build(spec), options_.history_cap);
  } catch (const SentinelVelocity&) {
  } catch (const HistoryExplosion&) {
  }
  specs_.push_back(spec);
  return cache_.emplace(key, std::move(eval)).first->second;
}

std::vector<CycleSpec> CycleSearch::combos() const {
  const auto& f = options_.family;
  const int n = instance_.dimension();
  std::vector<std::pair<CycleSpec::Rule, int>> templates;
  for (int k : f.deterministic_steps) templates.emplace_back(CycleSpec::Rule::deterministic, k);
  if (f.first_hitting)
    for (int j = 0; j < instance_.count(); ++j)
      templates.emplace_back(CycleSpec::Rule::first_hitting, j);
  for (int s : f.switch_counts) templates.emplace_back(CycleSpec::Rule::switch_count, s);

  std::vector<Eigen::VectorXi> windings;
  const int side = 2 * f.max_winding + 1;
  int total = 1;
  for (int d = 0; d < n; ++d) total *= side;
  for (int c = 0; c < total; ++c) {
    Eigen::VectorXi w(n);
    int rest = c;
    for (int d = 0; d < n; ++d) {
      w(d) = rest % side - f.max_winding;
      rest /= side;
    }
    windings.push_back(w);
  }
  // Small windings first, so ties favour the simplest cycle.
  std::stable_sort(windings.begin(), windings.end(), [](const auto& a, const auto& b) {
    return a.cwiseAbs().sum() < b.cwiseAbs().sum();
  });

  std::vector<CycleSpec> out;
  for (const auto& w : windings)
    for (const auto& [rule, parameter] : templates) {
      CycleSpec spec;
      spec.rule = rule;
      spec.parameter = parameter;
      spec.winding = w;
      out.push_back(spec);
    }
  return out;
}

SearchResult CycleSearch::minimize(
    const std::function<double(const CycleEvaluation&)>& objective) {
  SearchResult result;
  result.family = options_.family.describe();
  const std::size_t start_count = evaluations_;
  auto exhausted = [&] { return evaluations_ - start_count >= options_.budget; };
  auto score = [&](const CycleSpec& spec) {
    if (exhausted() && !cache_.contains(spec.describe())) {
      result.budget_exhausted = true;
      return std::numeric_limits<double>::infinity();
    }
    const auto& eval = evaluate(spec);
    if (!eval) return std::numeric_limits<double>::infinity();
    const double value = objective(*eval);
    if (value < result.best) {
      result.best = value;
      result.witness = spec;
      result.witness_eval = *eval;
    }
    return value;
  };

  std::vector<std::pair<double, CycleSpec>> ranked;
  for (const auto& spec : combos()) ranked.emplace_back(score(spec), spec);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const int n = instance_.dimension();
  const int m = instance_.count();
  const double bound = instance_.velocity_bound();
  const double quantum = options_.min_step;
  Rng rng = Rng::split(options_.seed, 0x5ea4c4);

  const int top = std::min<int>(options_.top_combos, static_cast<int>(ranked.size()));
  for (int c = 0; c < top && !result.budget_exhausted; ++c) {
    if (!std::isfinite(ranked[c].first)) break;
    for (auto family : {CycleSpec::Family::loop, CycleSpec::Family::feedback}) {
      const int slots = family == CycleSpec::Family::loop
                            ? options_.family.loop_blocks
                            : (options_.family.index_feedback ? m : 0);
      if (slots == 0) continue;
      for (int restart = 0; restart <= options_.restarts && !result.budget_exhausted; ++restart) {
        CycleSpec spec = ranked[c].second;
        spec.family = family;
        spec.velocities.assign(slots, Eigen::VectorXd::Zero(n));
        if (restart > 0)
          for (auto& v : spec.velocities)
            for (int d = 0; d < n; ++d)
              v(d) = std::round((rng.uniform() - 0.5) * bound / quantum) * quantum;
        double current = score(spec);
        for (double step = options_.initial_step; step >= options_.min_step && !result.budget_exhausted;) {
          bool improved = false;
          for (int s = 0; s < slots; ++s)
            for (int d = 0; d < n; ++d)
              for (double sign : {-1.0, 1.0}) {
                CycleSpec trial = spec;
                trial.velocities[s](d) =
                    std::clamp(spec.velocities[s](d) + sign * step, -bound, bound);
                if (trial.velocities[s](d) == spec.velocities[s](d)) continue;
                const double value = score(trial);
                if (value < current) {
                  current = value;
                  spec = std::move(trial);
                  improved = true;
                }
              }
          if (!improved) step *= 0.5;
        }
      }
    }
  }
  result.evaluations = evaluations_ - start_count;
  return result;
}

std::vector<std::pair<CycleSpec, CycleEvaluation>> CycleSearch::pool() const {
  std::vector<std::pair<CycleSpec, CycleEvaluation>> out;
  for (const auto& spec : specs_) {
    const auto& eval = cache_.at(spec.describe());
    if (eval) out.emplace_back(spec, *eval);
  }
  return out;
}

AdmissibilityResult admissibility_test(CycleSearch& search, const Eigen::VectorXd& b, double alpha,
                                       double tolerance) {
  const int m = static_cast<int>(b.size());
  auto objective = [&](const CycleEvaluation& eval) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) best = std::min(best, index_objective(eval, i, alpha, b).value);
    return best;
  };
  const SearchResult found = search.minimize(objective);
  AdmissibilityResult out;
  out.min_objective = found.best;
  out.witness = found.witness;
  out.budget_exhausted = found.budget_exhausted;
  out.evaluations = found.evaluations;
  out.tolerance = tolerance;
  out.family = found.family;
  out.violated = found.best < -tolerance;
  if (found.witness_eval) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double v = index_objective(*found.witness_eval, i, alpha, b).value;
      if (v < best) {
        best = v;
        out.index = i;
      }
    }
  }
  return out;
}

AdmissibilityResult admissibility_test(const SystemInstance& instance, const TorusPointd& y,
                                       const Eigen::VectorXd& b, double alpha,
                                       const SearchOptions& options, double tolerance) {
  CycleSearch search(instance, y.coordinates(), options);
  return admissibility_test(search, b, alpha, tolerance);
}

}  // namespace wkam
