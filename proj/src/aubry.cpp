#include "wkam/aubry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wkam/parallel.hpp"

namespace wkam {

const char* to_string(CriticalValueMethod method) {
  return method == CriticalValueMethod::oracle ? "oracle" : "discrete_subsolution";
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::member: return "member";
    case Verdict::non_member: return "non_member";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Golden-section minimization of a convex function on [lo, hi].
template <typename F>
double golden_min(F&& f, double lo, double hi) {
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// The discrete constraint system on a periodic grid.
class DiscreteSystem {
 public:
  DiscreteSystem(const HamiltonianSpec& h, const CouplingMatrixd& a, int points)
      : h_(h), a_(a), n_(h.dimension()), points_(points), h_step_(1.0 / points) {
    nodes_ = 1;
    for (int d = 0; d < n_; ++d) nodes_ *= points_;
    x_.resize(nodes_);
    for (int k = 0; k < nodes_; ++k) {
      Eigen::VectorXd x(n_);
      int rest = k;
      for (int d = n_ - 1; d >= 0; --d) {
        x(d) = static_cast<double>(rest % points_) / points_;
        rest /= points_;
      }
      x_[k] = x;
    }
    stride_.assign(n_, 1);
    for (int d = n_ - 2; d >= 0; --d) stride_[d] = stride_[d + 1] * points_;

    const int m = a_.size();
    p_hat_.assign(m, std::vector<Eigen::VectorXd>(nodes_));
    for (int i = 0; i < m; ++i) {
      const double radius = std::min(h_.momentum_limit(i), 64.0);
      for (int k = 0; k < nodes_; ++k) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n_);
        for (int round = 0; round < (n_ == 1 ? 1 : 12); ++round)
          for (int d = 0; d < n_; ++d)
            p(d) = golden_min(
                [&](double v) {
                  Eigen::VectorXd q = p;
                  q(d) = v;
                  return h_(i, x_[k], q);
                },
                -radius, radius);
        p_hat_[i][k] = p;
      }
    }
  }

  int nodes() const { return nodes_; }
  const Eigen::VectorXd& node(int k) const { return x_[k]; }

  int neighbour(int k, int d, int sign) const {
    const int coord = (k / stride_[d]) % points_;
    const int moved = (coord + sign + points_) % points_;
    return k + (moved - coord) * stride_[d];
  }

  // Numerical Hamiltonian at node k of component i with u_i(k) = value.
  double numerical_h(int i, int k, const Eigen::MatrixXd& u, double value) const {
    Eigen::VectorXd lo(n_), hi(n_);
    for (int d = 0; d < n_; ++d) {
      const double backward = (value - u(i, neighbour(k, d, -1))) / h_step_;
      const double forward = (u(i, neighbour(k, d, 1)) - value) / h_step_;
      lo(d) = std::max(backward, p_hat_[i][k](d));
      hi(d) = std::min(forward, p_hat_[i][k](d));
    }
    double best = -kInf;
    Eigen::VectorXd q(n_);
    for (int c = 0; c < (1 << n_); ++c) {
      for (int d = 0; d < n_; ++d) q(d) = (c >> d) & 1 ? hi(d) : lo(d);
      best = std::max(best, h_(i, x_[k], q));
    }
    return best;
  }

  // Constraint residual at (i, k) with u_i(k) replaced by value.
  double residual(int i, int k, const Eigen::MatrixXd& u, double value, double alpha) const {
    double coupling = a_(i, i) * value;
    for (int j = 0; j < a_.size(); ++j)
      if (j != i) coupling += a_(i, j) * u(j, k);
    return numerical_h(i, k, u, value) + coupling - alpha;
  }

  double lowest_h() const {
    double out = kInf;
    for (int i = 0; i < a_.size(); ++i)
      for (int k = 0; k < nodes_; ++k) out = std::min(out, h_(i, x_[k], p_hat_[i][k]));
    return out;
  }

  double highest_h_at_zero() const {
    double out = -kInf;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < a_.size(); ++i)
      for (int k = 0; k < nodes_; ++k) out = std::max(out, h_(i, x_[k], zero));
    return out;
  }

  struct Outcome {
    bool feasible = false;
    int sweeps = 0;
    Eigen::MatrixXd u;
  };

  Outcome test(double alpha, const CriticalValueOptions& options) const {
    const int m = a_.size();
    Outcome out;
    out.u = Eigen::MatrixXd::Zero(m, nodes_);
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
      double change = 0.0;
      const bool forward = sweep % 2 == 0;
      for (int step = 0; step < nodes_; ++step) {
        const int k = forward ? step : nodes_ - 1 - step;
        for (int i = 0; i < m; ++i) {
          const double current = out.u(i, k);
          if (residual(i, k, out.u, current, alpha) <= 0.0) continue;
          double gap = 1e-3;
          double lo = current - gap;
          while (residual(i, k, out.u, lo, alpha) > 0.0) {
            gap *= 2.0;
            lo = current - gap;
            if (gap > 1e12) throw NoConvergence("critical_value: node update diverges");
          }
          double hi = current;
          for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            (residual(i, k, out.u, mid, alpha) > 0.0 ? hi : lo) = mid;
          }
          out.u(i, k) = lo;
          change = std::max(change, current - lo);
        }
      }
      out.sweeps = sweep + 1;
      if (out.u.maxCoeff() < -options.feasibility_drop) {
        out.feasible = false;
        return out;
      }
      if (change < options.convergence) {
        out.feasible = true;
        return out;
      }
    }
    throw NoConvergence("critical_value: sweep cap reached at alpha = " + std::to_string(alpha));
  }

  double max_violation(const Eigen::MatrixXd& u, double alpha) const {
    double worst = -kInf;
    for (int i = 0; i < a_.size(); ++i)
      for (int k = 0; k < nodes_; ++k) worst = std::max(worst, residual(i, k, u, u(i, k), alpha));
    return worst;
  }

 private:
  const HamiltonianSpec& h_;
  const CouplingMatrixd& a_;
  int n_;
  int points_;
  double h_step_;
  int nodes_ = 0;
  std::vector<Eigen::VectorXd> x_;
  std::vector<int> stride_;
  std::vector<std::vector<Eigen::VectorXd>> p_hat_;
};

}  // namespace

CriticalValueResult critical_value(const HamiltonianSpec& h, const CouplingMatrixd& a,
                                   const CriticalValueOptions& options) {
  if (h.count() != a.size()) throw InvalidArgument("critical_value: size mismatch");
  const int points = options.x_points > 0 ? options.x_points : (h.dimension() == 1 ? 128 : 32);
  const DiscreteSystem system(h, a, points);

  CriticalValueResult result;
  result.x_points = points;
  result.tolerance = options.tolerance;

  double hi = system.highest_h_at_zero();
  double lo = system.lowest_h() - 1.0;
  auto feasible_hi = system.test(hi, options);
  result.sweeps += feasible_hi.sweeps;
  if (!feasible_hi.feasible) throw NoConvergence("critical_value: u = 0 rejected at max H(x, 0)");
  Eigen::MatrixXd certificate = feasible_hi.u;
  for (int expand = 0;; ++expand) {
    const auto probe = system.test(lo, options);
    result.sweeps += probe.sweeps;
    if (!probe.feasible) break;
    if (expand == 20) throw NoConvergence("critical_value: no infeasible alpha found");
    hi = lo;
    certificate = probe.u;
    lo -= 2.0 * (system.highest_h_at_zero() - lo) + 1.0;
  }
  while (hi - lo > options.tolerance) {
    const double mid = 0.5 * (lo + hi);
    const auto probe = system.test(mid, options);
    result.sweeps += probe.sweeps;
    if (probe.feasible) {
      hi = mid;
      certificate = probe.u;
    } else {
      lo = mid;
    }
  }
  result.beta = hi;
  result.lower = lo;
  result.certificate.dimension = h.dimension();
  result.certificate.points = points;
  result.certificate.values = certificate;
  result.max_violation = system.max_violation(certificate, hi);
  return result;
}

int closure_steps_for(double epsilon, double grid_step) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
  return std::max(1, static_cast<int>(std::ceil(epsilon / grid_step - 1e-9)));
}

SearchOptions search_options_for(const SearchOptions& base, double epsilon, double grid_step) {
  SearchOptions out = base;
  out.family.closure_steps = closure_steps_for(epsilon, grid_step);
  return out;
}

namespace {

InfimumEstimate from_search(const SearchResult& found) {
  InfimumEstimate out;
  out.raw = found.best;
  out.clamped = std::max(found.best, 0.0);
  out.witness = found.witness;
  out.evaluations = found.evaluations;
  out.budget_exhausted = found.budget_exhausted;
  return out;
}

}  // namespace

InfimumEstimate aubry_infimum(CycleSearch& search, double beta, int i, const Eigen::VectorXd& b) {
  if (i < 0 || i >= search.instance().count()) throw InvalidArgument("aubry_infimum: bad index");
  return from_search(search.minimize(
      [&](const CycleEvaluation& eval) { return index_objective(eval, i, beta, b).value; }));
}

InfimumEstimate aubry_infimum_characteristic(CycleSearch& search, double beta) {
  return from_search(search.minimize(
      [&](const CycleEvaluation& eval) { return characteristic_objective(eval, beta).value; }));
}

Eigen::VectorXd default_direction(int m) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
  d(0) = 1.0;
  d(1) = -1.0;
  return d / std::sqrt(2.0);
}

ScanResult admissible_scan(CycleSearch& search, double beta, const Eigen::VectorXd& direction,
                           const ScanOptions& options) {
  const int m = search.instance().count();
  if (direction.size() != m) throw InvalidArgument("admissible_scan: direction has wrong size");
  if (std::abs(direction.sum()) > 1e-12)
    throw InvalidArgument("admissible_scan: direction must be orthogonal to 1");
  if (options.steps < 2 || !(options.s_max > options.s_min))
    throw InvalidArgument("admissible_scan: bad range");

  ScanResult out;
  out.direction = direction;
  out.step = (options.s_max - options.s_min) / (options.steps - 1);
  for (int k = 0; k < options.steps; ++k) out.s.push_back(options.s_min + k * out.step);
  out.min_objective.assign(options.steps, kInf);
  out.surviving.assign(options.steps, true);

  std::set<int> searched;
  auto full_search = [&](int k) {
    if (!searched.insert(k).second) return false;
    const auto result = admissibility_test(search, out.s[k] * direction, beta, options.tolerance);
    out.evaluations += result.evaluations;
    out.budget_exhausted = out.budget_exhausted || result.budget_exhausted;
    return true;
  };

  // objective_i(s d) = C_i + s (row_i . d - d_i): one line per cycle and index.
  auto recompute = [&] {
    std::vector<std::pair<double, double>> lines;
    for (const auto& [spec, eval] : search.pool())
      for (int i = 0; i < m; ++i)
        lines.emplace_back(eval.cost(i) + beta * eval.duration(i),
                           eval.terminal.row(i).dot(direction) - direction(i));
    for (int k = 0; k < options.steps; ++k) {
      double best = kInf;
      for (const auto& [c, g] : lines) best = std::min(best, c + out.s[k] * g);
      out.min_objective[k] = best;
      out.surviving[k] = best >= -options.tolerance;
    }
  };

  int zero = 0;
  for (int k = 1; k < options.steps; ++k)
    if (std::abs(out.s[k]) < std::abs(out.s[zero])) zero = k;
  full_search(zero);
  full_search(0);
  full_search(options.steps - 1);
  recompute();

  for (int round = 0; round < options.refinements; ++round) {
    bool any = false;
    for (int k = 0; k < options.steps; ++k) {
      if (!out.surviving[k]) continue;
      const bool left_edge = k == 0 || !out.surviving[k - 1];
      const bool right_edge = k + 1 == options.steps || !out.surviving[k + 1];
      if (left_edge) {
        any |= full_search(k);
        if (k > 0) any |= full_search(k - 1);
      }
      if (right_edge) {
        any |= full_search(k);
        if (k + 1 < options.steps) any |= full_search(k + 1);
      }
    }
    if (!any) break;
    ++out.refinements;
    recompute();
  }

  for (int k = 0; k < options.steps;) {
    if (!out.surviving[k]) {
      ++k;
      continue;
    }
    int last = k;
    while (last + 1 < options.steps && out.surviving[last + 1]) ++last;
    out.intervals.emplace_back(out.s[k], out.s[last]);
    out.width = std::max(out.width, out.s[last] - out.s[k]);
    if (k == 0 || last + 1 == options.steps) out.truncated = true;
    k = last + 1;
  }
  return out;
}

AubryReport aubry_verdict(const SystemInstance& instance, const Eigen::VectorXd& y, double beta,
                          const VerdictOptions& options) {
  const int m = instance.count();
  AubryReport report;
  report.y = y;
  report.beta = beta;
  report.epsilon = options.epsilon > 0.0 ? options.epsilon : 4.0 * instance.grid_step();
  report.member_tol = options.member_tol;
  report.interior_tol = options.interior_tol;

  CycleSearch search(instance, y,
                     search_options_for(options.search, report.epsilon, instance.grid_step()));
  report.family = search.options().family.describe();
  report.budget = search.options().budget;

  report.characteristic = aubry_infimum_characteristic(search, beta);
  report.scan = admissible_scan(search, beta, default_direction(m), options.scan);
  report.line_tol = options.line_tol > 0.0 ? options.line_tol : 2.0 * report.scan.step;

  double center = 0.0;
  double widest = -1.0;
  for (const auto& [lo, hi] : report.scan.intervals)
    if (hi - lo > widest) {
      widest = hi - lo;
      center = 0.5 * (lo + hi);
    }
  report.b = center * report.scan.direction;
  for (int i = 0; i < m; ++i) report.per_index.push_back(aubry_infimum(search, beta, i, report.b));

  bool gap = false;
  for (const auto& e : report.per_index) gap = gap || e.raw > options.member_tol;

  if (report.characteristic.raw <= options.member_tol) {
    report.verdict = Verdict::member;
    report.reason = "characteristic infimum within member_tol";
    report.dichotomy_consistent = report.scan.width <= report.line_tol;
  } else if (gap && report.scan.width > options.interior_tol) {
    report.verdict = Verdict::non_member;
    report.reason = "positive per-index gap and admissible interval wider than interior_tol";
    report.dichotomy_consistent = report.scan.width >= options.interior_tol;
  } else {
    report.verdict = Verdict::inconclusive;
    report.reason = gap ? "admissible interval not wider than interior_tol"
                        : "no per-index gap above member_tol";
    report.dichotomy_consistent = false;
  }
  return report;
}

Lemma55Report lemma55_equivalence(CycleSearch& search, double beta, const Eigen::VectorXd& b,
                                  double tolerance) {
  const SystemInstance& instance = search.instance();
  const int m = instance.count();
  Lemma55Report report;
  for (int i = 0; i < m; ++i) report.per_index.push_back(aubry_infimum(search, beta, i, b));
  report.characteristic = aubry_infimum_characteristic(search, beta);

  report.per_index_small = true;
  report.max_per_index = -kInf;
  for (const auto& e : report.per_index) {
    report.per_index_small = report.per_index_small && e.raw <= tolerance;
    report.max_per_index = std::max(report.max_per_index, e.raw);
  }
  report.characteristic_small = report.characteristic.raw <= tolerance;
  report.agree = report.per_index_small == report.characteristic_small;

  std::vector<StoppingRulePtr> rules_by_index;
  std::vector<VelocityPolicyPtr> policies_by_index;
  std::vector<int> closure;
  std::vector<Eigen::VectorXd> targets;
  int bound = 0;
  for (int i = 0; i < m; ++i) {
    if (!report.per_index[i].witness) throw InvalidArgument("lemma55: missing witness");
    const AdaptedCycle cycle = search.build(*report.per_index[i].witness);
    rules_by_index.push_back(cycle.rule_ptr());
    policies_by_index.push_back(cycle.policy_ptr());
    closure.push_back(cycle.closure_steps(i));
    targets.push_back(cycle.target(i));
    bound = std::max(bound, cycle.bound_steps());
  }
  const AdaptedCycle glued(instance.grid_step(), bound, rules::per_index(rules_by_index),
                           policies::per_index(policies_by_index), closure, targets);
  report.glued_description = glued.rule().describe() + " / " + glued.policy().describe();

  const CycleEvaluation eval =
      evaluate_cycle_dp(instance, search.base_point(), glued, search.options().history_cap);
  Eigen::MatrixXd t = eval.terminal;
  for (Eigen::Index i = 0; i < t.rows(); ++i) t.row(i) /= t.row(i).sum();
  const auto a = characteristic_vector(StochasticMatrixd(t)).vector;
  report.glued_characteristic = characteristic_objective(eval, beta).value;
  report.glued_combination = 0.0;
  for (int i = 0; i < m; ++i) {
    const double objective = index_objective(eval, i, beta, b).value;
    report.glued_combination += a(i) * objective;
    report.witness_residual =
        std::max(report.witness_residual, std::abs(objective - report.per_index[i].raw));
  }
  report.identity_residual = std::abs(report.glued_characteristic - report.glued_combination);
  report.glued_bound = report.glued_characteristic <= report.max_per_index + 1e-9;
  return report;
}

std::vector<InfimumEstimate> infimum_curve(const SystemInstance& instance,
                                           const std::vector<Eigen::VectorXd>& points,
                                           double beta, const SearchOptions& options, int jobs) {
  std::vector<InfimumEstimate> out(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t k) {
    CycleSearch search(instance, points[k], options);
    out[k] = aubry_infimum_characteristic(search, beta);
  });
  return out;
}

}  // namespace wkam
