#include <gtest/gtest.h>

#include "support.hpp"

namespace wkam {
namespace {

using test::point;
using test::symmetric2;
using test::twowell;

constexpr double kStep = 1.0 / 16.0;

// e^{-At} for A = [[1, -1], [-1, 1]].
Eigen::Matrix2d symmetric_semigroup(double t) {
  const double e = std::exp(-2.0 * t);
  Eigen::Matrix2d p;
  p << 1 + e, 1 - e, 1 - e, 1 + e;
  return 0.5 * p;
}

// int_0^t e^{-As} ds for the same A.
Eigen::Matrix2d symmetric_occupation(double t) {
  const double d = t / 2.0 + (1.0 - std::exp(-2.0 * t)) / 4.0;
  const double o = t / 2.0 - (1.0 - std::exp(-2.0 * t)) / 4.0;
  Eigen::Matrix2d q;
  q << d, o, o, d;
  return q;
}

AdaptedCycle resting(int steps, int closure = 4) {
  return AdaptedCycle(kStep, steps, rules::deterministic(steps), policies::zero(1), {closure},
                      {Eigen::VectorXd::Zero(1)});
}

AdaptedCycle winding_loop() {
  std::vector<Eigen::VectorXd> blocks{Eigen::VectorXd::Constant(1, 1.5),
                                      Eigen::VectorXd::Constant(1, -0.5)};
  return AdaptedCycle(kStep, 16, rules::first_hitting(1), policies::loop(blocks, 2), {4},
                      {Eigen::VectorXd::Ones(1)});
}

SystemInstance constant_instance(double c0, double c1) {
  HamiltonianComponent h0, h1;
  h0.potential.constant = c0;
  h1.potential.constant = c1;
  return SystemInstance(validate_coupling(symmetric2()), HamiltonianSpec(1, {h0, h1}), 2.0, kStep,
                        FenchelGrids::defaults(1));
}

TEST(Instance, StepMatricesMatchClosedForm) {
  const auto& inst = twowell();
  EXPECT_LE((inst.step_transition() - symmetric_semigroup(kStep)).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::Matrix2d occ = inst.step_occupation(0) + inst.step_occupation(1);
  EXPECT_LE((occ.rowwise().sum() - Eigen::Vector2d::Constant(kStep)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(inst.step_occupation(0).row(0).sum(), symmetric_occupation(kStep)(0, 0), 1e-14);
  const Eigen::Matrix2d m1 = inst.step_moment(0, 1) + inst.step_moment(1, 1);
  const Eigen::Matrix2d m2 = inst.step_moment(0, 2) + inst.step_moment(1, 2);
  EXPECT_LE((m1 - kStep / 2.0 * symmetric_semigroup(kStep)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((m2 - kStep / 3.0 * symmetric_semigroup(kStep)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(inst.running_cost(0, point(0.0), point(7.0)), SentinelVelocity);
}

TEST(Cycle, ClosesOnEveryPath) {
  const auto a = validate_coupling(symmetric2());
  const auto cycle = winding_loop();
  EXPECT_TRUE(cycle.is_cycle());
  PathSampler sampler(a, 3);
  for (int s = 0; s < 500; ++s) {
    const auto path = sampler.sample(ProbabilityVectord::uniform(2), 4.0);
    const auto control = cycle.control(path);
    const double tau = cycle.total_time().value(path);
    double length = 0.0;
    for (const auto& piece : control) {
      length += piece.duration;
      ASSERT_LE(std::abs(piece.velocity(0)), 6.0);
    }
    EXPECT_DOUBLE_EQ(length, tau);
    EXPECT_NEAR(integrate_control(control, tau, 1).lift(0), 1.0, 1e-13);
  }
}

TEST(Action, ZeroControlAtTheMinimumOfLIsZeroAtBeta) {
  // L(1/2, 0) = -1 = -beta, so resting there costs nothing.
  for (int steps : {0, 3, 16}) {
    const auto r = action(twowell(), TorusPointd(point(0.5)), ProbabilityVectord::uniform(2),
                          resting(steps), 1.0);
    EXPECT_NEAR(r.value, 0.0, 1e-12);
    EXPECT_EQ(r.method, EvaluationMethod::exact_dp);
  }
}

TEST(Action, AffineInAlpha) {
  const auto cycle = winding_loop();
  const auto eval = evaluate_cycle(twowell(), point(0.2), cycle);
  const ProbabilityVectord a(Eigen::RowVector2d(0.3, 0.7));
  const double duration = a.vector() * eval.duration;
  const double base = action_value(eval, a, 0.0).value;
  for (double alpha : {-2.0, 0.5, 3.0})
    EXPECT_NEAR(action_value(eval, a, alpha).value, base + alpha * duration, 1e-9);
}

TEST(Action, OccupationIdentityWithConstantLagrangians) {
  // L_i(x, 0) = c_i, so E_i int L = sum_l c_l int_0^T (e^{-As})_{il} ds.
  const double c0 = 0.7, c1 = -0.4;
  const auto inst = constant_instance(c0, c1);
  for (int steps : {1, 5, 12}) {
    const auto cycle = resting(steps, 4);
    const double t = (steps + 4) * kStep;
    const auto eval = evaluate_cycle(inst, point(0.3), cycle);
    const Eigen::Vector2d expected = symmetric_occupation(t) * Eigen::Vector2d(c0, c1);
    EXPECT_LE((eval.cost - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((eval.duration - Eigen::Vector2d::Constant(t)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((eval.terminal - symmetric_semigroup(t)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Action, MonteCarloAgreesWithDp) {
  const auto cycle = winding_loop();
  const auto dp = evaluate_cycle_dp(twowell(), point(0.3), cycle, 200000);
  const auto mc = evaluate_cycle_monte_carlo(twowell(), point(0.3), cycle, 40000, 9);
  EXPECT_EQ(mc.method, EvaluationMethod::monte_carlo);
  for (int i = 0; i < 2; ++i) {
    const double n = static_cast<double>(mc.samples);
    const double cost_se = std::sqrt(mc.covariance[i](0, 0) / n);
    const double dur_se = std::sqrt(mc.covariance[i](1, 1) / n);
    EXPECT_NEAR(mc.cost(i), dp.cost(i), 4.0 * cost_se + 1e-3) << i;
    EXPECT_NEAR(mc.duration(i), dp.duration(i), 4.0 * dur_se + 1e-9) << i;
    EXPECT_NEAR(mc.terminal(i, 0), dp.terminal(i, 0), 0.02) << i;
  }
}

TEST(Action, PathActionOfAConstantPath) {
  // Staying in index 0 at x = 1/2: int_0^1 L_0(1/2, 0) ds = -1.
  const JumpPath path(2.0, 0);
  const std::vector<ControlPiece<double>> control{{Eigen::VectorXd::Zero(1), 1.0}};
  EXPECT_NEAR(path_action(twowell(), point(0.5), control, path), -1.0, 1e-12);
  // Unit speed around the circle: int_0^1 (1/2 + cos(2 pi (x + s))) ds = 1/2.
  const std::vector<ControlPiece<double>> around{{Eigen::VectorXd::Constant(1, -1.0), 1.0}};
  EXPECT_NEAR(path_action(twowell(), point(0.1), around, path), 0.5, 5e-3);
}

GridFunction constant_function(double u0, double u1, int points = 16) {
  GridFunction u;
  u.points = points;
  u.values = Eigen::MatrixXd(2, points);
  u.values.row(0).setConstant(u0);
  u.values.row(1).setConstant(u1);
  return u;
}

std::vector<BatteryElement> battery() {
  std::vector<BatteryElement> out;
  const auto loop = std::make_shared<const AdaptedCycle>(winding_loop());
  const auto rest = std::make_shared<const AdaptedCycle>(resting(8));
  for (double x : {0.0, 0.25, 0.5}) {
    out.push_back({point(x), point(x), ProbabilityVectord::uniform(2), rest});
    out.push_back({point(x), point(x), ProbabilityVectord::unit(2, 1), loop});
  }
  return out;
}

TEST(Subsolution, ZeroIsASubsolutionAtBeta) {
  // L >= -1 everywhere, so u = 0 passes every test at alpha = 1.
  const auto r = subsolution_test(twowell(), constant_function(0, 0), 1.0, battery());
  EXPECT_GE(r.min_slack, -1e-9);
  // Below beta, resting at x = 1/2 fails.
  const auto low = subsolution_test(twowell(), constant_function(0, 0), 0.5, battery());
  EXPECT_LT(low.min_slack, -1e-2);
  EXPECT_EQ(low.argmin, 4u);
}

TEST(Subsolution, InvariantUnderAddingConstants) {
  const auto u = constant_function(0.1, -0.2);
  const auto shifted = constant_function(0.1 + 3.0, -0.2 + 3.0);
  const auto r = subsolution_test(twowell(), u, 0.9, battery());
  const auto s = subsolution_test(twowell(), shifted, 0.9, battery());
  for (std::size_t k = 0; k < r.slacks.size(); ++k) EXPECT_NEAR(r.slacks[k], s.slacks[k], 1e-12);
  const auto c = characteristic_subsolution_test(twowell(), u, 0.9, battery());
  const auto cs = characteristic_subsolution_test(twowell(), shifted, 0.9, battery());
  for (std::size_t k = 0; k < c.slacks.size(); ++k) EXPECT_NEAR(c.slacks[k], cs.slacks[k], 1e-12);
}

TEST(Admissibility, AtTheWellBottom) {
  SearchOptions options;
  options.budget = 400;
  const auto y = TorusPointd(point(0.5));
  const auto zero = admissibility_test(twowell(), y, Eigen::Vector2d(0, 0), 1.0, options);
  EXPECT_FALSE(zero.violated);
  // Resting from index 1 gives -0.2 P_1(w(tau) = 0) < 0.
  const auto tilted = admissibility_test(twowell(), y, Eigen::Vector2d(0, 0.2), 1.0, options);
  EXPECT_TRUE(tilted.violated);
  EXPECT_EQ(tilted.index, 1);
  EXPECT_TRUE(tilted.witness.has_value());
}

TEST(Search, CachesAndRespectsBudget) {
  SearchOptions options;
  options.budget = 50;
  CycleSearch search(twowell(), point(0.2), options);
  const auto r = search.minimize([](const CycleEvaluation& e) { return e.cost(0); });
  EXPECT_LE(r.evaluations, 50u);
  EXPECT_TRUE(r.budget_exhausted);
  const auto again = search.minimize([](const CycleEvaluation& e) { return e.cost(0); });
  EXPECT_EQ(again.best, r.best);
}

}  // namespace
}  // namespace wkam
