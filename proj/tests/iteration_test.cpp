#include <gtest/gtest.h>

#include "support.hpp"

namespace wkam {
namespace {

using test::point;
using test::symmetric2;
using test::twowell;

constexpr double kStep = 1.0 / 16.0;

std::shared_ptr<const AdaptedCycle> deterministic_seed(int steps, int closure) {
  return std::make_shared<const AdaptedCycle>(kStep, steps, rules::deterministic(steps),
                                              policies::zero(1), std::vector<int>{closure},
                                              std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(1)});
}

std::shared_ptr<const AdaptedCycle> winding_seed() {
  return std::make_shared<const AdaptedCycle>(
      kStep, 8, rules::switch_count(1), policies::index_feedback({point(1.0), point(-0.5)}),
      std::vector<int>{4}, std::vector<Eigen::VectorXd>{point(1.0)});
}

TEST(Iterate, DeterministicSeedMultipliesTheTime) {
  const auto a = validate_coupling(symmetric2());
  const auto seed = deterministic_seed(3, 2);
  const double t = 5 * kStep;
  PathSampler sampler(a, 4);
  for (int j : {0, 1, 4, 9}) {
    const auto it = iterate(seed, j, 20.0);
    EXPECT_DOUBLE_EQ(it.bound(), (j + 1) * t);
    for (int s = 0; s < 50; ++s) {
      const auto path = sampler.sample_from(s % 2, 20.0);
      EXPECT_EQ(it.stopping_time(path), (j + 1) * t);
      EXPECT_EQ(it.recursive_time(path), (j + 1) * t);
    }
  }
}

TEST(Iterate, RecursionAndPhasesAgree) {
  const auto a = validate_coupling(symmetric2());
  const auto it = iterate(winding_seed(), 5, 20.0);
  const auto check = verify_iteration(a, it, 2000, 11);
  EXPECT_EQ(check.samples, 2000u);
  EXPECT_LE(check.lemma_residual, 1e-12);
  EXPECT_LE(check.cycle_residual, 1e-12);
  EXPECT_EQ(check.flow_mismatches, 0u);
  EXPECT_GE(check.min_growth, 4 * kStep);
}

TEST(Iterate, ControlReachesTheAccumulatedTarget) {
  const auto a = validate_coupling(symmetric2());
  const auto it = iterate(winding_seed(), 3, 20.0);
  PathSampler sampler(a, 12);
  for (int s = 0; s < 300; ++s) {
    const auto path = sampler.sample(ProbabilityVectord::uniform(2), 20.0);
    const double tau = it.stopping_time(path);
    EXPECT_EQ(it.target(path)(0), 4.0);
    EXPECT_NEAR(integrate_control(it.control(path), tau, 1).lift(0), 4.0, 1e-12);
  }
}

TEST(Iterate, HorizonExceeded) {
  const auto seed = deterministic_seed(8, 4);
  EXPECT_NO_THROW(iterate(seed, 3, 3.0));
  EXPECT_THROW(iterate(seed, 4, 3.0), HorizonExceeded);
}

// Resting at the bottom of the well in D_1 with b = (0, 0.5): the action is
// zero at beta and only the boundary terms remain.
struct DivergenceSetup {
  std::shared_ptr<const AdaptedCycle> seed = resting_seed(2, 1, 1, kStep, 0, 4);
  Eigen::Vector2d b{0.0, 0.5};
  // Transition of the seed: e^{-4DA} from index 1, identity from index 0.
  Eigen::Matrix2d transition() const {
    const double e = std::exp(-2.0 * 4 * kStep);
    Eigen::Matrix2d p;
    p << 1, 0, 0.5 * (1 - e), 0.5 * (1 + e);
    return p;
  }
};

TEST(Divergence, MatchesTheMarkovChainFormula) {
  const DivergenceSetup s;
  const auto report =
      divergence_experiment(twowell(), point(0.5), s.b, 1.0, *s.seed, 1, 40, kStep);
  const Eigen::Matrix2d p = s.transition();
  const double mu = s.b(1) * p(1, 0);
  EXPECT_NEAR(report.mu, mu, 1e-12);
  EXPECT_NEAR(report.limit, -mu / (1.0 - p(1, 1)), 1e-12);
  EXPECT_NEAR(report.limit, -0.5, 1e-12);
  Eigen::Matrix2d power = p;
  for (const auto& row : report.rows) {
    const double exact = -s.b(1) + (power * s.b)(1);
    EXPECT_NEAR(row.value, exact, 1e-12) << row.j;
    EXPECT_GT(row.value, report.limit);
    power = power * p;
  }
  EXPECT_NEAR(report.rows.front().value, -mu, 1e-12);
}

TEST(Divergence, BoundFailsOnceTheSequenceSaturates) {
  // I_j stays above -mu / (1 - p) while -mu (1 + rho j) decreases without
  // bound, so the linear bound holds only for small j.
  const DivergenceSetup s;
  const auto report =
      divergence_experiment(twowell(), point(0.5), s.b, 1.0, *s.seed, 1, 100, kStep);
  EXPECT_TRUE(report.rows.front().holds);
  for (int j = 0; j <= 10; ++j) EXPECT_TRUE(report.rows[j].holds) << j;
  EXPECT_FALSE(report.holds());
  EXPECT_GT(report.rho, 0.0);
}

TEST(Divergence, InvariantUnderShiftingB) {
  const DivergenceSetup s;
  const auto r = divergence_experiment(twowell(), point(0.5), s.b, 1.0, *s.seed, 1, 20, kStep);
  const auto t = divergence_experiment(twowell(), point(0.5),
                                       Eigen::Vector2d(s.b.array() + 7.0), 1.0, *s.seed, 1, 20,
                                       kStep);
  for (std::size_t k = 0; k < r.rows.size(); ++k)
    EXPECT_NEAR(r.rows[k].value, t.rows[k].value, 1e-12);
}

TEST(Divergence, RejectsNonNegativeSeed) {
  const DivergenceSetup s;
  EXPECT_THROW(divergence_experiment(twowell(), point(0.5), Eigen::Vector2d::Zero(), 1.0, *s.seed,
                                     1, 5, kStep),
               SeedNotNegative);
  EXPECT_THROW(divergence_experiment(twowell(), point(0.5), s.b, 1.0, *s.seed, 1, 5, 8 * kStep),
               InvalidArgument);
}

TEST(Divergence, MonteCarloAgrees) {
  const DivergenceSetup s;
  const auto exact = divergence_experiment(twowell(), point(0.5), s.b, 1.0, *s.seed, 1, 6, kStep);
  const auto mc = divergence_monte_carlo(twowell(), point(0.5), s.b, 1.0, s.seed, 1, 6, 20000, 3);
  ASSERT_EQ(mc.size(), 7u);
  for (int j = 0; j <= 6; ++j)
    EXPECT_NEAR(mc[j].value, exact.rows[j].value, 4.0 * mc[j].std_error + 1e-9) << j;
}

}  // namespace
}  // namespace wkam
