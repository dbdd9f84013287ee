#include <gtest/gtest.h>

#include "support.hpp"

namespace wkam {
namespace {

using test::cosine_well;
using test::point;
using test::symmetric2;
using test::twowell;

constexpr double kStep = 1.0 / 16.0;

Eigen::MatrixXd asymmetric2() {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -2, 2;
  return a;
}

HamiltonianComponent flat(double constant) {
  HamiltonianComponent c;
  c.potential.constant = constant;
  return c;
}

TEST(CriticalValue, TwoWell) {
  // Identical H_i = p^2/2 - cos(2 pi x): beta = max_x cos(2 pi x) = 1.
  const auto r = critical_value(twowell().hamiltonian(), twowell().coupling());
  EXPECT_NEAR(r.beta, 1.0, 2e-2);
  EXPECT_LE(r.lower, r.beta);
  EXPECT_LE(r.beta - r.lower, 1e-3 + 1e-12);
  EXPECT_LE(r.max_violation, 1e-9);
  EXPECT_EQ(r.method, CriticalValueMethod::discrete_subsolution);
}

TEST(CriticalValue, FlatHamiltoniansGiveThePerronAverage) {
  // H_i = p^2/2 - c_i: constant u solves c-terms + A u = alpha exactly when
  // alpha = a.(-c), a the left null vector of A.
  const auto a = validate_coupling(asymmetric2());
  const HamiltonianSpec h(1, {flat(0.0), flat(-1.0)});
  const auto r = critical_value(h, a);
  EXPECT_NEAR(r.beta, 1.0 / 3.0, 2e-3);
  const auto s = critical_value(h, validate_coupling(symmetric2()));
  EXPECT_NEAR(s.beta, 0.5, 2e-3);
}

TEST(CriticalValue, ShiftsWithAConstant) {
  const HamiltonianSpec shifted(1, {cosine_well(1.0, 0.3), cosine_well(1.0, 0.3)});
  const auto r = critical_value(shifted, twowell().coupling());
  const auto base = critical_value(twowell().hamiltonian(), twowell().coupling());
  EXPECT_NEAR(r.beta, base.beta - 0.3, 2e-3);
}

TEST(CriticalValue, MonotoneInTheHamiltonian) {
  const auto a = validate_coupling(asymmetric2());
  const HamiltonianSpec low(1, {cosine_well(1.0, 0.0), cosine_well(1.0, 0.2)});
  const HamiltonianSpec high(1, {cosine_well(1.0, -0.1), cosine_well(1.0, 0.0)});
  const double bl = critical_value(low, a).beta;
  const double bh = critical_value(high, a).beta;
  EXPECT_LE(bl, bh + 1e-3);
  EXPECT_GE(bl, 1.0 - 0.2 - 2e-2);
  EXPECT_LE(bh, 1.0 + 0.1 + 2e-2);
}

TEST(CriticalValue, RelabelingInvariant) {
  const HamiltonianSpec h(1, {cosine_well(1.0, 0.0), cosine_well(0.5, 0.2)});
  const HamiltonianSpec swapped(1, {cosine_well(0.5, 0.2), cosine_well(1.0, 0.0)});
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  const double b1 = critical_value(h, validate_coupling(asymmetric2())).beta;
  const double b2 = critical_value(swapped, validate_coupling(p * asymmetric2() * p)).beta;
  EXPECT_NEAR(b1, b2, 2e-3);
}

TEST(Closure, StepsForEpsilon) {
  EXPECT_EQ(closure_steps_for(4 * kStep, kStep), 4);
  EXPECT_EQ(closure_steps_for(4.5 * kStep, kStep), 5);
  EXPECT_THROW(closure_steps_for(0.0, kStep), InvalidArgument);
  EXPECT_EQ(search_options_for({}, 8 * kStep, kStep).family.closure_steps, 8);
}

VerdictOptions fast_options() {
  VerdictOptions v;
  v.search.budget = 1500;
  return v;
}

TEST(Verdict, WellBottomIsInTheAubrySet) {
  const auto r = aubry_verdict(twowell(), point(0.5), 1.0, fast_options());
  EXPECT_EQ(r.verdict, Verdict::member) << r.reason;
  EXPECT_LE(r.characteristic.clamped, 1e-2);
  EXPECT_LE(r.scan.width, 2e-2);
  EXPECT_TRUE(r.dichotomy_consistent);
  EXPECT_DOUBLE_EQ(r.epsilon, 4 * kStep);
}

TEST(Verdict, WellTopIsNot) {
  const auto r = aubry_verdict(twowell(), point(0.0), 1.0, fast_options());
  EXPECT_EQ(r.verdict, Verdict::non_member) << r.reason;
  EXPECT_GT(r.scan.width, 0.1);
  for (const auto& e : r.per_index) EXPECT_GT(e.clamped, 1e-2);
  EXPECT_TRUE(r.dichotomy_consistent);
}

TEST(Verdict, RelabelingInvariant) {
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  const SystemInstance a(validate_coupling(asymmetric2()),
                         HamiltonianSpec(1, {cosine_well(1.0, 0.0), cosine_well(1.0, 0.1)}), 6.0,
                         kStep, FenchelGrids::defaults(1));
  const SystemInstance b(validate_coupling(p * asymmetric2() * p),
                         HamiltonianSpec(1, {cosine_well(1.0, 0.1), cosine_well(1.0, 0.0)}), 6.0,
                         kStep, FenchelGrids::defaults(1));
  const auto options = search_options_for({}, 4 * kStep, kStep);
  for (double y : {0.0, 0.5}) {
    CycleSearch sa(a, point(y), options), sb(b, point(y), options);
    EXPECT_NEAR(aubry_infimum_characteristic(sa, 0.9).raw,
                aubry_infimum_characteristic(sb, 0.9).raw, 1e-9)
        << y;
  }
}

TEST(Scan, DirectionAndGrid) {
  const auto d = default_direction(3);
  EXPECT_NEAR(d.norm(), 1.0, 1e-15);
  EXPECT_NEAR(d.sum(), 0.0, 1e-15);
  CycleSearch search(twowell(), point(0.25), search_options_for({}, 4 * kStep, kStep));
  const auto r = admissible_scan(search, 1.0, default_direction(2));
  EXPECT_EQ(r.s.size(), r.min_objective.size());
  EXPECT_NEAR(r.step, 0.005, 1e-15);
  for (const auto& [lo, hi] : r.intervals) {
    EXPECT_LE(lo, hi);
    EXPECT_LE(hi - lo, r.width + 1e-15);
  }
}

TEST(Equivalence, EquivalenceAtTheWellBottom) {
  CycleSearch search(twowell(), point(0.5), search_options_for({}, 4 * kStep, kStep));
  const auto r = lemma55_equivalence(search, 1.0, Eigen::Vector2d::Zero(), 1e-2);
  EXPECT_TRUE(r.per_index_small);
  EXPECT_TRUE(r.characteristic_small);
  EXPECT_TRUE(r.agree);
  EXPECT_LE(r.identity_residual, 1e-9);
  EXPECT_LE(r.witness_residual, 1e-9);
  EXPECT_TRUE(r.glued_bound);
}

TEST(Equivalence, GluedIdentityAwayFromTheAubrySet) {
  CycleSearch search(twowell(), point(0.0), search_options_for({}, 4 * kStep, kStep));
  const auto r = lemma55_equivalence(search, 1.0, Eigen::Vector2d::Zero(), 1e-2);
  EXPECT_FALSE(r.characteristic_small);
  EXPECT_TRUE(r.agree);
  EXPECT_LE(r.identity_residual, 1e-9);
  EXPECT_TRUE(r.glued_bound);
}

TEST(InfimumCurve, MinimizedAtTheWellBottom) {
  std::vector<Eigen::VectorXd> points;
  for (int k = 0; k < 8; ++k) points.push_back(point(k / 8.0));
  SearchOptions options = search_options_for({}, 4 * kStep, kStep);
  options.budget = 600;
  const auto serial = infimum_curve(twowell(), points, 1.0, options, 1);
  const auto parallel = infimum_curve(twowell(), points, 1.0, options, 4);
  std::size_t argmin = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    EXPECT_EQ(serial[k].raw, parallel[k].raw);
    if (serial[k].raw < serial[argmin].raw) argmin = k;
  }
  EXPECT_EQ(argmin, 4u);
  EXPECT_NEAR(serial[4].clamped, 0.0, 1e-9);
}

}  // namespace
}  // namespace wkam
