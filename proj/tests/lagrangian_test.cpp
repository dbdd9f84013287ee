#include <gtest/gtest.h>

#include "support.hpp"

namespace wkam {
namespace {

using test::cosine_well;

HamiltonianSpec free_particle() {
  HamiltonianComponent c;
  return HamiltonianSpec(1, {c});
}

HamiltonianComponent table_component(double (*h)(double), double p_lo, double p_hi) {
  HamiltonianComponent c;
  c.kind = HamiltonianKind::table;
  c.table.x_points = 8;
  c.table.p_min = p_lo;
  c.table.p_max = p_hi;
  c.table.p_points = 161;
  for (int ix = 0; ix < c.table.x_points; ++ix)
    for (int ip = 0; ip < c.table.p_points; ++ip)
      c.table.values.push_back(h(p_lo + ip * (p_hi - p_lo) / (c.table.p_points - 1)));
  return c;
}

TEST(Torus, WrapsIntoUnitCube) {
  const TorusPointd p(Eigen::Vector2d(1.25, -0.25));
  EXPECT_DOUBLE_EQ(p(0), 0.25);
  EXPECT_DOUBLE_EQ(p(1), 0.75);
  EXPECT_EQ(TorusPointd(Eigen::VectorXd::Constant(1, -1e-18))(0), 0.0);
}

TEST(Integrate, Examples) {
  using Piece = ControlPiece<double>;
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(1, 0.3);
  const auto zero = integrate_control<double>({{Eigen::VectorXd::Zero(1), 1.0}}, 1.0, 1, start);
  EXPECT_EQ(zero.lift(0), 0.0);
  EXPECT_DOUBLE_EQ(zero.point(0), 0.3);
  const auto wind = integrate_control<double>({{Eigen::VectorXd::Ones(1), 1.0}}, 1.0, 1, start);
  EXPECT_EQ(wind.lift(0), 1.0);
  EXPECT_NEAR(wind.point(0), 0.3, 1e-15);
  const std::vector<Piece> loop{{Eigen::VectorXd::Constant(1, 2.0), 0.25},
                                {Eigen::VectorXd::Constant(1, -1.0), 0.5}};
  EXPECT_EQ(integrate_control(loop, 0.75, 1).lift(0), 0.0);
  EXPECT_EQ(integrate_control(loop, 0.25, 1).lift(0), 0.5);
  EXPECT_THROW(integrate_control(loop, 1.0, 1), InvalidArgument);
}

TEST(Integrate, AdditiveOverConcatenation) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ControlPiece<double>> first, second;
    double t1 = 0.0, t2 = 0.0;
    for (int k = 0; k < 7; ++k) {
      const double d = std::ldexp(1.0 + std::floor(rng.uniform() * 8), -4);
      first.push_back({Eigen::Vector2d(rng.uniform() * 6 - 3, rng.uniform() * 6 - 3), d});
      t1 += d;
    }
    for (int k = 0; k < 5; ++k) {
      const double d = std::ldexp(1.0 + std::floor(rng.uniform() * 8), -4);
      second.push_back({Eigen::Vector2d(rng.uniform() * 6 - 3, rng.uniform() * 6 - 3), d});
      t2 += d;
    }
    auto both = first;
    both.insert(both.end(), second.begin(), second.end());
    const Eigen::Vector2d sum =
        integrate_control(first, t1, 2).lift + integrate_control(second, t2, 2).lift;
    EXPECT_LE((integrate_control(both, t1 + t2, 2).lift - sum).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Potential, CosineTerms) {
  const auto c = cosine_well(1.0, 0.5);
  EXPECT_NEAR(c.potential(Eigen::VectorXd::Constant(1, 0.0)), 1.5, 1e-15);
  EXPECT_NEAR(c.potential(Eigen::VectorXd::Constant(1, 0.5)), -0.5, 1e-15);
}

TEST(Fenchel, QuadraticSelfDual) {
  const auto table = fenchel_transform(free_particle(), 4.0);
  const double hp = 2.0 * table.momentum_radius(0) / table.grids().p_intervals;
  EXPECT_NEAR(table(0, 0.3, 1.0), 0.5, hp * hp);
  for (int k = 0; k < table.q_points(); ++k) {
    const double q = table.q_node(k);
    EXPECT_NEAR(table.node(0, {0}, {k}), 0.5 * q * q, hp * hp);
  }
}

TEST(Fenchel, CompleteTheSquare) {
  // H = p^2/2 - V  =>  L = q^2/2 + V.
  const HamiltonianSpec h(1, {cosine_well()});
  const auto table = fenchel_transform(h, 6.0);
  const double hp = 2.0 * table.momentum_radius(0) / table.grids().p_intervals;
  for (int ix = 0; ix < table.grids().x_points; ix += 5)
    for (int k = 0; k < table.q_points(); k += 3) {
      const double x = table.x_node(ix), q = table.q_node(k);
      const double v = std::cos(2.0 * M_PI * x);
      EXPECT_NEAR(table.node(0, {ix}, {k}), 0.5 * q * q + v, hp * hp);
    }
  EXPECT_NEAR(table(0, 0.5, 0.0), -1.0, 1e-12);
}

TEST(Fenchel, FenchelYoungOnGridTriples) {
  const HamiltonianSpec h(1, {cosine_well(), cosine_well(0.5, 0.2)});
  const auto table = fenchel_transform(h, 6.0);
  Rng rng(2);
  for (int s = 0; s < 10000; ++s) {
    const int i = s % 2;
    const int ix = static_cast<int>(rng.uniform() * table.grids().x_points);
    const int iq = static_cast<int>(rng.uniform() * table.q_points());
    const int ip = static_cast<int>(rng.uniform() * (table.grids().p_intervals + 1));
    const double radius = table.momentum_radius(i);
    const double p = -radius + ip * 2.0 * radius / table.grids().p_intervals;
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, table.x_node(ix));
    const double gap = table.node(i, {ix}, {iq}) + h(i, x, Eigen::VectorXd::Constant(1, p)) -
                       p * table.q_node(iq);
    ASSERT_GE(gap, -1e-9);
  }
}

TEST(Fenchel, ConvexInVelocity) {
  const HamiltonianSpec h(1, {cosine_well()});
  const auto table = fenchel_transform(h, 6.0);
  for (int ix = 0; ix < table.grids().x_points; ix += 7)
    for (int a = 0; a < table.q_points(); a += 3)
      for (int b = a + 2; b < table.q_points(); b += 6) {
        const double mid = table.node(0, {ix}, {(a + b) / 2});
        if ((a + b) % 2) continue;
        EXPECT_LE(mid, 0.5 * (table.node(0, {ix}, {a}) + table.node(0, {ix}, {b})) + 1e-9);
      }
}

TEST(Fenchel, BiconjugateRecoversHamiltonian) {
  const HamiltonianSpec h(1, {cosine_well()});
  const double bound = 6.0;
  const auto table = fenchel_transform(h, bound);
  const double hp = 2.0 * table.momentum_radius(0) / table.grids().p_intervals;
  const double hq = table.q_step();
  const double tolerance = 2.0 * (hp + hq) * (bound + table.momentum_radius(0));
  for (int ix = 0; ix < table.grids().x_points; ix += 9) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, table.x_node(ix));
    for (double p = -4.0; p <= 4.0; p += 0.5) {
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < table.q_points(); ++k)
        best = std::max(best, p * table.q_node(k) - table.node(0, {ix}, {k}));
      const double exact = h(0, x, Eigen::VectorXd::Constant(1, p));
      EXPECT_NEAR(best, exact, tolerance);
      EXPECT_NEAR(best, exact, hq * hq);  // quadratic case: far inside the generic bound
    }
  }
}

TEST(Fenchel, TwoDimensional) {
  HamiltonianComponent c;
  c.potential.terms.push_back({0.5, Eigen::Vector2i(1, 0), 0.0});
  c.potential.terms.push_back({0.25, Eigen::Vector2i(0, 1), 0.0});
  const HamiltonianSpec h(2, {c});
  const auto table = fenchel_transform(h, 3.0, FenchelGrids::defaults(2));
  const Eigen::Vector2d x(0.25, 0.5), q(0.75, -1.5);
  const double exact = 0.5 * q.squaredNorm() + c.potential(x);
  EXPECT_NEAR(table(0, x, q), exact, 0.05);
  EXPECT_NEAR(table.node(0, {8, 16}, {20, 8}),
              0.5 * (std::pow(table.q_node(20), 2) + std::pow(table.q_node(8), 2)) +
                  c.potential(Eigen::Vector2d(0.25, 0.5)),
              0.05);
}

TEST(Fenchel, NonsmoothTableGetsSentinel) {
  const HamiltonianSpec h(1, {table_component([](double p) { return std::abs(p); }, -4.0, 4.0)});
  const auto table = fenchel_transform(h, 2.0);
  // The parabola refinement overshoots at the kink of |p| by a fraction of h_p.
  EXPECT_NEAR(table(0, 0.1, 0.5), 0.0, 2.0 * table.momentum_radius(0) / table.grids().p_intervals);
  EXPECT_TRUE(LagrangianTable::is_sentinel(table(0, 0.1, 1.5)));
  EXPECT_THROW(table(0, 0.1, 2.5), SentinelVelocity);
}

TEST(HamiltonianSpec, RejectsNonConvexTable) {
  const HamiltonianSpec h(1, {table_component([](double p) { return -p * p; }, -4.0, 4.0)});
  EXPECT_THROW(h.validate(64, 4.0, 161, 1.0), InvalidArgument);
}

TEST(HamiltonianSpec, SmallMomentumBoxIsNotSuperlinear) {
  const HamiltonianSpec h(1, {cosine_well()});
  EXPECT_THROW(h.validate(64, 1.0, 65, 4.0), SuperlinearityViolation);
  EXPECT_NO_THROW(h.validate(64, 16.0, 257, 4.0));
}

TEST(HamiltonianSpec, TableInterpolatesQuadratic) {
  const HamiltonianSpec h(1, {table_component([](double p) { return 0.5 * p * p; }, -4.0, 4.0)});
  EXPECT_NEAR(h(0, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, 1.0)), 0.5, 1e-3);
  EXPECT_EQ(h(0, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, 5.0)),
            std::numeric_limits<double>::infinity());
}

TEST(Lipschitz, TwoWell) {
  const HamiltonianSpec h(1, {cosine_well(), cosine_well()});
  EXPECT_NEAR(lipschitz_estimate(h, 128), 2.0, 0.05);
}

}  // namespace
}  // namespace wkam
