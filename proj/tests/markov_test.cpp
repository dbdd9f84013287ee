#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "support.hpp"

namespace wkam {
namespace {

using test::random_coupling;
using test::symmetric2;

TEST(Coupling, AcceptsSymmetricPair) { EXPECT_NO_THROW(validate_coupling(symmetric2())); }

TEST(Coupling, ZeroRowIsReducible) {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, 0, 0;
  try {
    validate_coupling(a);
    FAIL();
  } catch (const Reducible& e) {
    EXPECT_EQ(e.subset(), "{1}");
  }
}

TEST(Coupling, RowSumViolationNamesRow) {
  Eigen::MatrixXd a(2, 2);
  a << 1, -0.5, -1, 1;
  try {
    validate_coupling(a);
    FAIL();
  } catch (const RowSumViolation& e) {
    EXPECT_EQ(e.row(), 0);
    EXPECT_NE(std::string(e.what()).find("row 0"), std::string::npos);
  }
}

TEST(Coupling, PositiveOffDiagonal) {
  Eigen::MatrixXd a(2, 2);
  a << -1, 1, -1, 1;
  EXPECT_THROW(validate_coupling(a), SignViolation);
}

TEST(Coupling, TwoBlocksAreReducible) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a.topLeftCorner(2, 2) = symmetric2();
  a.bottomRightCorner(2, 2) = symmetric2();
  EXPECT_THROW(validate_coupling(a), Reducible);
}

TEST(Semigroup, ZeroTimeIsIdentity) {
  const auto a = validate_coupling(symmetric2());
  EXPECT_EQ(semigroup(a, 0.0).matrix(), Eigen::MatrixXd::Identity(2, 2));
}

TEST(Semigroup, SymmetricClosedForm) {
  const auto a = validate_coupling(symmetric2());
  for (double t : {0.1, 0.5, 2.0}) {
    const auto p = semigroup(a, t).matrix();
    const double same = 0.5 * (1.0 + std::exp(-2.0 * t));
    EXPECT_NEAR(p(0, 0), same, 1e-14);
    EXPECT_NEAR(p(0, 1), 1.0 - same, 1e-14);
  }
  EXPECT_NEAR(semigroup(a, 0.5)(0, 0), 0.6839, 1e-4);
}

TEST(Semigroup, AgreesWithEigenMatrixExponential) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + trial % 4;
    const Eigen::MatrixXd raw = random_coupling(rng, m);
    const auto a = validate_coupling(raw);
    for (double t : {0.01, 0.1, 1.0, 10.0}) {
      const Eigen::MatrixXd oracle = (-t * raw).exp();
      EXPECT_LE((semigroup(a, t).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Semigroup, RandomCouplingProperties) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = validate_coupling(random_coupling(rng, 2 + trial % 4));
    for (double t : {0.01, 0.1, 1.0, 10.0}) {
      const Eigen::MatrixXd p = semigroup(a, t).matrix();
      EXPECT_LE((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
      EXPECT_GT(p.minCoeff(), 0.0);
      for (double s : {0.05, 0.7}) {
        const Eigen::MatrixXd law = semigroup(a, s).matrix() * p - semigroup(a, s + t).matrix();
        EXPECT_LE(law.cwiseAbs().maxCoeff(), 1e-9);
      }
    }
  }
}

TEST(Perron, HandSolvedTwoByTwo) {
  Eigen::MatrixXd b(2, 2);
  b << 0.9, 0.1, 0.2, 0.8;
  const auto r = perron_vector(StochasticMatrixd(b));
  EXPECT_NEAR(r.vector(0), 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(r.vector(1), 1.0 / 3.0, 1e-10);
  EXPECT_TRUE(r.unique);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(Perron, IdentityIsNotUnique) {
  const auto r = perron_vector(StochasticMatrixd(Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_FALSE(r.unique);
  EXPECT_EQ(r.vector(0), 1.0);
}

TEST(Perron, SymmetricSemigroupIsUniform) {
  const auto a = validate_coupling(symmetric2());
  const auto r = perron_vector(semigroup(a, 0.3));
  EXPECT_NEAR(r.vector(0), 0.5, 1e-12);
}

TEST(Perron, IndependentOfTime) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd raw = random_coupling(rng, 2 + trial % 4);
    const auto a = validate_coupling(raw);
    // Oracle: left kernel of A.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(raw.transpose());
    ASSERT_EQ(lu.kernel().cols(), 1);
    Eigen::VectorXd kernel = lu.kernel().col(0);
    kernel /= kernel.sum();
    for (double t : {0.1, 1.0, 5.0}) {
      const auto r = perron_vector(semigroup(a, t));
      EXPECT_LE((r.vector.vector().transpose() - kernel).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Occupation, OnesGiveScaledSemigroup) {
  Rng rng(2);
  const auto a = validate_coupling(random_coupling(rng, 4));
  const double t = 0.7;
  const Eigen::MatrixXd o = occupation_integral(a, Eigen::VectorXd::Ones(4), t);
  EXPECT_LE((o - t * semigroup(a, t).matrix()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(occupation_integral(a, Eigen::VectorXd::Zero(4), t).cwiseAbs().maxCoeff(), 0.0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 4);
  for (int j = 0; j < 4; ++j) sum += occupation_integral(a, Eigen::VectorXd::Unit(4, j), t);
  EXPECT_LE((sum - t * semigroup(a, t).matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Occupation, SymmetricClosedForm) {
  // E_0 int_0^t 1{w(s) = 0} ds = int_0^t (1 + e^{-2s}) / 2 ds.
  const auto a = validate_coupling(symmetric2());
  const double t = 0.5;
  const Eigen::MatrixXd o = occupation_integral(a, Eigen::Vector2d(1, 0), t);
  EXPECT_NEAR(o.row(0).sum(), 0.5 * t + 0.25 * (1.0 - std::exp(-2.0 * t)), 1e-12);
}

TEST(Occupation, MonteCarlo) {
  const auto a = validate_coupling(symmetric2());
  const double t = 0.5;
  const Eigen::MatrixXd o = occupation_integral(a, Eigen::Vector2d(1, 0), t);
  PathSampler sampler(a, 17);
  const int n = 100000;
  for (int start = 0; start < 2; ++start) {
    double sum = 0.0, square = 0.0;
    for (int s = 0; s < n; ++s) {
      const JumpPath path = sampler.sample_from(start, t);
      double time = 0.0;
      for (const auto& piece : path.pieces(0.0, t))
        if (piece.index == 0) time += piece.end - piece.start;
      sum += time;
      square += time * time;
    }
    const double mean = sum / n;
    const double se = std::sqrt((square / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - o.row(start).sum()), 3.0 * se);
  }
}

TEST(Probability, RejectsBadVectors) {
  EXPECT_THROW(ProbabilityVectord(Eigen::RowVector2d(0.7, 0.7)), InvalidArgument);
  EXPECT_THROW(ProbabilityVectord(Eigen::RowVector2d(1.5, -0.5)), InvalidArgument);
}

}  // namespace
}  // namespace wkam
