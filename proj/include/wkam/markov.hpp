#pragma once

// Coupling matrices, the stochastic semigroup e^{-At}, Perron vectors and the
// occupation integrals that feed the exact action evaluator.
//
// Indices are 0-based throughout the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wkam/error.hpp"

namespace wkam {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Matrix exponential by scaling and squaring with a degree 13 Pade
/// approximant (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).
template <typename Derived>
MatrixX<typename Derived::Scalar> expm(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  if (x.cols() != n) throw InvalidArgument("expm: matrix must be square");
  static constexpr double kCoeff[14] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  constexpr double kTheta13 = 5.371920351148152;

  const Scalar norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > Scalar(kTheta13)) {
    squarings = static_cast<int>(
        std::ceil(std::log2(static_cast<double>(norm1) / kTheta13)));
  }
  const MatrixX<Scalar> a = x / std::ldexp(Scalar(1), squarings);
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> a2 = a * a;
  const MatrixX<Scalar> a4 = a2 * a2;
  const MatrixX<Scalar> a6 = a4 * a2;
  auto b = [](int k) { return Scalar(kCoeff[k]); };

  const MatrixX<Scalar> u_inner = a6 * (b(13) * a6 + b(11) * a4 + b(9) * a2) +
                                  b(7) * a6 + b(5) * a4 + b(3) * a2 + b(1) * id;
  const MatrixX<Scalar> u = a * u_inner;
  const MatrixX<Scalar> v = a6 * (b(12) * a6 + b(10) * a4 + b(8) * a2) +
                            b(6) * a6 + b(4) * a4 + b(2) * a2 + b(0) * id;
  MatrixX<Scalar> r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = (r * r).eval();
  return r;
}

/// The m x m coupling matrix A: nonpositive off-diagonal entries, zero row
/// sums, irreducible. Only constructible through validate_coupling().
template <typename Scalar>
class CouplingMatrix {
 public:
  const MatrixX<Scalar>& matrix() const { return a_; }
  int size() const { return static_cast<int>(a_.rows()); }
  Scalar operator()(int i, int j) const { return a_(i, j); }

  template <typename Derived>
  friend CouplingMatrix<typename Derived::Scalar> validate_coupling(
      const Eigen::MatrixBase<Derived>& matrix);

 private:
  explicit CouplingMatrix(MatrixX<Scalar> a) : a_(std::move(a)) {}
  MatrixX<Scalar> a_;
};

namespace detail {

// Nodes reachable from `start` following edge i->j iff adj(i, j).
inline std::vector<bool> reachable(const std::vector<std::vector<bool>>& adj,
                                   int start, bool reverse) {
  const int n = static_cast<int>(adj.size());
  std::vector<bool> seen(n, false);
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      const bool edge = reverse ? adj[j][i] : adj[i][j];
      if (edge && !seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

inline std::string format_subset(const std::vector<bool>& members) {
  std::ostringstream out;
  out << '{';
  bool first = true;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!members[i]) continue;
    if (!first) out << ',';
    out << i;
    first = false;
  }
  out << '}';
  return out.str();
}

}  // namespace detail

/// Checks (A1)-(A3) and returns the validated coupling matrix.
/// Irreducibility is tested as strong connectivity of the graph with an edge
/// i->j whenever a_ij < 0.
template <typename Derived>
CouplingMatrix<typename Derived::Scalar> validate_coupling(
    const Eigen::MatrixBase<Derived>& matrix) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = matrix.rows();
  if (matrix.cols() != m) throw InvalidArgument("coupling matrix must be square");
  if (m < 2) throw InvalidArgument("coupling matrix needs m >= 2");
  if (!matrix.allFinite()) throw InvalidArgument("coupling matrix has non-finite entries");

  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j && matrix(i, j) > Scalar(0))
        throw SignViolation(static_cast<int>(i), static_cast<int>(j));

  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar sum = matrix.row(i).sum();
    const Scalar scale = std::max<Scalar>(Scalar(1), matrix.row(i).cwiseAbs().maxCoeff());
    if (std::abs(sum) > Scalar(1e-12) * scale)
      throw RowSumViolation(static_cast<int>(i), static_cast<double>(sum));
  }

  std::vector<std::vector<bool>> adj(m, std::vector<bool>(m, false));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) adj[i][j] = i != j && matrix(i, j) < Scalar(0);

  const auto forward = detail::reachable(adj, 0, false);
  if (std::find(forward.begin(), forward.end(), false) != forward.end())
    throw Reducible(detail::format_subset(forward));
  const auto backward = detail::reachable(adj, 0, true);
  for (Eigen::Index v = 0; v < m; ++v) {
    if (!backward[v]) {
      // Everything reachable from v avoids 0, hence is closed.
      throw Reducible(detail::format_subset(detail::reachable(adj, static_cast<int>(v), false)));
    }
  }
  return CouplingMatrix<Scalar>(MatrixX<Scalar>(matrix));
}

/// Row-stochastic matrix: nonnegative entries, rows summing to 1 within 1e-10.
template <typename Scalar>
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  explicit StochasticMatrix(MatrixX<Scalar> p) : p_(std::move(p)) {
    if (p_.rows() != p_.cols() || p_.rows() == 0)
      throw InvalidArgument("stochastic matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
      if (p_.row(i).minCoeff() < Scalar(-1e-14))
        throw InvalidArgument("stochastic matrix has a negative entry in row " +
                              std::to_string(i));
      if (std::abs(p_.row(i).sum() - Scalar(1)) > Scalar(1e-10))
        throw InvalidArgument("stochastic matrix row " + std::to_string(i) +
                              " does not sum to 1");
    }
  }
  const MatrixX<Scalar>& matrix() const { return p_; }
  int size() const { return static_cast<int>(p_.rows()); }
  Scalar operator()(int i, int j) const { return p_(i, j); }

 private:
  MatrixX<Scalar> p_;
};

/// Element of the probability simplex, stored as a row vector since it acts
/// on stochastic matrices from the left.
template <typename Scalar>
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(RowVectorX<Scalar> a) : a_(std::move(a)) {
    if (a_.size() == 0) throw InvalidArgument("empty probability vector");
    if (!a_.allFinite() || a_.minCoeff() < Scalar(-1e-14))
      throw InvalidArgument("probability vector has a negative component");
    if (std::abs(a_.sum() - Scalar(1)) > Scalar(1e-12))
      throw InvalidArgument("probability vector does not sum to 1");
  }

  static ProbabilityVector unit(int m, int i) {
    RowVectorX<Scalar> e = RowVectorX<Scalar>::Zero(m);
    e(i) = Scalar(1);
    return ProbabilityVector(std::move(e));
  }
  static ProbabilityVector uniform(int m) {
    return ProbabilityVector(RowVectorX<Scalar>::Constant(m, Scalar(1) / Scalar(m)));
  }

  const RowVectorX<Scalar>& vector() const { return a_; }
  int size() const { return static_cast<int>(a_.size()); }
  Scalar operator()(int i) const { return a_(i); }

 private:
  RowVectorX<Scalar> a_;
};

using CouplingMatrixd = CouplingMatrix<double>;
using StochasticMatrixd = StochasticMatrix<double>;
using ProbabilityVectord = ProbabilityVector<double>;

/// e^{-At}, stochastic for t >= 0 and entrywise positive for t > 0.
template <typename Scalar>
StochasticMatrix<Scalar> semigroup(const CouplingMatrix<Scalar>& a, Scalar t) {
  if (!(t >= Scalar(0))) throw InvalidArgument("semigroup: t must be >= 0");
  if (t == Scalar(0))
    return StochasticMatrix<Scalar>(MatrixX<Scalar>::Identity(a.size(), a.size()));
  MatrixX<Scalar> p = expm((-t) * a.matrix());
  // Rows of the exact exponential sum to 1; remove the O(eps) drift.
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
  return StochasticMatrix<Scalar>(std::move(p));
}

template <typename Scalar>
struct PerronResult {
  ProbabilityVector<Scalar> vector;
  bool unique = true;
  /// 1 - max |lambda| over the spectrum with the eigenvalue 1 removed.
  Scalar spectral_gap = Scalar(0);
  /// ||aB - a||_inf.
  Scalar residual = Scalar(0);
};

namespace detail {

// Stationary law of an irreducible stochastic block, by power iteration with
// a direct-solve fallback (periodic chains do not converge under iteration).
template <typename Scalar>
RowVectorX<Scalar> stationary(const MatrixX<Scalar>& b) {
  const Eigen::Index n = b.rows();
  RowVectorX<Scalar> a = RowVectorX<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  for (int it = 0; it < 100000; ++it) {
    RowVectorX<Scalar> next = a * b;
    next /= next.sum();
    const Scalar change = (next - a).cwiseAbs().sum();
    a = std::move(next);
    if (change < Scalar(1e-12)) break;
  }
  if ((a * b - a).cwiseAbs().maxCoeff() <= Scalar(1e-10)) return a;

  MatrixX<Scalar> system = b.transpose() - MatrixX<Scalar>::Identity(n, n);
  system.row(n - 1).setOnes();
  VectorX<Scalar> rhs = VectorX<Scalar>::Zero(n);
  rhs(n - 1) = Scalar(1);
  VectorX<Scalar> x = system.fullPivLu().solve(rhs);
  return x.transpose().cwiseMax(Scalar(0)) / x.cwiseMax(Scalar(0)).sum();
}

}  // namespace detail

/// Left fixed point a = aB in the simplex. Uniqueness holds iff the support
/// graph of B has a single closed communicating class; when it does not, the
/// representative is the stationary law of the closed class holding the
/// lowest index.
template <typename Scalar>
PerronResult<Scalar> perron_vector(const StochasticMatrix<Scalar>& stochastic) {
  const MatrixX<Scalar>& b = stochastic.matrix();
  const int m = stochastic.size();

  std::vector<std::vector<bool>> adj(m, std::vector<bool>(m, false));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) adj[i][j] = b(i, j) > Scalar(0);
  std::vector<std::vector<bool>> reach(m);
  for (int i = 0; i < m; ++i) reach[i] = detail::reachable(adj, i, false);

  // A class C(i) = {j : i <-> j} is closed iff every j reachable from i reaches i.
  std::vector<int> closed_rep;
  for (int i = 0; i < m; ++i) {
    bool closed = true;
    bool lowest = true;
    for (int j = 0; j < m; ++j) {
      if (reach[i][j] && !reach[j][i]) closed = false;
      if (j < i && reach[i][j] && reach[j][i]) lowest = false;
    }
    if (closed && lowest) closed_rep.push_back(i);
  }

  const int rep = closed_rep.front();
  std::vector<int> members;
  for (int j = 0; j < m; ++j)
    if (reach[rep][j]) members.push_back(j);
  MatrixX<Scalar> block(members.size(), members.size());
  for (std::size_t r = 0; r < members.size(); ++r)
    for (std::size_t c = 0; c < members.size(); ++c) block(r, c) = b(members[r], members[c]);
  const RowVectorX<Scalar> local = detail::stationary(block);
  RowVectorX<Scalar> a = RowVectorX<Scalar>::Zero(m);
  for (std::size_t r = 0; r < members.size(); ++r) a(members[r]) = local(r);
  a /= a.sum();

  PerronResult<Scalar> result;
  result.unique = closed_rep.size() == 1;
  result.residual = (a * b - a).cwiseAbs().maxCoeff();

  Eigen::EigenSolver<MatrixX<Scalar>> solver(b, false);
  auto eigenvalues = solver.eigenvalues();
  Eigen::Index closest = 0;
  for (Eigen::Index k = 1; k < eigenvalues.size(); ++k)
    if (std::abs(eigenvalues(k) - Scalar(1)) < std::abs(eigenvalues(closest) - Scalar(1)))
      closest = k;
  Scalar largest = Scalar(0);
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k)
    if (k != closest) largest = std::max(largest, std::abs(eigenvalues(k)));
  result.spectral_gap = Scalar(1) - largest;
  result.vector = ProbabilityVector<Scalar>(std::move(a));
  return result;
}

/// Matrix with (i, j) entry int_0^t (e^{-As} diag(f) e^{-A(t-s)})_{ij} ds,
/// i.e. E_i[ int_0^t f(w(s)) ds ; w(t) = j ], read off the upper-right block
/// of exp(t [[-A, diag f], [0, -A]]).
template <typename Scalar, typename Derived>
MatrixX<Scalar> occupation_integral(const CouplingMatrix<Scalar>& a,
                                    const Eigen::MatrixBase<Derived>& f, Scalar t) {
  const int m = a.size();
  if (!(t > Scalar(0))) throw InvalidArgument("occupation_integral: t must be > 0");
  if (f.size() != m || !f.allFinite())
    throw InvalidArgument("occupation_integral: f must hold m finite values");
  MatrixX<Scalar> block = MatrixX<Scalar>::Zero(2 * m, 2 * m);
  block.topLeftCorner(m, m) = -a.matrix();
  block.bottomRightCorner(m, m) = -a.matrix();
  for (int i = 0; i < m; ++i) block(i, m + i) = f(i);
  return expm(t * block).topRightCorner(m, m);
}

}  // namespace wkam
