#pragma once

// Hamiltonians on T^N x R^N, their numerical Fenchel transforms and the
// integration map from velocity controls to torus positions.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "wkam/error.hpp"

namespace wkam {

/// Point of T^N = R^N / Z^N, components in [0, 1).
template <typename Scalar>
class TorusPoint {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  TorusPoint() = default;
  explicit TorusPoint(const Vector& lifted) : x_(lifted.size()) {
    for (Eigen::Index k = 0; k < lifted.size(); ++k) x_(k) = wrap(lifted(k));
  }

  static Scalar wrap(Scalar v) {
    Scalar r = v - std::floor(v);
    return r >= Scalar(1) ? Scalar(0) : r;
  }

  const Vector& coordinates() const { return x_; }
  int dimension() const { return static_cast<int>(x_.size()); }
  Scalar operator()(int k) const { return x_(k); }

 private:
  Vector x_;
};

using TorusPointd = TorusPoint<double>;

/// One piece of a piecewise-constant velocity control.
template <typename Scalar>
struct ControlPiece {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> velocity;
  Scalar duration;
};

template <typename Scalar>
struct IntegratedControl {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lift;  // int_0^t xi ds in R^N
  TorusPoint<Scalar> point;                       // proj(start + lift)
};

/// I(xi)(t): exact sum of velocity * duration over the pieces up to time t,
/// accumulated with Neumaier compensation, together with its projection.
template <typename Scalar>
IntegratedControl<Scalar> integrate_control(const std::vector<ControlPiece<Scalar>>& pieces,
                                            Scalar t, int dimension,
                                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& start =
                                                Eigen::Matrix<Scalar, Eigen::Dynamic, 1>()) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector sum = Vector::Zero(dimension);
  Vector carry = Vector::Zero(dimension);
  Scalar elapsed = Scalar(0);
  for (const auto& piece : pieces) {
    if (elapsed >= t) break;
    if (piece.velocity.size() != dimension)
      throw InvalidArgument("integrate_control: velocity dimension mismatch");
    const Scalar used = std::min(piece.duration, t - elapsed);
    for (int k = 0; k < dimension; ++k) {
      const Scalar term = piece.velocity(k) * used;
      const Scalar total = sum(k) + term;
      carry(k) += std::abs(sum(k)) >= std::abs(term) ? (sum(k) - total) + term
                                                     : (term - total) + sum(k);
      sum(k) = total;
    }
    elapsed += used;
  }
  if (elapsed < t) throw InvalidArgument("integrate_control: pieces end before t");
  Vector lift = sum + carry;
  Vector base = start.size() == 0 ? Vector::Zero(dimension) : start;
  return {lift, TorusPoint<Scalar>(Vector(base + lift))};
}

/// a cos(2 pi k.x + phase).
struct CosineTerm {
  double amplitude = 0.0;
  Eigen::VectorXi wave;
  double phase = 0.0;
};

/// V(x) = constant + sum of cosine terms; periodic on T^N.
struct Potential {
  double constant = 0.0;
  std::vector<CosineTerm> terms;
  double operator()(const Eigen::VectorXd& x) const;
};

/// Gridded H(x, p) for N = 1: values[ix * p_points + ip] on the periodic x
/// grid {ix / x_points} times the uniform p grid on [p_min, p_max].
struct HamiltonianTableData {
  int x_points = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  int p_points = 0;
  std::vector<double> values;
  std::string source;  // file the table was read from, for reports
};

enum class HamiltonianKind { quadratic_minus_potential, table };
const char* to_string(HamiltonianKind kind);

struct HamiltonianComponent {
  HamiltonianKind kind = HamiltonianKind::quadratic_minus_potential;
  Potential potential;              // H = |p|^2 / 2 - V(x)
  HamiltonianTableData table;       // H read from the grid
};

/// The m Hamiltonians H_i : T^N x R^N -> R of one system.
class HamiltonianSpec {
 public:
  HamiltonianSpec(int dimension, std::vector<HamiltonianComponent> components);

  int dimension() const { return n_; }
  int count() const { return static_cast<int>(components_.size()); }
  const HamiltonianComponent& component(int i) const { return components_.at(i); }

  /// H_i(x, p); +infinity outside the momentum range of table components.
  double operator()(int i, const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;
  /// Largest p range over which H_i is known (infinite for analytic kinds).
  double momentum_limit(int i) const;

  /// Checks on the given grids: finite values, midpoint convexity
  /// in p within 1e-9, and a finite superlinearity margin for velocity bound
  /// M on the boundary of the momentum box. Throws on failure.
  void validate(int x_points, double momentum_radius, int momentum_points, double M) const;

 private:
  int n_;
  std::vector<HamiltonianComponent> components_;
};

/// Integer grids used to tabulate L.
struct FenchelGrids {
  int x_points = 128;      // h_x = 1 / x_points per dimension
  int q_intervals = 128;   // q grid on [-M, M], h_q = 2M / q_intervals
  int p_intervals = 256;   // p grid on [-P, P], h_p = 2P / p_intervals
  double initial_radius = 0.0;  // P; 0 selects 2M
  int max_expansions = 4;

  static FenchelGrids defaults(int dimension);
};

/// L_i(x, q) = max_p {p.q - H_i(x, p)} tabulated on the torus grid times the
/// velocity box [-M, M]^N, with multilinear interpolation off the grid.
class LagrangianTable {
 public:
  static constexpr double kSentinel = 1e30;

  LagrangianTable(int dimension, int count, double velocity_bound, FenchelGrids grids,
                  std::vector<double> radii, std::vector<double> values,
                  std::vector<double> argmax);

  int dimension() const { return n_; }
  int count() const { return m_; }
  double velocity_bound() const { return bound_; }
  const FenchelGrids& grids() const { return grids_; }
  int q_points() const { return grids_.q_intervals + 1; }
  double x_step() const { return 1.0 / grids_.x_points; }
  double q_step() const { return 2.0 * bound_ / grids_.q_intervals; }
  /// Momentum search radius actually used for index i.
  double momentum_radius(int i) const { return radii_.at(i); }

  /// Grid coordinates.
  double x_node(int k) const { return k * x_step(); }
  double q_node(int k) const { return -bound_ + k * q_step(); }

  /// Value at grid node (i, x multi-index, q multi-index).
  double node(int i, const std::vector<int>& x_index, const std::vector<int>& q_index) const;
  Eigen::VectorXd node_argmax(int i, const std::vector<int>& x_index,
                              const std::vector<int>& q_index) const;

  /// Multilinear interpolation; x is taken modulo 1, |q|_inf must not exceed
  /// the velocity bound.
  double operator()(int i, const Eigen::VectorXd& x, const Eigen::VectorXd& q) const;
  double operator()(int i, double x, double q) const {
    return (*this)(i, Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, q));
  }
  static bool is_sentinel(double value) { return value >= 0.5 * kSentinel; }

 private:
  std::size_t flat(int i, const std::vector<int>& x_index, const std::vector<int>& q_index) const;

  int n_, m_;
  double bound_;
  FenchelGrids grids_;
  std::vector<double> radii_;
  std::vector<double> values_;
  std::vector<double> argmax_;
};

/// Numerical Fenchel transform: grid maximization over the momentum box,
/// refined by a parabola through the grid argmax and its neighbours. The box
/// doubles while the argmax touches its boundary.
LagrangianTable fenchel_transform(const HamiltonianSpec& h, double velocity_bound,
                                  const FenchelGrids& grids = FenchelGrids::defaults(1));

/// Heuristic Lipschitz estimate: the largest |p|_inf on the momentum grid with
/// H_i(x, p) <= max_{i,x} H_i(x, 0).
double lipschitz_estimate(const HamiltonianSpec& h, int x_points);

}  // namespace wkam
