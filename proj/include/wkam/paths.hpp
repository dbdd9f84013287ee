#pragma once

// Piecewise-constant cadlag index paths, the generative CTMC sampler that
// realizes P_a, cylinder probabilities and deterministic shifts.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "wkam/markov.hpp"

namespace wkam {

/// Seedable 64-bit stream. Streams derived with split() from distinct
/// (seed, stream) pairs are statistically independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

  static Rng split(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL)));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate, by inversion.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Index drawn from the (unnormalized) nonnegative weights.
  template <typename Weights>
  int categorical(const Weights& weights, double total) {
    const double u = uniform() * total;
    double acc = 0.0;
    const int n = static_cast<int>(weights.size());
    for (int k = 0; k < n; ++k) {
      acc += weights[k];
      if (u < acc) return k;
    }
    for (int k = n - 1; k >= 0; --k)
      if (weights[k] > 0.0) return k;
    return n - 1;
  }

  std::uint64_t next() { return engine_(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::mt19937_64 engine_;
};

/// Cadlag path into {0, ..., m-1} on [0, horizon]: an initial index plus
/// strictly increasing jump times in (0, horizon] and the index after each
/// jump. Consecutive indices differ.
class JumpPath {
 public:
  JumpPath(double horizon, int initial_index, std::vector<double> jump_times = {},
           std::vector<int> post_jump_indices = {});

  double horizon() const { return horizon_; }
  int initial_index() const { return initial_; }
  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<int>& post_jump_indices() const { return post_jump_; }
  std::size_t jump_count() const { return jump_times_.size(); }

  /// w(t), right-continuous.
  int operator()(double t) const;

  /// w(k * step) for k = 0..steps.
  std::vector<int> grid_values(double step, int steps) const;

  /// Pieces of constant index overlapping [t0, t1): (start, end, index).
  struct Piece {
    double start;
    double end;
    int index;
  };
  std::vector<Piece> pieces(double t0, double t1) const;

  bool operator==(const JumpPath&) const = default;

 private:
  double horizon_;
  int initial_;
  std::vector<double> jump_times_;
  std::vector<int> post_jump_;
};

/// C(t_1, ..., t_k; j_1, ..., j_k) = {w : w(t_l) = j_l for all l}.
class Cylinder {
 public:
  Cylinder(std::vector<double> times, std::vector<int> indices);
  const std::vector<double>& times() const { return times_; }
  const std::vector<int>& indices() const { return indices_; }
  bool contains(const JumpPath& path) const;

 private:
  std::vector<double> times_;
  std::vector<int> indices_;
};

/// Holding-time construction of the Markov chain with generator -A: the
/// holding time in i is exponential with rate a_ii and the jump goes to
/// j != i with probability -a_ij / a_ii.
class PathSampler {
 public:
  PathSampler(CouplingMatrixd a, Rng rng) : a_(std::move(a)), rng_(rng) {}
  PathSampler(CouplingMatrixd a, std::uint64_t seed, std::uint64_t stream = 0)
      : PathSampler(std::move(a), Rng::split(seed, stream)) {}

  const CouplingMatrixd& coupling() const { return a_; }
  Rng& rng() { return rng_; }

  JumpPath sample(const ProbabilityVectord& a, double horizon);
  JumpPath sample_from(int initial_index, double horizon);

 private:
  CouplingMatrixd a_;
  Rng rng_;
};

inline JumpPath sample_path(PathSampler& sampler, const ProbabilityVectord& a,
                            double horizon) {
  return sampler.sample(a, horizon);
}

/// (a e^{-A t_1})_{j_1} prod_l (e^{-A(t_l - t_{l-1})})_{j_{l-1} j_l}.
template <typename Scalar>
Scalar cylinder_probability(const CouplingMatrix<Scalar>& a,
                            const ProbabilityVector<Scalar>& initial,
                            const Cylinder& cylinder) {
  if (initial.size() != a.size())
    throw InvalidArgument("cylinder_probability: dimension mismatch");
  const auto& times = cylinder.times();
  const auto& indices = cylinder.indices();
  for (int j : indices)
    if (j < 0 || j >= a.size()) throw InvalidArgument("cylinder index out of range");
  const RowVectorX<Scalar> first =
      initial.vector() * semigroup(a, static_cast<Scalar>(times.front())).matrix();
  Scalar p = first(indices.front());
  for (std::size_t l = 1; l < times.size(); ++l) {
    const auto step = semigroup(a, static_cast<Scalar>(times[l] - times[l - 1]));
    p *= step(indices[l - 1], indices[l]);
  }
  return p;
}

/// The path w(. + h) on [0, horizon - h].
JumpPath shift(const JumpPath& path, double h);

/// Law of w(t) under P_a, i.e. a e^{-At}.
template <typename Scalar>
ProbabilityVector<Scalar> marginal_pushforward(const CouplingMatrix<Scalar>& a,
                                               const ProbabilityVector<Scalar>& initial,
                                               Scalar t) {
  if (t == Scalar(0)) return initial;
  RowVectorX<Scalar> out = initial.vector() * semigroup(a, t).matrix();
  out /= out.sum();
  return ProbabilityVector<Scalar>(std::move(out));
}

}  // namespace wkam
