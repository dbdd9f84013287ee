#pragma once

#include <cmath>

#include "wkam/aubry.hpp"
#include "wkam/config.hpp"
#include "wkam/iteration.hpp"

namespace wkam::test {

inline Eigen::MatrixXd symmetric2() {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -1, 1;
  return a;
}

/// Random coupling: a directed ring keeps it irreducible, other rates are
/// present with probability one half.
inline Eigen::MatrixXd random_coupling(Rng& rng, int m) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      if (j == (i + 1) % m || rng.uniform() < 0.5) a(i, j) = -(0.1 + 1.9 * rng.uniform());
    }
  for (int i = 0; i < m; ++i) a(i, i) = -a.row(i).sum();
  return a;
}

inline HamiltonianComponent cosine_well(double amplitude = 1.0, double constant = 0.0) {
  HamiltonianComponent c;
  c.potential.constant = constant;
  c.potential.terms.push_back({amplitude, Eigen::VectorXi::Constant(1, 1), 0.0});
  return c;
}

/// H_i = p^2 / 2 - cos(2 pi x) for both indices, A symmetric.
inline const SystemInstance& twowell() {
  static const SystemInstance instance(validate_coupling(symmetric2()),
                                       HamiltonianSpec(1, {cosine_well(), cosine_well()}), 6.0,
                                       1.0 / 16.0, FenchelGrids::defaults(1));
  return instance;
}

inline Eigen::VectorXd point(double y) { return Eigen::VectorXd::Constant(1, y); }

inline double binomial_z(double hits, double n, double p) {
  return (hits - n * p) / std::sqrt(n * p * (1.0 - p));
}

inline std::filesystem::path source_dir() { return WKAM_SOURCE_DIR; }

}  // namespace wkam::test
