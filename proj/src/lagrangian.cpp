#include "wkam/lagrangian.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace wkam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct GridMax {
  double value;
  double arg;
  std::size_t index;
  bool boundary;
};

// Maximizes f over a uniform grid starting at p0 with spacing h, then moves
// to the vertex of the parabola through the best node and its neighbours.
GridMax grid_max(const std::vector<double>& f, double p0, double h) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < f.size(); ++k)
    if (f[k] > f[best]) best = k;
  GridMax out{f[best], p0 + h * static_cast<double>(best), best,
              best == 0 || best + 1 == f.size()};
  if (!out.boundary && std::isfinite(f[best - 1]) && std::isfinite(f[best + 1])) {
    const double left = f[best - 1], mid = f[best], right = f[best + 1];
    const double curvature = left - 2.0 * mid + right;
    if (curvature < 0.0) {
      const double shift = 0.5 * (left - right) / curvature;
      out.arg += shift * h;
      out.value = mid - (left - right) * (left - right) / (8.0 * curvature);
    }
  }
  return out;
}

// Row-major decomposition of a flat index on a grid with `points` per axis.
std::vector<int> unflatten(std::size_t flat, int points, int dims) {
  std::vector<int> idx(dims);
  for (int d = dims - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(flat % points);
    flat /= points;
  }
  return idx;
}

std::size_t flatten(const std::vector<int>& idx, int points) {
  std::size_t flat = 0;
  for (int k : idx) flat = flat * points + static_cast<std::size_t>(k);
  return flat;
}

std::size_t ipow(int base, int exp) {
  std::size_t out = 1;
  for (int k = 0; k < exp; ++k) out *= static_cast<std::size_t>(base);
  return out;
}

}  // namespace

double Potential::operator()(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& term : terms) {
    double phase = term.phase;
    for (Eigen::Index k = 0; k < x.size(); ++k) phase += 2.0 * std::numbers::pi * term.wave(k) * x(k);
    v += term.amplitude * std::cos(phase);
  }
  return v;
}

const char* to_string(HamiltonianKind kind) {
  return kind == HamiltonianKind::table ? "table" : "quadratic_minus_potential";
}

HamiltonianSpec::HamiltonianSpec(int dimension, std::vector<HamiltonianComponent> components)
    : n_(dimension), components_(std::move(components)) {
  if (n_ < 1 || n_ > 2) throw InvalidArgument("HamiltonianSpec: dimension must be 1 or 2");
  if (components_.empty()) throw InvalidArgument("HamiltonianSpec: no components");
  for (const auto& c : components_) {
    if (c.kind == HamiltonianKind::quadratic_minus_potential) {
      for (const auto& term : c.potential.terms)
        if (term.wave.size() != n_)
          throw InvalidArgument("HamiltonianSpec: cosine wave vector has wrong dimension");
    } else {
      const auto& t = c.table;
      if (n_ != 1) throw InvalidArgument("HamiltonianSpec: tables are supported for N = 1 only");
      if (t.x_points < 1 || t.p_points < 2 || !(t.p_max > t.p_min) ||
          t.values.size() != static_cast<std::size_t>(t.x_points) * t.p_points)
        throw InvalidArgument("HamiltonianSpec: malformed Hamiltonian table");
      for (double v : t.values)
        if (!std::isfinite(v)) throw InvalidArgument("HamiltonianSpec: non-finite table value");
    }
  }
}

double HamiltonianSpec::operator()(int i, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& p) const {
  const auto& c = components_[i];
  if (c.kind == HamiltonianKind::quadratic_minus_potential)
    return 0.5 * p.squaredNorm() - c.potential(x);

  const auto& t = c.table;
  const double pv = p(0);
  if (pv < t.p_min - 1e-12 || pv > t.p_max + 1e-12) return kInf;
  const double sx = TorusPointd::wrap(x(0)) * t.x_points;
  const int x0 = static_cast<int>(std::floor(sx)) % t.x_points;
  const int x1 = (x0 + 1) % t.x_points;
  const double wx = sx - std::floor(sx);
  const double hp = (t.p_max - t.p_min) / (t.p_points - 1);
  const double sp = std::clamp((pv - t.p_min) / hp, 0.0, static_cast<double>(t.p_points - 1));
  const int p0 = std::min(static_cast<int>(std::floor(sp)), t.p_points - 2);
  const double wp = sp - p0;
  auto at = [&](int ix, int ip) { return t.values[static_cast<std::size_t>(ix) * t.p_points + ip]; };
  return (1 - wx) * ((1 - wp) * at(x0, p0) + wp * at(x0, p0 + 1)) +
         wx * ((1 - wp) * at(x1, p0) + wp * at(x1, p0 + 1));
}

double HamiltonianSpec::momentum_limit(int i) const {
  const auto& c = components_.at(i);
  if (c.kind == HamiltonianKind::quadratic_minus_potential) return kInf;
  return std::min(-c.table.p_min, c.table.p_max);
}

void HamiltonianSpec::validate(int x_points, double momentum_radius, int momentum_points,
                               double M) const {
  if (x_points < 1 || momentum_points < 2 || !(momentum_radius > 0.0) || !(M > 0.0))
    throw InvalidArgument("HamiltonianSpec::validate: bad grid parameters");
  const std::size_t x_count = ipow(x_points, n_);
  const double root_n = std::sqrt(static_cast<double>(n_));
  for (int i = 0; i < count(); ++i) {
    const double radius = std::min(momentum_radius, momentum_limit(i));
    const double hp = 2.0 * radius / (momentum_points - 1);
    for (std::size_t fx = 0; fx < x_count; ++fx) {
      const auto xi = unflatten(fx, x_points, n_);
      Eigen::VectorXd x(n_);
      for (int d = 0; d < n_; ++d) x(d) = static_cast<double>(xi[d]) / x_points;
      const double h0 = (*this)(i, x, Eigen::VectorXd::Zero(n_));
      if (!std::isfinite(h0))
        throw InvalidArgument("H" + std::to_string(i) + " is not finite at p = 0");

      // Midpoint convexity along every axis through grid lines of the box.
      for (int axis = 0; axis < n_; ++axis) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n_);
        std::vector<double> line(momentum_points);
        for (int k = 0; k < momentum_points; ++k) {
          p(axis) = -radius + k * hp;
          line[k] = (*this)(i, x, p);
        }
        for (int k = 1; k + 1 < momentum_points; ++k) {
          if (!std::isfinite(line[k - 1]) || !std::isfinite(line[k + 1])) continue;
          if (line[k] > 0.5 * (line[k - 1] + line[k + 1]) + 1e-9)
            throw InvalidArgument("H" + std::to_string(i) + " is not convex in p");
        }
      }

      if (components_[i].kind == HamiltonianKind::table) continue;
      // Superlinearity margin on the faces of the momentum box.
      for (int axis = 0; axis < n_; ++axis) {
        for (double side : {-1.0, 1.0}) {
          Eigen::VectorXd p = Eigen::VectorXd::Zero(n_);
          p(axis) = side * radius;
          const double margin = (*this)(i, x, p) - root_n * M * p.norm() - h0;
          if (!(margin > 0.0))
            throw SuperlinearityViolation("H" + std::to_string(i) +
                                          " is not superlinear enough on the momentum box");
        }
      }
    }
  }
}

FenchelGrids FenchelGrids::defaults(int dimension) {
  FenchelGrids g;
  if (dimension >= 2) {
    g.x_points = 32;
    g.q_intervals = 32;
    g.p_intervals = 64;
  }
  return g;
}

LagrangianTable::LagrangianTable(int dimension, int count, double velocity_bound,
                                 FenchelGrids grids, std::vector<double> radii,
                                 std::vector<double> values, std::vector<double> argmax)
    : n_(dimension),
      m_(count),
      bound_(velocity_bound),
      grids_(grids),
      radii_(std::move(radii)),
      values_(std::move(values)),
      argmax_(std::move(argmax)) {
  const std::size_t expected =
      static_cast<std::size_t>(m_) * ipow(grids_.x_points, n_) * ipow(q_points(), n_);
  if (values_.size() != expected || argmax_.size() != expected * n_)
    throw InvalidArgument("LagrangianTable: storage size mismatch");
}

std::size_t LagrangianTable::flat(int i, const std::vector<int>& x_index,
                                  const std::vector<int>& q_index) const {
  const std::size_t xs = ipow(grids_.x_points, n_);
  const std::size_t qs = ipow(q_points(), n_);
  return (static_cast<std::size_t>(i) * xs + flatten(x_index, grids_.x_points)) * qs +
         flatten(q_index, q_points());
}

double LagrangianTable::node(int i, const std::vector<int>& x_index,
                             const std::vector<int>& q_index) const {
  return values_[flat(i, x_index, q_index)];
}

Eigen::VectorXd LagrangianTable::node_argmax(int i, const std::vector<int>& x_index,
                                             const std::vector<int>& q_index) const {
  const std::size_t base = flat(i, x_index, q_index) * n_;
  Eigen::VectorXd p(n_);
  for (int d = 0; d < n_; ++d) p(d) = argmax_[base + d];
  return p;
}

double LagrangianTable::operator()(int i, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& q) const {
  const int nx = grids_.x_points;
  const int nq = q_points();
  std::vector<int> x_lo(n_), q_lo(n_);
  std::vector<double> x_w(n_), q_w(n_);
  for (int d = 0; d < n_; ++d) {
    const double sx = TorusPointd::wrap(x(d)) * nx;
    const double fx = std::floor(sx);
    x_lo[d] = static_cast<int>(fx) % nx;
    x_w[d] = sx - fx;
    if (std::abs(q(d)) > bound_ * (1.0 + 1e-12))
      throw SentinelVelocity("velocity outside the tabulated box [-M, M]");
    const double sq = std::clamp((q(d) + bound_) / q_step(), 0.0, static_cast<double>(nq - 1));
    q_lo[d] = std::min(static_cast<int>(std::floor(sq)), nq - 2);
    q_w[d] = sq - q_lo[d];
  }
  double value = 0.0;
  std::vector<int> xi(n_), qi(n_);
  const int corners = 1 << (2 * n_);
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int d = 0; d < n_; ++d) {
      const bool xb = (c >> d) & 1;
      const bool qb = (c >> (n_ + d)) & 1;
      xi[d] = xb ? (x_lo[d] + 1) % nx : x_lo[d];
      qi[d] = q_lo[d] + (qb ? 1 : 0);
      w *= (xb ? x_w[d] : 1.0 - x_w[d]) * (qb ? q_w[d] : 1.0 - q_w[d]);
    }
    if (w == 0.0) continue;
    const double v = node(i, xi, qi);
    if (is_sentinel(v)) return kSentinel;
    value += w * v;
  }
  return value;
}

LagrangianTable fenchel_transform(const HamiltonianSpec& h, double velocity_bound,
                                  const FenchelGrids& grids) {
  if (!(velocity_bound > 0.0)) throw InvalidArgument("fenchel_transform: M must be > 0");
  const int n = h.dimension();
  const int m = h.count();
  const int nq = grids.q_intervals + 1;
  const int np = grids.p_intervals + 1;
  const std::size_t x_count = ipow(grids.x_points, n);
  const std::size_t q_count = ipow(nq, n);
  const double hq = 2.0 * velocity_bound / grids.q_intervals;

  std::vector<double> values(static_cast<std::size_t>(m) * x_count * q_count);
  std::vector<double> argmax(values.size() * n);
  std::vector<double> radii(m);

  for (int i = 0; i < m; ++i) {
    const bool is_table = h.component(i).kind == HamiltonianKind::table;
    double radius = grids.initial_radius > 0.0 ? grids.initial_radius : 2.0 * velocity_bound;
    radius = std::min(radius, h.momentum_limit(i));
    for (int attempt = 0;; ++attempt) {
      const double hp = 2.0 * radius / grids.p_intervals;
      bool escaped = false;
      for (std::size_t fx = 0; fx < x_count && !escaped; ++fx) {
        const auto xi = unflatten(fx, grids.x_points, n);
        Eigen::VectorXd x(n);
        for (int d = 0; d < n; ++d) x(d) = static_cast<double>(xi[d]) / grids.x_points;
        const std::size_t base = (static_cast<std::size_t>(i) * x_count + fx) * q_count;

        if (n == 1) {
          std::vector<double> hvals(np), f(np);
          for (int k = 0; k < np; ++k)
            hvals[k] = h(i, x, Eigen::VectorXd::Constant(1, -radius + k * hp));
          for (int iq = 0; iq < nq && !escaped; ++iq) {
            const double q = -velocity_bound + iq * hq;
            for (int k = 0; k < np; ++k) f[k] = (-radius + k * hp) * q - hvals[k];
            const GridMax best = grid_max(f, -radius, hp);
            if (best.boundary) {
              if (!is_table) {
                escaped = true;
                break;
              }
              values[base + iq] = LagrangianTable::kSentinel;
              argmax[base + iq] = best.arg;
              continue;
            }
            values[base + iq] = best.value;
            argmax[base + iq] = best.arg;
          }
          continue;
        }

        // N = 2: maximize over p1 for each p2 grid value, then over p2.
        std::vector<double> hvals(static_cast<std::size_t>(np) * np);
        for (int k1 = 0; k1 < np; ++k1)
          for (int k2 = 0; k2 < np; ++k2) {
            Eigen::Vector2d p(-radius + k1 * hp, -radius + k2 * hp);
            hvals[static_cast<std::size_t>(k1) * np + k2] = h(i, x, p);
          }
        std::vector<double> inner(np), outer(np), inner_arg(np);
        std::vector<bool> inner_boundary(np);
        for (int iq1 = 0; iq1 < nq && !escaped; ++iq1) {
          const double q1 = -velocity_bound + iq1 * hq;
          for (int k2 = 0; k2 < np; ++k2) {
            for (int k1 = 0; k1 < np; ++k1)
              inner[k1] = (-radius + k1 * hp) * q1 - hvals[static_cast<std::size_t>(k1) * np + k2];
            const GridMax g = grid_max(inner, -radius, hp);
            outer[k2] = g.value;
            inner_arg[k2] = g.arg;
            inner_boundary[k2] = g.boundary;
          }
          for (int iq2 = 0; iq2 < nq; ++iq2) {
            const double q2 = -velocity_bound + iq2 * hq;
            std::vector<double> f(np);
            for (int k2 = 0; k2 < np; ++k2) f[k2] = (-radius + k2 * hp) * q2 + outer[k2];
            const GridMax best = grid_max(f, -radius, hp);
            const std::size_t slot = base + static_cast<std::size_t>(iq1) * nq + iq2;
            if (best.boundary || inner_boundary[best.index]) {
              escaped = true;
              break;
            }
            values[slot] = best.value;
            argmax[slot * 2] = inner_arg[best.index];
            argmax[slot * 2 + 1] = best.arg;
          }
        }
      }
      if (!escaped) break;
      if (attempt >= grids.max_expansions)
        throw SuperlinearityViolation("fenchel_transform: argmax escapes the momentum box for H" +
                                      std::to_string(i));
      radius *= 2.0;
    }
    radii[i] = radius;
  }
  return LagrangianTable(n, m, velocity_bound, grids, std::move(radii), std::move(values),
                         std::move(argmax));
}

double lipschitz_estimate(const HamiltonianSpec& h, int x_points) {
  const int n = h.dimension();
  const std::size_t x_count = ipow(x_points, n);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  double level = -kInf;
  for (int i = 0; i < h.count(); ++i)
    for (std::size_t fx = 0; fx < x_count; ++fx) {
      const auto xi = unflatten(fx, x_points, n);
      Eigen::VectorXd x(n);
      for (int d = 0; d < n; ++d) x(d) = static_cast<double>(xi[d]) / x_points;
      level = std::max(level, h(i, x, zero));
    }

  // Rays along the axes and the diagonals.
  std::vector<Eigen::VectorXd> rays;
  for (int d = 0; d < n; ++d)
    for (double s : {-1.0, 1.0}) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
      r(d) = s;
      rays.push_back(r);
    }
  if (n == 2)
    for (double s1 : {-1.0, 1.0})
      for (double s2 : {-1.0, 1.0}) rays.push_back(Eigen::Vector2d(s1, s2));

  double ell = 0.0;
  for (int i = 0; i < h.count(); ++i)
    for (std::size_t fx = 0; fx < x_count; ++fx) {
      const auto xi = unflatten(fx, x_points, n);
      Eigen::VectorXd x(n);
      for (int d = 0; d < n; ++d) x(d) = static_cast<double>(xi[d]) / x_points;
      for (const auto& ray : rays) {
        double lo = 0.0, hi = 1.0;
        while (h(i, x, hi * ray) <= level && hi < 1e6) {
          lo = hi;
          hi *= 2.0;
        }
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (h(i, x, mid * ray) <= level ? lo : hi) = mid;
        }
        ell = std::max(ell, lo * ray.cwiseAbs().maxCoeff());
      }
    }
  return ell;
}

}  // namespace wkam
