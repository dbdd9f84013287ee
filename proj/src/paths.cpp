#include "wkam/paths.hpp"

#include <algorithm>

namespace wkam {

JumpPath::JumpPath(double horizon, int initial_index, std::vector<double> jump_times,
                   std::vector<int> post_jump_indices)
    : horizon_(horizon),
      initial_(initial_index),
      jump_times_(std::move(jump_times)),
      post_jump_(std::move(post_jump_indices)) {
  if (!(horizon_ >= 0.0)) throw InvalidArgument("JumpPath: horizon must be >= 0");
  if (initial_ < 0) throw InvalidArgument("JumpPath: negative initial index");
  if (jump_times_.size() != post_jump_.size())
    throw InvalidArgument("JumpPath: jump times and indices differ in length");
  int previous = initial_;
  double last = 0.0;
  for (std::size_t k = 0; k < jump_times_.size(); ++k) {
    if (!(jump_times_[k] > last) || jump_times_[k] > horizon_)
      throw InvalidArgument("JumpPath: jump times must increase strictly within (0, horizon]");
    if (post_jump_[k] == previous || post_jump_[k] < 0)
      throw InvalidArgument("JumpPath: a jump must change the index");
    previous = post_jump_[k];
    last = jump_times_[k];
  }
}

int JumpPath::operator()(double t) const {
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return initial_;
  return post_jump_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

std::vector<int> JumpPath::grid_values(double step, int steps) const {
  std::vector<int> values(static_cast<std::size_t>(steps) + 1);
  std::size_t next = 0;
  int current = initial_;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * step;
    while (next < jump_times_.size() && jump_times_[next] <= t) current = post_jump_[next++];
    values[k] = current;
  }
  return values;
}

std::vector<JumpPath::Piece> JumpPath::pieces(double t0, double t1) const {
  std::vector<Piece> out;
  if (!(t1 > t0)) return out;
  auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t0);
  double start = t0;
  int index = (*this)(t0);
  for (; it != jump_times_.end() && *it < t1; ++it) {
    out.push_back({start, *it, index});
    start = *it;
    index = post_jump_[static_cast<std::size_t>(it - jump_times_.begin())];
  }
  out.push_back({start, t1, index});
  return out;
}

Cylinder::Cylinder(std::vector<double> times, std::vector<int> indices)
    : times_(std::move(times)), indices_(std::move(indices)) {
  if (times_.empty() || times_.size() != indices_.size())
    throw InvalidArgument("Cylinder: need k >= 1 matching times and indices");
  if (times_.front() < 0.0) throw InvalidArgument("Cylinder: times must be nonnegative");
  for (std::size_t l = 1; l < times_.size(); ++l)
    if (!(times_[l] > times_[l - 1])) throw InvalidArgument("Cylinder: times must increase");
}

bool Cylinder::contains(const JumpPath& path) const {
  for (std::size_t l = 0; l < times_.size(); ++l)
    if (path(times_[l]) != indices_[l]) return false;
  return true;
}

JumpPath PathSampler::sample(const ProbabilityVectord& a, double horizon) {
  if (a.size() != a_.size()) throw InvalidArgument("sample_path: dimension mismatch");
  const int initial = rng_.categorical(a.vector(), 1.0);
  return sample_from(initial, horizon);
}

JumpPath PathSampler::sample_from(int initial_index, double horizon) {
  if (!(horizon > 0.0)) throw InvalidArgument("sample_path: horizon must be > 0");
  const int m = a_.size();
  std::vector<double> times;
  std::vector<int> indices;
  std::vector<double> weights(m);
  int current = initial_index;
  double t = 0.0;
  for (;;) {
    const double rate = a_(current, current);
    t += rng_.exponential(rate);
    if (t > horizon) break;
    for (int j = 0; j < m; ++j) weights[j] = j == current ? 0.0 : -a_(current, j);
    current = rng_.categorical(weights, rate);
    times.push_back(t);
    indices.push_back(current);
  }
  return JumpPath(horizon, initial_index, std::move(times), std::move(indices));
}

JumpPath shift(const JumpPath& path, double h) {
  if (h < 0.0) throw InvalidArgument("shift: h must be >= 0");
  if (h > path.horizon()) throw ShiftBeyondHorizon("shift: h exceeds the path horizon");
  if (h == 0.0) return path;
  const auto& times = path.jump_times();
  const auto& indices = path.post_jump_indices();
  const auto first = std::upper_bound(times.begin(), times.end(), h);
  std::vector<double> shifted;
  std::vector<int> shifted_indices;
  const int initial = path(h);
  double last = 0.0;
  for (auto it = first; it != times.end(); ++it) {
    const double t = *it - h;
    // Rounding can collapse a jump onto the new origin; fold it in.
    if (!(t > last)) continue;
    shifted.push_back(t);
    shifted_indices.push_back(indices[static_cast<std::size_t>(it - times.begin())]);
    last = t;
  }
  return JumpPath(path.horizon() - h, initial, std::move(shifted), std::move(shifted_indices));
}

}  // namespace wkam
