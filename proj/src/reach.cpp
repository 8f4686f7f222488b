#include "lipreach/reach.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "lipreach/error.hpp"
#include "lipreach/oracle.hpp"
#include "parallel.hpp"

namespace lipreach::reach {

Box::Box(std::vector<double> lower, std::vector<double> upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw ModelError("box bounds have different lengths");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i])) throw ModelError("box bounds must be finite");
    if (lower_[i] > upper_[i]) {
      throw ModelError("box lower bound exceeds upper bound in dimension " + std::to_string(i + 1));
    }
  }
}

Box Box::unchecked(std::vector<double> lower, std::vector<double> upper) {
  Box b;
  b.lower_ = std::move(lower);
  b.upper_ = std::move(upper);
  return b;
}

bool Box::is_point() const {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (lower_[i] != upper_[i]) return false;
  }
  return true;
}

bool Box::contains(std::span<const double> p) const {
  if (p.size() != dim()) throw ModelError("point dimension does not match box");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(p[i] >= lower_[i] && p[i] <= upper_[i])) return false;
  }
  return true;
}

bool Box::contains(const Box& other) const {
  if (other.dim() != dim()) throw ModelError("box dimensions differ");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(other.lower_[i] >= lower_[i] && other.upper_[i] <= upper_[i])) return false;
  }
  return true;
}

bool Box::intersects(const Box& other) const {
  if (other.dim() != dim()) throw ModelError("box dimensions differ");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(other.lower_[i] <= upper_[i] && lower_[i] <= other.upper_[i])) return false;
  }
  return true;
}

BoundResult bound_state(std::shared_ptr<const sim::TrajectoryCache> cache, const Box& init, std::size_t time_index,
                        std::size_t dim, Direction dir, const optim::OptOptions& opts) {
  const auto& m = cache->model();
  if (init.dim() != m.state_dim()) throw ModelError("initial set dimension does not match the plant");
  const double t = cache->times().at(time_index);
  const int sign = dir == Direction::Min ? 1 : -1;
  const sim::Objective objective = sim::memoised_objective(std::move(cache), time_index, dim, sign);
  try {
    const optim::OptResult r = optim::minimize_nd(objective, init.lower(), init.upper(), opts);
    return {dir == Direction::Min ? r.lower_bound : -r.lower_bound, r.converged};
  } catch (const optim::OptimisationAborted& e) {
    throw Error(std::string(dir == Direction::Min ? "lower" : "upper") + " bound of x" + std::to_string(dim + 1) +
                " at t=" + std::to_string(t) + " failed: " + e.what());
  }
}

BoundResult bound_state(const sim::NncsModel& m, const Box& init, double t, std::size_t dim, Direction dir,
                        const optim::OptOptions& opts) {
  auto cache = std::make_shared<const sim::TrajectoryCache>(m, std::vector<double>{t});
  return bound_state(std::move(cache), init, 0, dim, dir, opts);
}

ReachTube reach_tube(const sim::NncsModel& m, const Box& init, std::span<const double> times,
                     const ReachOptions& opts) {
  opts.opt.validate();
  if (init.dim() != m.state_dim()) throw ModelError("initial set dimension does not match the plant");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0) || !std::isfinite(times[i])) throw ModelError("reach times must be positive");
    if (i > 0 && !(times[i] > times[i - 1])) throw ModelError("reach times must be strictly increasing");
  }

  ReachTube tube;
  tube.tolerance = opts.opt.tolerance;
  tube.max_iterations = opts.opt.max_iterations;
  if (times.empty()) return tube;

  const std::size_t n = m.state_dim();
  auto cache = std::make_shared<const sim::TrajectoryCache>(m, std::vector<double>(times.begin(), times.end()),
                                                            opts.cache);

  struct TaskResult {
    BoundResult bound;
    std::string error;
  };
  const std::size_t tasks = times.size() * n * 2;
  std::vector<TaskResult> results(tasks);
  detail::parallel_for(tasks, opts.threads, [&](std::size_t task) {
    const std::size_t ti = task / (2 * n);
    const std::size_t dim = (task / 2) % n;
    const Direction dir = task % 2 == 0 ? Direction::Min : Direction::Max;
    try {
      results[task].bound = bound_state(cache, init, ti, dim, dir, opts.opt);
    } catch (const Error& e) {
      results[task].error = e.what();
      results[task].bound = {dir == Direction::Min ? -std::numeric_limits<double>::infinity()
                                                   : std::numeric_limits<double>::infinity(),
                             false};
    }
  });

  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    TubeEntry e;
    e.time = times[ti];
    std::vector<double> lo(n);
    std::vector<double> hi(n);
    e.converged_min.resize(n);
    e.converged_max.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
      const TaskResult& rmin = results[ti * 2 * n + 2 * d];
      const TaskResult& rmax = results[ti * 2 * n + 2 * d + 1];
      lo[d] = rmin.bound.value;
      hi[d] = rmax.bound.value;
      e.converged_min[d] = rmin.bound.converged;
      e.converged_max[d] = rmax.bound.converged;
      if (!rmin.error.empty()) e.errors.push_back(rmin.error);
      if (!rmax.error.empty()) e.errors.push_back(rmax.error);
    }
    e.box = e.failed() ? Box::unchecked(std::move(lo), std::move(hi)) : Box(std::move(lo), std::move(hi));
    tube.entries.push_back(std::move(e));
  }
  return tube;
}

namespace {

std::vector<sim::State> corners(const Box& box) {
  std::set<sim::State> seen;
  std::vector<sim::State> out;
  const std::size_t n = box.dim();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    sim::State c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = (mask >> i) & 1 ? box.upper()[i] : box.lower()[i];
    if (seen.insert(c).second) out.push_back(std::move(c));
  }
  return out;
}

std::optional<Witness> search_witness(const ReachTube& tube, const SafetySpec& spec, const sim::NncsModel& m,
                                      const Box& init, const WitnessOptions& wopts) {
  std::vector<double> times;
  for (const auto& e : tube.entries) times.push_back(e.time);

  std::vector<sim::State> candidates = corners(init);
  for (auto& p : oracle::lattice(init, wopts.grid_points)) candidates.push_back(std::move(p));
  if (candidates.size() > wopts.max_simulations) candidates.resize(wopts.max_simulations);

  for (const auto& x0 : candidates) {
    sim::Trajectory traj;
    try {
      traj = sim::trajectory(m, x0, times);
    } catch (const DivergenceError&) {
      continue;
    }
    for (const auto& s : traj.samples) {
      for (std::size_t a = 0; a < spec.avoid.size(); ++a) {
        if (spec.avoid[a].contains(s.state)) return Witness{x0, s.time, a, std::move(traj)};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

Verdict check_safety(const ReachTube& tube, const SafetySpec& spec, const sim::NncsModel& m, const Box& init,
                     const WitnessOptions& wopts) {
  const std::size_t n = m.state_dim();
  if (init.dim() != n) throw ModelError("initial set dimension does not match the plant");
  for (const auto& a : spec.avoid) {
    if (a.dim() != n) throw ModelError("avoid box dimension does not match the plant");
  }
  if (spec.goal && spec.goal->dim() != n) throw ModelError("goal box dimension does not match the plant");
  for (const auto& e : tube.entries) {
    if (e.box.dim() != n) throw ModelError("tube box dimension does not match the plant");
  }

  Verdict v;
  std::optional<double> avoid_conflict;
  for (const auto& e : tube.entries) {
    for (const auto& a : spec.avoid) {
      if (e.box.intersects(a)) {
        avoid_conflict = e.time;
        break;
      }
    }
    if (avoid_conflict) break;
  }

  if (avoid_conflict) {
    if (auto w = search_witness(tube, spec, m, init, wopts)) {
      v.outcome = Outcome::Unsafe;
      v.reason = "trajectory from a concrete initial state enters avoid box " + std::to_string(w->avoid_index + 1);
      v.witness = std::move(w);
      return v;
    }
    v.outcome = Outcome::Unknown;
    v.conflict_time = avoid_conflict;
    v.reason = "reachable box overlaps an avoid box but no witness was found";
    return v;
  }

  if (spec.goal) {
    if (tube.entries.empty()) {
      v.outcome = Outcome::Unknown;
      v.reason = "empty tube cannot establish the goal";
      return v;
    }
    const TubeEntry& last = tube.entries.back();
    if (last.failed() || !spec.goal->contains(last.box)) {
      v.outcome = Outcome::Unknown;
      v.conflict_time = last.time;
      v.reason = "final reachable box is not contained in the goal box";
      return v;
    }
  }
  v.outcome = Outcome::Safe;
  v.reason = "no reachable box meets an avoid box";
  return v;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Safe: return "safe";
    case Outcome::Unsafe: return "unsafe";
    case Outcome::Unknown: return "unknown";
  }
  return "unknown";
}

}  // namespace lipreach::reach
