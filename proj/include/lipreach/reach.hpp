#pragma once

// Reachable boxes from independent per-time optimisation problems, and
// safety verdicts against avoid/goal boxes.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipreach/optim.hpp"
#include "lipreach/sim.hpp"

namespace lipreach::reach {

class Box {
public:
  Box() = default;
  /// Throws ModelError unless sizes match, entries are finite and lower <= upper.
  Box(std::vector<double> lower, std::vector<double> upper);

  /// Box without validation; used for partially failed tube entries.
  static Box unchecked(std::vector<double> lower, std::vector<double> upper);

  std::size_t dim() const noexcept { return lower_.size(); }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  double width(std::size_t i) const { return upper_[i] - lower_[i]; }
  bool is_point() const;

  bool contains(std::span<const double> p) const;
  bool contains(const Box& other) const;
  bool intersects(const Box& other) const;

  /// Area of the projection onto axes (i, j).
  double projected_area(std::size_t i, std::size_t j) const { return width(i) * width(j); }

private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

enum class Direction { Min, Max };

struct BoundResult {
  double value = 0.0;
  bool converged = false;
};

/// Certified lower (Min) or upper (Max) bound of phi_dim(x0, t) over X0.
/// Throws Error naming (dim, t) when the simulation diverges.
BoundResult bound_state(const sim::NncsModel& m, const Box& init, double t, std::size_t dim, Direction dir,
                        const optim::OptOptions& opts);

/// Same, reusing a shared trajectory cache; `time_index` indexes cache.times().
BoundResult bound_state(std::shared_ptr<const sim::TrajectoryCache> cache, const Box& init, std::size_t time_index,
                        std::size_t dim, Direction dir, const optim::OptOptions& opts);

struct TubeEntry {
  double time = 0.0;
  Box box;
  std::vector<bool> converged_min;
  std::vector<bool> converged_max;
  /// One message per failed (dim, direction); empty when all succeeded.
  std::vector<std::string> errors;

  bool failed() const noexcept { return !errors.empty(); }
};

struct ReachTube {
  std::vector<TubeEntry> entries;
  double tolerance = 0.0;
  std::size_t max_iterations = 0;
};

struct ReachOptions {
  optim::OptOptions opt;
  unsigned threads = 1;
  bool cache = true;
};

/// One box per requested time from 2n independent bound_state problems.
/// A failed problem leaves an infinite bound and an error in that entry.
ReachTube reach_tube(const sim::NncsModel& m, const Box& init, std::span<const double> times,
                     const ReachOptions& opts);

struct SafetySpec {
  std::vector<Box> avoid;
  std::optional<Box> goal;
  double horizon = 0.0;
};

enum class Outcome { Safe, Unsafe, Unknown };

struct Witness {
  std::vector<double> x0;
  double time = 0.0;
  std::size_t avoid_index = 0;
  sim::Trajectory trajectory;
};

struct Verdict {
  Outcome outcome = Outcome::Unknown;
  std::optional<Witness> witness;      // Unsafe
  std::optional<double> conflict_time; // Unknown
  std::string reason;
};

struct WitnessOptions {
  std::size_t grid_points = 1000;
  std::size_t max_simulations = 10000;
};

/// Safe iff every box misses every avoid box and the last box lies inside
/// the goal. An overlap triggers a witness search over the corners of X0 and
/// a lattice; a trajectory entering an avoid box at a tube time yields
/// Unsafe, otherwise the verdict is Unknown.
Verdict check_safety(const ReachTube& tube, const SafetySpec& spec, const sim::NncsModel& m, const Box& init,
                     const WitnessOptions& wopts = {});

std::string_view outcome_name(Outcome o);

}  // namespace lipreach::reach
