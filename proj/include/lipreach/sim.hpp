#pragma once

// Closed-loop simulation of a neural-network-controlled plant.
//
// At every control boundary i*delta the controller output u = sigma(h(x))
// is computed once and held while the plant x' = f(x, u) is integrated with
// fixed-step RK4 up to the next boundary (or up to the requested time).

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "lipreach/expr.hpp"
#include "lipreach/nn.hpp"

namespace lipreach::sim {

using State = std::vector<double>;

/// Any |x_k| above this aborts the simulation with DivergenceError.
inline constexpr double kDivergenceLimit = 1e12;
inline constexpr std::size_t kDefaultSubsteps = 20;

class NncsModel {
public:
  /// `measurement` empty means y = x. Throws ModelError when an expression
  /// references a variable outside x1..xn / u1..um or when the measurement
  /// width differs from the controller input width.
  NncsModel(std::vector<expr::Ast> dynamics, std::vector<expr::Ast> measurement, nn::Controller controller,
            double control_step, std::size_t substeps = kDefaultSubsteps);

  std::size_t state_dim() const noexcept { return dynamics_.size(); }
  std::size_t input_dim() const noexcept { return controller_.output_dim(); }
  double control_step() const noexcept { return control_step_; }
  std::size_t substeps() const noexcept { return substeps_; }
  bool identity_measurement() const noexcept { return measurement_.empty(); }

  const std::vector<expr::Ast>& dynamics() const noexcept { return dynamics_; }
  const std::vector<expr::Ast>& measurement() const noexcept { return measurement_; }
  const nn::Controller& controller() const noexcept { return controller_; }

  NncsModel with_substeps(std::size_t substeps) const;

private:
  std::vector<expr::Ast> dynamics_;
  std::vector<expr::Ast> measurement_;
  nn::Controller controller_;
  double control_step_;
  std::size_t substeps_;
};

/// Counting hooks for tests and diagnostics.
struct SimStats {
  std::uint64_t controller_calls = 0;
  std::uint64_t control_steps = 0;
  std::uint64_t rk4_steps = 0;
};

struct Sample {
  double time = 0.0;
  State state;
};

struct Trajectory {
  State x0;
  std::vector<Sample> samples;
};

/// Number of whole control steps before `t` and the remaining time inside
/// the last step. Times within 1e-9 relative of a boundary snap onto it.
struct StepSplit {
  std::uint64_t full_steps = 0;
  double remainder = 0.0;
};
StepSplit split_time(double t, double control_step);

/// One classical RK4 step of x' = f(x, u) with u held constant.
State rk4_step(std::span<const expr::Ast> f, std::span<const double> x, std::span<const double> u, double h);

/// phi(x0, t). Throws DivergenceError when the state leaves the finite range.
State simulate(const NncsModel& m, std::span<const double> x0, double t, SimStats* stats = nullptr);

/// States at every requested time in one pass; bit-identical to calling
/// simulate() at each time. `times` must be ascending and non-negative.
Trajectory trajectory(const NncsModel& m, std::span<const double> x0, std::span<const double> times,
                      SimStats* stats = nullptr);

/// Thread-safe memo of closed-loop trajectories over a fixed output grid,
/// keyed by the exact bit pattern of x0. Trajectories are extended lazily,
/// so a query at an early time only integrates up to that time.
class TrajectoryCache {
public:
  TrajectoryCache(const NncsModel& model, std::vector<double> times, bool enabled = true,
                  std::size_t max_entries = std::size_t{1} << 18);

  TrajectoryCache(const TrajectoryCache&) = delete;
  TrajectoryCache& operator=(const TrajectoryCache&) = delete;

  const NncsModel& model() const noexcept { return model_; }
  const std::vector<double>& times() const noexcept { return times_; }
  bool enabled() const noexcept { return enabled_; }

  /// phi(x0, times()[time_index]).
  State state(std::span<const double> x0, std::size_t time_index) const;
  double component(std::span<const double> x0, std::size_t time_index, std::size_t dim) const;

  std::uint64_t hits() const noexcept { return hits_.load(); }
  /// Number of distinct x0 whose trajectory had to be integrated.
  std::uint64_t integrations() const noexcept { return misses_.load(); }

private:
  struct Key {
    std::vector<std::uint64_t> bits;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  struct Entry;

  std::shared_ptr<Entry> lookup(std::span<const double> x0) const;
  void fill(Entry& e, std::size_t time_index) const;

  NncsModel model_;
  std::vector<double> times_;
  std::vector<StepSplit> splits_;
  bool enabled_;
  std::size_t max_entries_;

  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<Key, std::shared_ptr<Entry>, KeyHash> entries_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
};

using Objective = std::function<double(std::span<const double>)>;

/// x0 -> sign * phi_dim(x0, times[time_index]); sign is +1 or -1.
Objective memoised_objective(std::shared_ptr<const TrajectoryCache> cache, std::size_t time_index,
                             std::size_t dim, int sign);

}  // namespace lipreach::sim
