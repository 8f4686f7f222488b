#pragma once

// Deterministic Lipschitzian global minimisation.
//
// The 1D solver keeps a sorted partition a_0 < a_1 < ... < a_n of the domain,
// evaluates the objective at every edge and bounds each sub-interval from
// below by the sawtooth characteristic
//
//     R_i   = (f_i + f_{i+1}) / 2 - l_i (a_{i+1} - a_i) / 2
//     x^R_i = (f_i - f_{i+1}) / (2 l_i) + (a_i + a_{i+1}) / 2
//
// At every iteration the interval with the smallest R_i is split at x^R_i,
// until the best observed value is within epsilon of min_i R_i. The slope
// bound l_i is fixed, a dynamically updated global estimate, or a local
// estimate blending neighbouring secant slopes with the global one.
//
// Box domains are handled by nesting: the outer 1D objective over x_1 is the
// lower bound of the inner minimisation over (x_2, ..., x_n).

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipreach/error.hpp"

namespace lipreach::optim {

inline constexpr double kDefaultReliability = 1.5;
inline constexpr double kDefaultSlopeFloor = 1e-8;
inline constexpr double kDefaultTolerance = 0.0005;
inline constexpr std::size_t kDefaultMaxIterations = 10000;
inline constexpr std::size_t kDefaultSeedEdges = 5;

enum class LipMode { Fixed, GlobalDynamic, LocalTuning };

struct LipStrategy {
  LipMode mode = LipMode::LocalTuning;
  double constant = 0.0;                     // Fixed only
  double reliability = kDefaultReliability;  // r > 1
  double floor = kDefaultSlopeFloor;         // xi > 0

  static LipStrategy fixed(double lipschitz);
  static LipStrategy global(double r = kDefaultReliability);
  static LipStrategy local(double r = kDefaultReliability);

  /// Throws ModelError when r <= 1, xi <= 0 or a fixed constant is not positive.
  void validate() const;
};

struct OptOptions {
  double tolerance = kDefaultTolerance;            // epsilon
  std::size_t max_iterations = kDefaultMaxIterations;  // k_max, per dimension
  LipStrategy strategy;
  /// Edges of the initial uniform partition (>= 2).
  std::size_t seed_edges = kDefaultSeedEdges;

  void validate() const;
};

struct IntervalRecord {
  double left = 0.0;
  double right = 0.0;
  double f_left = 0.0;
  double f_right = 0.0;
  double lipschitz = 0.0;
  double characteristic = 0.0;
  double candidate = 0.0;
};

struct Characteristic {
  double value;
  double candidate;
};

/// Sawtooth lower bound of one interval and its split point. The split point
/// is kept at least 1e-12 * width away from either edge.
Characteristic characteristic(const IntervalRecord& rec);

struct Edge {
  double a;
  double f;
};

/// max(xi, r * max_i |f_{i+1} - f_i| / (a_{i+1} - a_i)) over sorted edges.
double update_global_L(std::span<const Edge> edges, double r, double floor = kDefaultSlopeFloor);

/// max(xi, r * max{m_prev, m, m_next, M * d / D}); missing neighbours of
/// boundary intervals are passed as nullopt.
double local_lip(std::optional<double> m_prev, double m, std::optional<double> m_next, double M, double d, double D,
                 double r, double floor = kDefaultSlopeFloor);

struct OptResult {
  double lower_bound = 0.0;   // R_min
  double best_value = 0.0;    // best observed objective value
  std::vector<double> argmin; // where best_value was observed
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Per-iteration snapshot passed to an observer.
struct IterationInfo {
  std::size_t iteration;  // 1-based
  double lower_bound;
  double best_value;
  std::size_t intervals;
};

using Objective1d = std::function<double(double)>;
using ObjectiveNd = std::function<double(std::span<const double>)>;
using Observer = std::function<void(const IterationInfo&)>;

/// Raised when the objective throws; carries the result reached so far
/// (not converged) and the original message.
class OptimisationAborted : public Error {
public:
  OptimisationAborted(OptResult partial, const std::string& message)
      : Error(message), partial_(std::move(partial)) {}
  const OptResult& partial() const noexcept { return partial_; }

private:
  OptResult partial_;
};

/// Minimises f over [a, b]. A degenerate domain (a == b) returns f(a).
OptResult minimize_1d(const Objective1d& f, double a, double b, const OptOptions& opts,
                      const Observer& observer = {});

/// Nested minimisation over the box [lower, upper]. Every level uses the same
/// epsilon and k_max, so a converged result satisfies
/// best_value - lower_bound <= n * epsilon. Degenerate axes are fixed.
OptResult minimize_nd(const ObjectiveNd& f, std::span<const double> lower, std::span<const double> upper,
                      const OptOptions& opts);

}  // namespace lipreach::optim
