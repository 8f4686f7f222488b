#include "lipreach/optim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

namespace lipreach::optim {

LipStrategy LipStrategy::fixed(double lipschitz) {
  LipStrategy s;
  s.mode = LipMode::Fixed;
  s.constant = lipschitz;
  return s;
}

LipStrategy LipStrategy::global(double r) {
  LipStrategy s;
  s.mode = LipMode::GlobalDynamic;
  s.reliability = r;
  return s;
}

LipStrategy LipStrategy::local(double r) {
  LipStrategy s;
  s.mode = LipMode::LocalTuning;
  s.reliability = r;
  return s;
}

void LipStrategy::validate() const {
  if (!(floor > 0.0)) throw ModelError("slope floor must be > 0");
  if (mode == LipMode::Fixed) {
    if (!(constant > 0.0) || !std::isfinite(constant)) throw ModelError("fixed Lipschitz constant must be > 0");
  } else if (!(reliability > 1.0) || !std::isfinite(reliability)) {
    throw ModelError("reliability parameter r must be > 1");
  }
}

void OptOptions::validate() const {
  if (!(tolerance > 0.0)) throw ModelError("tolerance must be > 0");
  if (max_iterations < 1) throw ModelError("max_iterations must be >= 1");
  if (seed_edges < 2) throw ModelError("seed_edges must be >= 2");
  strategy.validate();
}

Characteristic characteristic(const IntervalRecord& rec) {
  const double l = rec.lipschitz;
  const double width = rec.right - rec.left;
  const double value = (rec.f_left + rec.f_right) / 2.0 + l * (rec.left - rec.right) / 2.0;
  double candidate = (rec.f_left - rec.f_right) / (2.0 * l) + (rec.right + rec.left) / 2.0;
  const double margin = 1e-12 * width;
  candidate = std::clamp(candidate, rec.left + margin, rec.right - margin);
  return {value, candidate};
}

double update_global_L(std::span<const Edge> edges, double r, double floor) {
  double slope = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    slope = std::max(slope, std::fabs(edges[i + 1].f - edges[i].f) / (edges[i + 1].a - edges[i].a));
  }
  return std::max(floor, r * slope);
}

double local_lip(std::optional<double> m_prev, double m, std::optional<double> m_next, double M, double d, double D,
                 double r, double floor) {
  double v = std::max(m, M * d / D);
  if (m_prev) v = std::max(v, *m_prev);
  if (m_next) v = std::max(v, *m_next);
  return std::max(floor, r * v);
}

namespace {

// Partition of [a, b] into intervals keyed by left edge, with a priority
// index on the characteristic value. Ties in R resolve to the lowest left
// edge, i.e. the lowest interval index.
class Partition {
public:
  struct Interval {
    double right;
    double f_left;
    double f_right;
    double slope;
    double width;
    double lipschitz = 0.0;
    double value = 0.0;
    double candidate = 0.0;
    bool queued = false;
  };
  using Iter = std::map<double, Interval>::iterator;

  explicit Partition(const LipStrategy& s) : s_(s) {}

  void add(double left, double right, double f_left, double f_right) {
    Interval iv{right, f_left, f_right, std::fabs(f_right - f_left) / (right - left), right - left};
    slopes_.insert(iv.slope);
    widths_.insert(iv.width);
    intervals_.emplace(left, iv);
  }

  void rebuild() {
    queue_.clear();
    M_ = *slopes_.rbegin();
    D_ = *widths_.rbegin();
    for (auto it = intervals_.begin(); it != intervals_.end(); ++it) {
      it->second.queued = false;
      refresh(it);
    }
  }

  std::pair<double, Iter> best() {
    const auto& top = *queue_.begin();
    return {top.first, intervals_.find(top.second)};
  }

  std::size_t size() const { return intervals_.size(); }

  // Replaces `it` with [left, x] and [x, right]; returns false when the
  // interval cannot be split in floating point.
  bool split(Iter it, double x, double fx) {
    const double left = it->first;
    const Interval old = it->second;
    if (!(x > left && x < old.right)) return false;

    queue_.erase({old.value, left});
    slopes_.erase(slopes_.find(old.slope));
    widths_.erase(widths_.find(old.width));
    intervals_.erase(it);
    add(left, x, old.f_left, fx);
    add(x, old.right, fx, old.f_right);

    const double M = *slopes_.rbegin();
    const double D = *widths_.rbegin();
    const bool globals_changed = M != M_ || D != D_;
    if (s_.mode == LipMode::GlobalDynamic && M != M_) {
      rebuild();
    } else if (s_.mode == LipMode::LocalTuning && globals_changed) {
      rebuild();
    } else {
      M_ = M;
      D_ = D;
      auto lo = intervals_.find(left);
      auto hi = std::next(lo);
      if (s_.mode == LipMode::LocalTuning) {
        if (lo != intervals_.begin()) refresh(std::prev(lo));
        if (std::next(hi) != intervals_.end()) refresh(std::next(hi));
      }
      refresh(lo);
      refresh(hi);
    }
    return true;
  }

private:
  double lipschitz_of(Iter it) const {
    switch (s_.mode) {
      case LipMode::Fixed:
        return s_.constant;
      case LipMode::GlobalDynamic:
        return std::max(s_.floor, s_.reliability * M_);
      case LipMode::LocalTuning: {
        std::optional<double> prev;
        std::optional<double> next;
        if (it != intervals_.begin()) prev = std::prev(it)->second.slope;
        if (auto n = std::next(it); n != intervals_.end()) next = n->second.slope;
        return local_lip(prev, it->second.slope, next, M_, it->second.width, D_, s_.reliability, s_.floor);
      }
    }
    return s_.floor;
  }

  void refresh(Iter it) {
    Interval& iv = it->second;
    if (iv.queued) queue_.erase({iv.value, it->first});
    iv.lipschitz = lipschitz_of(it);
    const Characteristic c = characteristic({it->first, iv.right, iv.f_left, iv.f_right, iv.lipschitz, 0.0, 0.0});
    iv.value = c.value;
    iv.candidate = c.candidate;
    queue_.emplace(iv.value, it->first);
    iv.queued = true;
  }

  LipStrategy s_;
  std::map<double, Interval> intervals_;
  std::set<std::pair<double, double>> queue_;
  std::multiset<double> slopes_;
  std::multiset<double> widths_;
  double M_ = 0.0;
  double D_ = 0.0;
};

}  // namespace

OptResult minimize_1d(const Objective1d& f, double a, double b, const OptOptions& opts, const Observer& observer) {
  opts.validate();
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b)) throw ModelError("minimize_1d needs a finite a <= b");

  OptResult result;
  auto evaluate = [&](double x) {
    double v;
    try {
      v = f(x);
    } catch (const std::exception& e) {
      result.converged = false;
      throw OptimisationAborted(result, e.what());
    }
    ++result.evaluations;
    if (result.argmin.empty() || v < result.best_value) {
      result.best_value = v;
      result.argmin = {x};
    }
    return v;
  };

  if (a == b) {
    const double v = evaluate(a);
    result.lower_bound = v;
    result.iterations = 1;
    result.converged = true;
    if (observer) observer({1, v, v, 0});
    return result;
  }

  Partition part(opts.strategy);
  {
    const std::size_t n = opts.seed_edges;
    std::vector<double> xs(n);
    std::vector<double> fs(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
      fs[i] = evaluate(xs[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) part.add(xs[i], xs[i + 1], fs[i], fs[i + 1]);
    part.rebuild();
  }

  for (std::size_t k = 1;; ++k) {
    auto [lower, it] = part.best();
    result.lower_bound = lower;
    result.iterations = k;
    if (observer) observer({k, lower, result.best_value, part.size()});
    if (result.best_value - lower <= opts.tolerance) {
      result.converged = true;
      break;
    }
    if (k >= opts.max_iterations) break;
    const double x = it->second.candidate;
    const double fx = evaluate(x);
    if (!part.split(it, x, fx)) break;
  }
  return result;
}

namespace {

struct Nested {
  const ObjectiveNd& f;
  std::span<const double> lower;
  std::span<const double> upper;
  const OptOptions& opts;
  std::vector<double> point;
  OptResult total;
  bool inner_converged = true;

  // Minimises over axes d..n-1 with point[0..d-1] fixed.
  OptResult level(std::size_t d) {
    const std::size_t n = point.size();
    if (d + 1 == n) {
      return minimize_1d(
          [this, d](double x) {
            point[d] = x;
            const double v = f(point);
            ++total.evaluations;
            if (total.argmin.empty() || v < total.best_value) {
              total.best_value = v;
              total.argmin = point;
            }
            return v;
          },
          lower[d], upper[d], opts);
    }
    return minimize_1d(
        [this, d](double x) {
          point[d] = x;
          const OptResult inner = level(d + 1);
          inner_converged = inner_converged && inner.converged;
          return inner.lower_bound;
        },
        lower[d], upper[d], opts);
  }
};

}  // namespace

OptResult minimize_nd(const ObjectiveNd& f, std::span<const double> lower, std::span<const double> upper,
                      const OptOptions& opts) {
  opts.validate();
  if (lower.empty() || lower.size() != upper.size()) throw ModelError("minimize_nd needs matching non-empty bounds");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw ModelError("minimize_nd needs a finite box with lower <= upper");
    }
  }

  if (lower.size() == 1) {
    OptResult r = minimize_1d([&f](double x) { return f(std::span<const double>(&x, 1)); }, lower[0], upper[0], opts);
    return r;
  }

  Nested nested{f, lower, upper, opts, std::vector<double>(lower.begin(), lower.end()), {}, true};
  try {
    const OptResult outer = nested.level(0);
    OptResult r = nested.total;
    r.lower_bound = outer.lower_bound;
    r.iterations = outer.iterations;
    r.converged = outer.converged && nested.inner_converged;
    return r;
  } catch (const OptimisationAborted& e) {
    OptResult partial = nested.total;
    partial.lower_bound = e.partial().lower_bound;
    partial.converged = false;
    throw OptimisationAborted(partial, e.what());
  }
}

}  // namespace lipreach::optim
