#include "lipreach/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "lipreach/error.hpp"

namespace lipreach::sim {

NncsModel::NncsModel(std::vector<expr::Ast> dynamics, std::vector<expr::Ast> measurement,
                     nn::Controller controller, double control_step, std::size_t substeps)
    : dynamics_(std::move(dynamics)),
      measurement_(std::move(measurement)),
      controller_(std::move(controller)),
      control_step_(control_step),
      substeps_(substeps) {
  if (dynamics_.empty()) throw ModelError("plant has no state");
  if (!(control_step_ > 0.0) || !std::isfinite(control_step_)) throw ModelError("control_step must be > 0");
  if (substeps_ == 0) throw ModelError("substeps must be >= 1");

  const std::size_t n = dynamics_.size();
  const std::size_t m = controller_.output_dim();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = dynamics_[i];
    if (f.max_state_index() > n) {
      throw ModelError("dynamics[" + std::to_string(i) + "] '" + f.source() + "' references x" +
                       std::to_string(f.max_state_index()) + " but the plant has " + std::to_string(n) + " states");
    }
    if (f.max_input_index() > m) {
      throw ModelError("dynamics[" + std::to_string(i) + "] '" + f.source() + "' references u" +
                       std::to_string(f.max_input_index()) + " but the controller has " + std::to_string(m) +
                       " outputs");
    }
  }
  if (measurement_.empty()) {
    if (controller_.input_dim() != n) {
      throw ModelError("identity measurement gives " + std::to_string(n) + " outputs but the controller expects " +
                       std::to_string(controller_.input_dim()));
    }
  } else {
    if (measurement_.size() != controller_.input_dim()) {
      throw ModelError("measurement has " + std::to_string(measurement_.size()) +
                       " outputs but the controller expects " + std::to_string(controller_.input_dim()));
    }
    for (std::size_t i = 0; i < measurement_.size(); ++i) {
      const auto& h = measurement_[i];
      if (h.max_state_index() > n) {
        throw ModelError("measurement[" + std::to_string(i) + "] '" + h.source() + "' references x" +
                         std::to_string(h.max_state_index()) + " but the plant has " + std::to_string(n) +
                         " states");
      }
      if (h.max_input_index() > 0) {
        throw ModelError("measurement[" + std::to_string(i) + "] '" + h.source() + "' must not reference u");
      }
    }
  }
}

NncsModel NncsModel::with_substeps(std::size_t substeps) const {
  return NncsModel(dynamics_, measurement_, controller_, control_step_, substeps);
}

StepSplit split_time(double t, double control_step) {
  const double ratio = t / control_step;
  const double nearest = std::round(ratio);
  if (std::fabs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
    return {static_cast<std::uint64_t>(nearest), 0.0};
  }
  const double whole = std::floor(ratio);
  return {static_cast<std::uint64_t>(whole), t - whole * control_step};
}

namespace {

// Reusable work buffers for one integration pass.
class Stepper {
public:
  Stepper(std::span<const expr::Ast> f, const NncsModel* model, SimStats* stats)
      : f_(f), model_(model), stats_(stats), n_(f.size()) {
    k1_.resize(n_);
    k2_.resize(n_);
    k3_.resize(n_);
    k4_.resize(n_);
    tmp_.resize(n_);
    if (model_ != nullptr) {
      y_.resize(model_->controller().input_dim());
      scratch_.resize(2 * model_->controller().max_width());
    }
  }

  std::size_t input_dim() const { return model_->input_dim(); }

  void control(std::span<const double> x, std::span<double> u) {
    const auto& ctrl = model_->controller();
    if (model_->identity_measurement()) {
      ctrl.forward(x, u, scratch_);
    } else {
      const auto& h = model_->measurement();
      for (std::size_t i = 0; i < h.size(); ++i) y_[i] = expr::eval(h[i], x, {});
      ctrl.forward(y_, u, scratch_);
    }
    if (stats_ != nullptr) ++stats_->controller_calls;
  }

  void rk4(std::span<double> x, std::span<const double> u, double h) {
    derivative(x, u, k1_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
    derivative(tmp_, u, k2_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
    derivative(tmp_, u, k3_);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * k3_[i];
    derivative(tmp_, u, k4_);
    for (std::size_t i = 0; i < n_; ++i) x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    if (stats_ != nullptr) ++stats_->rk4_steps;
  }

  // Integrates `duration` seconds starting at `t0` in `count` equal substeps.
  void advance(std::span<double> x, std::span<const double> u, double t0, double duration, std::uint64_t count) {
    const double h = duration / static_cast<double>(count);
    for (std::uint64_t k = 0; k < count; ++k) {
      rk4(x, u, h);
      for (double v : x) {
        if (!(std::fabs(v) <= kDivergenceLimit)) {
          throw DivergenceError(t0 + static_cast<double>(k + 1) * h);
        }
      }
    }
  }

  void full_step(std::span<double> x, std::span<const double> u, std::uint64_t index) {
    const double delta = model_->control_step();
    advance(x, u, static_cast<double>(index) * delta, delta, model_->substeps());
    if (stats_ != nullptr) ++stats_->control_steps;
  }

  void partial_step(std::span<double> x, std::span<const double> u, std::uint64_t index, double remainder) {
    const double delta = model_->control_step();
    const double h = delta / static_cast<double>(model_->substeps());
    const auto count = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(remainder / h)));
    advance(x, u, static_cast<double>(index) * delta, remainder, count);
  }

private:
  void derivative(std::span<const double> x, std::span<const double> u, std::vector<double>& out) {
    for (std::size_t i = 0; i < n_; ++i) out[i] = expr::eval(f_[i], x, u);
  }

  std::span<const expr::Ast> f_;
  const NncsModel* model_;
  SimStats* stats_;
  std::size_t n_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_, y_, scratch_;
};

void check_initial(const NncsModel& m, std::span<const double> x0) {
  if (x0.size() != m.state_dim()) {
    throw ModelError("initial state has " + std::to_string(x0.size()) + " entries, plant has " +
                     std::to_string(m.state_dim()));
  }
}

}  // namespace

State rk4_step(std::span<const expr::Ast> f, std::span<const double> x, std::span<const double> u, double h) {
  if (x.size() != f.size()) throw ModelError("state size does not match dynamics");
  Stepper s(f, nullptr, nullptr);
  State out(x.begin(), x.end());
  s.rk4(out, u, h);
  return out;
}

State simulate(const NncsModel& m, std::span<const double> x0, double t, SimStats* stats) {
  check_initial(m, x0);
  if (!(t >= 0.0)) throw ModelError("simulation time must be >= 0");
  State x(x0.begin(), x0.end());
  if (t == 0.0) return x;

  Stepper s(m.dynamics(), &m, stats);
  std::vector<double> u(m.input_dim());
  const StepSplit split = split_time(t, m.control_step());
  for (std::uint64_t i = 0; i < split.full_steps; ++i) {
    s.control(x, u);
    s.full_step(x, u, i);
  }
  if (split.remainder > 0.0) {
    s.control(x, u);
    s.partial_step(x, u, split.full_steps, split.remainder);
  }
  return x;
}

Trajectory trajectory(const NncsModel& m, std::span<const double> x0, std::span<const double> times,
                      SimStats* stats) {
  check_initial(m, x0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) throw ModelError("trajectory times must be >= 0");
    if (i > 0 && times[i] < times[i - 1]) throw ModelError("trajectory times must be ascending");
  }

  Trajectory out;
  out.x0.assign(x0.begin(), x0.end());
  out.samples.reserve(times.size());

  Stepper s(m.dynamics(), &m, stats);
  State x(x0.begin(), x0.end());
  std::vector<double> u(m.input_dim());
  std::uint64_t boundary = 0;  // x holds the state at boundary * delta
  bool have_control = false;    // u holds sigma(h(x)) for the current boundary

  for (double t : times) {
    if (t == 0.0) {
      out.samples.push_back({t, State(x0.begin(), x0.end())});
      continue;
    }
    const StepSplit split = split_time(t, m.control_step());
    while (boundary < split.full_steps) {
      if (!have_control) s.control(x, u);
      s.full_step(x, u, boundary);
      ++boundary;
      have_control = false;
    }
    if (split.remainder > 0.0) {
      if (!have_control) {
        s.control(x, u);
        have_control = true;
      }
      State branch = x;
      s.partial_step(branch, u, boundary, split.remainder);
      out.samples.push_back({t, std::move(branch)});
    } else {
      out.samples.push_back({t, x});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct TrajectoryCache::Entry {
  std::mutex mutex;
  State x0;
  State boundary_state;              // state at boundary * delta
  std::vector<double> control;       // valid when have_control
  std::uint64_t boundary = 0;
  bool have_control = false;
  double diverged_at = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> at;            // times.size() * n
  std::vector<char> ready;
};

std::size_t TrajectoryCache::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint64_t b : k.bits) {
    h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

TrajectoryCache::TrajectoryCache(const NncsModel& model, std::vector<double> times, bool enabled,
                                 std::size_t max_entries)
    : model_(model), times_(std::move(times)), enabled_(enabled), max_entries_(std::max<std::size_t>(1, max_entries)) {
  for (double t : times_) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ModelError("cache times must be finite and >= 0");
    splits_.push_back(split_time(t, model_.control_step()));
  }
}

std::shared_ptr<TrajectoryCache::Entry> TrajectoryCache::lookup(std::span<const double> x0) const {
  Key key;
  key.bits.reserve(x0.size());
  for (double v : x0) key.bits.push_back(std::bit_cast<std::uint64_t>(v));
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      return it->second;
    }
  }
  std::unique_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    ++hits_;
    return it->second;
  }
  if (entries_.size() >= max_entries_) entries_.clear();
  auto e = std::make_shared<Entry>();
  e->x0.assign(x0.begin(), x0.end());
  e->boundary_state = e->x0;
  e->control.resize(model_.input_dim());
  e->at.resize(times_.size() * model_.state_dim());
  e->ready.assign(times_.size(), 0);
  entries_.emplace(std::move(key), e);
  ++misses_;
  return e;
}

void TrajectoryCache::fill(Entry& e, std::size_t ti) const {
  const std::size_t n = model_.state_dim();
  const double t = times_[ti];
  std::span<double> slot(e.at.data() + ti * n, n);
  if (t == 0.0) {
    std::copy(e.x0.begin(), e.x0.end(), slot.begin());
    e.ready[ti] = 1;
    return;
  }
  const StepSplit split = splits_[ti];
  if (!std::isnan(e.diverged_at) && e.boundary < split.full_steps) {
    throw DivergenceError(e.diverged_at);
  }

  Stepper s(model_.dynamics(), &model_, nullptr);
  try {
    while (e.boundary < split.full_steps) {
      if (!e.have_control) s.control(e.boundary_state, e.control);
      State next = e.boundary_state;
      s.full_step(next, e.control, e.boundary);
      e.boundary_state = std::move(next);
      ++e.boundary;
      e.have_control = false;
    }
  } catch (const DivergenceError& err) {
    e.diverged_at = err.time();
    throw;
  }
  if (split.remainder > 0.0) {
    if (!e.have_control) {
      s.control(e.boundary_state, e.control);
      e.have_control = true;
    }
    State branch = e.boundary_state;
    s.partial_step(branch, e.control, e.boundary, split.remainder);
    std::copy(branch.begin(), branch.end(), slot.begin());
  } else {
    std::copy(e.boundary_state.begin(), e.boundary_state.end(), slot.begin());
  }
  e.ready[ti] = 1;
}

State TrajectoryCache::state(std::span<const double> x0, std::size_t time_index) const {
  if (time_index >= times_.size()) throw ModelError("time index out of range");
  if (!enabled_) {
    ++misses_;
    return simulate(model_, x0, times_[time_index]);
  }
  check_initial(model_, x0);
  auto e = lookup(x0);
  std::lock_guard lock(e->mutex);
  if (!e->ready[time_index]) {
    if (e->boundary > splits_[time_index].full_steps) {
      // Chain already moved past this time; integrate it directly.
      State x = simulate(model_, x0, times_[time_index]);
      const std::size_t n = model_.state_dim();
      std::copy(x.begin(), x.end(), e->at.begin() + static_cast<std::ptrdiff_t>(time_index * n));
      e->ready[time_index] = 1;
    } else {
      fill(*e, time_index);
    }
  }
  const std::size_t n = model_.state_dim();
  const auto first = e->at.begin() + static_cast<std::ptrdiff_t>(time_index * n);
  return State(first, first + static_cast<std::ptrdiff_t>(n));
}

double TrajectoryCache::component(std::span<const double> x0, std::size_t time_index, std::size_t dim) const {
  if (dim >= model_.state_dim()) throw ModelError("state dimension out of range");
  return state(x0, time_index)[dim];
}

Objective memoised_objective(std::shared_ptr<const TrajectoryCache> cache, std::size_t time_index,
                             std::size_t dim, int sign) {
  if (sign != 1 && sign != -1) throw ModelError("objective sign must be +1 or -1");
  if (dim >= cache->model().state_dim()) throw ModelError("objective dimension out of range");
  if (time_index >= cache->times().size()) throw ModelError("objective time index out of range");
  return [cache = std::move(cache), time_index, dim, sign](std::span<const double> x0) {
    const double v = cache->component(x0, time_index, dim);
    return sign > 0 ? v : -v;
  };
}

}  // namespace lipreach::sim
