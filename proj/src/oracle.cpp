#include "lipreach/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "lipreach/error.hpp"
#include "parallel.hpp"

namespace lipreach::oracle {

std::vector<std::size_t> lattice_resolution(const reach::Box& box, std::size_t n_points) {
  if (n_points < 1) throw ModelError("grid needs at least one point");
  std::vector<std::size_t> counts(box.dim(), 1);
  std::vector<std::size_t> axes;
  for (std::size_t i = 0; i < box.dim(); ++i) {
    if (box.lower()[i] != box.upper()[i]) axes.push_back(i);
  }
  if (axes.empty()) return counts;

  const auto power = [](std::size_t base, std::size_t k) {
    double p = 1.0;
    for (std::size_t i = 0; i < k; ++i) p *= static_cast<double>(base);
    return p;
  };
  const std::size_t k = axes.size();
  auto base = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n_points), 1.0 / static_cast<double>(k))));
  base = std::max<std::size_t>(base, 1);
  while (power(base + 1, k) <= static_cast<double>(n_points)) ++base;
  while (base > 1 && power(base, k) > static_cast<double>(n_points)) --base;

  double product = 1.0;
  for (std::size_t a : axes) {
    counts[a] = base;
    product *= static_cast<double>(base);
  }
  for (std::size_t a : axes) {
    if (product >= static_cast<double>(n_points)) break;
    product = product / static_cast<double>(counts[a]) * static_cast<double>(counts[a] + 1);
    ++counts[a];
  }
  return counts;
}

std::vector<sim::State> lattice(const reach::Box& box, std::size_t n_points) {
  const std::vector<std::size_t> counts = lattice_resolution(box, n_points);
  const std::size_t n = box.dim();
  std::vector<std::vector<double>> axis(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = box.lower()[i];
    const double hi = box.upper()[i];
    const std::size_t c = counts[i];
    if (c == 1) {
      axis[i] = {lo == hi ? lo : lo + (hi - lo) / 2.0};
      continue;
    }
    for (std::size_t k = 0; k < c; ++k) {
      axis[i].push_back(k + 1 == c ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(c - 1));
    }
  }

  std::size_t total = 1;
  for (std::size_t c : counts) total *= c;
  std::vector<sim::State> out;
  out.reserve(total);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t p = 0; p < total; ++p) {
    sim::State s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = axis[i][idx[i]];
    out.push_back(std::move(s));
    for (std::size_t i = n; i-- > 0;) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

std::vector<SampleCloud> grid_search(const sim::NncsModel& m, const reach::Box& init, std::span<const double> times,
                                     std::size_t n_points, unsigned threads) {
  if (init.dim() != m.state_dim()) throw ModelError("initial set dimension does not match the plant");
  const std::vector<sim::State> points = lattice(init, n_points);
  const std::vector<std::size_t> resolution = lattice_resolution(init, n_points);

  // Sort a copy of the times for the single-pass trajectory, remembering
  // where each requested time went.
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  std::vector<double> sorted;
  for (std::size_t i : order) sorted.push_back(times[i]);

  // states[p][k]: state of point p at sorted time k (empty when diverged).
  std::vector<std::vector<sim::State>> states(points.size());
  detail::parallel_for(points.size(), threads, [&](std::size_t p) {
    try {
      const sim::Trajectory tr = sim::trajectory(m, points[p], sorted);
      for (const auto& s : tr.samples) states[p].push_back(s.state);
    } catch (const DivergenceError&) {
      states[p].clear();
      for (double t : sorted) {
        try {
          states[p].push_back(sim::simulate(m, points[p], t));
        } catch (const DivergenceError&) {
          states[p].emplace_back();
        }
      }
    }
  });

  std::vector<SampleCloud> clouds(times.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    SampleCloud& c = clouds[order[k]];
    c.time = sorted[k];
    c.resolution = resolution;
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (states[p][k].empty()) {
        ++c.diverged;
      } else {
        c.states.push_back(states[p][k]);
      }
    }
  }
  return clouds;
}

SampleCloud grid_search(const sim::NncsModel& m, const reach::Box& init, double t, std::size_t n_points,
                        unsigned threads) {
  const double times[] = {t};
  return std::move(grid_search(m, init, times, n_points, threads).front());
}

ContainmentReport containment_check(const SampleCloud& cloud, const reach::Box& box) {
  if (cloud.states.empty()) throw Error("no samples");
  ContainmentReport report;
  for (const auto& s : cloud.states) {
    if (s.size() != box.dim()) throw ModelError("sample dimension does not match box");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double excess = std::max(box.lower()[i] - s[i], s[i] - box.upper()[i]);
      if (excess > 0.0) {
        report.contained = false;
        if (excess > report.worst_violation) {
          report.worst_violation = excess;
          report.worst_dim = i;
        }
      }
    }
  }
  return report;
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double hull_area(std::span<const Point2> points) {
  const std::vector<Point2> hull = convex_hull(std::vector<Point2>(points.begin(), points.end()));
  if (hull.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::fabs(twice) / 2.0;
}

std::vector<Point2> project(const SampleCloud& cloud, std::size_t i, std::size_t j) {
  std::vector<Point2> out;
  out.reserve(cloud.states.size());
  for (const auto& s : cloud.states) out.push_back({s.at(i), s.at(j)});
  return out;
}

}  // namespace lipreach::oracle
