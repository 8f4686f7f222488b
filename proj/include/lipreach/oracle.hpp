#pragma once

// Ground-truth approximations: exhaustive lattice simulation, containment
// checks and convex-hull areas of 2D projections.

#include <cstddef>
#include <span>
#include <vector>

#include "lipreach/reach.hpp"
#include "lipreach/sim.hpp"

namespace lipreach::oracle {

struct SampleCloud {
  double time = 0.0;
  std::vector<sim::State> states;
  std::vector<std::size_t> resolution;  // lattice points per axis
  std::size_t diverged = 0;
};

/// Per-axis point counts, as equal as possible with product >= n_points.
/// Degenerate axes of `box` get a single point.
std::vector<std::size_t> lattice_resolution(const reach::Box& box, std::size_t n_points);

/// Evenly spaced lattice over `box`, endpoints included, first axis slowest.
std::vector<sim::State> lattice(const reach::Box& box, std::size_t n_points);

/// Simulates every lattice point and collects the states at `t`.
SampleCloud grid_search(const sim::NncsModel& m, const reach::Box& init, double t, std::size_t n_points,
                        unsigned threads = 1);

/// One cloud per time from a single trajectory pass per lattice point.
std::vector<SampleCloud> grid_search(const sim::NncsModel& m, const reach::Box& init, std::span<const double> times,
                                     std::size_t n_points, unsigned threads = 1);

struct ContainmentReport {
  bool contained = true;
  std::size_t worst_dim = 0;     // 0-based
  double worst_violation = 0.0;  // max componentwise exceedance
};

/// Throws Error("no samples") for an empty cloud.
ContainmentReport containment_check(const SampleCloud& cloud, const reach::Box& box);

struct Point2 {
  double x;
  double y;
};

/// Counter-clockwise hull without collinear points (Andrew's monotone chain).
std::vector<Point2> convex_hull(std::vector<Point2> points);

/// Shoelace area of the convex hull; 0 for fewer than 3 or collinear points.
double hull_area(std::span<const Point2> points);

/// Projection of a cloud onto axes (i, j).
std::vector<Point2> project(const SampleCloud& cloud, std::size_t i, std::size_t j);

}  // namespace lipreach::oracle
