#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lipreach/error.hpp"
#include "lipreach/oracle.hpp"

using namespace lipreach;
using namespace lipreach::oracle;

namespace {

sim::NncsModel ramp_model() {
  nn::Controller c({nn::make_layer({{0.0}}, {1.0}, nn::Activation::Linear)});
  return sim::NncsModel({expr::parse("u1")}, {}, std::move(c), 0.1);
}

// Gift wrapping followed by the shoelace formula.
double reference_hull_area(const std::vector<Point2>& pts) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].x < pts[start].x || (pts[i].x == pts[start].x && pts[i].y < pts[start].y)) start = i;
  }
  std::vector<Point2> hull;
  std::size_t cur = start;
  do {
    hull.push_back(pts[cur]);
    std::size_t next = (cur + 1) % pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double cr = (pts[next].x - pts[cur].x) * (pts[i].y - pts[cur].y) -
                        (pts[next].y - pts[cur].y) * (pts[i].x - pts[cur].x);
      const double di = std::hypot(pts[i].x - pts[cur].x, pts[i].y - pts[cur].y);
      const double dn = std::hypot(pts[next].x - pts[cur].x, pts[next].y - pts[cur].y);
      if (cr < 0.0 || (cr == 0.0 && di > dn)) next = i;
    }
    cur = next;
  } while (cur != start && hull.size() <= pts.size());
  double twice = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::fabs(twice) / 2.0;
}

}  // namespace

TEST_CASE("lattice resolution") {
  const reach::Box unit({0.0, 0.0}, {1.0, 1.0});
  CHECK(lattice_resolution(unit, 1000) == std::vector<std::size_t>{32, 32});
  CHECK(lattice(unit, 1000).size() == 1024);
  CHECK(lattice_resolution(reach::Box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}), 1000) == std::vector<std::size_t>{10, 10, 10});
  CHECK(lattice_resolution(reach::Box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}), 1001) ==
        std::vector<std::size_t>{11, 10, 10});
  CHECK(lattice_resolution(reach::Box({0.0, 2.0}, {1.0, 2.0}), 1000) == std::vector<std::size_t>{1000, 1});
  CHECK(lattice_resolution(reach::Box({0.0}, {1.0}), 1) == std::vector<std::size_t>{1});
  CHECK(lattice(reach::Box({0.0}, {1.0}), 1).front()[0] == 0.5);
  CHECK_THROWS(lattice_resolution(unit, 0));

  const auto pts = lattice(unit, 4);
  REQUIRE(pts.size() == 4);
  CHECK(pts[0] == std::vector<double>{0.0, 0.0});
  CHECK(pts[1] == std::vector<double>{0.0, 1.0});
  CHECK(pts[3] == std::vector<double>{1.0, 1.0});

  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + rng() % 3;
    const std::size_t target = 1 + rng() % 5000;
    std::vector<double> lo(n, 0.0), hi(n, 1.0);
    const auto counts = lattice_resolution(reach::Box(lo, hi), target);
    std::size_t product = 1;
    for (std::size_t c : counts) product *= c;
    CHECK(product >= target);
    CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
  }
}

TEST_CASE("grid_search examples") {
  const sim::NncsModel m = ramp_model();
  const SampleCloud point = grid_search(m, reach::Box({0.3}, {0.3}), 1.0, 1000);
  REQUIRE(point.states.size() == 1);
  CHECK(point.states[0][0] == sim::simulate(m, std::vector<double>{0.3}, 1.0)[0]);

  const SampleCloud line = grid_search(m, reach::Box({0.0}, {0.1}), 1.0, 11);
  REQUIRE(line.states.size() == 11);
  for (std::size_t i = 0; i < 11; ++i) {
    CHECK(line.states[i][0] == doctest::Approx(1.0 + 0.01 * static_cast<double>(i)).epsilon(1e-12));
  }
  CHECK(line.diverged == 0);
  CHECK(line.time == 1.0);

  const std::vector<double> times = {1.0, 0.5};
  const auto clouds = grid_search(m, reach::Box({0.0}, {0.1}), times, 11, 2);
  REQUIRE(clouds.size() == 2);
  CHECK(clouds[1].time == 0.5);
  CHECK(clouds[1].states[0][0] == doctest::Approx(0.5));
  CHECK(clouds[0].states[10][0] == doctest::Approx(1.1));
}

TEST_CASE("grid_search counts diverged points") {
  nn::Controller c({nn::make_layer({{0.0}}, {0.0}, nn::Activation::Linear)});
  const sim::NncsModel blow({expr::parse("x1^2 + u1")}, {}, std::move(c), 0.1);
  const SampleCloud cloud = grid_search(blow, reach::Box({-1.0}, {1.0}), 1.5, 5);
  CHECK(cloud.diverged == 1);
  CHECK(cloud.states.size() == 4);
}

TEST_CASE("containment_check") {
  SampleCloud cloud;
  cloud.states = {{0.5, 0.5}, {0.1, 0.9}};
  const reach::Box unit({0.0, 0.0}, {1.0, 1.0});
  CHECK(containment_check(cloud, unit).contained);

  cloud.states.push_back({0.5, 1.5});
  const ContainmentReport r = containment_check(cloud, unit);
  CHECK(!r.contained);
  CHECK(r.worst_dim == 1);
  CHECK(r.worst_violation == 0.5);

  CHECK_THROWS_WITH_AS(containment_check(SampleCloud{}, unit), "no samples", Error);
}

TEST_CASE("hull_area examples") {
  const std::vector<Point2> square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(hull_area(square) == 1.0);
  const std::vector<Point2> tri = {{0, 0}, {1, 0}, {0, 1}};
  CHECK(hull_area(tri) == 0.5);
  const std::vector<Point2> line = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK(hull_area(line) == 0.0);
  CHECK(hull_area(std::vector<Point2>{{0, 0}, {1, 1}}) == 0.0);
  CHECK(hull_area(std::vector<Point2>{}) == 0.0);
}

TEST_CASE("hull_area agrees with an independent implementation") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts(100);
    for (auto& p : pts) p = {u(rng), u(rng)};
    CHECK(std::fabs(hull_area(pts) - reference_hull_area(pts)) <= 1e-12);
  }
}

TEST_CASE("hull_area invariants") {
  std::mt19937_64 rng(321);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> pts(3 + rng() % 60);
    for (auto& p : pts) p = {g(rng), 0.3 * g(rng)};
    const double area = hull_area(pts);

    double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
    for (const auto& p : pts) {
      xl = std::min(xl, p.x);
      xh = std::max(xh, p.x);
      yl = std::min(yl, p.y);
      yh = std::max(yh, p.y);
    }
    CHECK(area <= (xh - xl) * (yh - yl));

    std::vector<Point2> shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.insert(shuffled.end(), pts.begin(), pts.begin() + static_cast<long>(pts.size() / 2));
    CHECK(std::fabs(hull_area(shuffled) - area) <= 1e-12 * std::max(1.0, area));
  }
}

TEST_CASE("project picks the requested axes") {
  SampleCloud cloud;
  cloud.states = {{1, 2, 3}, {4, 5, 6}};
  const auto p = project(cloud, 2, 0);
  REQUIRE(p.size() == 2);
  CHECK(p[1].x == 6);
  CHECK(p[1].y == 4);
}
