#include <cmath>
#include <random>

#include "doctest.h"
#include "relief/cost.hpp"
#include "relief/error.hpp"

using namespace relief;

namespace {

NetDemandSeq Seq(std::initializer_list<UnitBlock> blocks) {
  NetDemandSeq s;
  s.entries = blocks;
  return s;
}

NetDemandSeq RandomNet(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gap(0.0, 2.0);
  NetDemandSeq s;
  double t = 0.0;
  int n = 1 + static_cast<int>(rng() % 8);
  for (int i = 0; i < n; ++i) {
    t += gap(rng);
    s.entries.push_back({t, 1 + static_cast<int>(rng() % 5)});
  }
  return s;
}

}  // namespace

TEST_CASE("deprivation cost") {
  DeprivationParams p;
  CHECK(deprivation_cost(0.0, 4.0, p) == 0.0);
  double expected = std::exp(1.5031 + 0.1172 * 4 * 12) - std::exp(1.5031);
  CHECK(deprivation_cost(12.0, 4.0, p) == doctest::Approx(expected));
  CHECK(deprivation_cost(12.0, 4.0, p) == doctest::Approx(1242.8).epsilon(1e-4));
  for (double d = 0.0; d < 20.0; d += 0.5) {
    for (double c = 1.5; c < 6.0; c += 0.5) {
      CHECK(deprivation_cost(d + 0.5, c, p) > deprivation_cost(d, c, p));
      CHECK(deprivation_cost(d + 0.5, c + 0.5, p) >
            deprivation_cost(d + 0.5, c, p));
    }
  }
}

TEST_CASE("unit cost reduction") {
  DeprivationParams p;
  CHECK_THROWS_AS(reduction_B(1.0, 2.0, 12.0, 12.0, p), ValidationError);
  CHECK(reduction_B(1.0, 2.0, std::nextafter(12.0, 13.0), 12.0, p) >= 0.0);
  CHECK(reduction_B(1.0, 2.0, 20.0, 12.0, p) > reduction_B(2.0, 2.0, 20.0, 12.0, p));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    double t = 10 * u(rng), Tp = t + 12 * u(rng), xi = Tp + 0.1 + 12 * u(rng);
    double c = 1.1 + 4 * u(rng);
    double direct = deprivation_cost(xi - t, c, p) - deprivation_cost(Tp - t, c, p);
    CHECK(reduction_B(t, c, xi, Tp, p) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("cost reduction curve of a two-entry sequence") {
  auto net = Seq({{1.0, 2}, {2.0, 1}});
  std::vector<double> B{10, 6};
  CHECK(cost_reduction_g(0, net, B) == 0);
  CHECK(cost_reduction_g(1, net, B) == 10);
  CHECK(cost_reduction_g(2, net, B) == 20);
  CHECK(cost_reduction_g(3, net, B) == 26);
  CHECK(cost_reduction_g(5, net, B) == 26);
  CHECK(cost_reduction_g(2.5, net, B) == 23);
  CHECK(cost_reduction_g(2, net, B) - cost_reduction_g(1, net, B) >=
        cost_reduction_g(3, net, B) - cost_reduction_g(2, net, B));
  CHECK_THROWS_AS(cost_reduction_g(1, net, {1.0}), ValidationError);
}

TEST_CASE("extended curve") {
  DeprivationParams p;
  auto net = Seq({{1.0, 2}, {2.0, 1}});
  const double c = 2, xi = 30, Tp = 12;
  auto B = entry_reductions(net, c, xi, Tp, p);
  double plateau = cost_reduction_g(3, net, B);
  CHECK(extended_g(3, Tp, net, 1.0, c, xi, p) == doctest::Approx(plateau));
  CHECK(extended_g(6, Tp, net, 1.0, c, xi, p) == doctest::Approx(plateau - 3));
  for (double x = 0; x < 3; x += 0.25) {
    CHECK(extended_g(x, Tp, net, 5.0, c, xi, p) ==
          doctest::Approx(cost_reduction_g(x, net, B)));
    CHECK(extended_g(x + 0.25, Tp, net, 5.0, c, xi, p) >
          extended_g(x, Tp, net, 5.0, c, xi, p));
  }
  CHECK(extended_g(4, Tp, net, 5.0, c, xi, p) < extended_g(3, Tp, net, 5.0, c, xi, p));
}

TEST_CASE("curves are continuous, non-decreasing and concave") {
  DeprivationParams p;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    auto net = RandomNet(rng);
    auto B = entry_reductions(net, 2.0 + trial % 3, 40.0, 12.0, p);
    auto curve = curve_of(net, B);
    const double eps = 1e-7;
    double prev_slope = INFINITY;
    double prev_kink = 0.0;
    for (std::size_t i = 0; i < curve.kinks.size(); ++i) {
      double s = curve.kinks[i];
      double left = cost_reduction_g(s - eps, net, B);
      double right = cost_reduction_g(s + eps, net, B);
      double at = cost_reduction_g(s, net, B);
      CHECK(std::fabs(left - at) < 1e-9 * std::max(1.0, at) + eps * B[0] * 1.01);
      CHECK(right >= at - 1e-9);
      double slope = (cost_reduction_g(s, net, B) -
                      cost_reduction_g(prev_kink, net, B)) /
                     (s - prev_kink);
      CHECK(slope <= prev_slope + 1e-9);
      CHECK(slope == doctest::Approx(curve.slopes[i]));
      prev_slope = slope;
      prev_kink = s;
    }
  }
}
