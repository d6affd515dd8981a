#include <algorithm>
#include <random>

#include "doctest.h"
#include "relief/demand.hpp"
#include "relief/error.hpp"

using namespace relief;

namespace {

// Hours since midnight for a wall-clock time.
double Hms(int h, int m, int s) { return h + m / 60.0 + s / 3600.0; }

// Two types: 0 = shelter, 1 = food.
EventSequence ExampleOneHistory() {
  EventSequence seq(2);
  seq.push_back({Hms(12, 4, 33), {4, 0}});
  seq.push_back({Hms(16, 38, 26), {3, 6}});
  return seq;
}

EventSequence RandomSequence(std::mt19937_64& rng, int K, int n) {
  std::uniform_real_distribution<double> gap(0.0, 3.0);
  std::uniform_int_distribution<int> q(0, 4);
  std::uniform_int_distribution<int> pick(0, K - 1);
  EventSequence seq(K);
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    // Occasional exact ties exercise file-order stability.
    if (i == 0 || rng() % 5 != 0) t += gap(rng);
    std::vector<int> a(K);
    for (int& v : a) v = q(rng);
    a[pick(rng)] += 1;
    seq.push_back({t, a});
  }
  return seq;
}

}  // namespace

TEST_CASE("parse a single CSV row") {
  auto seq = parse_demand_file("time,q1,q2,q3\n0.5,0,1,0", 3);
  REQUIRE(seq.size() == 1);
  CHECK(seq[0].time == 0.5);
  CHECK(seq[0].quantities == std::vector<int>{0, 1, 0});
}

TEST_CASE("header-only file is an empty sequence") {
  auto seq = parse_demand_file("time,q1,q2\n", 2);
  CHECK(seq.empty());
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_demand_file("time,q1\n1.0,2\n2.0,x\n", 1);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_demand_file("time,q1\n1.0,-2\n", 1), ValidationError);
  CHECK_THROWS_AS(parse_demand_file("when,q1\n", 1), ParseError);
  CHECK_THROWS_AS(parse_demand_file("time,q1\n1.0,2,3\n", 1), ParseError);
}

TEST_CASE("wall-clock rows of the shelter/food example") {
  const char* csv =
      "time,q1,q2\n"
      "2021-07-18T12:04:33Z,4,0\n"
      "2021-07-18T16:38:26Z,3,6\n";
  auto seq = parse_demand_file(csv, 2);
  REQUIRE(seq.size() == 2);
  CHECK(seq[0].time == doctest::Approx(Hms(12, 4, 33)).epsilon(1e-12));
  CHECK(seq[1].quantities == std::vector<int>{3, 6});
}

TEST_CASE("JSON demand files") {
  auto seq = parse_demand_file(
      R"([{"time": 2.0, "q": [1, 0]}, {"time": 1.0, "q": [0, 3]}])", 2);
  REQUIRE(seq.size() == 2);
  CHECK(seq[0].time == 1.0);
  CHECK(seq[1].quantities == std::vector<int>{1, 0});
  CHECK_THROWS_AS(parse_demand_file(R"([{"time": 1.0, "q": [1]}])", 2),
                  ParseError);
}

TEST_CASE("equal times keep file order") {
  auto seq = parse_demand_file("time,q1,q2\n2,1,0\n1,0,1\n2,0,2\n", 2);
  REQUIRE(seq.size() == 3);
  CHECK(seq[1].quantities == std::vector<int>{1, 0});
  CHECK(seq[2].quantities == std::vector<int>{0, 2});
}

TEST_CASE("dispatch of the shelter/food example") {
  auto s = compute_state(ExampleOneHistory(), {5, 10}, Hms(18, 0, 0));
  CHECK(s.U == std::vector<int>{2, 0});
  CHECK(s.R == std::vector<int>{0, 4});
  REQUIRE(s.unmet[0].size() == 1);
  CHECK(s.unmet[0][0].time == Hms(16, 38, 26));
  CHECK(s.unmet[0][0].quantity == 2);
}

TEST_CASE("dispatch edge cases") {
  EventSequence seq(1);
  seq.push_back({1.0, {3}});
  auto s = compute_state(seq, {0}, 2.0);
  CHECK(s.U[0] == 3);
  CHECK(s.R[0] == 0);
  s = compute_state(seq, {3}, 2.0);
  CHECK(s.U[0] == 0);
  CHECK(s.R[0] == 0);
}

TEST_CASE("net demand of the shelter/food example") {
  auto s = compute_state(ExampleOneHistory(), {5, 10}, Hms(18, 0, 0));
  s.T_plus = 24.0;
  EventSequence future(2);
  future.push_back({Hms(18, 8, 12), {1, 5}});
  future.push_back({Hms(19, 14, 29), {0, 3}});
  auto net = build_net_demand(s, future);
  REQUIRE(net[0].entries.size() == 2);
  CHECK(net[0].entries[0] == UnitBlock{Hms(16, 38, 26), 2});
  CHECK(net[0].entries[1] == UnitBlock{Hms(18, 8, 12), 1});
  CHECK(net[0].total() == 3);
  REQUIRE(net[1].entries.size() == 2);
  CHECK(net[1].entries[0] == UnitBlock{Hms(18, 8, 12), 1});
  CHECK(net[1].entries[1] == UnitBlock{Hms(19, 14, 29), 3});
  CHECK(net[1].total() == 4);
}

TEST_CASE("leftover stock equal to future demand empties the sequence") {
  AgencyState s;
  s.T = 0;
  s.R = {4};
  s.U = {0};
  EventSequence future(1);
  future.push_back({1.0, {1}});
  future.push_back({2.0, {3}});
  CHECK(build_net_demand(s, future)[0].entries.empty());
}

TEST_CASE("dispatch and net-demand properties on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int K = 1 + trial % 3;
    auto hist = RandomSequence(rng, K, 1 + trial % 9);
    std::vector<int> stock(K);
    for (int& v : stock) v = static_cast<int>(rng() % 15);
    double T = hist.events().back().time;
    auto s = compute_state(hist, stock, T);
    std::vector<int> demanded(K, 0);
    for (const auto& e : hist.events()) {
      for (int k = 0; k < K; ++k) demanded[k] += e.quantities[k];
    }
    for (int k = 0; k < K; ++k) {
      CHECK(s.R[k] * s.U[k] == 0);
      CHECK(s.R[k] - s.U[k] == stock[k] - demanded[k]);
    }

    // Permuting equal-time events leaves the totals unchanged.
    auto events = hist.events();
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
      if (events[i].time == events[i + 1].time) std::swap(events[i], events[i + 1]);
    }
    EventSequence permuted(K);
    for (auto& e : events) permuted.push_back(e);
    auto s2 = compute_state(permuted, stock, T);
    CHECK(s2.R == s.R);
    CHECK(s2.U == s.U);

    auto fut_raw = RandomSequence(rng, K, trial % 7);
    EventSequence future(K);
    for (auto e : fut_raw.events()) {
      e.time += T + 0.01;
      future.push_back(e);
    }
    auto net = build_net_demand(s, future);
    for (int k = 0; k < K; ++k) {
      int fut = 0;
      for (const auto& e : future.events()) fut += e.quantities[k];
      CHECK(net[k].total() == std::max(0, fut + s.U[k] - s.R[k]));
      for (std::size_t j = 1; j < net[k].entries.size(); ++j) {
        CHECK(net[k].entries[j - 1].time <= net[k].entries[j].time);
      }
      for (const auto& b : net[k].entries) CHECK(b.quantity >= 1);
    }
  }
}

TEST_CASE("write/parse round trip") {
  EventSequence empty(3);
  CHECK(write_demand_file(empty) == "time,q1,q2,q3\n");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> gap(1e-9, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int K = 1 + trial % 4;
    EventSequence seq(K);
    double t = 0.0;
    int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      t += gap(rng);
      std::vector<int> a(K, 0);
      a[rng() % K] = 1 + static_cast<int>(rng() % 50);
      seq.push_back({t, a});
    }
    auto back = parse_demand_file(write_demand_file(seq), K);
    REQUIRE(back.size() == seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      CHECK(back[i].time == seq[i].time);
      CHECK(back[i].quantities == seq[i].quantities);
    }
  }
}

TEST_CASE("event sequence rejects invalid events") {
  EventSequence seq(2);
  CHECK_THROWS_AS(seq.push_back({1.0, {0, 0}}), ValidationError);
  CHECK_THROWS_AS(seq.push_back({1.0, {1}}), ValidationError);
  seq.push_back({2.0, {1, 0}});
  CHECK_THROWS_AS(seq.push_back({1.0, {1, 0}}), ValidationError);
}

TEST_CASE("FIFO ledger serves the backlog in arrival order") {
  FifoLedger ledger(1);
  ledger.demand({1.0, {2}});
  ledger.demand({2.0, {3}});
  ledger.arrival(5.0, {4});
  CHECK(ledger.backlog_totals()[0] == 1);
  CHECK(ledger.backlog()[0][0].time == 2.0);
  REQUIRE(ledger.fulfilled().size() == 2);
  CHECK(ledger.fulfilled()[0].demand_time == 1.0);
  CHECK(ledger.fulfilled()[0].quantity == 2);
  CHECK(ledger.fulfilled()[1].quantity == 2);
  CHECK(ledger.fulfilled()[1].fulfill_time == 5.0);
}
