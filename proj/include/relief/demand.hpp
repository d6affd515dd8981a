// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Demand events, FIFO dispatch accounting and net-demand construction.

#ifndef RELIEF_DEMAND_HPP_
#define RELIEF_DEMAND_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relief {

struct DemandEvent {
  double time = 0.0;            // hours since T_minus
  std::vector<int> quantities;  // a_k per resource type

  bool operator==(const DemandEvent&) const = default;
};

class EventSequence {
 public:
  EventSequence() = default;
  EventSequence(int num_types, double t_minus = 0.0);

  int num_types() const { return num_types_; }
  double t_minus() const { return t_minus_; }
  // End of the observation window. Defaults to the last event time.
  double t_end() const;
  void set_t_end(double t) { t_end_ = t; }

  // Appends an event. Throws ValidationError if it breaks ordering, has the
  // wrong width, negative quantities or no positive quantity.
  void push_back(DemandEvent e);

  const std::vector<DemandEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const DemandEvent& operator[](std::size_t i) const { return events_[i]; }

  // Events with lo < time <= hi, keeping t_minus and type count.
  EventSequence window(double lo, double hi) const;
  // Events with time <= t.
  EventSequence prefix(double t) const;

  bool operator==(const EventSequence& o) const {
    return num_types_ == o.num_types_ && events_ == o.events_;
  }

 private:
  int num_types_ = 0;
  double t_minus_ = 0.0;
  std::optional<double> t_end_;
  std::vector<DemandEvent> events_;
};

// A block of identical-time unit demands of one type.
struct UnitBlock {
  double time = 0.0;
  int quantity = 0;
  bool operator==(const UnitBlock&) const = default;
};

struct AgencyState {
  double T = 0.0;
  double T_plus = 0.0;
  std::vector<int> R;  // leftover stock
  std::vector<int> U;  // unmet units
  // Per-type unmet blocks in arrival order; sums match U when present.
  std::vector<std::vector<UnitBlock>> unmet;
  double W = 0.0;
  std::vector<double> w;
  std::vector<double> c;
  std::vector<double> xi;

  int num_types() const { return static_cast<int>(R.size()); }
  // Checks the invariants listed for the type; throws ValidationError.
  void validate() const;
};

struct NetDemandSeq {
  std::vector<UnitBlock> entries;
  int total() const;
};

// Fulfillment record for a block of units of one type.
struct Fulfillment {
  int type = 0;
  double demand_time = 0.0;
  double fulfill_time = 0.0;
  int quantity = 0;
};

// First-come-first-serve dispatcher tracking stock and backlog per type.
// Arrivals and demands must be fed in non-decreasing time order.
class FifoLedger {
 public:
  explicit FifoLedger(int num_types);
  FifoLedger(int num_types, const std::vector<int>& initial_stock);

  void demand(const DemandEvent& e);
  void arrival(double time, const std::vector<int>& units);

  const std::vector<int>& stock() const { return stock_; }
  std::vector<int> backlog_totals() const;
  const std::vector<std::vector<UnitBlock>>& backlog() const { return backlog_; }
  const std::vector<Fulfillment>& fulfilled() const { return fulfilled_; }
  int num_types() const { return static_cast<int>(stock_.size()); }

 private:
  std::vector<int> stock_;
  std::vector<std::vector<UnitBlock>> backlog_;
  std::vector<Fulfillment> fulfilled_;
};

AgencyState compute_state(const EventSequence& seq,
                          const std::vector<int>& initial_stock, double T);

std::vector<NetDemandSeq> build_net_demand(const AgencyState& state,
                                           const EventSequence& future);

struct ParseOptions {
  // Epoch for wall-clock timestamps, as seconds since 1970-01-01 UTC. When
  // unset, midnight UTC of the earliest wall-clock row is used.
  std::optional<int64_t> epoch_seconds;
};

// Accepts CSV with header `time,q1..qK` or a JSON array of
// {"time": t, "q": [...]}. Rows are stably sorted by time.
EventSequence parse_demand_file(std::string_view bytes, int K,
                                const ParseOptions& opts = {});

std::string write_demand_file(const EventSequence& seq);

EventSequence read_demand_path(const std::string& path, int K);
// Infers K from the CSV header or the first JSON row.
EventSequence read_demand_path(const std::string& path);

}  // namespace relief

#endif  // RELIEF_DEMAND_HPP_
