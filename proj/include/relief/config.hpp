// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// File and JSON plumbing shared by the command-line tool.

#ifndef RELIEF_CONFIG_HPP_
#define RELIEF_CONFIG_HPP_

#include <string>
#include <vector>

#include "json.hpp"
#include "relief/demand.hpp"
#include "relief/harness.hpp"
#include "relief/sim.hpp"

namespace relief {

// Throws ConfigError when the file is missing or not valid JSON.
nlohmann::json load_json_file(const std::string& path);
// Throws ConfigError when the file cannot be read.
std::string read_file(const std::string& path);
// "-" writes to stdout. Throws ConfigError on failure.
void write_file(const std::string& path, const std::string& bytes);

// Agency state plus request parameters for `optimize`.
//   {"T", "T_plus", "R", "U", "unmet": [[[t, q], ...], ...], "W", "w", "c",
//    "xi", "phi", "b", "T_plus_max", "h_c"}
// unmet, phi, b, T_plus_max and h_c are optional. U defaults to the unmet
// totals. xi defaults to T_plus plus
// the transport time.
struct OptimizeInput {
  AgencyState state;
  DeprivationParams dep;
  double T_plus_max = 0.0;  // upper end of the arrival distribution
  std::vector<double> h_c;  // per-type holding cost

  static OptimizeInput from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

// Input for `bench`: simulated datasets swept over W or c.
struct BenchConfig {
  HorizonConfig horizon;
  SimConfig sim;
  int datasets = 5;
  std::vector<std::string> methods{"cnm-prr", "ifcfs", "rer"};
  SweepGrid grid;

  // W from 180 to 230 in steps of 10.
  static BenchConfig Default();
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static BenchConfig from_json(const nlohmann::json& j);
};

// One sampled future as [{"time": t, "q": [...]}, ...].
nlohmann::ordered_json sequence_to_json(const EventSequence& seq);

}  // namespace relief

#endif  // RELIEF_CONFIG_HPP_
