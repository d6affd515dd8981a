// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Sample-average approximation of the request problem, the greedy solver
// with its optimality-gap certificate, the stochastic lead-time variant and
// an exhaustive oracle for small instances.

#ifndef RELIEF_SAA_HPP_
#define RELIEF_SAA_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relief/cost.hpp"
#include "relief/demand.hpp"
#include "relief/predictor.hpp"

namespace relief {

struct CostContext {
  std::vector<double> c;
  std::vector<double> xi;
  double T_plus = 0.0;
  DeprivationParams dep;

  int num_types() const { return static_cast<int>(c.size()); }
  static CostContext from_state(const AgencyState& s,
                                const DeprivationParams& dep = {});
};

// One scenario is a list of K net-demand sequences.
using Scenario = std::vector<NetDemandSeq>;

struct ScenarioSet {
  std::vector<Scenario> samples;
  int psi() const { return static_cast<int>(samples.size()); }
};

// Arrival-time draws, each with its own demand scenarios.
struct ExtendedScenarioSet {
  std::vector<double> arrivals;
  std::vector<ScenarioSet> per_arrival;
};

struct RequestPlan {
  std::vector<int> x;
  double objective = 0.0;
  double gap_bound = 0.0;
  int critical_type = -1;  // -1 when capacity never bound
  bool binding = false;
};

ScenarioSet build_scenarios(const FuturePredictor& predictor,
                            const AgencyState& state, int psi, uint64_t seed,
                            int threads = 1);

double saa_objective(const std::vector<double>& x, const ScenarioSet& s,
                     const CostContext& costs);
double saa_objective(const std::vector<int>& x, const ScenarioSet& s,
                     const CostContext& costs);

// Extended objective averaged over arrival draws.
double saa_objective_extended(const std::vector<double>& x,
                              const ExtendedScenarioSet& s,
                              const std::vector<double>& h_c,
                              const CostContext& costs);

// Aggregated curve per type. h_c empty selects the base model.
std::vector<CostCurve> enumerate_kinks_slopes(
    const ScenarioSet& s, const CostContext& costs,
    const std::vector<double>& h_c = {});

RequestPlan greedy_solve(const ScenarioSet& s, double W,
                         const std::vector<double>& w,
                         const CostContext& costs);

RequestPlan greedy_solve_extended(const ExtendedScenarioSet& s, double W,
                                  const std::vector<double>& w,
                                  const std::vector<double>& h_c,
                                  const CostContext& costs);

struct BruteForceResult {
  std::vector<int> x;
  double objective = 0.0;
};

// Throws CapacityError when prod_k (W/w_k + 1) exceeds max_states.
BruteForceResult brute_force_solve(const ScenarioSet& s, double W,
                                   const std::vector<double>& w,
                                   const CostContext& costs,
                                   double max_states = 1e7);

struct ProbeRow {
  int psi = 0;
  double mean = 0.0;
  double std_error = 0.0;  // standard deviation across replicates
};

// Draws one scenario from a stream.
using ScenarioSampler = std::function<Scenario(Rng&)>;

std::vector<ProbeRow> saa_convergence_probe(const ScenarioSampler& sampler,
                                            const std::vector<double>& x,
                                            const CostContext& costs,
                                            const std::vector<int>& psi_grid,
                                            int replicates, uint64_t seed,
                                            int threads = 1);

std::string plan_to_json(const RequestPlan& plan);

}  // namespace relief

#endif  // RELIEF_SAA_HPP_
