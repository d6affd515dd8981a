// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Rolling-horizon evaluation, request baselines, multi-agency allocation and
// parameter sweeps.

#ifndef RELIEF_HARNESS_HPP_
#define RELIEF_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "relief/cost.hpp"
#include "relief/demand.hpp"
#include "relief/predictor.hpp"
#include "relief/saa.hpp"
#include "relief/sim.hpp"
#include "relief/tpp.hpp"

namespace relief {

enum class Method { kCnmPrr, kCiPrr, kNllCiPrr, kRer, kIfcfs };

// Accepts cnm-prr, ci-prr, nll-ci-prr, rer, ifcfs. Throws ConfigError.
Method ParseMethod(std::string_view name);
std::string MethodName(Method m);
std::vector<Method> AllMethods();

// Model variant a method trains: full, without mark correlation, or
// likelihood-only without mark correlation (also used by IFCFS).
enum class Variant { kNone, kFull, kCi, kNllCi };
Variant VariantOf(Method m);
ModelConfig VariantConfig(const ModelConfig& base, Variant v);

struct HorizonConfig {
  double T_minus = 0.0;
  double first_request = 36.0;
  // Requests repeat every transport_time while the request time is before
  // end. cycles > 0 caps the count.
  double end = 48.0;
  int cycles = 0;
  double transport_time = 12.0;
  bool final_cleanup = true;
  double W = 200.0;
  std::vector<double> w{1.0, 1.0, 1.0};
  std::vector<double> c{2.0, 4.0, 2.0};
  // Fallback delivery per type, as an offset from T_plus. Empty means one
  // transport cycle.
  std::vector<double> xi_offset;
  std::string method = "cnm-prr";
  DeprivationParams dep;
  std::vector<int> initial_stock;  // empty means zero
  int psi = 100;
  ModelConfig model;
  int finetune_epochs = 10;
  bool full_retrain = false;
  int threads = 1;

  int num_types() const { return static_cast<int>(c.size()); }
  std::vector<double> schedule() const;
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static HorizonConfig from_json(const nlohmann::json& j);
};

struct CyclePlan {
  double T = 0.0;
  double T_plus = 0.0;
  std::vector<int> U;
  std::vector<int> R;
  RequestPlan plan;
};

struct MetricsReport {
  std::string method;
  double avg_unit_deprivation = 0.0;
  double avg_unit_delay = 0.0;
  double fulfilled_future_pct = 0.0;
  int units = 0;
  int unfulfilled_units = 0;  // nonzero only without the final shipment
  std::vector<CyclePlan> plans;
  std::vector<Fulfillment> ledger;  // evaluation-window demands only

  nlohmann::ordered_json to_json(bool with_ledger = true) const;
};

// One trained parameter set per request cycle.
struct CycleModels {
  Variant variant = Variant::kNone;
  std::vector<std::shared_ptr<const ModelParams>> per_cycle;
};

// Trains on the history before each request time, warm-starting from the
// previous cycle unless full_retrain is set.
CycleModels train_cycle_models(const EventSequence& dataset,
                               const HorizonConfig& config, Variant v,
                               uint64_t seed);

// Replaces the trained model: called with the history up to each request
// time and the cycle index.
using PredictorFactory = std::function<std::shared_ptr<const FuturePredictor>(
    const EventSequence& history, int cycle)>;

struct HorizonInputs {
  const CycleModels* models = nullptr;       // trained on demand if null
  const PredictorFactory* predictor = nullptr;  // overrides models
};

MetricsReport run_rolling_horizon(const EventSequence& dataset,
                                  const HorizonConfig& config, uint64_t seed,
                                  const HorizonInputs& inputs = {});

// Unmet units, cut to capacity by importance, then time, then type order.
std::vector<int> baseline_rer(const AgencyState& state);

// Net demand from the unmet backlog plus predicted demands, requested by
// importance group and then time until W is used up.
std::vector<int> baseline_ifcfs(const EventSequence& predicted,
                                const AgencyState& state);

// requests is L x K. Per type, scales down to stock by floor plus largest
// remainder (ties to the lower agency index) when requests exceed stock.
std::vector<std::vector<int>> proportional_allocate(
    const std::vector<std::vector<int>>& requests,
    const std::vector<int>& stock);

struct MultiAgencyConfig {
  std::vector<SimConfig> agencies;
  std::vector<int> stock{198, 220, 198};
  int runs = 20;
  HorizonConfig horizon;
  std::vector<std::string> methods{"cnm-prr", "ifcfs"};
  // All agencies of a run draw from the same simulation and training seeds.
  bool same_seed_per_run = false;

  // Three agencies with nu = lambda0 = 2, 1 and 0.5.
  static MultiAgencyConfig Default();
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static MultiAgencyConfig from_json(const nlohmann::json& j);
};

struct MultiAgencyRow {
  std::string method;
  double avg_unit_deprivation = 0.0;
  double avg_fill_rate = 0.0;
  double fill_rate_std = 0.0;
  // Per run, for paired comparisons.
  std::vector<double> run_deprivation;
  std::vector<double> run_fill_rate;
  std::vector<double> run_fill_std;
};

// Single request cycle per agency; the central stock is split by
// proportional_allocate and arrives at T_plus.
std::vector<MultiAgencyRow> run_multi_agency(const MultiAgencyConfig& config,
                                             uint64_t seed, int threads = 1);

// Population standard deviation.
double fill_rate_std(const std::vector<double>& rates);

struct SweepGrid {
  std::string param = "W";  // "W" or "c"
  std::vector<double> W;
  std::vector<std::vector<double>> c;
  std::size_t size() const { return param == "W" ? W.size() : c.size(); }
};

struct SweepRow {
  std::string method;
  std::string point;
  double avg_unit_deprivation = 0.0;
  double avg_unit_delay = 0.0;
  double fulfilled_future_pct = 0.0;
};

// Metrics averaged over the datasets, one row per (method, grid point).
std::vector<SweepRow> bench_sweep(const std::vector<EventSequence>& datasets,
                                  const HorizonConfig& base,
                                  const std::vector<std::string>& methods,
                                  const SweepGrid& grid, uint64_t seed,
                                  int threads = 1);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace relief

#endif  // RELIEF_HARNESS_HPP_
