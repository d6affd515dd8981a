// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic demand generators: a self-correcting process for periodic
// demand, Hawkes processes for clustered demand, and a log-normal Poisson
// mean chain for quantities.

#ifndef RELIEF_SIM_HPP_
#define RELIEF_SIM_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "relief/demand.hpp"
#include "relief/random.hpp"

namespace relief {

struct SimConfig {
  double nu = 1.0;       // self-correcting trend
  double zeta_sc = 0.2;  // self-correcting drop per event
  double lambda0 = 1.0;  // Hawkes base rate
  double beta = 0.8;     // Hawkes jump size
  double sigma_H = 1.0;  // Hawkes decay time scale (hours)
  std::vector<std::vector<double>> Sigma = DefaultSigma();
  std::vector<double> lambda_init{2.0, 2.0, 2.0};
  double horizon = 48.0;
  uint64_t seed = 0;
  // Attach a full quantity vector from one shared chain to every event
  // instead of a single owning-type quantity.
  bool joint_marks = false;
  // Thinning bound step for the self-correcting process.
  double sc_bound_step = 0.5;

  static std::vector<std::vector<double>> DefaultSigma();
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
};

// log of exp(nu t - zeta N(t-)).
double self_correcting_log_intensity(double t, const std::vector<double>& past,
                                     const SimConfig& c);
double hawkes_intensity(double t, const std::vector<double>& past,
                        const SimConfig& c);

std::vector<double> simulate_self_correcting(const SimConfig& c, double horizon,
                                             Rng& rng);
std::vector<double> simulate_hawkes(const SimConfig& c, double horizon,
                                    Rng& rng);

// Lower-triangular L with L L^T = S. Throws ConfigError when S is not
// symmetric positive-semidefinite.
std::vector<std::vector<double>> cholesky(
    const std::vector<std::vector<double>>& S);

class MarkChain {
 public:
  explicit MarkChain(const SimConfig& c);
  // Advances lambda^{i-1} -> lambda^i and returns lambda^i.
  const std::vector<double>& step(Rng& rng);
  std::vector<int> draw_quantities(Rng& rng);  // Poisson(lambda^i) after step
  const std::vector<double>& lambda() const { return lambda_; }

 private:
  std::vector<std::vector<double>> L_;
  std::vector<double> lambda_;
};

struct MarkTrace {
  std::vector<std::vector<double>> lambdas;
  std::vector<std::vector<int>> quantities;
};
MarkTrace simulate_marks(int n, const SimConfig& c, Rng& rng);

// Raw arrival times per type (type 1 and 3 Hawkes, type 2 self-correcting)
// before quantities are attached.
struct SimArrivals {
  std::vector<std::vector<double>> times;  // [3]
};
SimArrivals simulate_arrivals(const SimConfig& c, int threads = 1);

// Merged 3-type dataset on [0, horizon]. Arrivals whose drawn quantity is
// zero carry no demand and are left out of the sequence.
EventSequence simulate_dataset(const SimConfig& c, int threads = 1);

// Compensator increments Lambda(t_i) - Lambda(t_{i-1}) (t_0 = 0) by
// composite Simpson integration of the intensity.
std::vector<double> rescaled_gaps(
    const std::vector<double>& times,
    const std::function<double(double, std::size_t)>& intensity,
    int panels_per_gap = 64);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
// One-sample Kolmogorov-Smirnov test against Exp(1).
KsResult ks_test_exp1(std::vector<double> samples);

}  // namespace relief

#endif  // RELIEF_SIM_HPP_
