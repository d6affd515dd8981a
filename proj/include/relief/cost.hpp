// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Deprivation cost, per-unit cost reduction and the piecewise-linear
// cost-reduction curves fed to the request optimizer.

#ifndef RELIEF_COST_HPP_
#define RELIEF_COST_HPP_

#include <vector>

#include "relief/demand.hpp"

namespace relief {

struct DeprivationParams {
  double phi = 1.5031;
  double b = 0.1172;
};

// Dollar cost of delaying one unit by delta hours.
double deprivation_cost(double delta, double c, const DeprivationParams& p);

// Cost saved per unit demanded at time t when it is served at T_plus instead
// of at the fallback time xi. Throws ValidationError when xi <= T_plus.
double reduction_B(double t, double c, double xi, double T_plus,
                   const DeprivationParams& p);

// B value for every entry of a net-demand sequence.
std::vector<double> entry_reductions(const NetDemandSeq& net, double c,
                                     double xi, double T_plus,
                                     const DeprivationParams& p);

// Total reduction from x units filled first-come-first-serve. x may be
// fractional; the marginal entry is filled in proportion.
double cost_reduction_g(double x, const NetDemandSeq& net,
                        const std::vector<double>& B_values);

// Base curve at arrival T_plus_sample less h_c per unit beyond |Q|.
double extended_g(double x, double T_plus_sample, const NetDemandSeq& net,
                  double h_c, double c, double xi,
                  const DeprivationParams& p);

struct CostCurve {
  std::vector<double> kinks;   // cumulative quantities, non-decreasing
  std::vector<double> slopes;  // left slope ending at each kink
  double tail_slope = 0.0;     // slope past the last kink
};

// Curve of a single net-demand sequence (one scenario, one type).
CostCurve curve_of(const NetDemandSeq& net,
                   const std::vector<double>& B_values);

}  // namespace relief

#endif  // RELIEF_COST_HPP_
