// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/cost.hpp"

#include <algorithm>
#include <cmath>

#include "relief/error.hpp"

namespace relief {

double deprivation_cost(double delta, double c, const DeprivationParams& p) {
  return std::exp(p.phi + p.b * c * delta) - std::exp(p.phi);
}

double reduction_B(double t, double c, double xi, double T_plus,
                   const DeprivationParams& p) {
  if (!(xi > T_plus)) {
    throw ValidationError("fallback time xi must exceed the arrival time");
  }
  // e^{phi - bct}(e^{bc xi} - e^{bc T+}) written to avoid overflow when
  // times are large: both exponents are taken relative to t.
  const double bc = p.b * c;
  return std::exp(p.phi + bc * (T_plus - t)) * std::expm1(bc * (xi - T_plus));
}

std::vector<double> entry_reductions(const NetDemandSeq& net, double c,
                                     double xi, double T_plus,
                                     const DeprivationParams& p) {
  std::vector<double> out;
  out.reserve(net.entries.size());
  for (const auto& e : net.entries) {
    out.push_back(reduction_B(e.time, c, xi, T_plus, p));
  }
  return out;
}

double cost_reduction_g(double x, const NetDemandSeq& net,
                        const std::vector<double>& B_values) {
  if (B_values.size() != net.entries.size()) {
    throw ValidationError("B_values length does not match the sequence");
  }
  if (x < 0) throw DomainError("requested quantity must be non-negative");
  double remaining = x;
  double total = 0.0;
  for (std::size_t j = 0; j < net.entries.size() && remaining > 0; ++j) {
    double fill = std::min<double>(remaining, net.entries[j].quantity);
    total += fill * B_values[j];
    remaining -= fill;
  }
  return total;
}

double extended_g(double x, double T_plus_sample, const NetDemandSeq& net,
                  double h_c, double c, double xi,
                  const DeprivationParams& p) {
  auto B = entry_reductions(net, c, xi, T_plus_sample, p);
  double g = cost_reduction_g(x, net, B);
  double over = x - net.total();
  if (over > 0) g -= h_c * over;
  return g;
}

CostCurve curve_of(const NetDemandSeq& net,
                   const std::vector<double>& B_values) {
  if (B_values.size() != net.entries.size()) {
    throw ValidationError("B_values length does not match the sequence");
  }
  CostCurve curve;
  double s = 0.0;
  for (std::size_t j = 0; j < net.entries.size(); ++j) {
    s += net.entries[j].quantity;
    curve.kinks.push_back(s);
    curve.slopes.push_back(B_values[j]);
  }
  return curve;
}

}  // namespace relief
