// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/saa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "relief/error.hpp"
#include "relief/parallel.hpp"

namespace relief {

CostContext CostContext::from_state(const AgencyState& s,
                                    const DeprivationParams& dep) {
  CostContext c;
  c.c = s.c;
  c.xi = s.xi;
  c.T_plus = s.T_plus;
  c.dep = dep;
  return c;
}

ScenarioSet build_scenarios(const FuturePredictor& predictor,
                            const AgencyState& state, int psi, uint64_t seed,
                            int threads) {
  if (psi < 1) throw ValidationError("psi must be >= 1");
  ScenarioSet out;
  out.samples.resize(psi);
  ParallelFor(psi, threads, [&](std::size_t i) {
    Rng rng = SubStream(seed, "scenario", i);
    EventSequence future = predictor.sample_future(state.T, state.T_plus, rng);
    out.samples[i] = build_net_demand(state, future);
  });
  return out;
}

namespace {

void CheckWidth(const ScenarioSet& s, const CostContext& costs,
                std::size_t x_size) {
  const std::size_t K = costs.c.size();
  if (x_size != K || costs.xi.size() != K) {
    throw ValidationError("request vector width does not match costs");
  }
  for (const auto& sc : s.samples) {
    if (sc.size() != K) throw ValidationError("scenario width mismatch");
  }
}

double ScenarioSetValue(const std::vector<double>& x, const ScenarioSet& s,
                        const CostContext& costs, double T_plus,
                        const std::vector<double>* h_c) {
  CheckWidth(s, costs, x.size());
  if (s.samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& sc : s.samples) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (h_c) {
        total += extended_g(x[k], T_plus, sc[k], (*h_c)[k], costs.c[k],
                            costs.xi[k], costs.dep);
      } else {
        auto B = entry_reductions(sc[k], costs.c[k], costs.xi[k], T_plus,
                                  costs.dep);
        total += cost_reduction_g(x[k], sc[k], B);
      }
    }
  }
  return total / s.psi();
}

std::vector<CostCurve> KinksAt(const ScenarioSet& s, const CostContext& costs,
                               double T_plus, const std::vector<double>* h_c) {
  const int K = costs.num_types();
  CheckWidth(s, costs, K);
  const int psi = s.psi();
  std::vector<CostCurve> curves(K);
  if (psi == 0) return curves;
  for (int k = 0; k < K; ++k) {
    const double h = h_c ? (*h_c)[k] : 0.0;
    std::vector<std::vector<double>> cum(psi), B(psi);
    std::vector<double> totals(psi, 0.0);
    struct Kink {
      double s;
      int psi;
      int idx;
    };
    std::vector<Kink> kinks;
    for (int p = 0; p < psi; ++p) {
      const auto& net = s.samples[p][k];
      B[p] = entry_reductions(net, costs.c[k], costs.xi[k], T_plus, costs.dep);
      double acc = 0.0;
      for (std::size_t j = 0; j < net.entries.size(); ++j) {
        acc += net.entries[j].quantity;
        cum[p].push_back(acc);
        kinks.push_back({acc, p, static_cast<int>(j)});
      }
      totals[p] = acc;
    }
    std::sort(kinks.begin(), kinks.end(), [](const Kink& a, const Kink& b) {
      if (a.s != b.s) return a.s < b.s;
      if (a.psi != b.psi) return a.psi < b.psi;
      return a.idx < b.idx;
    });
    auto& curve = curves[k];
    for (const auto& kk : kinks) {
      double sum = 0.0;
      for (int p = 0; p < psi; ++p) {
        if (kk.s <= totals[p]) {
          auto it = std::lower_bound(cum[p].begin(), cum[p].end(), kk.s);
          sum += B[p][it - cum[p].begin()];
        } else {
          sum -= h;
        }
      }
      curve.kinks.push_back(kk.s);
      curve.slopes.push_back(sum / psi);
    }
    curve.tail_slope = -h;
  }
  return curves;
}

struct GreedyOutcome {
  std::vector<int> x;
  double gap = 0.0;
  int critical = -1;
  bool binding = false;
};

GreedyOutcome RunGreedy(const std::vector<CostCurve>& curves, double W,
                        const std::vector<double>& w, bool stop_nonpositive) {
  const int K = static_cast<int>(curves.size());
  if (!(W > 0)) throw ValidationError("capacity W must be positive");
  if (static_cast<int>(w.size()) != K) throw ValidationError("w width");
  for (double v : w) {
    if (!(v > 0)) throw ValidationError("weights must be positive");
  }
  struct Entry {
    double ratio;
    double slope;
    int type;
    int kink;
  };
  std::vector<Entry> ranked;
  for (int k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < curves[k].slopes.size(); ++i) {
      ranked.push_back({curves[k].slopes[i] / w[k], curves[k].slopes[i], k,
                        static_cast<int>(i)});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Entry& a, const Entry& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    if (a.type != b.type) return a.type < b.type;
    return a.kink < b.kink;
  });

  GreedyOutcome out;
  std::vector<double> xs(K, 0.0);
  std::vector<int> taken(K, 0);
  const double tol = 1e-9 * std::max(1.0, W);
  for (const auto& e : ranked) {
    if (stop_nonpositive && e.slope <= 0) break;
    const int k = e.type;
    double prev = xs[k];
    xs[k] = curves[k].kinks[taken[k]];
    ++taken[k];
    double load = 0.0;
    for (int j = 0; j < K; ++j) load += w[j] * xs[j];
    if (load < W - tol) continue;
    if (std::fabs(load - W) <= tol) {
      out.binding = true;
      out.critical = k;
      out.gap = 0.0;
    } else {
      double others = load - w[k] * xs[k];
      double x_tilde = (W - others) / w[k];
      double fl = std::floor(x_tilde + 1e-12);
      xs[k] = std::max(prev, std::min(fl, xs[k]));
      // Guard against rounding pushing the plan over capacity.
      while (xs[k] > 0 && others + w[k] * xs[k] > W + tol) xs[k] -= 1.0;
      out.critical = k;
      out.gap = e.slope;
    }
    break;
  }
  out.x.resize(K);
  for (int k = 0; k < K; ++k) out.x[k] = static_cast<int>(std::llround(xs[k]));
  return out;
}

}  // namespace

double saa_objective(const std::vector<double>& x, const ScenarioSet& s,
                     const CostContext& costs) {
  return ScenarioSetValue(x, s, costs, costs.T_plus, nullptr);
}

double saa_objective(const std::vector<int>& x, const ScenarioSet& s,
                     const CostContext& costs) {
  return saa_objective(std::vector<double>(x.begin(), x.end()), s, costs);
}

double saa_objective_extended(const std::vector<double>& x,
                              const ExtendedScenarioSet& s,
                              const std::vector<double>& h_c,
                              const CostContext& costs) {
  if (s.arrivals.size() != s.per_arrival.size()) {
    throw ValidationError("arrival draws and scenario sets disagree");
  }
  if (s.arrivals.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t u = 0; u < s.arrivals.size(); ++u) {
    total += ScenarioSetValue(x, s.per_arrival[u], costs, s.arrivals[u], &h_c);
  }
  return total / static_cast<double>(s.arrivals.size());
}

std::vector<CostCurve> enumerate_kinks_slopes(const ScenarioSet& s,
                                              const CostContext& costs,
                                              const std::vector<double>& h_c) {
  return KinksAt(s, costs, costs.T_plus, h_c.empty() ? nullptr : &h_c);
}

RequestPlan greedy_solve(const ScenarioSet& s, double W,
                         const std::vector<double>& w,
                         const CostContext& costs) {
  auto curves = enumerate_kinks_slopes(s, costs);
  auto g = RunGreedy(curves, W, w, false);
  RequestPlan plan;
  plan.x = g.x;
  plan.gap_bound = g.gap;
  plan.critical_type = g.critical;
  plan.binding = g.binding;
  plan.objective = saa_objective(plan.x, s, costs);
  return plan;
}

RequestPlan greedy_solve_extended(const ExtendedScenarioSet& s, double W,
                                  const std::vector<double>& w,
                                  const std::vector<double>& h_c,
                                  const CostContext& costs) {
  const int K = costs.num_types();
  if (static_cast<int>(h_c.size()) != K) throw ValidationError("h_c width");
  for (double h : h_c) {
    if (h < 0) throw ValidationError("holding cost must be non-negative");
  }
  if (s.arrivals.size() != s.per_arrival.size() || s.arrivals.empty()) {
    throw ValidationError("need at least one arrival draw");
  }
  std::vector<double> mean(K, 0.0);
  RequestPlan plan;
  for (std::size_t u = 0; u < s.arrivals.size(); ++u) {
    auto curves = KinksAt(s.per_arrival[u], costs, s.arrivals[u], &h_c);
    auto g = RunGreedy(curves, W, w, true);
    for (int k = 0; k < K; ++k) mean[k] += g.x[k];
    // Reported certificate is the worst per-draw bound; averaging does not
    // carry the single-draw guarantee over.
    if (g.gap > plan.gap_bound) {
      plan.gap_bound = g.gap;
      plan.critical_type = g.critical;
    }
    plan.binding = plan.binding || g.binding;
  }
  plan.x.resize(K);
  std::vector<double> xd(K);
  for (int k = 0; k < K; ++k) {
    plan.x[k] = static_cast<int>(
        std::floor(mean[k] / static_cast<double>(s.arrivals.size()) + 1e-9));
    xd[k] = plan.x[k];
  }
  plan.objective = saa_objective_extended(xd, s, h_c, costs);
  return plan;
}

BruteForceResult brute_force_solve(const ScenarioSet& s, double W,
                                   const std::vector<double>& w,
                                   const CostContext& costs,
                                   double max_states) {
  const int K = costs.num_types();
  if (static_cast<int>(w.size()) != K) throw ValidationError("w width");
  std::vector<int> upper(K);
  double states = 1.0;
  for (int k = 0; k < K; ++k) {
    if (!(w[k] > 0)) throw ValidationError("weights must be positive");
    upper[k] = static_cast<int>(std::floor(W / w[k] + 1e-12));
    states *= upper[k] + 1.0;
  }
  if (states > max_states) {
    std::ostringstream msg;
    msg << "instance too large for exhaustive search: " << states
        << " candidate vectors (limit " << max_states << ")";
    throw CapacityError(msg.str());
  }
  // G is separable, so tabulate each coordinate once.
  std::vector<std::vector<double>> table(K);
  for (int k = 0; k < K; ++k) {
    table[k].resize(upper[k] + 1);
    std::vector<double> B;
    for (int v = 0; v <= upper[k]; ++v) {
      double sum = 0.0;
      for (const auto& sc : s.samples) {
        auto b = entry_reductions(sc[k], costs.c[k], costs.xi[k], costs.T_plus,
                                  costs.dep);
        sum += cost_reduction_g(v, sc[k], b);
      }
      table[k][v] = s.samples.empty() ? 0.0 : sum / s.psi();
    }
  }
  BruteForceResult best;
  best.x.assign(K, 0);
  best.objective = -1.0;
  std::vector<int> x(K, 0);
  const double tol = 1e-9 * std::max(1.0, W);
  std::function<void(int, double, double)> rec = [&](int k, double load,
                                                      double val) {
    if (k == K) {
      if (val > best.objective) {
        best.objective = val;
        best.x = x;
      }
      return;
    }
    for (int v = 0; v <= upper[k]; ++v) {
      double l = load + w[k] * v;
      if (l > W + tol) break;
      x[k] = v;
      rec(k + 1, l, val + table[k][v]);
    }
    x[k] = 0;
  };
  rec(0, 0.0, 0.0);
  return best;
}

std::vector<ProbeRow> saa_convergence_probe(const ScenarioSampler& sampler,
                                            const std::vector<double>& x,
                                            const CostContext& costs,
                                            const std::vector<int>& psi_grid,
                                            int replicates, uint64_t seed,
                                            int threads) {
  if (replicates < 2) throw ValidationError("need at least two replicates");
  for (std::size_t i = 0; i < psi_grid.size(); ++i) {
    if (psi_grid[i] < 1 || (i > 0 && psi_grid[i] <= psi_grid[i - 1])) {
      throw ValidationError("psi grid must be positive and increasing");
    }
  }
  std::vector<ProbeRow> rows;
  for (int psi : psi_grid) {
    std::vector<double> est(replicates);
    ParallelFor(replicates, threads, [&](std::size_t r) {
      Rng rng = SubStream(seed, "probe", r * 1000003ULL + psi);
      ScenarioSet set;
      set.samples.reserve(psi);
      for (int p = 0; p < psi; ++p) set.samples.push_back(sampler(rng));
      est[r] = saa_objective(x, set, costs);
    });
    // Shifted by the first estimate so identical replicates give exactly 0.
    double sd = 0.0, sdd = 0.0;
    for (double v : est) {
      sd += v - est[0];
      sdd += (v - est[0]) * (v - est[0]);
    }
    double var = std::max(0.0, (sdd - sd * sd / replicates) / (replicates - 1));
    rows.push_back({psi, est[0] + sd / replicates, std::sqrt(var)});
  }
  return rows;
}

std::string plan_to_json(const RequestPlan& plan) {
  nlohmann::ordered_json j;
  j["x"] = plan.x;
  j["objective"] = plan.objective;
  j["gap_bound"] = plan.gap_bound;
  j["critical_type"] = plan.critical_type;
  j["binding"] = plan.binding;
  return j.dump(2) + "\n";
}

}  // namespace relief
