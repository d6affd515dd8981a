// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <sstream>

#include "relief/error.hpp"
#include "relief/parallel.hpp"

namespace relief {

namespace {

uint64_t DeriveSeed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  Rng r = SubStream(seed, tag, index);
  return r();
}

struct UnitItem {
  double c;
  double time;
  int unit;  // position inside its block
  int type;
};

// Units ordered by importance (descending), time, position in block, type;
// taken while they fit.
std::vector<int> PriorityFill(const std::vector<NetDemandSeq>& net,
                              const std::vector<double>& c,
                              const std::vector<double>& w, double W) {
  const int K = static_cast<int>(net.size());
  std::vector<UnitItem> items;
  for (int k = 0; k < K; ++k) {
    for (const auto& b : net[k].entries) {
      for (int u = 0; u < b.quantity; ++u) items.push_back({c[k], b.time, u, k});
    }
  }
  std::sort(items.begin(), items.end(), [](const UnitItem& a, const UnitItem& b) {
    if (a.c != b.c) return a.c > b.c;
    if (a.time != b.time) return a.time < b.time;
    if (a.unit != b.unit) return a.unit < b.unit;
    return a.type < b.type;
  });
  std::vector<int> x(K, 0);
  double left = W;
  const double tol = 1e-9 * std::max(1.0, W);
  for (const auto& it : items) {
    if (w[it.type] <= left + tol) {
      ++x[it.type];
      left -= w[it.type];
    }
  }
  return x;
}

AgencyState StateAt(const FifoLedger& ledger, double T,
                    const HorizonConfig& cfg) {
  AgencyState s;
  s.T = T;
  s.T_plus = T + cfg.transport_time;
  s.R = ledger.stock();
  s.U = ledger.backlog_totals();
  s.unmet = ledger.backlog();
  s.W = cfg.W;
  s.w = cfg.w;
  s.c = cfg.c;
  for (int k = 0; k < cfg.num_types(); ++k) {
    double off = cfg.xi_offset.empty() ? cfg.transport_time : cfg.xi_offset[k];
    s.xi.push_back(s.T_plus + off);
  }
  return s;
}

RequestPlan Decide(Method m, const AgencyState& s,
                   const FuturePredictor* predictor, const HorizonConfig& cfg,
                   uint64_t seed, int cycle) {
  RequestPlan plan;
  if (m == Method::kRer) {
    plan.x = baseline_rer(s);
  } else if (m == Method::kIfcfs) {
    Rng rng = SubStream(seed, "ifcfs", cycle);
    plan.x = baseline_ifcfs(predictor->sample_future(s.T, s.T_plus, rng), s);
  } else {
    ScenarioSet scen = build_scenarios(*predictor, s, cfg.psi,
                                       DeriveSeed(seed, "scenario", cycle),
                                       cfg.threads);
    return greedy_solve(scen, cfg.W, cfg.w,
                        CostContext::from_state(s, cfg.dep));
  }
  double load = 0.0;
  for (std::size_t k = 0; k < plan.x.size(); ++k) load += s.w[k] * plan.x[k];
  plan.binding = load >= cfg.W - 1e-9 * std::max(1.0, cfg.W);
  return plan;
}

ModelConfig HorizonModelConfig(const HorizonConfig& cfg, Variant v) {
  ModelConfig m = VariantConfig(cfg.model, v);
  m.K = cfg.num_types();
  m.importance = cfg.c;
  m.csd_window = cfg.transport_time;
  m.t_minus = cfg.T_minus;
  return m;
}

std::shared_ptr<const FuturePredictor> MakePredictor(
    const HorizonInputs& in, const CycleModels* models,
    const EventSequence& history, int cycle) {
  if (in.predictor) return (*in.predictor)(history, cycle);
  return std::make_shared<TppPredictor>(models->per_cycle[cycle], history);
}

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Method ParseMethod(std::string_view name) {
  if (name == "cnm-prr") return Method::kCnmPrr;
  if (name == "ci-prr") return Method::kCiPrr;
  if (name == "nll-ci-prr") return Method::kNllCiPrr;
  if (name == "rer") return Method::kRer;
  if (name == "ifcfs") return Method::kIfcfs;
  throw ConfigError("unknown method: " + std::string(name));
}

std::string MethodName(Method m) {
  switch (m) {
    case Method::kCnmPrr: return "cnm-prr";
    case Method::kCiPrr: return "ci-prr";
    case Method::kNllCiPrr: return "nll-ci-prr";
    case Method::kRer: return "rer";
    case Method::kIfcfs: return "ifcfs";
  }
  return "";
}

std::vector<Method> AllMethods() {
  return {Method::kCnmPrr, Method::kCiPrr, Method::kNllCiPrr, Method::kRer,
          Method::kIfcfs};
}

Variant VariantOf(Method m) {
  switch (m) {
    case Method::kCnmPrr: return Variant::kFull;
    case Method::kCiPrr: return Variant::kCi;
    case Method::kNllCiPrr:
    case Method::kIfcfs: return Variant::kNllCi;
    case Method::kRer: return Variant::kNone;
  }
  return Variant::kNone;
}

ModelConfig VariantConfig(const ModelConfig& base, Variant v) {
  ModelConfig m = base;
  m.ablate_correlation = v == Variant::kCi || v == Variant::kNllCi;
  m.ablate_csd = v == Variant::kNllCi;
  return m;
}

std::vector<double> HorizonConfig::schedule() const {
  std::vector<double> out;
  for (int j = 0;; ++j) {
    double t = first_request + j * transport_time;
    if (t >= end && j > 0) break;
    if (cycles > 0 && j >= cycles) break;
    out.push_back(t);
  }
  return out;
}

void HorizonConfig::validate() const {
  if (!(transport_time > 0)) throw ConfigError("transport_time must be > 0");
  if (!(first_request >= T_minus)) {
    throw ConfigError("first_request must not precede T_minus");
  }
  if (!(end > first_request)) throw ConfigError("end must follow first_request");
  if (cycles < 0) throw ConfigError("cycles must be >= 0");
  const std::size_t K = c.size();
  if (K == 0) throw ConfigError("at least one resource type is required");
  if (w.size() != K) throw ConfigError("w needs one weight per type");
  for (double v : w) {
    if (!(v > 0)) throw ConfigError("weights must be positive");
  }
  for (double v : c) {
    if (!(v > 1)) throw ConfigError("importance scores must exceed 1");
  }
  if (!(W > 0)) throw ConfigError("W must be positive");
  if (!xi_offset.empty()) {
    if (xi_offset.size() != K) throw ConfigError("xi_offset needs one value per type");
    for (double v : xi_offset) {
      if (!(v > 0)) throw ConfigError("xi_offset must be positive");
    }
  }
  if (!initial_stock.empty()) {
    if (initial_stock.size() != K) {
      throw ConfigError("initial_stock needs one value per type");
    }
    for (int v : initial_stock) {
      if (v < 0) throw ConfigError("initial_stock must be >= 0");
    }
  }
  if (psi < 1) throw ConfigError("psi must be >= 1");
  if (finetune_epochs < 0) throw ConfigError("finetune_epochs must be >= 0");
  ParseMethod(method);
  ModelConfig m = model;
  m.K = static_cast<int>(K);
  m.importance.clear();
  m.validate();
}

nlohmann::ordered_json HorizonConfig::to_json() const {
  nlohmann::ordered_json j;
  j["T_minus"] = T_minus;
  j["first_request"] = first_request;
  j["end"] = end;
  j["cycles"] = cycles;
  j["transport_time"] = transport_time;
  j["final_cleanup"] = final_cleanup;
  j["W"] = W;
  j["w"] = w;
  j["c"] = c;
  j["xi_offset"] = xi_offset;
  j["method"] = method;
  j["phi"] = dep.phi;
  j["b"] = dep.b;
  j["initial_stock"] = initial_stock;
  j["psi"] = psi;
  j["model"] = model.to_json();
  j["finetune_epochs"] = finetune_epochs;
  j["full_retrain"] = full_retrain;
  return j;
}

HorizonConfig HorizonConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("horizon config must be an object");
  HorizonConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "T_minus") c.T_minus = v.get<double>();
      else if (k == "first_request") c.first_request = v.get<double>();
      else if (k == "end") c.end = v.get<double>();
      else if (k == "cycles") c.cycles = v.get<int>();
      else if (k == "transport_time") c.transport_time = v.get<double>();
      else if (k == "final_cleanup") c.final_cleanup = v.get<bool>();
      else if (k == "W") c.W = v.get<double>();
      else if (k == "w") c.w = v.get<std::vector<double>>();
      else if (k == "c") c.c = v.get<std::vector<double>>();
      else if (k == "xi_offset") c.xi_offset = v.get<std::vector<double>>();
      else if (k == "method") c.method = v.get<std::string>();
      else if (k == "phi") c.dep.phi = v.get<double>();
      else if (k == "b") c.dep.b = v.get<double>();
      else if (k == "initial_stock") c.initial_stock = v.get<std::vector<int>>();
      else if (k == "psi") c.psi = v.get<int>();
      else if (k == "model") c.model = ModelConfig::from_json(v);
      else if (k == "finetune_epochs") c.finetune_epochs = v.get<int>();
      else if (k == "full_retrain") c.full_retrain = v.get<bool>();
      else throw ConfigError("unknown horizon key: " + k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("horizon config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json MetricsReport::to_json(bool with_ledger) const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["avg_unit_deprivation"] = avg_unit_deprivation;
  j["avg_unit_delay"] = avg_unit_delay;
  j["fulfilled_future_pct"] = fulfilled_future_pct;
  j["units"] = units;
  j["unfulfilled_units"] = unfulfilled_units;
  auto& plans_j = j["plans"] = nlohmann::ordered_json::array();
  for (const auto& p : plans) {
    nlohmann::ordered_json pj;
    pj["T"] = p.T;
    pj["T_plus"] = p.T_plus;
    pj["U"] = p.U;
    pj["R"] = p.R;
    pj["plan"] = nlohmann::ordered_json::parse(plan_to_json(p.plan));
    plans_j.push_back(std::move(pj));
  }
  if (with_ledger) {
    auto& lj = j["ledger"] = nlohmann::ordered_json::array();
    for (const auto& f : ledger) {
      lj.push_back({{"type", f.type},
                    {"demand_time", f.demand_time},
                    {"fulfill_time", f.fulfill_time},
                    {"quantity", f.quantity}});
    }
  }
  return j;
}

CycleModels train_cycle_models(const EventSequence& dataset,
                               const HorizonConfig& config, Variant v,
                               uint64_t seed) {
  config.validate();
  CycleModels out;
  out.variant = v;
  if (v == Variant::kNone) return out;
  const ModelConfig mc = HorizonModelConfig(config, v);
  const auto sched = config.schedule();
  for (std::size_t j = 0; j < sched.size(); ++j) {
    EventSequence hist = dataset.prefix(sched[j]);
    if (hist.size() < 2) {
      throw ValidationError("fewer than two demands before the request at " +
                            FormatNumber(sched[j]));
    }
    TrainOptions opts;
    opts.seed = DeriveSeed(seed, "train", j);
    opts.threads = config.threads;
    if (j > 0 && !config.full_retrain) {
      opts.warm_start = out.per_cycle.back().get();
      opts.epochs = config.finetune_epochs;
    }
    TrainResult r = train(hist, mc, opts);
    out.per_cycle.push_back(
        std::make_shared<const ModelParams>(std::move(r.params)));
  }
  return out;
}

MetricsReport run_rolling_horizon(const EventSequence& dataset,
                                  const HorizonConfig& config, uint64_t seed,
                                  const HorizonInputs& inputs) {
  config.validate();
  const Method method = ParseMethod(config.method);
  const int K = config.num_types();
  if (dataset.num_types() != K) {
    throw ValidationError("dataset type count differs from the config");
  }
  const auto sched = config.schedule();
  const double tt = config.transport_time;

  CycleModels trained;
  const CycleModels* models = inputs.models;
  const bool needs_model = method != Method::kRer && !inputs.predictor;
  if (needs_model) {
    if (!models) {
      trained = train_cycle_models(dataset, config, VariantOf(method), seed);
      models = &trained;
    }
    if (models->variant != VariantOf(method) ||
        models->per_cycle.size() < sched.size()) {
      throw ConfigError("supplied models do not match the method or schedule");
    }
  }

  std::vector<int> stock = config.initial_stock;
  if (stock.empty()) stock.assign(K, 0);
  FifoLedger ledger(K, stock);
  const EventSequence evs = dataset.window(config.first_request, config.end);
  std::size_t next = 0;
  auto feed = [&](double t) {
    while (next < evs.size() && evs[next].time <= t) ledger.demand(evs[next++]);
  };
  struct Pending {
    double time;
    std::vector<int> units;
  };
  std::vector<Pending> pending;
  std::size_t next_arrival = 0;
  auto advance = [&](double t) {
    while (next_arrival < pending.size() && pending[next_arrival].time <= t) {
      feed(pending[next_arrival].time);
      ledger.arrival(pending[next_arrival].time, pending[next_arrival].units);
      ++next_arrival;
    }
    feed(t);
  };

  MetricsReport rep;
  rep.method = MethodName(method);
  for (std::size_t j = 0; j < sched.size(); ++j) {
    const double T = sched[j];
    advance(T);
    AgencyState s = StateAt(ledger, T, config);
    std::shared_ptr<const FuturePredictor> pred;
    if (method != Method::kRer) {
      pred = MakePredictor(inputs, models, dataset.prefix(T),
                           static_cast<int>(j));
    }
    CyclePlan cp;
    cp.T = T;
    cp.T_plus = s.T_plus;
    cp.U = s.U;
    cp.R = s.R;
    cp.plan = Decide(method, s, pred.get(), config, seed, static_cast<int>(j));
    pending.push_back({s.T_plus, cp.plan.x});
    rep.plans.push_back(std::move(cp));
  }
  double last = config.end;
  if (!pending.empty()) last = std::max(last, pending.back().time);
  advance(last);
  if (config.final_cleanup) ledger.arrival(last + tt, ledger.backlog_totals());
  for (int v : ledger.backlog_totals()) rep.unfulfilled_units += v;

  rep.ledger = ledger.fulfilled();
  double dep_sum = 0.0, delay_sum = 0.0;
  for (const auto& f : rep.ledger) {
    double d = f.fulfill_time - f.demand_time;
    dep_sum += f.quantity * deprivation_cost(d, config.c[f.type], config.dep);
    delay_sum += f.quantity * d;
    rep.units += f.quantity;
  }
  if (rep.units > 0) {
    rep.avg_unit_deprivation = dep_sum / rep.units;
    rep.avg_unit_delay = delay_sum / rep.units;
  }
  double pct_sum = 0.0;
  int counted = 0;
  for (double T : sched) {
    const double hi = std::min(T + tt, config.end);
    int total = 0, met = 0;
    for (const auto& f : rep.ledger) {
      if (f.demand_time > T && f.demand_time <= hi) {
        total += f.quantity;
        if (f.fulfill_time <= T + tt) met += f.quantity;
      }
    }
    for (const auto& blocks : ledger.backlog()) {
      for (const auto& b : blocks) {
        if (b.time > T && b.time <= hi) total += b.quantity;
      }
    }
    if (total > 0) {
      pct_sum += static_cast<double>(met) / total;
      ++counted;
    }
  }
  if (counted > 0) rep.fulfilled_future_pct = pct_sum / counted;
  return rep;
}

std::vector<int> baseline_rer(const AgencyState& state) {
  state.validate();
  std::vector<NetDemandSeq> net(state.num_types());
  for (int k = 0; k < state.num_types(); ++k) {
    if (state.U[k] <= 0) continue;
    if (!state.unmet.empty() && !state.unmet[k].empty()) {
      net[k].entries = state.unmet[k];
    } else {
      net[k].entries.push_back({state.T, state.U[k]});
    }
  }
  return PriorityFill(net, state.c, state.w, state.W);
}

std::vector<int> baseline_ifcfs(const EventSequence& predicted,
                                const AgencyState& state) {
  state.validate();
  return PriorityFill(build_net_demand(state, predicted), state.c, state.w,
                      state.W);
}

std::vector<std::vector<int>> proportional_allocate(
    const std::vector<std::vector<int>>& requests,
    const std::vector<int>& stock) {
  const std::size_t L = requests.size();
  const std::size_t K = stock.size();
  for (const auto& r : requests) {
    if (r.size() != K) throw ValidationError("request width differs from stock");
    for (int v : r) {
      if (v < 0) throw ValidationError("requests must be >= 0");
    }
  }
  for (int v : stock) {
    if (v < 0) throw ValidationError("stock must be >= 0");
  }
  std::vector<std::vector<int>> out(L, std::vector<int>(K, 0));
  for (std::size_t k = 0; k < K; ++k) {
    int64_t total = 0;
    for (std::size_t l = 0; l < L; ++l) total += requests[l][k];
    if (total <= stock[k]) {
      for (std::size_t l = 0; l < L; ++l) out[l][k] = requests[l][k];
      continue;
    }
    std::vector<int64_t> rem(L);
    int64_t given = 0;
    for (std::size_t l = 0; l < L; ++l) {
      int64_t num = static_cast<int64_t>(stock[k]) * requests[l][k];
      out[l][k] = static_cast<int>(num / total);
      rem[l] = num % total;
      given += out[l][k];
    }
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; given < stock[k]; ++i, ++given) ++out[order[i]][k];
  }
  return out;
}

double fill_rate_std(const std::vector<double>& rates) {
  if (rates.empty()) return 0.0;
  double m = std::accumulate(rates.begin(), rates.end(), 0.0) / rates.size();
  double v = 0.0;
  for (double r : rates) v += (r - m) * (r - m);
  return std::sqrt(v / rates.size());
}

MultiAgencyConfig MultiAgencyConfig::Default() {
  MultiAgencyConfig c;
  for (double rate : {2.0, 1.0, 0.5}) {
    SimConfig s;
    s.nu = rate;
    s.lambda0 = rate;
    c.agencies.push_back(s);
  }
  c.horizon.cycles = 1;
  return c;
}

void MultiAgencyConfig::validate() const {
  if (agencies.size() < 2) throw ConfigError("at least two agencies are required");
  for (const auto& a : agencies) a.validate();
  if (runs < 1) throw ConfigError("runs must be >= 1");
  horizon.validate();
  if (static_cast<int>(stock.size()) != horizon.num_types()) {
    throw ConfigError("stock needs one value per type");
  }
  for (int v : stock) {
    if (v < 0) throw ConfigError("stock must be >= 0");
  }
  if (methods.empty()) throw ConfigError("no methods given");
  for (const auto& m : methods) ParseMethod(m);
}

nlohmann::ordered_json MultiAgencyConfig::to_json() const {
  nlohmann::ordered_json j;
  auto& a = j["agencies"] = nlohmann::ordered_json::array();
  for (const auto& s : agencies) a.push_back(s.to_json());
  j["stock"] = stock;
  j["runs"] = runs;
  j["horizon"] = horizon.to_json();
  j["methods"] = methods;
  j["same_seed_per_run"] = same_seed_per_run;
  return j;
}

MultiAgencyConfig MultiAgencyConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("multi-agency config must be an object");
  MultiAgencyConfig c = Default();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "agencies") {
        c.agencies.clear();
        for (const auto& a : v) c.agencies.push_back(SimConfig::from_json(a));
      } else if (k == "stock") {
        c.stock = v.get<std::vector<int>>();
      } else if (k == "runs") {
        c.runs = v.get<int>();
      } else if (k == "horizon") {
        c.horizon = HorizonConfig::from_json(v);
      } else if (k == "methods") {
        c.methods = v.get<std::vector<std::string>>();
      } else if (k == "same_seed_per_run") {
        c.same_seed_per_run = v.get<bool>();
      } else {
        throw ConfigError("unknown multi-agency key: " + k);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("multi-agency config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<MultiAgencyRow> run_multi_agency(const MultiAgencyConfig& config,
                                             uint64_t seed, int threads) {
  config.validate();
  const auto& hc = config.horizon;
  const int K = hc.num_types();
  const std::size_t L = config.agencies.size();
  const double T = hc.first_request;
  const double T_plus = T + hc.transport_time;
  std::vector<Method> methods;
  for (const auto& m : config.methods) methods.push_back(ParseMethod(m));
  std::vector<Variant> variants;
  for (Method m : methods) {
    Variant v = VariantOf(m);
    if (v != Variant::kNone &&
        std::find(variants.begin(), variants.end(), v) == variants.end()) {
      variants.push_back(v);
    }
  }

  // Simulate and train every (run, agency) cell.
  struct Cell {
    EventSequence data;
    std::vector<std::shared_ptr<const ModelParams>> models;  // per variant
  };
  const std::size_t cells = static_cast<std::size_t>(config.runs) * L;
  std::vector<Cell> cell(cells);
  HorizonConfig one = hc;
  one.cycles = 1;
  one.end = T_plus;
  one.threads = 1;
  ParallelFor(cells, threads, [&](std::size_t i) {
    const std::size_t key = config.same_seed_per_run ? i / L : i;
    SimConfig sc = config.agencies[i % L];
    sc.seed = DeriveSeed(seed, "simulate", key);
    sc.horizon = std::max(sc.horizon, T_plus);
    cell[i].data = simulate_dataset(sc);
    for (Variant v : variants) {
      auto cm = train_cycle_models(cell[i].data, one, v,
                                   DeriveSeed(seed, "train", key));
      cell[i].models.push_back(cm.per_cycle[0]);
    }
  });

  std::vector<MultiAgencyRow> rows;
  for (Method m : methods) {
    MultiAgencyRow row;
    row.method = MethodName(m);
    const Variant v = VariantOf(m);
    const std::size_t vi =
        std::find(variants.begin(), variants.end(), v) - variants.begin();
    row.run_deprivation.resize(config.runs);
    row.run_fill_rate.resize(config.runs);
    row.run_fill_std.resize(config.runs);
    ParallelFor(config.runs, threads, [&](std::size_t r) {
      std::vector<std::vector<int>> req(L);
      std::vector<int> zero(K, 0);
      for (std::size_t l = 0; l < L; ++l) {
        const Cell& c = cell[r * L + l];
        FifoLedger empty(K, hc.initial_stock.empty() ? zero : hc.initial_stock);
        AgencyState s = StateAt(empty, T, one);
        std::shared_ptr<const FuturePredictor> pred;
        if (v != Variant::kNone) {
          pred = std::make_shared<TppPredictor>(c.models[vi], c.data.prefix(T));
        }
        const std::size_t key = config.same_seed_per_run ? r : r * L + l;
        req[l] = Decide(m, s, pred.get(), one, DeriveSeed(seed, "decide", key), 0).x;
      }
      auto alloc = proportional_allocate(req, config.stock);
      double dep_sum = 0.0;
      int units = 0;
      std::vector<double> rates(L, 1.0);
      for (std::size_t l = 0; l < L; ++l) {
        const Cell& c = cell[r * L + l];
        FifoLedger ledger(K, hc.initial_stock.empty() ? zero : hc.initial_stock);
        const EventSequence window = c.data.window(T, T_plus);
        for (const auto& e : window.events()) ledger.demand(e);
        ledger.arrival(T_plus, alloc[l]);
        ledger.arrival(T_plus + hc.transport_time, ledger.backlog_totals());
        int n = 0, met = 0;
        for (const auto& f : ledger.fulfilled()) {
          dep_sum += f.quantity * deprivation_cost(f.fulfill_time - f.demand_time,
                                                   hc.c[f.type], hc.dep);
          n += f.quantity;
          if (f.fulfill_time <= T_plus) met += f.quantity;
        }
        units += n;
        if (n > 0) rates[l] = static_cast<double>(met) / n;
      }
      row.run_deprivation[r] = units > 0 ? dep_sum / units : 0.0;
      row.run_fill_rate[r] = std::accumulate(rates.begin(), rates.end(), 0.0) / L;
      row.run_fill_std[r] = fill_rate_std(rates);
    });
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    };
    row.avg_unit_deprivation = mean(row.run_deprivation);
    row.avg_fill_rate = mean(row.run_fill_rate);
    row.fill_rate_std = mean(row.run_fill_std);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> bench_sweep(const std::vector<EventSequence>& datasets,
                                  const HorizonConfig& base,
                                  const std::vector<std::string>& methods,
                                  const SweepGrid& grid, uint64_t seed,
                                  int threads) {
  if (grid.param != "W" && grid.param != "c") {
    throw ConfigError("sweep parameter must be W or c");
  }
  if (grid.size() == 0) throw ConfigError("sweep grid is empty");
  if (datasets.empty()) throw ConfigError("no datasets to sweep over");
  if (methods.empty()) throw ConfigError("no methods given");
  std::vector<HorizonConfig> points;
  std::vector<std::string> labels;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    HorizonConfig h = base;
    h.threads = 1;
    if (grid.param == "W") {
      h.W = grid.W[g];
      labels.push_back("W=" + FormatNumber(h.W));
    } else {
      h.c = grid.c[g];
      std::string s = "c=";
      for (std::size_t k = 0; k < h.c.size(); ++k) {
        s += (k ? "/" : "") + FormatNumber(h.c[k]);
      }
      labels.push_back(s);
    }
    h.validate();
    points.push_back(std::move(h));
  }
  for (const auto& m : methods) ParseMethod(m);

  const std::size_t M = methods.size(), G = points.size(), D = datasets.size();
  std::vector<MetricsReport> reps(M * G * D);
  ParallelFor(D, threads, [&](std::size_t d) {
    const uint64_t ds = DeriveSeed(seed, "bench", d);
    // Training ignores W, so a W sweep reuses one model set per variant.
    std::deque<std::pair<std::pair<Variant, std::size_t>, CycleModels>> cache;
    auto models_for = [&](Variant v, std::size_t g) -> const CycleModels* {
      if (v == Variant::kNone) return nullptr;
      std::size_t key_g = grid.param == "W" ? 0 : g;
      for (const auto& [key, cm] : cache) {
        if (key.first == v && key.second == key_g) return &cm;
      }
      cache.push_back({{v, key_g}, train_cycle_models(datasets[d], points[g], v, ds)});
      return &cache.back().second;
    };
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t m = 0; m < M; ++m) {
        HorizonConfig h = points[g];
        h.method = methods[m];
        HorizonInputs in;
        in.models = models_for(VariantOf(ParseMethod(h.method)), g);
        reps[(m * G + g) * D + d] = run_rolling_horizon(datasets[d], h, ds, in);
      }
    }
  });
  std::vector<SweepRow> rows;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t g = 0; g < G; ++g) {
      SweepRow row;
      row.method = MethodName(ParseMethod(methods[m]));
      row.point = labels[g];
      for (std::size_t d = 0; d < D; ++d) {
        const auto& r = reps[(m * G + g) * D + d];
        row.avg_unit_deprivation += r.avg_unit_deprivation / D;
        row.avg_unit_delay += r.avg_unit_delay / D;
        row.fulfilled_future_pct += r.fulfilled_future_pct / D;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "method,point,avg_unit_deprivation,avg_unit_delay,fulfilled_future_pct\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.point << ',' << FormatNumber(r.avg_unit_deprivation)
       << ',' << FormatNumber(r.avg_unit_delay) << ','
       << FormatNumber(r.fulfilled_future_pct) << '\n';
  }
  return os.str();
}

}  // namespace relief
