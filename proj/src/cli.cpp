// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "relief/config.hpp"
#include "relief/error.hpp"
#include "relief/grad.hpp"
#include "relief/harness.hpp"
#include "relief/parallel.hpp"
#include "relief/saa.hpp"
#include "relief/sim.hpp"
#include "relief/tpp.hpp"

namespace relief {

namespace {

uint64_t DeriveSeed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  Rng r = SubStream(seed, tag, index);
  return r();
}

int Threads(int requested) { return requested > 0 ? requested : DefaultThreads(); }

std::string Dump(const nlohmann::ordered_json& j) { return j.dump(1) + "\n"; }

std::string Fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Options most subcommands take.
struct Common {
  std::string config;
  std::string out = "-";
  uint64_t seed = 0;
  int threads = 0;
};

void AddCommon(CLI::App* sub, Common& c, bool with_config = true) {
  if (with_config) sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--out", c.out, "Output path, - for stdout");
  sub->add_option("--seed", c.seed, "Random seed (default 0)");
  sub->add_option("--threads", c.threads,
                  "Thread cap; 0 reads RELIEF_OPTIM_THREADS or uses all cores");
}

int CmdSimulate(const Common& c, bool seed_given) {
  SimConfig sc;
  if (!c.config.empty()) sc = SimConfig::from_json(load_json_file(c.config));
  if (seed_given || c.config.empty()) sc.seed = c.seed;
  sc.validate();
  write_file(c.out, write_demand_file(simulate_dataset(sc, Threads(c.threads))));
  return kExitOk;
}

int CmdTrain(const Common& c, const std::string& data_path, double until,
             bool until_given, int epochs) {
  if (c.out == "-") throw ConfigError("train needs --out for the model file");
  EventSequence data = read_demand_path(data_path);
  nlohmann::json j = c.config.empty() ? nlohmann::json::object()
                                      : load_json_file(c.config);
  if (j.is_object() && !j.contains("K")) j["K"] = data.num_types();
  ModelConfig mc = ModelConfig::from_json(j);
  if (until_given) data = data.prefix(until);
  TrainOptions o;
  o.seed = DeriveSeed(c.seed, "train");
  o.threads = Threads(c.threads);
  o.epochs = epochs;
  TrainResult r = train(data, mc, o);
  write_file(c.out, r.params.to_json().dump(1) + "\n");
  nlohmann::ordered_json s;
  s["events"] = data.size();
  s["epochs"] = r.epoch_loss.size();
  s["final_loss"] = r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back();
  s["final_nll"] = r.epoch_nll.empty() ? 0.0 : r.epoch_nll.back();
  std::cout << s.dump() << "\n";
  return kExitOk;
}

int CmdPredict(const Common& c, const std::string& model_path,
               const std::string& data_path, double T, bool T_given,
               double T_plus, bool T_plus_given, int samples) {
  if (samples < 1) throw ValidationError("--psi must be >= 1");
  auto params = std::make_shared<const ModelParams>(ModelParams::load(model_path));
  EventSequence hist = read_demand_path(data_path, params->config().K);
  if (!T_given) T = hist.t_end();
  if (!T_plus_given) T_plus = T + params->config().csd_window;
  if (!(T_plus > T)) throw ValidationError("T_plus must follow T");
  TppPredictor pred(params, hist.prefix(T));
  nlohmann::ordered_json out;
  out["T"] = T;
  out["T_plus"] = T_plus;
  out["seed"] = c.seed;
  auto& arr = out["samples"] = nlohmann::ordered_json::array();
  for (int i = 0; i < samples; ++i) {
    Rng rng = SubStream(c.seed, "predict", i);
    arr.push_back(sequence_to_json(pred.sample_future(T, T_plus, rng)));
  }
  write_file(c.out, Dump(out));
  return kExitOk;
}

int CmdOptimize(const Common& c, const std::string& model_path,
                const std::string& state_path, const std::string& data_path,
                int psi, int upsilon) {
  if (psi < 1) throw ValidationError("--psi must be >= 1");
  if (upsilon < 0) throw ValidationError("--upsilon must be >= 0");
  OptimizeInput in = OptimizeInput::from_json(load_json_file(state_path));
  auto params = std::make_shared<const ModelParams>(ModelParams::load(model_path));
  const int K = in.state.num_types();
  if (params->config().K != K) {
    throw ValidationError("model and state disagree on the type count");
  }
  EventSequence hist(K);
  if (!data_path.empty()) hist = read_demand_path(data_path, K).prefix(in.state.T);
  TppPredictor pred(params, hist);
  const int threads = Threads(c.threads);
  const AgencyState& s = in.state;
  CostContext costs = CostContext::from_state(s, in.dep);
  RequestPlan plan;
  nlohmann::ordered_json out;
  if (upsilon == 0) {
    ScenarioSet set = build_scenarios(pred, s, psi, DeriveSeed(c.seed, "scenario"),
                                      threads);
    plan = greedy_solve(set, s.W, s.w, costs);
  } else {
    // Lead time ~ Gamma(shape = T_plus - T, scale 1) truncated at T_plus_max.
    const double shape = s.T_plus - s.T;
    const double cap = in.T_plus_max - s.T;
    if (!(shape > 0)) throw ValidationError("extended model needs T_plus > T");
    Rng rng = SubStream(c.seed, "arrival");
    std::gamma_distribution<double> lead(shape, 1.0);
    ExtendedScenarioSet ext;
    for (int u = 0; u < upsilon; ++u) {
      double g = lead(rng);
      for (int tries = 0; g > cap && tries < 1000; ++tries) g = lead(rng);
      g = std::min(g, cap);
      AgencyState su = s;
      su.T_plus = s.T + g;
      ext.arrivals.push_back(su.T_plus);
      ext.per_arrival.push_back(build_scenarios(
          pred, su, psi, DeriveSeed(c.seed, "scenario", u + 1), threads));
    }
    plan = greedy_solve_extended(ext, s.W, s.w, in.h_c, costs);
    out["arrivals"] = ext.arrivals;
  }
  out["plan"] = nlohmann::ordered_json::parse(plan_to_json(plan));
  out["psi"] = psi;
  out["upsilon"] = upsilon;
  out["seed"] = c.seed;
  out["state"] = in.to_json();
  write_file(c.out, Dump(out));
  return kExitOk;
}

int CmdEvaluate(const Common& c, const std::string& data_path,
                const std::string& method, int psi, bool full_retrain) {
  HorizonConfig hc;
  if (!c.config.empty()) hc = HorizonConfig::from_json(load_json_file(c.config));
  if (!method.empty()) hc.method = method;
  if (psi > 0) hc.psi = psi;
  if (full_retrain) hc.full_retrain = true;
  hc.threads = Threads(c.threads);
  hc.validate();
  EventSequence data = read_demand_path(data_path, hc.num_types());
  MetricsReport rep = run_rolling_horizon(data, hc, c.seed);
  nlohmann::ordered_json out;
  out["config"] = hc.to_json();
  out["seed"] = c.seed;
  out["report"] = rep.to_json();
  write_file(c.out, Dump(out));
  if (c.out != "-") {
    std::cout << rep.method << " avg_unit_deprivation=" << Fmt(rep.avg_unit_deprivation)
              << " avg_unit_delay=" << Fmt(rep.avg_unit_delay)
              << " fulfilled_future_pct=" << Fmt(rep.fulfilled_future_pct) << "\n";
  }
  return kExitOk;
}

int CmdMultiAgency(const Common& c, const std::vector<std::string>& methods,
                   int runs) {
  MultiAgencyConfig mc = MultiAgencyConfig::Default();
  if (!c.config.empty()) mc = MultiAgencyConfig::from_json(load_json_file(c.config));
  if (!methods.empty()) mc.methods = methods;
  if (runs > 0) mc.runs = runs;
  mc.validate();
  auto rows = run_multi_agency(mc, c.seed, Threads(c.threads));
  nlohmann::ordered_json out;
  out["config"] = mc.to_json();
  out["seed"] = c.seed;
  auto& arr = out["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["method"] = r.method;
    row["avg_unit_deprivation"] = r.avg_unit_deprivation;
    row["avg_fill_rate"] = r.avg_fill_rate;
    row["fill_rate_std"] = r.fill_rate_std;
    row["run_deprivation"] = r.run_deprivation;
    row["run_fill_rate"] = r.run_fill_rate;
    arr.push_back(std::move(row));
  }
  write_file(c.out, Dump(out));
  return kExitOk;
}

int CmdBench(const Common& c, const std::vector<std::string>& methods,
             int datasets) {
  BenchConfig bc = BenchConfig::Default();
  if (!c.config.empty()) bc = BenchConfig::from_json(load_json_file(c.config));
  if (!methods.empty()) bc.methods = methods;
  if (datasets > 0) bc.datasets = datasets;
  bc.validate();
  std::vector<EventSequence> data;
  for (int d = 0; d < bc.datasets; ++d) {
    SimConfig sc = bc.sim;
    sc.seed = DeriveSeed(c.seed, "simulate", d);
    data.push_back(simulate_dataset(sc));
  }
  auto rows = bench_sweep(data, bc.horizon, bc.methods, bc.grid, c.seed,
                          Threads(c.threads));
  const bool json = c.out.size() > 5 && c.out.substr(c.out.size() - 5) == ".json";
  if (!json) {
    write_file(c.out, sweep_to_csv(rows));
    return kExitOk;
  }
  nlohmann::ordered_json out;
  out["config"] = bc.to_json();
  out["seed"] = c.seed;
  auto& arr = out["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"method", r.method},
                   {"point", r.point},
                   {"avg_unit_deprivation", r.avg_unit_deprivation},
                   {"avg_unit_delay", r.avg_unit_delay},
                   {"fulfilled_future_pct", r.fulfilled_future_pct}});
  }
  write_file(c.out, Dump(out));
  return kExitOk;
}

int CmdSelftest(uint64_t seed, int instances) {
  SelftestResult r = run_selftest(seed, instances);
  std::cout << "gradient check: max relative error " << Fmt(r.grad_max_rel_error)
            << " (worst " << r.grad_worst_param << ") "
            << (r.grad_max_rel_error < 1e-3 ? "ok" : "FAIL") << "\n";
  std::cout << "gap certificate: " << r.certificate_instances - r.certificate_failures
            << "/" << r.certificate_instances << " instances within bound, binding equality "
            << (r.binding_equality_seen ? "seen" : "not seen") << " "
            << (r.certificate_failures == 0 && r.binding_equality_seen ? "ok" : "FAIL")
            << "\n";
  return r.ok() ? kExitOk : kExitNumeric;
}

EventSequence RandomShortSequence(Rng& rng, int K, int n, int cap) {
  std::exponential_distribution<double> gap(1.0);
  std::poisson_distribution<int> q(1.2);
  EventSequence seq(K);
  double t = 0.0;
  while (static_cast<int>(seq.size()) < n) {
    t += gap(rng);
    std::vector<int> a(K);
    bool any = false;
    for (int& v : a) {
      v = std::min(cap, q(rng));
      any |= v > 0;
    }
    if (any) seq.push_back({t, a});
  }
  seq.set_t_end(t + 0.5);
  return seq;
}

NetDemandSeq RandomNet(Rng& rng, int max_entries, int max_q) {
  std::uniform_real_distribution<double> t(0.0, 12.0);
  NetDemandSeq s;
  int n = static_cast<int>(rng() % (max_entries + 1));
  std::vector<double> times(n);
  for (double& v : times) v = t(rng);
  std::sort(times.begin(), times.end());
  for (double v : times) s.entries.push_back({v, 1 + static_cast<int>(rng() % max_q)});
  return s;
}

}  // namespace

void selftest_gradients(uint64_t seed, SelftestResult& res) {
  // Objective gradients: base, Bernoulli marks, independent marks.
  for (int variant = 0; variant < 3; ++variant) {
    ModelConfig cfg;
    cfg.K = 2;
    cfg.n_e = 6;
    cfg.n_z = 3;
    cfg.A_bar = variant == 1 ? 0 : 4;
    cfg.binary_marks = variant == 1;
    cfg.ablate_correlation = variant == 2;
    cfg.csd_event_samples = 2;
    cfg.csd_rollouts = 2;
    cfg.csd_window = 3.0;
    Rng rng = SubStream(seed, "selftest-seq", variant);
    EventSequence seq = RandomShortSequence(rng, 2, 5, cfg.binary_marks ? 1 : 4);
    ModelParams p = ModelParams::init(cfg, DeriveSeed(seed, "selftest-init", variant), &seq);
    auto dist = window_count_distribution(seq, cfg.csd_window);
    StepInputs in;
    in.seq = &seq;
    in.begin = 0;
    in.end = seq.size();
    in.h0.assign(cfg.n_e, 0.0);
    in.length_dist = &dist;
    in.step_seed = DeriveSeed(seed, "selftest-step", variant);
    grad::Tape tape(&p.set(), grad::Evaluation::kDeferred);
    grad::Var loss = objective_on_tape(tape, in, p);
    tape.forward(loss);
    auto rep = grad::check_gradients(tape, loss, 1e-5, 0, 1e-4);
    if (rep.max_rel_error >= res.grad_max_rel_error) {
      res.grad_max_rel_error = rep.max_rel_error;
      res.grad_worst_param = rep.worst_param;
    }
    for (const auto& e : rep.per_param) res.grad_unchecked_groups += e.checked == 0;
  }
}

void selftest_certificate(uint64_t seed, int instances, SelftestResult& res) {
  // Greedy against the exhaustive optimum.
  Rng rng = SubStream(seed, "selftest-certificate");
  std::uniform_real_distribution<double> wd(0.5, 3.0);
  for (int trial = 0; trial < instances; ++trial) {
    const int K = 1 + trial % 3;
    ScenarioSet set;
    for (int p = 0; p < 1 + trial % 3; ++p) {
      Scenario sc;
      for (int k = 0; k < K; ++k) sc.push_back(RandomNet(rng, 6 / K, 2));
      set.samples.push_back(std::move(sc));
    }
    CostContext costs;
    costs.T_plus = 12.0;
    for (int k = 0; k < K; ++k) {
      costs.c.push_back(1.5 + 0.5 * k);
      costs.xi.push_back(24.0);
    }
    std::vector<double> w(K);
    for (double& v : w) v = trial % 2 ? std::max(1.0, std::round(wd(rng))) : wd(rng);
    const double W = 1.0 + static_cast<double>(rng() % 15);
    RequestPlan plan = greedy_solve(set, W, w, costs);
    BruteForceResult best = brute_force_solve(set, W, w, costs);
    double load = 0.0;
    for (int k = 0; k < K; ++k) load += w[k] * plan.x[k];
    const double tol = 1e-9 * std::max(1.0, best.objective);
    bool ok = load <= W + 1e-9 && best.objective - plan.objective <= plan.gap_bound + tol;
    if (plan.binding && std::fabs(best.objective - plan.objective) <= tol) {
      res.binding_equality_seen = true;
    }
    ++res.certificate_instances;
    if (!ok) ++res.certificate_failures;
  }
  // Constructed instance: capacity ends exactly at a kink.
  {
    ScenarioSet set;
    set.samples.push_back({NetDemandSeq{{{1.0, 2}, {2.0, 1}}}});
    CostContext costs;
    costs.c = {2.0};
    costs.xi = {24.0};
    costs.T_plus = 12.0;
    RequestPlan plan = greedy_solve(set, 2.0, {1.0}, costs);
    BruteForceResult best = brute_force_solve(set, 2.0, {1.0}, costs);
    const double tol = 1e-9 * std::max(1.0, best.objective);
    ++res.certificate_instances;
    if (!(plan.binding && std::fabs(best.objective - plan.objective) <= tol)) {
      ++res.certificate_failures;
    } else {
      res.binding_equality_seen = true;
    }
  }
}

SelftestResult run_selftest(uint64_t seed, int instances) {
  SelftestResult res;
  selftest_gradients(seed, res);
  selftest_certificate(seed, instances, res);
  return res;
}

int RunCli(int argc, const char* const* argv) {
  CLI::App app{"Proactive disaster-relief resource requests", "relief"};
  app.require_subcommand(1);

  Common sim_c, train_c, pred_c, opt_c, eval_c, ma_c, bench_c, self_c;

  auto* sim = app.add_subcommand("simulate", "Simulate a 3-type demand dataset");
  AddCommon(sim, sim_c);

  std::string train_data;
  double until = 0.0;
  int epochs = -1;
  auto* tr = app.add_subcommand("train", "Train the point-process model");
  AddCommon(tr, train_c);
  tr->add_option("--data", train_data, "Demand file (CSV or JSON)")->required();
  auto* until_opt = tr->add_option("--until", until, "Train on demands up to this time");
  tr->add_option("--epochs", epochs, "Override the configured epoch count");

  std::string pred_model, pred_data;
  double pred_T = 0.0, pred_T_plus = 0.0;
  int pred_psi = 1;
  auto* pr = app.add_subcommand("predict", "Sample future demands");
  AddCommon(pr, pred_c, false);
  pr->add_option("--model", pred_model, "Model file")->required();
  pr->add_option("--data", pred_data, "History demand file")->required();
  auto* T_opt = pr->add_option("--T", pred_T, "Request time (default: end of history)");
  auto* Tp_opt = pr->add_option("--T-plus", pred_T_plus, "Arrival time");
  pr->add_option("--psi", pred_psi, "Number of sampled futures");

  std::string opt_model, opt_state, opt_data;
  int opt_psi = 100, opt_upsilon = 0;
  auto* op = app.add_subcommand("optimize", "Decide request quantities");
  AddCommon(op, opt_c, false);
  op->add_option("--model", opt_model, "Model file")->required();
  op->add_option("--state", opt_state, "Agency state JSON")->required();
  op->add_option("--data", opt_data, "History demand file");
  op->add_option("--psi", opt_psi, "Demand scenarios per arrival draw");
  op->add_option("--upsilon", opt_upsilon,
                 "Arrival-time draws; 0 uses the fixed lead time");

  std::string eval_data, eval_method;
  int eval_psi = 0;
  bool eval_full = false;
  auto* ev = app.add_subcommand("evaluate", "Rolling-horizon evaluation");
  AddCommon(ev, eval_c);
  ev->add_option("--data", eval_data, "Demand file")->required();
  ev->add_option("--method", eval_method, "cnm-prr, ci-prr, nll-ci-prr, rer or ifcfs");
  ev->add_option("--psi", eval_psi, "Demand scenarios per request");
  ev->add_flag("--full-retrain", eval_full, "Retrain from scratch every cycle");

  std::vector<std::string> ma_methods;
  int ma_runs = 0;
  auto* ma = app.add_subcommand("multi-agency", "Multi-agency allocation study");
  AddCommon(ma, ma_c);
  ma->add_option("--method", ma_methods, "Methods to compare")->delimiter(',');
  ma->add_option("--runs", ma_runs, "Simulation runs");

  std::vector<std::string> bench_methods;
  int bench_datasets = 0;
  auto* be = app.add_subcommand("bench", "Sweep W or c over simulated datasets");
  AddCommon(be, bench_c);
  be->add_option("--method", bench_methods, "Methods to compare")->delimiter(',');
  be->add_option("--datasets", bench_datasets, "Simulated datasets");

  int self_instances = 200;
  auto* st = app.add_subcommand("selftest", "Gradient and certificate checks");
  st->add_option("--seed", self_c.seed, "Random seed (default 0)");
  st->add_option("--instances", self_instances, "Random certificate instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*sim) return CmdSimulate(sim_c, sim->count("--seed") > 0);
    if (*tr) return CmdTrain(train_c, train_data, until, until_opt->count() > 0, epochs);
    if (*pr) {
      return CmdPredict(pred_c, pred_model, pred_data, pred_T, T_opt->count() > 0,
                        pred_T_plus, Tp_opt->count() > 0, pred_psi);
    }
    if (*op) return CmdOptimize(opt_c, opt_model, opt_state, opt_data, opt_psi, opt_upsilon);
    if (*ev) return CmdEvaluate(eval_c, eval_data, eval_method, eval_psi, eval_full);
    if (*ma) return CmdMultiAgency(ma_c, ma_methods, ma_runs);
    if (*be) return CmdBench(bench_c, bench_methods, bench_datasets);
    if (*st) return CmdSelftest(self_c.seed, self_instances);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

int RunCli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return RunCli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace relief
