// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "relief/cli.hpp"
#include "relief/config.hpp"
#include "relief/cost.hpp"
#include "relief/demand.hpp"
#include "relief/harness.hpp"
#include "relief/parallel.hpp"
#include "relief/saa.hpp"
#include "relief/sim.hpp"
#include "relief/tpp.hpp"

using namespace relief;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int g_failed = 0;

void Report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failed;
}

std::string Fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 ------------------------------------------------------------------------
void GradientOracle() {
  auto t0 = Clock::now();
  SelftestResult r;
  selftest_gradients(101, r);
  double secs = Seconds(t0);
  bool pass = r.grad_max_rel_error < 1e-3 && r.grad_unchecked_groups == 0 && secs < 30;
  Report(1, "gradient oracle", pass,
         "max rel error " + Fmt("%.3g", r.grad_max_rel_error) + " (" + r.grad_worst_param +
             "), unchecked groups " + std::to_string(r.grad_unchecked_groups) + ", " +
             Fmt("%.2f", secs) + " s (< 1e-3, < 30 s)");
}

// 2 ------------------------------------------------------------------------
void GapCertificate() {
  auto t0 = Clock::now();
  SelftestResult r;
  selftest_certificate(202, 200, r);
  double secs = Seconds(t0);
  bool pass = r.certificate_failures == 0 && r.binding_equality_seen &&
              r.certificate_instances >= 200 && secs < 120;
  Report(2, "greedy gap certificate", pass,
         std::to_string(r.certificate_instances - r.certificate_failures) + "/" +
             std::to_string(r.certificate_instances) + " within bound, binding equality " +
             (r.binding_equality_seen ? "seen" : "missing") + ", " + Fmt("%.2f", secs) +
             " s (< 120 s)");
}

// 3 ------------------------------------------------------------------------
void CurveShape() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> gap(0.0, 2.0);
  DeprivationParams p;
  double worst_jump = 0.0;
  bool monotone = true, concave = true;
  for (int trial = 0; trial < 100; ++trial) {
    NetDemandSeq net;
    double t = 0.0;
    int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      t += gap(rng);
      net.entries.push_back({t, 1 + static_cast<int>(rng() % 5)});
    }
    const double c = 2.0 + trial % 3;
    auto B = entry_reductions(net, c, 40.0, 12.0, p);
    auto curve = curve_of(net, B);
    // Limits at the i-th kink from the neighbouring linear pieces.
    const double eps = 1e-3;
    double cum = 0.0;
    for (std::size_t i = 0; i < net.entries.size(); ++i) {
      cum += net.entries[i].quantity;
      double left = cost_reduction_g(cum - eps, net, B) + eps * B[i];
      double right_slope = i + 1 < B.size() ? B[i + 1] : 0.0;
      double right = cost_reduction_g(cum + eps, net, B) - eps * right_slope;
      double scale = std::max(1.0, std::fabs(left));
      worst_jump = std::max(worst_jump, std::fabs(left - right) / scale);
    }
    double prev = cost_reduction_g(0.0, net, B);
    for (double x = 0.25; x <= cum + 2.0; x += 0.25) {
      double g = cost_reduction_g(x, net, B);
      if (g < prev - 1e-9 * std::max(1.0, prev)) monotone = false;
      prev = g;
    }
    for (std::size_t i = 1; i < curve.slopes.size(); ++i) {
      if (curve.slopes[i] > curve.slopes[i - 1] * (1 + 1e-12) + 1e-12) concave = false;
    }
    if (!curve.slopes.empty() && curve.tail_slope > curve.slopes.back() + 1e-12) {
      concave = false;
    }
  }
  Report(3, "cost-reduction curve shape", worst_jump < 1e-9 && monotone && concave,
         "max relative kink jump " + Fmt("%.2e", worst_jump) + " (< 1e-9), non-decreasing " +
             (monotone ? "yes" : "no") + ", slopes non-increasing " +
             (concave ? "yes" : "no"));
}

// 4 ------------------------------------------------------------------------
void SaaConvergence() {
  CostContext costs;
  costs.c = {2.0, 4.0, 2.0};
  costs.xi = {24.0, 24.0, 24.0};
  costs.T_plus = 12.0;
  ScenarioSampler sampler = [](Rng& rng) {
    std::poisson_distribution<int> n(3.0);
    std::poisson_distribution<int> q(2.0);
    std::uniform_real_distribution<double> t(0.0, 12.0);
    Scenario sc(3);
    for (auto& seq : sc) {
      std::vector<double> times(n(rng));
      for (double& v : times) v = t(rng);
      std::sort(times.begin(), times.end());
      for (double v : times) seq.entries.push_back({v, 1 + q(rng)});
    }
    return sc;
  };
  auto rows = saa_convergence_probe(sampler, {6.0, 6.0, 6.0}, costs, {100, 400, 1000}, 30,
                                    404, DefaultThreads());
  double ratio = rows[1].std_error / rows[0].std_error;
  double drift = std::fabs(rows[2].mean - rows[0].mean) / std::fabs(rows[2].mean);
  bool pass = ratio >= 0.35 && ratio <= 0.70 && drift <= 0.05;
  Report(4, "SAA convergence", pass,
         "SE ratio psi 400/100 " + Fmt("%.3f", ratio) + " (in [0.35, 0.70]), psi 1000 vs 100 " +
             Fmt("%.2f%%", 100 * drift) + " (<= 5%)");
}

// 5 ------------------------------------------------------------------------
void SamplerStatistics() {
  ModelConfig cfg;
  cfg.K = 3;
  cfg.n_e = 6;
  cfg.n_z = 4;
  cfg.A_bar = 3;
  auto p = ModelParams::init(cfg, 505);
  std::mt19937_64 hr(5);
  std::normal_distribution<double> hn(0.0, 0.5);
  std::vector<double> h(cfg.n_e);
  for (double& v : h) v = hn(hr);

  auto d = interarrival_params(h, p);
  double analytic = 0.0;
  for (std::size_t z = 0; z < d.alpha.size(); ++z) {
    analytic += d.alpha[z] * std::exp(d.mu[z] + 0.5 * d.sigma[z] * d.sigma[z]);
  }
  Rng rng = SubStream(505, "mixture");
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    double t = sample_subsequence(h, 0.0, 1, p, rng)[0].time;
    s += t;
    ss += t * t;
  }
  double mean = s / n;
  double se = std::sqrt((ss / n - mean * mean) / n);
  double z = std::fabs(mean - analytic) / se;

  double total = 0.0;
  const int cap = cfg.quantity_cap();
  for (int a = 0; a <= cap; ++a) {
    for (int b = 0; b <= cap; ++b) {
      for (int c = 0; c <= cap; ++c) {
        if (a + b + c > 0) total += std::exp(mark_logmass({a, b, c}, h, p));
      }
    }
  }
  ModelConfig one = cfg;
  one.K = 1;
  one.A_bar = 1;
  auto p1 = ModelParams::zeros(one);  // zero weights give a unit Poisson mean
  auto pmf = mark_type_pmf(0, {}, std::vector<double>(one.n_e, 0.0), p1);
  bool half = pmf.size() == 2 && std::fabs(pmf[0] - 0.5) < 1e-12 &&
              std::fabs(pmf[1] - 0.5) < 1e-12;
  bool pass = z < 3.0 && std::fabs(total - 1.0) < 1e-10 && half;
  Report(5, "sampler statistics", pass,
         "mixture mean " + Fmt("%.5f", mean) + " vs " + Fmt("%.5f", analytic) + " (" +
             Fmt("%.2f", z) + " SE, < 3), mark pmf sum - 1 = " + Fmt("%.1e", total - 1.0) +
             ", P(0)=P(1)=0.5 " + (half ? "yes" : "no"));
}

// 6 ------------------------------------------------------------------------
std::function<double(double, std::size_t)> HawkesGapIntensity(
    const std::vector<double>& times, const SimConfig& c) {
  auto after = std::make_shared<std::vector<double>>();
  double s = 0.0, prev = 0.0;
  for (double t : times) {
    s = s * std::exp(-(t - prev) / c.sigma_H) + 1.0;
    after->push_back(s);
    prev = t;
  }
  return [after, &times, c](double t, std::size_t i) {
    if (i == 0) return c.lambda0;
    return c.lambda0 + c.beta * (*after)[i - 1] * std::exp(-(t - times[i - 1]) / c.sigma_H);
  };
}

void PointProcessValidity() {
  SimConfig c;  // nu=1, zeta=0.2, lambda0=1, beta=0.8, sigma_H=1
  Rng r1 = SubStream(606, "sc");
  auto sc = simulate_self_correcting(c, 2100.0, r1);
  sc.resize(std::min<std::size_t>(sc.size(), 10000));
  auto sc_gaps = rescaled_gaps(sc, [&](double s, std::size_t i) {
    return std::exp(c.nu * s - c.zeta_sc * static_cast<double>(i));
  });
  double p_sc = ks_test_exp1(sc_gaps).p_value;

  Rng r2 = SubStream(606, "hawkes");
  auto hk = simulate_hawkes(c, 2500.0, r2);
  hk.resize(std::min<std::size_t>(hk.size(), 10000));
  double p_hk = ks_test_exp1(rescaled_gaps(hk, HawkesGapIntensity(hk, c))).p_value;

  Rng r3 = SubStream(606, "rate");
  const double H = 20000.0;
  double rate = simulate_hawkes(c, H, r3).size() / H;
  double target = c.lambda0 / (1.0 - c.beta * c.sigma_H);
  double rel = std::fabs(rate - target) / target;
  bool pass = p_sc > 0.01 && p_hk > 0.01 && rel <= 0.10;
  Report(6, "point-process validity", pass,
         "KS p self-correcting " + Fmt("%.3f", p_sc) + ", Hawkes " + Fmt("%.3f", p_hk) +
             " (> 0.01), Hawkes rate " + Fmt("%.3f", rate) + "/h vs " + Fmt("%.1f", target) +
             " (" + Fmt("%.1f%%", 100 * rel) + ", <= 10%)");
}

// 7 ------------------------------------------------------------------------
double Hms(int h, int m, int s) { return h + m / 60.0 + s / 3600.0; }

void WorkedExamples() {
  EventSequence hist(2);  // shelter, food
  hist.push_back({Hms(12, 4, 33), {4, 0}});
  hist.push_back({Hms(16, 38, 26), {3, 6}});
  AgencyState s = compute_state(hist, {5, 10}, Hms(18, 0, 0));
  bool state_ok = s.U == std::vector<int>{2, 0} && s.R == std::vector<int>{0, 4};
  s.T_plus = 24.0;
  EventSequence future(2);
  future.push_back({Hms(18, 8, 12), {1, 5}});
  future.push_back({Hms(19, 14, 29), {0, 3}});
  auto net = build_net_demand(s, future);
  bool net_ok = net.size() == 2 && net[0].total() == 3 && net[1].total() == 4 &&
                net[0].entries.size() == 2 &&
                net[0].entries[0] == UnitBlock{Hms(16, 38, 26), 2} &&
                net[0].entries[1] == UnitBlock{Hms(18, 8, 12), 1} &&
                net[1].entries.size() == 2 &&
                net[1].entries[0] == UnitBlock{Hms(18, 8, 12), 1} &&
                net[1].entries[1] == UnitBlock{Hms(19, 14, 29), 3};
  Report(7, "worked examples", state_ok && net_ok,
         "U_shelter=" + std::to_string(s.U[0]) + " R_food=" + std::to_string(s.R[1]) +
             ", net totals " + (net.size() == 2 ? std::to_string(net[0].total()) + " and " +
                                                      std::to_string(net[1].total())
                                                : std::string("?")));
}

// 8 ------------------------------------------------------------------------
constexpr int kStudyRuns = 20;

void SimulationStudy() {
  auto t0 = Clock::now();
  const int threads = DefaultThreads();
  const char* methods[] = {"cnm-prr", "nll-ci-prr", "ifcfs", "rer"};
  std::vector<std::vector<double>> dep(4);
  double rer_pct_max = 0.0;
  for (int r = 0; r < kStudyRuns; ++r) {
    SimConfig sc;
    sc.seed = 8000 + r;
    EventSequence data = simulate_dataset(sc, threads);
    HorizonConfig h;
    h.threads = threads;
    const uint64_t seed = 800 + r;
    CycleModels full = train_cycle_models(data, h, Variant::kFull, seed);
    CycleModels nll = train_cycle_models(data, h, Variant::kNllCi, seed);
    for (int m = 0; m < 4; ++m) {
      h.method = methods[m];
      HorizonInputs in;
      in.models = m == 0 ? &full : &nll;
      MetricsReport rep = run_rolling_horizon(data, h, seed, in);
      dep[m].push_back(rep.avg_unit_deprivation);
      if (m == 3) rer_pct_max = std::max(rer_pct_max, rep.fulfilled_future_pct);
    }
  }
  double secs = Seconds(t0);
  double mean[4];
  for (int m = 0; m < 4; ++m) {
    double s = 0.0;
    for (double v : dep[m]) s += v;
    mean[m] = s / dep[m].size();
    std::vector<double> sorted = dep[m];
    std::sort(sorted.begin(), sorted.end());
    double med = 0.5 * (sorted[(sorted.size() - 1) / 2] + sorted[sorted.size() / 2]);
    std::printf("     %-11s mean avg-unit-deprivation $%.2f, median $%.2f\n", methods[m],
                mean[m], med);
  }
  int wins = 0;
  for (int r = 0; r < kStudyRuns; ++r) wins += dep[0][r] <= dep[1][r];
  std::printf("     CNM-PRR <= NLL-CI-PRR in %d/%d paired runs\n", wins, kStudyRuns);
  auto vs = [&](int a, int b) { return Fmt("%.2f", mean[a]) + " vs " + Fmt("%.2f", mean[b]); };
  Report(8, "simulation study: CNM-PRR < ReR", mean[0] < mean[3], vs(0, 3));
  Report(8, "simulation study: CNM-PRR < IFCFS", mean[0] < mean[2], vs(0, 2));
  Report(8, "simulation study: CNM-PRR <= NLL-CI-PRR", mean[0] <= mean[1], vs(0, 1));
  Report(8, "simulation study: ReR fulfilled_future_pct = 0", rer_pct_max == 0.0,
         "max " + Fmt("%g", rer_pct_max));
  Report(8, "simulation study: runtime", secs < 1800.0,
         Fmt("%.0f", secs) + " s (< 1800 s, " + std::to_string(threads) + " threads)");
}

// 9 ------------------------------------------------------------------------
void ExtendedDegeneracy() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> tt(0.0, 12.0);
  int equal = 0;
  const int n = 50;
  for (int trial = 0; trial < n; ++trial) {
    const int K = 1 + trial % 3;
    ScenarioSet set;
    for (int p = 0; p < 1 + trial % 5; ++p) {
      Scenario sc;
      for (int k = 0; k < K; ++k) {
        NetDemandSeq s;
        std::vector<double> times(rng() % 5);
        for (double& v : times) v = tt(rng);
        std::sort(times.begin(), times.end());
        for (double v : times) s.entries.push_back({v, 1 + static_cast<int>(rng() % 4)});
        sc.push_back(std::move(s));
      }
      set.samples.push_back(std::move(sc));
    }
    CostContext costs;
    for (int k = 0; k < K; ++k) {
      costs.c.push_back(2.0 + k);
      costs.xi.push_back(30.0);
    }
    costs.T_plus = 12.0;
    std::vector<double> w(K, 1.0 + trial % 2);
    double W = 2.0 + static_cast<double>(rng() % 12);
    ExtendedScenarioSet ext{{costs.T_plus}, {set}};
    auto base = greedy_solve(set, W, w, costs);
    auto plan = greedy_solve_extended(ext, W, w, std::vector<double>(K, 0.0), costs);
    equal += plan.x == base.x;
  }
  Report(9, "extended-model degeneracy", equal == n,
         std::to_string(equal) + "/" + std::to_string(n) + " plans equal");
}

// 10 -----------------------------------------------------------------------
struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("relief_accept_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(dir); }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

// Runs the binary with stdout to `capture`; returns the exit status.
int Run(const std::string& args, const std::string& capture) {
  std::string cmd = std::string(RELIEF_CLI_PATH) + " " + args + " >" + capture + " 2>>" + capture + ".err";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void Determinism() {
  Scratch d;
  auto put = [&](const std::string& f, const std::string& text) { std::ofstream(d / f) << text; };
  const std::string model = R"({"n_e":4,"n_z":2,"epochs":2,"csd_event_samples":2,"csd_rollouts":1})";
  put("m.json", model);
  put("state.json",
      R"({"T":36,"T_plus":48,"R":[0,3,1],"unmet":[[[35,2]],[],[]],"W":40,"w":[1,1,1],)"
      R"("c":[2,4,2],"T_plus_max":54,"xi":[60,60,60]})");
  put("h.json", R"({"psi":5,"cycles":1,"model":)" + model + "}");
  put("ma.json", R"({"runs":2,"horizon":{"psi":4,"model":)" + model + "}}");
  put("b.json", R"({"datasets":1,"sim":{"horizon":24},"horizon":{"end":24,"psi":4,"model":)" +
                    model + R"(},"grid":{"param":"W","values":[100,200]}})");
  // Shared inputs.
  if (Run("simulate --seed 10 --out " + (d / "data.csv"), d / "log") != 0 ||
      Run("train --data " + (d / "data.csv") + " --config " + (d / "m.json") +
              " --until 36 --seed 1 --out " + (d / "model.json"),
          d / "log") != 0) {
    Report(10, "CLI determinism", false, "could not prepare inputs");
    return;
  }
  struct Cmd {
    std::string name, args, out;  // out empty: compare stdout
  };
  std::vector<Cmd> cmds = {
      {"simulate", "simulate --seed 3", ""},
      {"train", "train --data " + (d / "data.csv") + " --config " + (d / "m.json") +
                    " --until 36 --seed 2 --out @",
       "@"},
      {"predict", "predict --model " + (d / "model.json") + " --data " + (d / "data.csv") +
                      " --T 36 --psi 3 --seed 4",
       ""},
      {"optimize", "optimize --model " + (d / "model.json") + " --state " + (d / "state.json") +
                       " --data " + (d / "data.csv") + " --psi 10 --seed 5",
       ""},
      {"optimize-upsilon", "optimize --model " + (d / "model.json") + " --state " +
                               (d / "state.json") + " --psi 5 --upsilon 3 --seed 5",
       ""},
      {"evaluate", "evaluate --data " + (d / "data.csv") + " --config " + (d / "h.json") +
                       " --seed 6",
       ""},
      {"multi-agency", "multi-agency --config " + (d / "ma.json") + " --seed 7", ""},
      {"bench", "bench --config " + (d / "b.json") + " --seed 8", ""},
      {"selftest", "selftest --seed 9 --instances 50", ""},
  };
  std::vector<std::string> bad;
  for (const auto& c : cmds) {
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const std::string threads = rep == 0 ? "1" : "3";
      std::string args = c.args;
      std::string file = d / (c.name + std::to_string(rep));
      if (!c.out.empty()) args.replace(args.find('@'), 1, file);
      if (c.name != "selftest") args += " --threads " + threads;
      int rc = Run(args, d / "stdout");
      outputs[rep] = read_file(c.out.empty() ? d / "stdout" : file);
      if (rc != 0 || outputs[rep].empty()) outputs[rep] = "failed " + std::to_string(rep);
    }
    if (outputs[0] != outputs[1]) bad.push_back(c.name);
  }
  std::string detail = std::to_string(cmds.size() - bad.size()) + "/" +
                       std::to_string(cmds.size()) + " subcommands byte-identical across reruns";
  for (const auto& b : bad) detail += " [differs: " + b + "]";
  Report(10, "CLI determinism", bad.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  // --quick skips the simulation study.
  bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  auto t0 = Clock::now();
  GradientOracle();
  GapCertificate();
  CurveShape();
  SaaConvergence();
  SamplerStatistics();
  PointProcessValidity();
  WorkedExamples();
  if (!quick) SimulationStudy();
  ExtendedDegeneracy();
  Determinism();
  std::printf("%s: %d failing line(s), %.0f s\n", g_failed ? "FAILED" : "ALL PASSED", g_failed,
              Seconds(t0));
  return g_failed ? 1 : 0;
}
