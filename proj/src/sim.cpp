// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/sim.hpp"

#include <algorithm>
#include <cmath>

#include "relief/error.hpp"
#include "relief/parallel.hpp"

namespace relief {

std::vector<std::vector<double>> SimConfig::DefaultSigma() {
  const double s = 0.5;
  const double r12 = 0.5, r23 = 0.5, r13 = -0.5;
  return {{s * s, r12 * s * s, r13 * s * s},
          {r12 * s * s, s * s, r23 * s * s},
          {r13 * s * s, r23 * s * s, s * s}};
}

void SimConfig::validate() const {
  if (!(nu > 0) || !(zeta_sc > 0)) {
    throw ConfigError("self-correcting nu and zeta must be positive");
  }
  if (!(lambda0 > 0) || !(beta > 0) || !(sigma_H > 0)) {
    throw ConfigError("Hawkes lambda0, beta and sigma_H must be positive");
  }
  if (!(horizon > 0)) throw ConfigError("horizon must be positive");
  if (!(sc_bound_step > 0)) throw ConfigError("sc_bound_step must be positive");
  if (lambda_init.size() != 3 || Sigma.size() != 3) {
    throw ConfigError("mark chain needs 3 types");
  }
  for (double l : lambda_init) {
    if (!(l > 0)) throw ConfigError("lambda_init entries must be positive");
  }
  cholesky(Sigma);
}

nlohmann::ordered_json SimConfig::to_json() const {
  nlohmann::ordered_json j;
  j["nu"] = nu;
  j["zeta_sc"] = zeta_sc;
  j["lambda0"] = lambda0;
  j["beta"] = beta;
  j["sigma_H"] = sigma_H;
  j["Sigma"] = Sigma;
  j["lambda_init"] = lambda_init;
  j["horizon"] = horizon;
  j["seed"] = seed;
  j["joint_marks"] = joint_marks;
  j["sc_bound_step"] = sc_bound_step;
  return j;
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("simulation config must be an object");
  SimConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "nu") c.nu = v.get<double>();
      else if (k == "zeta_sc") c.zeta_sc = v.get<double>();
      else if (k == "lambda0") c.lambda0 = v.get<double>();
      else if (k == "beta") c.beta = v.get<double>();
      else if (k == "sigma_H") c.sigma_H = v.get<double>();
      else if (k == "Sigma") c.Sigma = v.get<std::vector<std::vector<double>>>();
      else if (k == "lambda_init") c.lambda_init = v.get<std::vector<double>>();
      else if (k == "horizon") c.horizon = v.get<double>();
      else if (k == "seed") c.seed = v.get<uint64_t>();
      else if (k == "joint_marks") c.joint_marks = v.get<bool>();
      else if (k == "sc_bound_step") c.sc_bound_step = v.get<double>();
      else throw ConfigError("unknown simulation key: " + k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulation config: ") + e.what());
  }
  c.validate();
  return c;
}

double self_correcting_log_intensity(double t, const std::vector<double>& past,
                                     const SimConfig& c) {
  auto n = std::lower_bound(past.begin(), past.end(), t) - past.begin();
  return c.nu * t - c.zeta_sc * static_cast<double>(n);
}

double hawkes_intensity(double t, const std::vector<double>& past,
                        const SimConfig& c) {
  double s = 0.0;
  for (double ti : past) {
    if (ti >= t) break;
    s += std::exp(-(t - ti) / c.sigma_H);
  }
  return c.lambda0 + c.beta * s;
}

namespace {

double Exponential(Rng& rng, double rate) {
  return -std::log(OpenUniform(rng)) / rate;
}

}  // namespace

std::vector<double> simulate_self_correcting(const SimConfig& c, double horizon,
                                             Rng& rng) {
  std::vector<double> out;
  double t = 0.0;
  double n = 0.0;
  const double step = c.sc_bound_step;
  while (t < horizon) {
    // Intensity only grows until the next event, so its value at the end
    // of the step bounds it on [t, t + step].
    double log_bound = c.nu * (t + step) - c.zeta_sc * n;
    double s = t + Exponential(rng, std::exp(log_bound));
    if (s > t + step) {
      t += step;
      continue;
    }
    if (s > horizon) break;
    double log_ratio = c.nu * s - c.zeta_sc * n - log_bound;
    if (std::log(OpenUniform(rng)) < log_ratio) {
      out.push_back(s);
      n += 1.0;
    }
    t = s;
  }
  return out;
}

std::vector<double> simulate_hawkes(const SimConfig& c, double horizon,
                                    Rng& rng) {
  std::vector<double> out;
  double t = 0.0;
  double excite = 0.0;  // sum of kernels at t+
  while (true) {
    double bound = c.lambda0 + c.beta * excite;
    double s = t + Exponential(rng, bound);
    if (s > horizon) break;
    excite *= std::exp(-(s - t) / c.sigma_H);
    t = s;
    double lam = c.lambda0 + c.beta * excite;
    if (OpenUniform(rng) * bound < lam) {
      out.push_back(s);
      excite += 1.0;
    }
  }
  return out;
}

std::vector<std::vector<double>> cholesky(
    const std::vector<std::vector<double>>& S) {
  const std::size_t n = S.size();
  for (const auto& row : S) {
    if (row.size() != n) throw ConfigError("covariance must be square");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::fabs(S[i][j] - S[j][i]) > 1e-12 * (1 + std::fabs(S[i][j]))) {
        throw ConfigError("covariance must be symmetric");
      }
    }
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(S[i][i]));
  const double tol = 1e-12 * std::max(scale, 1e-300);
  // Zero pivots are allowed so singular (semidefinite) covariances work;
  // the default mark covariance is one of them.
  std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = S[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= L[j][k] * L[j][k];
    if (d < -tol) throw ConfigError("covariance is not positive-semidefinite");
    const bool zero_pivot = d <= tol;
    L[j][j] = zero_pivot ? 0.0 : std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = S[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (zero_pivot) {
        if (std::fabs(s) > 1e-9 * std::max(scale, 1e-300)) {
          throw ConfigError("covariance is not positive-semidefinite");
        }
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  return L;
}

MarkChain::MarkChain(const SimConfig& c)
    : L_(cholesky(c.Sigma)), lambda_(c.lambda_init) {}

const std::vector<double>& MarkChain::step(Rng& rng) {
  const std::size_t n = lambda_.size();
  std::vector<double> z(n);
  for (double& v : z) v = StdNormal(rng);
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t k = 0; k <= i; ++k) e += L_[i][k] * z[k];
    next[i] = std::exp(0.5 * std::log(lambda_[i]) + e);
  }
  lambda_ = std::move(next);
  return lambda_;
}

std::vector<int> MarkChain::draw_quantities(Rng& rng) {
  std::vector<int> q(lambda_.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    std::poisson_distribution<int> d(lambda_[k]);
    q[k] = d(rng);
  }
  return q;
}

MarkTrace simulate_marks(int n, const SimConfig& c, Rng& rng) {
  if (n < 0) throw ValidationError("mark count must be >= 0");
  MarkChain chain(c);
  MarkTrace out;
  for (int i = 0; i < n; ++i) {
    out.lambdas.push_back(chain.step(rng));
    out.quantities.push_back(chain.draw_quantities(rng));
  }
  return out;
}

SimArrivals simulate_arrivals(const SimConfig& c, int threads) {
  c.validate();
  SimArrivals a;
  a.times.resize(3);
  ParallelFor(3, threads, [&](std::size_t k) {
    Rng rng = SubStream(c.seed, "sim-arrivals", k);
    a.times[k] = k == 1 ? simulate_self_correcting(c, c.horizon, rng)
                        : simulate_hawkes(c, c.horizon, rng);
  });
  return a;
}

EventSequence simulate_dataset(const SimConfig& c, int threads) {
  SimArrivals arr = simulate_arrivals(c, threads);
  struct Tagged {
    double time;
    int type;
    std::vector<int> q;
  };
  std::vector<Tagged> all;
  if (c.joint_marks) {
    std::vector<std::pair<double, int>> merged;
    for (int k = 0; k < 3; ++k) {
      for (double t : arr.times[k]) merged.emplace_back(t, k);
    }
    std::stable_sort(merged.begin(), merged.end());
    Rng rng = SubStream(c.seed, "sim-marks-joint");
    MarkChain chain(c);
    for (const auto& [t, k] : merged) {
      chain.step(rng);
      all.push_back({t, k, chain.draw_quantities(rng)});
    }
  } else {
    for (int k = 0; k < 3; ++k) {
      Rng rng = SubStream(c.seed, "sim-marks", k);
      MarkChain chain(c);
      for (double t : arr.times[k]) {
        chain.step(rng);
        std::vector<int> q(3, 0);
        q[k] = chain.draw_quantities(rng)[k];
        all.push_back({t, k, q});
      }
    }
    std::stable_sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) {
      if (a.time != b.time) return a.time < b.time;
      return a.type < b.type;
    });
  }
  EventSequence seq(3, 0.0);
  for (auto& e : all) {
    bool any = false;
    for (int v : e.q) any |= v > 0;
    if (any) seq.push_back({e.time, std::move(e.q)});
  }
  seq.set_t_end(c.horizon);
  return seq;
}

std::vector<double> rescaled_gaps(
    const std::vector<double>& times,
    const std::function<double(double, std::size_t)>& intensity,
    int panels_per_gap) {
  if (panels_per_gap < 2 || panels_per_gap % 2) {
    throw ValidationError("Simpson integration needs an even panel count");
  }
  std::vector<double> out;
  out.reserve(times.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double a = prev, b = times[i];
    const double h = (b - a) / panels_per_gap;
    double s = intensity(a, i) + intensity(b, i);
    for (int p = 1; p < panels_per_gap; ++p) {
      s += (p % 2 ? 4.0 : 2.0) * intensity(a + p * h, i);
    }
    out.push_back(s * h / 3.0);
    prev = b;
  }
  return out;
}

KsResult ks_test_exp1(std::vector<double> x) {
  if (x.empty()) throw ValidationError("KS test needs samples");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double F = -std::expm1(-std::max(0.0, x[i]));
    d = std::max(d, std::max((i + 1) / n - F, F - i / n));
  }
  // Asymptotic Kolmogorov distribution with the Stephens small-sample
  // correction.
  double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  if (lam < 0.2) {
    p = 1.0;
  } else {
    for (int j = 1; j <= 100; ++j) {
      double term = 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lam * lam);
      p += term;
      if (std::fabs(term) < 1e-16) break;
    }
    p = std::clamp(p, 0.0, 1.0);
  }
  return {d, p};
}

}  // namespace relief
