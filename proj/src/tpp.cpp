// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/tpp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "relief/error.hpp"
#include "tpp_net.hpp"

namespace relief {

using grad::Tape;
using grad::Tensor;
using grad::Var;

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (n_e < 1 || n_z < 1) throw ConfigError("n_e and n_z must be >= 1");
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  if (!(zeta > 0)) throw ConfigError("zeta must be positive");
  if (A_bar < 0) throw ConfigError("A_bar must be >= 1 (or 0 for auto)");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (csd_event_samples < 1 || csd_rollouts < 1) {
    throw ConfigError("CSD sample counts must be >= 1");
  }
  if (batch_events < 1) throw ConfigError("batch_events must be >= 1");
  if (!(csd_window > 0)) throw ConfigError("csd_window must be positive");
  if (!importance.empty()) {
    if (static_cast<int>(importance.size()) != K) {
      throw ConfigError("importance needs one score per type");
    }
    for (double c : importance) {
      if (!(c > 1)) throw ConfigError("importance scores must exceed 1");
    }
  }
}

int ModelConfig::quantity_cap() const {
  if (binary_marks) return 1;
  return A_bar > 0 ? A_bar : 10;
}

double ModelConfig::log_importance(int k) const {
  return std::log(importance.empty() ? 2.0 : importance[k]);
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["K"] = K;
  j["n_e"] = n_e;
  j["n_z"] = n_z;
  j["gamma"] = gamma;
  j["zeta"] = zeta;
  j["A_bar"] = A_bar;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["csd_event_samples"] = csd_event_samples;
  j["csd_rollouts"] = csd_rollouts;
  j["binary_marks"] = binary_marks;
  j["ablate_correlation"] = ablate_correlation;
  j["ablate_csd"] = ablate_csd;
  j["batch_events"] = batch_events;
  j["csd_window"] = csd_window;
  j["importance"] = importance;
  j["t_minus"] = t_minus;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  static const char* kKnown[] = {
      "K",          "n_e",          "n_z",           "gamma",
      "zeta",       "A_bar",        "epochs",        "learning_rate",
      "csd_event_samples", "csd_rollouts", "binary_marks",
      "ablate_correlation", "ablate_csd", "batch_events", "csd_window",
      "importance", "t_minus"};
  if (!j.is_object()) throw ConfigError("model config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) {
          return key == k;
        }) == std::end(kKnown)) {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  ModelConfig c;
  try {
    c.K = j.value("K", c.K);
    c.n_e = j.value("n_e", c.n_e);
    c.n_z = j.value("n_z", c.n_z);
    c.gamma = j.value("gamma", c.gamma);
    c.zeta = j.value("zeta", c.zeta);
    c.A_bar = j.value("A_bar", c.A_bar);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.csd_event_samples = j.value("csd_event_samples", c.csd_event_samples);
    c.csd_rollouts = j.value("csd_rollouts", c.csd_rollouts);
    c.binary_marks = j.value("binary_marks", c.binary_marks);
    c.ablate_correlation = j.value("ablate_correlation", c.ablate_correlation);
    c.ablate_csd = j.value("ablate_csd", c.ablate_csd);
    c.batch_events = j.value("batch_events", c.batch_events);
    c.csd_window = j.value("csd_window", c.csd_window);
    c.importance = j.value("importance", c.importance);
    c.t_minus = j.value("t_minus", c.t_minus);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- params

namespace {

struct Shape {
  const char* name;
  int rows;
  int cols;
  int fan_in;
};

std::vector<Shape> Shapes(const ModelConfig& c) {
  const int e = c.n_e, z = c.n_z;
  return {
      {"W_h", e, e, e},          {"w_t", e, 1, e},
      {"W_m", e, e, e},          {"b_h", e, 1, e},
      {"W_r", e, c.K, e},        {"mlp1_W", z, e, e},
      {"mlp1_b", z, 1, e},       {"mlp2_W", z, e, e},
      {"mlp2_b", z, 1, e},       {"mlp3_W", z, e, e},
      {"mlp3_b", z, 1, e},       {"rnn_lambda_U", e, e, e},
      {"rnn_lambda_V", e, e, e}, {"rnn_lambda_b", e, 1, e},
  };
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config_ = config;
  for (const auto& s : Shapes(config)) p.params_.add(s.name, Tensor(s.rows, s.cols));
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed,
                              const EventSequence* data) {
  ModelParams p = zeros(config);
  Rng rng = SubStream(seed, "init");
  for (const auto& s : Shapes(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : p.tensor(s.name).data()) v = u(rng);
  }
  if (data && !data->empty()) {
    if (data->num_types() != config.K) {
      throw ValidationError("data type count differs from the model's K");
    }
    int max_q = 0;
    for (const auto& e : data->events()) {
      for (int q : e.quantities) max_q = std::max(max_q, q);
    }
    if (p.config_.A_bar == 0) p.config_.A_bar = std::max(10, 2 * max_q);
    double span = data->events().back().time - data->t_minus();
    double mean_gap = std::max(span / data->size(), internal::kMinTau);
    for (double& v : p.tensor("mlp2_b").data()) v += std::log(mean_gap);
  }
  if (p.config_.A_bar == 0) p.config_.A_bar = 10;
  return p;
}

nlohmann::ordered_json ModelParams::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["config"] = config_.to_json();
  nlohmann::ordered_json ps = nlohmann::ordered_json::object();
  for (int i = 0; i < params_.count(); ++i) {
    const Tensor& t = params_.value(i);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < t.rows(); ++r) {
      std::vector<double> row(t.data().begin() + r * t.cols(),
                              t.data().begin() + (r + 1) * t.cols());
      rows.push_back(row);
    }
    ps[params_.name(i)] = rows;
  }
  j["params"] = ps;
  return j;
}

ModelParams ModelParams::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("version", 0) != 1) {
    throw ValidationError("unsupported model file version");
  }
  ModelConfig config = ModelConfig::from_json(j.at("config"));
  ModelParams p = zeros(config);
  const auto& ps = j.at("params");
  for (const auto& s : Shapes(config)) {
    if (!ps.contains(s.name)) {
      throw ValidationError(std::string("model file lacks ") + s.name);
    }
    const auto& rows = ps.at(s.name);
    if (!rows.is_array() || static_cast<int>(rows.size()) != s.rows) {
      throw ValidationError(std::string("bad shape for ") + s.name);
    }
    Tensor& t = p.tensor(s.name);
    for (int r = 0; r < s.rows; ++r) {
      const auto& row = rows[r];
      if (!row.is_array() || static_cast<int>(row.size()) != s.cols) {
        throw ValidationError(std::string("bad shape for ") + s.name);
      }
      for (int c = 0; c < s.cols; ++c) {
        double v = row[c].get<double>();
        if (!std::isfinite(v)) {
          throw ValidationError(std::string("non-finite value in ") + s.name);
        }
        t(r, c) = v;
      }
    }
  }
  return p;
}

void ModelParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << to_json().dump(1) << "\n";
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------- graph

namespace internal {

Net::Net(Tape& tape, const ModelParams& params)
    : tape_(tape), config_(params.config()), cap_(config_.quantity_cap()) {
  W_h_ = tape.param("W_h");
  w_t_ = tape.param("w_t");
  W_m_ = tape.param("W_m");
  b_h_ = tape.param("b_h");
  W_r_ = tape.param("W_r");
  m1_W_ = tape.param("mlp1_W");
  m1_b_ = tape.param("mlp1_b");
  m2_W_ = tape.param("mlp2_W");
  m2_b_ = tape.param("mlp2_b");
  m3_W_ = tape.param("mlp3_W");
  m3_b_ = tape.param("mlp3_b");
  if (!config_.ablate_correlation) {
    l_U_ = tape.param("rnn_lambda_U");
    l_V_ = tape.param("rnn_lambda_V");
    l_b_ = tape.param("rnn_lambda_b");
  }
  for (int k = 0; k < config_.K; ++k) cols_.push_back(tape.column(W_r_, k));
  std::vector<double> xs(cap_ + 1), nl(cap_ + 1, 0.0);
  for (int x = 0; x <= cap_; ++x) {
    xs[x] = x;
    if (!config_.binary_marks) nl[x] = -std::lgamma(x + 1.0);
  }
  xs_ = tape.constant(xs);
  neg_lgamma_ = tape.constant(nl);
  std::vector<double> inv(config_.n_e);
  for (int x = 1; x <= config_.n_e; ++x) {
    inv[x - 1] = std::pow(10000.0, -static_cast<double>(x) / config_.n_e);
  }
  inv_scales_ = tape.constant(inv);
}

Var Net::quantity_embed(Var a) { return tape_.sin(tape_.mul(inv_scales_, a)); }

Var Net::input_of(int k, Var a) {
  if (config_.binary_marks) return tape_.mul(cols_[k], a);
  return tape_.mul(cols_[k], quantity_embed(a));
}

Var Net::mark_embed(const std::vector<Var>& a) {
  Var acc;
  for (int k = 0; k < config_.K; ++k) {
    Var term = input_of(k, a[k]);
    acc = acc.valid() ? tape_.add(acc, term) : term;
  }
  return acc;
}

Var Net::mark_embed(const std::vector<int>& a) {
  Var acc;
  for (int k = 0; k < config_.K; ++k) {
    if (a[k] == 0) continue;
    double v = config_.binary_marks ? 1.0 : a[k];
    Var term = input_of(k, tape_.scalar(v));
    acc = acc.valid() ? tape_.add(acc, term) : term;
  }
  return acc.valid() ? acc : tape_.zeros(config_.n_e);
}

Var Net::step(Var h, Var tau, Var fm) {
  Var pre = tape_.add(tape_.matvec(W_h_, h), tape_.mul(w_t_, tau));
  pre = tape_.add(pre, tape_.matvec(W_m_, fm));
  return tape_.relu(tape_.add(pre, b_h_));
}

Net::Head Net::head(Var h) {
  Head out;
  out.log_alpha =
      tape_.log_softmax(tape_.add(tape_.matvec(m1_W_, h), m1_b_));
  out.mu = tape_.add(tape_.matvec(m2_W_, h), m2_b_);
  out.log_sigma = tape_.add(tape_.matvec(m3_W_, h), m3_b_);
  return out;
}

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

Var Net::log_pdf(const Head& hd, Var tau) {
  Var lt = tape_.log(tau);
  Var inv_sigma = tape_.exp(tape_.scale(hd.log_sigma, -1.0));
  Var z = tape_.mul(tape_.sub(lt, hd.mu), inv_sigma);
  Var comp = tape_.sub(hd.log_alpha, hd.log_sigma);
  comp = tape_.sub(comp, tape_.affine(tape_.square(z), 0.5, kHalfLog2Pi));
  comp = tape_.sub(comp, lt);
  return tape_.logsumexp(comp);
}

Var Net::log_survival(const Head& hd, double tau) {
  Var lt = tape_.scalar(std::log(tau));
  Var inv_sigma = tape_.exp(tape_.scale(hd.log_sigma, -1.0));
  Var z = tape_.mul(tape_.sub(lt, hd.mu), inv_sigma);
  return tape_.logsumexp(tape_.add(hd.log_alpha, tape_.normal_log_sf(z)));
}

Var Net::type_log_pmf(Var state, int k) {
  Var s = tape_.dot(cols_[k], state);
  return tape_.log_softmax(tape_.add(tape_.mul(xs_, s), neg_lgamma_));
}

Var Net::chain_next(Var state, int k, Var a) {
  Var pre = tape_.add(tape_.matvec(l_U_, state),
                      tape_.matvec(l_V_, input_of(k, a)));
  return tape_.relu(tape_.add(pre, l_b_));
}

Var Net::mark_logmass(Var h, const std::vector<int>& a) {
  const int K = config_.K;
  const bool chained = !config_.ablate_correlation;
  Var state = h, zstate = h;
  Var lm, lz;
  for (int k = 0; k < K; ++k) {
    Var lp = type_log_pmf(state, k);
    Var lpz = (chained && k > 0) ? type_log_pmf(zstate, k) : lp;
    Var term = tape_.element(lp, a[k]);
    Var zterm = tape_.element(lpz, 0);
    lm = lm.valid() ? tape_.add(lm, term) : term;
    lz = lz.valid() ? tape_.add(lz, zterm) : zterm;
    if (chained && k + 1 < K) {
      double v = config_.binary_marks ? (a[k] > 0 ? 1.0 : 0.0) : a[k];
      state = chain_next(state, k, tape_.scalar(v));
      zstate = chain_next(zstate, k, tape_.scalar(0.0));
    }
  }
  // Exclude the all-zero mark and renormalize.
  return tape_.sub(lm, tape_.log1mexp(lz));
}

Net::EventDraw Net::sample_event(Var h, Rng& rng, SampleMode mode) {
  EventDraw d;
  Head hd = head(h);
  const int nz = config_.n_z;
  const double inv_zeta = 1.0 / config_.zeta;
  std::vector<double> g(nz), eps(nz);
  for (int z = 0; z < nz; ++z) g[z] = Gumbel(rng);
  for (int z = 0; z < nz; ++z) eps[z] = StdNormal(rng);
  if (mode == SampleMode::kRelaxed) {
    Var a_hat = tape_.softmax(
        tape_.scale(tape_.add(hd.log_alpha, tape_.constant(g)), inv_zeta));
    Var sigma = tape_.exp(hd.log_sigma);
    Var log_tau = tape_.add(tape_.dot(sigma, tape_.mul(a_hat, tape_.constant(eps))),
                            tape_.dot(hd.mu, a_hat));
    // Gaps are capped at the CSD window before they reach the RNN; an
    // uncapped draw of 1e5 hours blows up the hidden state.
    const double cap = std::log(config_.csd_window);
    log_tau = tape_.affine(tape_.relu(tape_.affine(log_tau, -1.0, cap)), -1.0, cap);
    d.tau = tape_.exp(log_tau);
  } else {
    int best = 0;
    double best_v = -INFINITY;
    for (int z = 0; z < nz; ++z) {
      double v = hd.log_alpha.at(z) + g[z];
      if (v > best_v) {
        best_v = v;
        best = z;
      }
    }
    double lt = hd.mu.at(best) + std::exp(hd.log_sigma.at(best)) * eps[best];
    d.tau = tape_.scalar(std::exp(lt));
  }

  const int K = config_.K;
  const bool chained = !config_.ablate_correlation;
  for (int attempt = 0; attempt < 64; ++attempt) {
    d.a.assign(K, Var());
    d.hard.assign(K, 0);
    Var state = h;
    bool any = false;
    for (int k = 0; k < K; ++k) {
      Var lp = type_log_pmf(state, k);
      std::vector<double> gk(cap_ + 1);
      for (double& v : gk) v = Gumbel(rng);
      int best = 0;
      double best_v = -INFINITY;
      for (int x = 0; x <= cap_; ++x) {
        double v = lp.at(x) + gk[x];
        if (v > best_v) {
          best_v = v;
          best = x;
        }
      }
      d.hard[k] = best;
      any |= best > 0;
      if (mode == SampleMode::kRelaxed) {
        Var b = tape_.softmax(
            tape_.scale(tape_.add(lp, tape_.constant(gk)), inv_zeta));
        d.a[k] = tape_.dot(b, xs_);
      } else {
        d.a[k] = tape_.scalar(best);
      }
      if (chained && k + 1 < K) state = chain_next(state, k, d.a[k]);
    }
    if (any) break;
  }
  return d;
}

}  // namespace internal

// ---------------------------------------------------------------- plain API

namespace {

using internal::Net;

Var ConstVec(Tape& tape, const std::vector<double>& v) {
  return tape.constant(v);
}

std::vector<double> Values(const Var& v) {
  auto s = v.values();
  return {s.begin(), s.end()};
}

void CheckQuantities(const std::vector<int>& a, const ModelConfig& c) {
  if (static_cast<int>(a.size()) != c.K) {
    throw ValidationError("mark width differs from K");
  }
  for (int q : a) {
    if (q < 0) throw DomainError("negative quantity");
    if (!c.binary_marks && q > c.quantity_cap()) {
      throw DomainError("quantity " + std::to_string(q) + " exceeds A_bar " +
                        std::to_string(c.quantity_cap()));
    }
    if (c.binary_marks && q > 1) {
      throw DomainError("binary marks take values 0 or 1");
    }
  }
}

// Clamps observed quantities into the model's support for training.
std::vector<int> Clamp(const std::vector<int>& a, const ModelConfig& c) {
  std::vector<int> out(a);
  for (int& q : out) q = std::min(q, c.quantity_cap());
  return out;
}

grad::ParamSet* Mutable(const ModelParams& p) {
  // The tape only reads parameter values outside of gradient checks.
  return const_cast<grad::ParamSet*>(&p.set());
}

}  // namespace

std::vector<double> embed_quantity(double a, int n_e) {
  if (a < 0) throw DomainError("quantity must be non-negative");
  std::vector<double> out(n_e);
  for (int x = 1; x <= n_e; ++x) {
    out[x - 1] = std::sin(a / std::pow(10000.0, static_cast<double>(x) / n_e));
  }
  return out;
}

std::vector<double> embed_mark(const std::vector<int>& a,
                               const ModelParams& params) {
  CheckQuantities(a, params.config());
  Tape tape(Mutable(params));
  Net net(tape, params);
  return Values(net.mark_embed(a));
}

std::vector<std::vector<double>> embed_history(const EventSequence& seq,
                                               const ModelParams& params) {
  Tape tape(Mutable(params));
  Net net(tape, params);
  Var h = net.zero_state();
  std::vector<std::vector<double>> out{Values(h)};
  double t_prev = seq.t_minus();
  for (const auto& e : seq.events()) {
    double tau = std::max(e.time - t_prev, internal::kMinTau);
    h = net.step(h, tape.scalar(tau), net.mark_embed(e.quantities));
    out.push_back(Values(h));
    t_prev = e.time;
  }
  return out;
}

InterarrivalDist interarrival_params(const std::vector<double>& h,
                                     const ModelParams& params) {
  Tape tape(Mutable(params));
  Net net(tape, params);
  auto hd = net.head(ConstVec(tape, h));
  InterarrivalDist d;
  for (double v : hd.log_alpha.values()) d.alpha.push_back(std::exp(v));
  d.mu = Values(hd.mu);
  for (double v : hd.log_sigma.values()) d.sigma.push_back(std::exp(v));
  return d;
}

namespace {

double LogSumExp(const std::vector<double>& v) {
  double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

double interarrival_logdensity(double tau, const InterarrivalDist& d) {
  if (!(tau > 0)) throw DomainError("interarrival time must be positive");
  const double lt = std::log(tau);
  std::vector<double> comp(d.alpha.size());
  for (std::size_t z = 0; z < comp.size(); ++z) {
    double u = (lt - d.mu[z]) / d.sigma[z];
    comp[z] = std::log(d.alpha[z]) - std::log(d.sigma[z]) - 0.5 * u * u -
              0.91893853320467274178 - lt;
  }
  return LogSumExp(comp);
}

double interarrival_log_survival(double tau, const InterarrivalDist& d) {
  if (!(tau > 0)) return 0.0;
  const double lt = std::log(tau);
  std::vector<double> comp(d.alpha.size());
  for (std::size_t z = 0; z < comp.size(); ++z) {
    double u = (lt - d.mu[z]) / d.sigma[z];
    comp[z] = std::log(d.alpha[z]) + std::log(0.5 * std::erfc(u / std::sqrt(2.0)));
  }
  return LogSumExp(comp);
}

double interarrival_mean(const InterarrivalDist& d) {
  double m = 0.0;
  for (std::size_t z = 0; z < d.alpha.size(); ++z) {
    m += d.alpha[z] * std::exp(d.mu[z] + 0.5 * d.sigma[z] * d.sigma[z]);
  }
  return m;
}

std::vector<double> mark_type_pmf(int k, const std::vector<int>& earlier,
                                  const std::vector<double>& h,
                                  const ModelParams& params) {
  const auto& c = params.config();
  if (k < 0 || k >= c.K || static_cast<int>(earlier.size()) < k) {
    throw ValidationError("mark_type_pmf: bad type index");
  }
  Tape tape(Mutable(params));
  Net net(tape, params);
  Var state = ConstVec(tape, h);
  if (!c.ablate_correlation) {
    for (int j = 0; j < k; ++j) {
      double v = c.binary_marks ? (earlier[j] > 0 ? 1.0 : 0.0) : earlier[j];
      state = net.chain_next(state, j, tape.scalar(v));
    }
  }
  Var lp = net.type_log_pmf(state, k);
  std::vector<double> out;
  for (double v : lp.values()) out.push_back(std::exp(v));
  return out;
}

double mark_logmass(const std::vector<int>& a, const std::vector<double>& h,
                    const ModelParams& params) {
  CheckQuantities(a, params.config());
  bool any = false;
  for (int q : a) any |= q > 0;
  if (!any) return -INFINITY;
  Tape tape(Mutable(params));
  Net net(tape, params);
  return net.mark_logmass(ConstVec(tape, h), a).value();
}

Var nll_on_tape(Tape& tape, const EventSequence& seq, std::size_t begin,
                std::size_t end, Var h0, double t_prev, bool include_survival,
                double T_end, const ModelParams& params,
                std::vector<Var>* hidden) {
  Net net(tape, params);
  const auto& c = params.config();
  Var h = h0;
  Var total;
  auto accumulate = [&](Var term) {
    total = total.valid() ? tape.sub(total, term) : tape.scale(term, -1.0);
  };
  for (std::size_t i = begin; i < end; ++i) {
    const auto& e = seq[i];
    if (hidden) hidden->push_back(h);
    std::vector<int> a = Clamp(e.quantities, c);
    if (c.binary_marks) {
      for (int& q : a) q = q > 0 ? 1 : 0;
    }
    Var tau = tape.scalar(std::max(e.time - t_prev, internal::kMinTau));
    auto hd = net.head(h);
    accumulate(net.log_pdf(hd, tau));
    accumulate(net.mark_logmass(h, a));
    h = net.step(h, tau, net.mark_embed(a));
    t_prev = e.time;
  }
  if (hidden) hidden->push_back(h);
  if (include_survival && T_end > t_prev) {
    auto hd = net.head(h);
    accumulate(net.log_survival(hd, T_end - t_prev));
  }
  if (!total.valid()) total = tape.scalar(0.0);
  return total;
}

double nll(const EventSequence& seq, const ModelParams& params) {
  if (seq.empty()) throw ValidationError("nll needs a non-empty sequence");
  if (seq.num_types() != params.config().K) {
    throw ValidationError("sequence type count differs from the model's K");
  }
  if (!params.config().binary_marks) {
    for (const auto& e : seq.events()) CheckQuantities(e.quantities, params.config());
  }
  Tape tape(Mutable(params));
  Var h0 = tape.zeros(params.config().n_e);
  return nll_on_tape(tape, seq, 0, seq.size(), h0, seq.t_minus(), true,
                     seq.t_end(), params)
      .value();
}

std::vector<SampledEvent> sample_subsequence(const std::vector<double>& h,
                                             double t_start, int l,
                                             const ModelParams& params,
                                             Rng& rng, SampleMode mode) {
  if (l < 1) throw ValidationError("subsequence length must be >= 1");
  Tape tape(Mutable(params));
  Net net(tape, params);
  Var hv = ConstVec(tape, h);
  std::vector<SampledEvent> out;
  double t = t_start;
  for (int i = 0; i < l; ++i) {
    auto d = net.sample_event(hv, rng, mode);
    t += d.tau.value();
    SampledEvent ev;
    ev.time = t;
    for (const auto& a : d.a) ev.quantities.push_back(a.value());
    out.push_back(std::move(ev));
    hv = net.step(hv, d.tau, net.mark_embed(d.a));
  }
  return out;
}

HistoryState encode_history(const EventSequence& seq,
                            const ModelParams& params) {
  HistoryState s;
  auto hs = embed_history(seq, params);
  s.h = hs.back();
  s.t_last = seq.empty() ? seq.t_minus() : seq.events().back().time;
  return s;
}

EventSequence infer_future(const ModelParams& params,
                           const HistoryState& state, double T, double T_plus,
                           Rng& rng) {
  const auto& c = params.config();
  EventSequence out(c.K, c.t_minus);
  if (!(T_plus > T)) return out;
  // Bounds a runaway sampler; far above any plausible window count.
  constexpr int kMaxEvents = 100000;
  // The tape is restarted from the current hidden state every so often so
  // memory stays flat on long windows.
  constexpr std::size_t kMaxNodes = 200000;
  auto tape = std::make_unique<Tape>(Mutable(params));
  auto net = std::make_unique<Net>(*tape, params);
  Var h = ConstVec(*tape, state.h);
  double t = state.t_last;
  for (int n = 0; n < kMaxEvents; ++n) {
    auto d = net->sample_event(h, rng, SampleMode::kHard);
    double t_next = t + d.tau.value();
    if (n == 0) {
      // The first time keeps advancing by fresh draws until it passes T;
      // the history stays at h_L meanwhile.
      for (int guard = 0; t_next <= T; ++guard) {
        if (guard > kMaxEvents) return out;
        t_next += net->sample_event(h, rng, SampleMode::kHard).tau.value();
      }
    }
    if (t_next > T_plus) break;
    bool any = false;
    for (int q : d.hard) any |= q > 0;
    if (any) out.push_back({t_next, d.hard});
    Var tau = tape->scalar(std::max(t_next - t, internal::kMinTau));
    h = net->step(h, tau, net->mark_embed(d.hard));
    t = t_next;
    if (tape->node_count() > kMaxNodes) {
      std::vector<double> hv = Values(h);
      net.reset();
      tape = std::make_unique<Tape>(Mutable(params));
      net = std::make_unique<Net>(*tape, params);
      h = ConstVec(*tape, hv);
    }
  }
  return out;
}

TppPredictor::TppPredictor(std::shared_ptr<const ModelParams> params,
                           const EventSequence& history)
    : params_(std::move(params)), state_(encode_history(history, *params_)) {}

EventSequence TppPredictor::sample_future(double T, double T_plus,
                                          Rng& rng) const {
  return infer_future(*params_, state_, T, T_plus, rng);
}

}  // namespace relief
