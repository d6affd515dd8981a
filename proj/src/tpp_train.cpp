// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <mutex>

#include "relief/error.hpp"
#include "relief/parallel.hpp"
#include "relief/tpp.hpp"
#include "tpp_net.hpp"

namespace relief {

using grad::Tape;
using grad::Var;
using internal::Net;

std::vector<double> window_count_distribution(const EventSequence& seq,
                                              double window) {
  if (!(window > 0)) throw ValidationError("window must be positive");
  const auto& ev = seq.events();
  const double t_end = seq.t_end();
  std::vector<double> starts{seq.t_minus()};
  for (const auto& e : ev) starts.push_back(e.time);
  std::vector<int> counts;
  auto count_from = [&](double s) {
    auto lo = std::upper_bound(ev.begin(), ev.end(), s,
                               [](double t, const DemandEvent& e) {
                                 return t < e.time;
                               });
    auto hi = std::upper_bound(ev.begin(), ev.end(), s + window,
                               [](double t, const DemandEvent& e) {
                                 return t < e.time;
                               });
    return static_cast<int>(hi - lo);
  };
  for (double s : starts) {
    if (s + window <= t_end) counts.push_back(count_from(s));
  }
  // Short histories have no complete window; fall back to truncated ones.
  if (counts.empty()) {
    for (double s : starts) counts.push_back(count_from(s));
  }
  int mx = *std::max_element(counts.begin(), counts.end());
  std::vector<double> dist(mx + 1, 0.0);
  for (int c : counts) dist[c] += 1.0;
  for (double& p : dist) p /= static_cast<double>(counts.size());
  return dist;
}

double sequence_distance(const std::vector<DemandEvent>& observed,
                         const std::vector<SampledEvent>& predicted,
                         const std::vector<double>& log_c) {
  if (observed.size() != predicted.size()) {
    throw ValidationError("observed and predicted lengths differ");
  }
  double sum_log_c = 0.0;
  for (double v : log_c) sum_log_c += v;
  double d = 0.0;
  for (std::size_t j = 0; j < observed.size(); ++j) {
    double dt = observed[j].time - predicted[j].time;
    d += dt * dt * sum_log_c;
    for (std::size_t k = 0; k < log_c.size(); ++k) {
      double da = observed[j].quantities[k] - predicted[j].quantities[k];
      d += da * da * log_c[k];
    }
  }
  return d;
}

namespace {

struct CsdDraw {
  std::size_t start;  // index of the first observed event
  int length;
};

int DrawLength(const std::vector<double>& dist, Rng& rng) {
  std::vector<double> w(dist);
  if (!w.empty()) w[0] = 0.0;  // l = 0 is rejected
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0)) return 1;
  std::discrete_distribution<int> d(w.begin(), w.end());
  return d(rng);
}

std::vector<CsdDraw> DrawStarts(const StepInputs& in, int samples) {
  Rng rng = SubStream(in.step_seed, "csd-draw");
  std::vector<CsdDraw> out;
  const std::size_t L = in.seq->size();
  std::uniform_int_distribution<std::size_t> pick(in.begin, in.end - 1);
  for (int s = 0; s < samples; ++s) {
    int l = DrawLength(*in.length_dist, rng);
    std::size_t i = pick(rng);
    l = static_cast<int>(std::min<std::size_t>(l, L - i));
    out.push_back({i, l});
  }
  return out;
}

std::vector<double> LogImportance(const ModelConfig& c) {
  std::vector<double> out(c.K);
  for (int k = 0; k < c.K; ++k) out[k] = c.log_importance(k);
  return out;
}

// Distance between one relaxed rollout from h and the observed events
// start .. start + l - 1.
Var RolloutDistance(Net& net, Var h, const EventSequence& seq,
                    const CsdDraw& draw, Rng& rng) {
  Tape& tape = net.tape();
  const auto& c = net.config();
  auto log_c = LogImportance(c);
  double sum_log_c = 0.0;
  for (double v : log_c) sum_log_c += v;
  double t0 = draw.start == 0 ? seq.t_minus() : seq[draw.start - 1].time;
  Var t_hat = tape.scalar(t0);
  Var total;
  for (int j = 0; j < draw.length; ++j) {
    const auto& obs = seq[draw.start + j];
    auto d = net.sample_event(h, rng, SampleMode::kRelaxed);
    t_hat = tape.add(t_hat, d.tau);
    Var term = tape.scale(tape.square(tape.affine(t_hat, 1.0, -obs.time)),
                          sum_log_c);
    for (int k = 0; k < c.K; ++k) {
      Var da = tape.affine(d.a[k], -1.0, obs.quantities[k]);
      term = tape.add(term, tape.scale(tape.square(da), log_c[k]));
    }
    total = total.valid() ? tape.add(total, term) : term;
    h = net.step(h, d.tau, net.mark_embed(d.a));
  }
  return total;
}

// Each chunk carries its share of the sequence-level CSD term, so one epoch
// of steps adds up to CSD + gamma * NLL over the whole sequence.
double ChunkShare(const StepInputs& in) {
  return static_cast<double>(in.end - in.begin) /
         static_cast<double>(in.seq->size());
}

void CheckStepInputs(const StepInputs& in, const ModelParams& params) {
  if (!in.seq || in.begin >= in.end || in.end > in.seq->size()) {
    throw ValidationError("step window out of range");
  }
  if (static_cast<int>(in.h0.size()) != params.config().n_e) {
    throw ValidationError("initial hidden state has the wrong size");
  }
  if (!params.config().ablate_csd) {
    if (in.seq->size() < 2) {
      throw ConfigError("CSD training needs at least two events");
    }
    if (!in.length_dist) throw ValidationError("missing length distribution");
  }
}

}  // namespace

Var objective_on_tape(Tape& tape, const StepInputs& in,
                      const ModelParams& params) {
  CheckStepInputs(in, params);
  const auto& c = params.config();
  const bool last = in.end == in.seq->size();
  std::vector<Var> hidden;
  Var h0 = tape.constant(in.h0);
  Var nllv = nll_on_tape(tape, *in.seq, in.begin, in.end, h0, in.t_prev, last,
                         in.seq->t_end(), params, &hidden);
  Var loss = tape.scale(nllv, c.gamma);
  if (c.ablate_csd) return loss;
  Net net(tape, params);
  auto draws = DrawStarts(in, c.csd_event_samples);
  const double inv_n = ChunkShare(in) / (draws.size() * c.csd_rollouts);
  std::size_t idx = 0;
  for (const auto& d : draws) {
    for (int r = 0; r < c.csd_rollouts; ++r, ++idx) {
      Rng rng = SubStream(in.step_seed, "csd-rollout", idx);
      Var D = RolloutDistance(net, hidden[d.start - in.begin], *in.seq, d, rng);
      loss = tape.add(loss, tape.scale(D, inv_n));
    }
  }
  return loss;
}

StepResult step_gradients(const StepInputs& in, const ModelParams& params,
                          int threads) {
  CheckStepInputs(in, params);
  const auto& c = params.config();
  grad::ParamSet* set = const_cast<grad::ParamSet*>(&params.set());
  const bool last = in.end == in.seq->size();
  StepResult out;
  out.grads = grad::ParamGrads::zeros_like(params.set());

  Tape tape(set);
  std::vector<Var> hidden;
  Var h0 = tape.constant(in.h0);
  Var nllv = nll_on_tape(tape, *in.seq, in.begin, in.end, h0, in.t_prev, last,
                         in.seq->t_end(), params, &hidden);
  Var loss = tape.scale(nllv, c.gamma);
  out.nll = nllv.value();
  {
    auto hv = hidden.back().values();
    out.h_end.assign(hv.begin(), hv.end());
  }

  std::vector<std::pair<Var, std::vector<double>>> seeds;
  if (!c.ablate_csd) {
    auto draws = DrawStarts(in, c.csd_event_samples);
    const std::size_t n = draws.size() * c.csd_rollouts;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double share = ChunkShare(in);
    struct RolloutOut {
      double D = 0.0;
      grad::ParamGrads grads;
      std::vector<double> h_adj;
    };
    std::vector<RolloutOut> results(n);
    std::vector<std::vector<double>> starts(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) {
      auto hv = hidden[draws[d].start - in.begin].values();
      starts[d].assign(hv.begin(), hv.end());
    }
    ParallelFor(n, threads, [&](std::size_t idx) {
      const auto& d = draws[idx / c.csd_rollouts];
      Tape rt(set);
      Net net(rt, params);
      Var h = rt.constant(starts[idx / c.csd_rollouts]);
      Rng rng = SubStream(in.step_seed, "csd-rollout", idx);
      Var D = RolloutDistance(net, h, *in.seq, d, rng);
      Var scaled = rt.scale(D, inv_n * share);
      rt.backward(scaled);
      auto& r = results[idx];
      r.D = D.value();
      r.grads = rt.param_grads();
      auto g = rt.grad(h);
      r.h_adj.assign(g.begin(), g.end());
    });
    // Fixed-order reduction keeps the result independent of threading.
    std::vector<std::vector<double>> adj(hidden.size());
    for (std::size_t idx = 0; idx < n; ++idx) {
      const auto& r = results[idx];
      out.csd += r.D * inv_n;
      out.grads.add(r.grads);
      std::size_t hi = draws[idx / c.csd_rollouts].start - in.begin;
      if (adj[hi].empty()) adj[hi].assign(r.h_adj.size(), 0.0);
      for (std::size_t j = 0; j < r.h_adj.size(); ++j) adj[hi][j] += r.h_adj[j];
    }
    for (std::size_t hi = 0; hi < adj.size(); ++hi) {
      if (!adj[hi].empty()) seeds.emplace_back(hidden[hi], std::move(adj[hi]));
    }
  }
  tape.backward(loss, seeds);
  out.grads.add(tape.param_grads());
  out.loss = c.gamma * out.nll + ChunkShare(in) * out.csd;
  return out;
}

double csd(const EventSequence& seq, const ModelParams& params,
           uint64_t seed) {
  const auto& c = params.config();
  if (seq.size() < 2) throw ConfigError("CSD needs at least two events");
  auto dist = window_count_distribution(seq, c.csd_window);
  auto hs = embed_history(seq, params);
  StepInputs in;
  in.seq = &seq;
  in.begin = 0;
  in.end = seq.size();
  in.length_dist = &dist;
  in.step_seed = seed;
  auto draws = DrawStarts(in, c.csd_event_samples);
  auto log_c = LogImportance(c);
  double total = 0.0;
  std::size_t idx = 0;
  for (const auto& d : draws) {
    for (int r = 0; r < c.csd_rollouts; ++r, ++idx) {
      Rng rng = SubStream(seed, "csd-rollout", idx);
      double t0 = d.start == 0 ? seq.t_minus() : seq[d.start - 1].time;
      auto pred = sample_subsequence(hs[d.start], t0, d.length, params, rng,
                                     SampleMode::kRelaxed);
      std::vector<DemandEvent> obs(seq.events().begin() + d.start,
                                   seq.events().begin() + d.start + d.length);
      total += sequence_distance(obs, pred, log_c);
    }
  }
  return total / static_cast<double>(idx);
}

TrainResult train(const EventSequence& seq, const ModelConfig& config,
                  const TrainOptions& opts) {
  config.validate();
  if (seq.num_types() != config.K) {
    throw ValidationError("sequence type count differs from the model's K");
  }
  if (seq.empty()) throw ValidationError("cannot train on an empty sequence");
  if (!config.ablate_csd && seq.size() < 2) {
    throw ConfigError("CSD training needs at least two events");
  }
  TrainResult result;
  if (opts.warm_start) {
    result.params = *opts.warm_start;
    // Keep the resolved A_bar of the warm start; take everything else
    // from the new config.
    int a_bar = result.params.config().A_bar;
    result.params.mutable_config() = config;
    result.params.mutable_config().A_bar = a_bar;
  } else {
    result.params = ModelParams::init(config, opts.seed, &seq);
  }
  ModelParams& params = result.params;
  const auto& c = params.config();
  auto dist = window_count_distribution(seq, c.csd_window);
  grad::Adam adam(params.set(), c.learning_rate);
  const int epochs = opts.epochs >= 0 ? opts.epochs : c.epochs;
  const std::size_t L = seq.size();
  uint64_t step_index = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<double> h(c.n_e, 0.0);
    double t_prev = seq.t_minus();
    double epoch_loss = 0.0, epoch_nll = 0.0;
    for (std::size_t begin = 0; begin < L; begin += c.batch_events) {
      StepInputs in;
      in.seq = &seq;
      in.begin = begin;
      in.end = std::min(L, begin + c.batch_events);
      in.h0 = h;
      in.t_prev = t_prev;
      in.length_dist = &dist;
      in.step_seed = SplitMix64(opts.seed ^ SplitMix64(HashTag("train-step") +
                                                       step_index++));
      StepResult r = step_gradients(in, params, opts.threads);
      if (!std::isfinite(r.loss)) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + ", events " +
                           std::to_string(in.begin) + ".." +
                           std::to_string(in.end) + ": loss " +
                           std::to_string(r.loss) + " (nll " +
                           std::to_string(r.nll) + ", csd " +
                           std::to_string(r.csd) + ")");
      }
      adam.step(params.set(), r.grads);
      result.steps.push_back({epoch, r.loss, r.nll, r.csd});
      epoch_loss += r.loss;
      epoch_nll += r.nll;
      h = std::move(r.h_end);
      t_prev = seq[in.end - 1].time;
    }
    result.epoch_loss.push_back(epoch_loss);
    result.epoch_nll.push_back(epoch_nll);
  }
  return result;
}

}  // namespace relief
