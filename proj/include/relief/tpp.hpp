// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Cost-aware neural marked temporal point process: a ReLU RNN history
// encoder, a log-normal mixture interarrival head and a chained Poisson (or
// Bernoulli) mark head, trained on likelihood plus a cost-weighted sequence
// distance.

#ifndef RELIEF_TPP_HPP_
#define RELIEF_TPP_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "relief/demand.hpp"
#include "relief/grad.hpp"
#include "relief/predictor.hpp"
#include "relief/random.hpp"

namespace relief {

struct ModelConfig {
  int K = 3;
  int n_e = 64;
  int n_z = 64;
  double gamma = 1.0;
  double zeta = 0.1;
  int A_bar = 0;  // 0 selects max(10, 2 * max observed quantity) at training
  int epochs = 30;
  double learning_rate = 1e-3;
  int csd_event_samples = 8;
  int csd_rollouts = 4;
  bool binary_marks = false;
  bool ablate_correlation = false;
  bool ablate_csd = false;
  int batch_events = 64;     // events per gradient step
  double csd_window = 12.0;  // T_plus - T used for the length distribution
  std::vector<double> importance;  // c_k; empty means 2 for every type
  double t_minus = 0.0;

  void validate() const;
  int quantity_cap() const;  // effective A_bar (1 in binary mode)
  double log_importance(int k) const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

class ModelParams {
 public:
  ModelParams() = default;
  // Random initialization. When `data` is non-empty the interarrival mean
  // bias starts at the log of its mean gap and A_bar is resolved from it.
  static ModelParams init(const ModelConfig& config, uint64_t seed,
                          const EventSequence* data = nullptr);
  // All tensors zero; shapes as in init().
  static ModelParams zeros(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  grad::ParamSet& set() { return params_; }
  const grad::ParamSet& set() const { return params_; }
  grad::Tensor& tensor(const std::string& name) {
    return params_.value(params_.id(name));
  }
  const grad::Tensor& tensor(const std::string& name) const {
    return params_.value(params_.id(name));
  }

  nlohmann::ordered_json to_json() const;
  static ModelParams from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ModelParams load(const std::string& path);

  bool operator==(const ModelParams& o) const { return params_ == o.params_; }

 private:
  ModelConfig config_;
  grad::ParamSet params_;
};

struct InterarrivalDist {
  std::vector<double> alpha;
  std::vector<double> mu;
  std::vector<double> sigma;
};

std::vector<double> embed_quantity(double a, int n_e);
std::vector<double> embed_mark(const std::vector<int>& a,
                               const ModelParams& params);
// h_0 .. h_L.
std::vector<std::vector<double>> embed_history(const EventSequence& seq,
                                               const ModelParams& params);
InterarrivalDist interarrival_params(const std::vector<double>& h,
                                     const ModelParams& params);
double interarrival_logdensity(double tau, const InterarrivalDist& d);
double interarrival_log_survival(double tau, const InterarrivalDist& d);
double interarrival_mean(const InterarrivalDist& d);

// Conditional pmf of type k's quantity over 0..cap given the quantities of
// the earlier types, before the all-zero exclusion.
std::vector<double> mark_type_pmf(int k, const std::vector<int>& earlier,
                                  const std::vector<double>& h,
                                  const ModelParams& params);
double mark_logmass(const std::vector<int>& a, const std::vector<double>& h,
                    const ModelParams& params);

// Negative log-likelihood over the observation window [t_minus, T]. T
// defaults to seq.t_end().
double nll(const EventSequence& seq, const ModelParams& params);

// Builds the likelihood on a tape starting from hidden state h0 at time
// t_prev. hidden receives h before each event. Adds the survival term
// up to T_end when include_survival is set.
grad::Var nll_on_tape(grad::Tape& tape, const EventSequence& seq,
                      std::size_t begin, std::size_t end, grad::Var h0,
                      double t_prev, bool include_survival, double T_end,
                      const ModelParams& params,
                      std::vector<grad::Var>* hidden = nullptr);

struct SampledEvent {
  double time = 0.0;
  std::vector<double> quantities;  // relaxed values in training mode
};

enum class SampleMode { kHard, kRelaxed };

// Draws l events after t_start from hidden state h.
std::vector<SampledEvent> sample_subsequence(const std::vector<double>& h,
                                             double t_start, int l,
                                             const ModelParams& params,
                                             Rng& rng,
                                             SampleMode mode = SampleMode::kHard);

// Per-event cost-aware distance, summed over a subsequence.
double sequence_distance(const std::vector<DemandEvent>& observed,
                         const std::vector<SampledEvent>& predicted,
                         const std::vector<double>& log_c);

// Empirical distribution of event counts in sliding windows.
std::vector<double> window_count_distribution(const EventSequence& seq,
                                              double window);

// Monte Carlo estimate of the cost-aware sequence distance for the whole
// sequence (no gradient).
double csd(const EventSequence& seq, const ModelParams& params, uint64_t seed);

// One optimizer step's objective over events [begin, end): gamma * NLL
// (with the survival term when end is the last event) plus, unless
// ablated, the CSD estimate from rollouts started inside the window times
// (end - begin) / L. All randomness derives from step_seed.
struct StepResult {
  double loss = 0.0;
  double nll = 0.0;
  double csd = 0.0;  // unscaled estimate
  grad::ParamGrads grads;
  std::vector<double> h_end;
};

struct StepInputs {
  const EventSequence* seq = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<double> h0;  // hidden state before event `begin`
  double t_prev = 0.0;
  const std::vector<double>* length_dist = nullptr;
  uint64_t step_seed = 0;
};

// Rollouts run on their own tapes; the adjoint of each rollout's starting
// hidden state is fed back into the history graph, so the gradient is that
// of the single-graph objective.
StepResult step_gradients(const StepInputs& in, const ModelParams& params,
                          int threads = 1);

// The same objective built on one tape (used for gradient checks).
grad::Var objective_on_tape(grad::Tape& tape, const StepInputs& in,
                            const ModelParams& params);

struct TrainStep {
  int epoch = 0;
  double loss = 0.0;
  double nll = 0.0;
  double csd = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainStep> steps;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_nll;
};

struct TrainOptions {
  uint64_t seed = 0;
  const ModelParams* warm_start = nullptr;
  int epochs = -1;  // overrides config.epochs when >= 0
  int threads = 1;  // CSD rollouts per step
};

// Throws NumericError if the loss becomes non-finite.
TrainResult train(const EventSequence& seq, const ModelConfig& config,
                  const TrainOptions& opts);

struct HistoryState {
  std::vector<double> h;
  double t_last = 0.0;
};

HistoryState encode_history(const EventSequence& seq,
                            const ModelParams& params);

// Samples future demands in (T, T_plus].
EventSequence infer_future(const ModelParams& params,
                           const HistoryState& state, double T, double T_plus,
                           Rng& rng);

class TppPredictor : public FuturePredictor {
 public:
  TppPredictor(std::shared_ptr<const ModelParams> params,
               const EventSequence& history);
  EventSequence sample_future(double T, double T_plus,
                              Rng& rng) const override;

 private:
  std::shared_ptr<const ModelParams> params_;
  HistoryState state_;
};

}  // namespace relief

#endif  // RELIEF_TPP_HPP_
