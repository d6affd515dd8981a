// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Graph builder shared by the model's evaluation, sampling and training
// code. Not part of the public interface.

#ifndef RELIEF_SRC_TPP_NET_HPP_
#define RELIEF_SRC_TPP_NET_HPP_

#include <vector>

#include "relief/grad.hpp"
#include "relief/random.hpp"
#include "relief/tpp.hpp"

namespace relief::internal {

// Interarrivals are floored here so simultaneous events keep a finite
// log-density.
inline constexpr double kMinTau = 1e-6;

class Net {
 public:
  using Var = grad::Var;

  Net(grad::Tape& tape, const ModelParams& params);

  grad::Tape& tape() { return tape_; }
  const ModelConfig& config() const { return config_; }

  Var zero_state() { return tape_.zeros(config_.n_e); }
  Var quantity_embed(Var a);
  Var mark_embed(const std::vector<Var>& a);
  Var mark_embed(const std::vector<int>& a);
  Var step(Var h, Var tau, Var fm);

  struct Head {
    Var log_alpha;
    Var mu;
    Var log_sigma;
  };
  Head head(Var h);
  Var log_pdf(const Head& head, Var tau);
  Var log_survival(const Head& head, double tau);

  // log pmf over 0..cap for type k from a chain state.
  Var type_log_pmf(Var state, int k);
  // Chain state for type k+1 after observing quantity a of type k.
  Var chain_next(Var state, int k, Var a);
  Var mark_logmass(Var h, const std::vector<int>& a);

  struct EventDraw {
    Var tau;
    std::vector<Var> a;
    std::vector<int> hard;
  };
  EventDraw sample_event(Var h, Rng& rng, SampleMode mode);

 private:
  Var input_of(int k, Var a);

  grad::Tape& tape_;
  const ModelConfig& config_;
  int cap_;
  Var W_h_, w_t_, W_m_, b_h_, W_r_;
  Var m1_W_, m1_b_, m2_W_, m2_b_, m3_W_, m3_b_;
  Var l_U_, l_V_, l_b_;
  std::vector<Var> cols_;
  Var xs_;          // 0..cap
  Var neg_lgamma_;  // -log(x!) for x in 0..cap (zeros in binary mode)
  Var inv_scales_;  // 1 / 10000^(x/n_e)
};

}  // namespace relief::internal

#endif  // RELIEF_SRC_TPP_NET_HPP_
