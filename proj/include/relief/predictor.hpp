// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RELIEF_PREDICTOR_HPP_
#define RELIEF_PREDICTOR_HPP_

#include "relief/demand.hpp"
#include "relief/random.hpp"

namespace relief {

// Draws one future demand sequence in (T, T_plus] conditioned on whatever
// history the implementation was built from. Implementations must be safe
// to call concurrently with distinct generators.
class FuturePredictor {
 public:
  virtual ~FuturePredictor() = default;
  virtual EventSequence sample_future(double T, double T_plus,
                                      Rng& rng) const = 0;
};

// Returns the same sequence every time. Useful as a perfect-foresight
// stand-in and in tests.
class FixedPredictor : public FuturePredictor {
 public:
  explicit FixedPredictor(EventSequence future) : future_(std::move(future)) {}
  EventSequence sample_future(double T, double T_plus, Rng&) const override {
    return future_.window(T, T_plus);
  }

 private:
  EventSequence future_;
};

}  // namespace relief

#endif  // RELIEF_PREDICTOR_HPP_
