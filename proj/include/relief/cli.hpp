// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef RELIEF_CLI_HPP_
#define RELIEF_CLI_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace relief {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;  // usage, config, parse or validation error
constexpr int kExitNumeric = 2;  // divergence or failed self-test

int RunCli(int argc, const char* const* argv);
int RunCli(const std::vector<std::string>& args);  // args[0] is the program

struct SelftestResult {
  double grad_max_rel_error = 0.0;
  std::string grad_worst_param;
  int grad_unchecked_groups = 0;  // parameter groups with no checked entry
  int certificate_instances = 0;
  int certificate_failures = 0;
  bool binding_equality_seen = false;
  bool ok() const {
    return grad_max_rel_error < 1e-3 && grad_unchecked_groups == 0 &&
           certificate_failures == 0 &&
           binding_equality_seen;
  }
};

// Finite-difference check of the training objective on small random
// sequences, and greedy-versus-exhaustive certificate checks on random
// small instances.
SelftestResult run_selftest(uint64_t seed, int instances = 200);
void selftest_gradients(uint64_t seed, SelftestResult& out);
// Instances have K <= 3, W <= 15, at most 3 scenarios and at most 6 demand
// entries per scenario, plus one constructed binding instance.
void selftest_certificate(uint64_t seed, int instances, SelftestResult& out);

}  // namespace relief

#endif  // RELIEF_CLI_HPP_
