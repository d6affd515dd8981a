// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/cli.hpp"

int main(int argc, char** argv) { return relief::RunCli(argc, argv); }
