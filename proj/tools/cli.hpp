// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: gen-data, train, eval, sim, grad-check (verify).

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace xmal::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDiverged = 3,
};

// Runs one invocation. `args` excludes the program name. Results go to
// `out`; logs and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xmal::cli
