// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-verification suites behind the `verify` command: per-primitive and
// full-loss gradient checks, oracle equivalence, and randomized invariants.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace xmal {

struct VerifyOptions {
  double h = 1e-5;
  // Full-loss gradient tolerance (max relative error).
  double tolerance = 1e-4;
  double primitive_tolerance = 1e-6;
  // Check i of each suite uses seed + i.
  std::uint64_t seed = 0;
  std::size_t seeds = 10;
  // Sampled entries per parameter tensor per seed in the full-loss check;
  // 0 checks every entry.
  std::size_t full_loss_entries = 20;
  std::size_t property_instances = 100;
  // Test fixture: replaces the named primitive's gradient with a wrong one.
  std::string inject_bug;
};

struct CheckResult {
  std::string suite;
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  std::vector<std::string> failures() const;
};

// Primitive names accepted by VerifyOptions::inject_bug.
std::vector<std::string> primitive_names();

VerifyReport run_gradient_suite(const VerifyOptions& options);
VerifyReport run_oracle_suite(const VerifyOptions& options);
VerifyReport run_invariant_suite(const VerifyOptions& options);
VerifyReport run_verify(const VerifyOptions& options);

// One line per check, then a summary line.
std::string format_verify_report(const VerifyReport& report, const VerifyOptions& options);

}  // namespace xmal
