// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "xmal/errors.hpp"
#include "xmal/objective.hpp"
#include "xmal/reference.hpp"
#include "xmal/verify.hpp"

namespace xmal {
namespace {

VerifyOptions quick() {
  VerifyOptions o;
  o.seeds = 2;
  o.full_loss_entries = 4;
  o.property_instances = 20;
  return o;
}

const CheckResult* find(const VerifyReport& r, const std::string& name) {
  for (const CheckResult& c : r.checks)
    if (c.name == name) return &c;
  return nullptr;
}

TEST(Verify, OracleAndInvariantSuitesPass) {
  VerifyOptions o;
  const VerifyReport oracles = run_oracle_suite(o);
  const VerifyReport invariants = run_invariant_suite(o);
  EXPECT_TRUE(oracles.passed()) << format_verify_report(oracles, o);
  EXPECT_TRUE(invariants.passed()) << format_verify_report(invariants, o);
  EXPECT_FALSE(oracles.checks.empty());
  EXPECT_FALSE(invariants.checks.empty());
}

TEST(Verify, GradientSuitePassesOnFewSeeds) {
  const VerifyOptions o = quick();
  const VerifyReport r = run_gradient_suite(o);
  EXPECT_TRUE(r.passed()) << format_verify_report(r, o);
  for (const char* name : {"loss.L_S", "loss.L_D", "loss.L_A", "loss.L"}) EXPECT_NE(find(r, name), nullptr) << name;
  for (const std::string& p : primitive_names()) EXPECT_NE(find(r, "primitive." + p), nullptr) << p;
}

TEST(Verify, InjectedBugFailsNamedPrimitiveOnly) {
  for (const std::string& bug : primitive_names()) {
    VerifyOptions o = quick();
    o.seeds = 1;
    o.full_loss_entries = 1;
    o.inject_bug = bug;
    const VerifyReport r = run_gradient_suite(o);
    EXPECT_FALSE(r.passed());
    const std::vector<std::string> failures = r.failures();
    ASSERT_EQ(failures.size(), 1u) << bug;
    EXPECT_EQ(failures[0], "gradient/primitive." + bug);
    EXPECT_NE(format_verify_report(r, o).find("FAIL gradient/primitive." + bug), std::string::npos);
  }
}

TEST(Verify, UnknownInjectionRejected) {
  VerifyOptions o = quick();
  o.inject_bug = "no_such_op";
  EXPECT_THROW(run_gradient_suite(o), ConfigError);
}

TEST(Verify, ReportEchoesOptions) {
  VerifyOptions o = quick();
  o.h = 2e-5;
  o.tolerance = 3e-4;
  const std::string text = format_verify_report(run_oracle_suite(o), o);
  EXPECT_NE(text.find("2e-05"), std::string::npos);
  EXPECT_NE(text.find("0.0003"), std::string::npos);
}

TEST(Reference, ForwardAgreesWithLibrary) {
  ModelConfig mc;
  mc.dim = 16;
  mc.factors = 4;
  SynthConfig sc;
  sc.pairs = 4;
  sc.dim = 16;
  sc.factors = 4;
  sc.concept_count = 16;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    sc.seed = seed;
    const Dataset data = generate(sc);
    const Model model = Model::initialize(mc, seed + 100);
    ObjectiveConfig oc;
    ReferenceModel<long double> ref(model.params, mc, oc);
    const RefLosses<long double> l = ref.losses(data.items);
    std::vector<const PairItem*> batch;
    for (const PairItem& it : data.items) batch.push_back(&it);
    ad::Tape tape;
    ad::Binder b(tape, model.params, false);
    const BatchForward fwd = forward_batch(b, mc, oc, batch);
    EXPECT_NEAR(static_cast<double>(l.l_s), fwd.l_s.value().item(), 1e-12);
    EXPECT_NEAR(static_cast<double>(l.l_d), fwd.l_d.value().item(), 1e-12);
    EXPECT_NEAR(static_cast<double>(l.l_a), fwd.l_a.value().item(), 1e-12);
    EXPECT_NEAR(static_cast<double>(l.total), fwd.total.value().item(), 1e-12);
  }
}

}  // namespace
}  // namespace xmal
