// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "xmal/errors.hpp"
#include "xmal/rng.hpp"

namespace xmal {

double gradient_error(double analytic, double numeric, double abs_threshold) {
  const double diff = std::abs(analytic - numeric);
  if (std::abs(analytic) < abs_threshold) return diff;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

namespace {

std::vector<std::size_t> select_entries(std::size_t n, const FdOptions& options, const std::string& name) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (options.max_entries_per_param == 0 || n <= options.max_entries_per_param) return idx;
  Rng rng(derive_seed(options.sample_seed, name));
  rng.shuffle(idx);
  idx.resize(options.max_entries_per_param);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void record(FdReport& r, const std::string& name, std::size_t i, double analytic, double numeric,
            double abs_threshold, bool one_sided) {
  const double err = gradient_error(analytic, numeric, abs_threshold);
  ++r.entries_checked;
  if (one_sided) ++r.entries_one_sided;
  if (err > r.max_error || r.worst_param.empty()) {
    r.max_error = std::max(r.max_error, err);
    r.worst_param = name;
    r.worst_index = i;
    r.worst_analytic = analytic;
    r.worst_numeric = numeric;
  }
}

void require_step(const FdOptions& options) {
  if (!(options.h > 0.0 && options.h <= 1e-2)) {
    throw ContractError("finite-difference step must lie in (0, 1e-2]");
  }
}

}  // namespace

std::vector<ad::Gradients> analytic_gradients(const VectorFunction& f, const ad::ParameterStore& params) {
  // One tape, one forward pass, one backward per output.
  std::vector<ad::Gradients> analytic;
  ad::Tape tape;
  ad::Binder binder(tape, params, true);
  std::vector<ad::Var> outs = f(binder);
  for (const ad::Var& out : outs) {
    if (out.rows() != 1 || out.cols() != 1) {
      throw ContractError("finite_difference_check requires scalar outputs, got " + shape_string(out.value()));
    }
    tape.backward(out);
    analytic.push_back(binder.gradients());
  }
  return analytic;
}

std::vector<FdReport> finite_difference_check_probe(const ad::ParameterStore& params,
                                                    const std::vector<ad::Gradients>& analytic,
                                                    const Prober& probe, const FdOptions& options) {
  require_step(options);
  const long double h = options.h;
  const Probe base = probe("", 0, 0.0L);
  if (base.values.size() != analytic.size()) {
    throw ContractError("finite_difference_check: prober yields " + std::to_string(base.values.size()) +
                        " outputs, expected " + std::to_string(analytic.size()));
  }
  std::vector<FdReport> reports(analytic.size());
  std::vector<long double> numeric(reports.size());
  for (const auto& [name, value] : params) {
    for (std::size_t i : select_entries(value.size(), options, name)) {
      const Probe up = probe(name, i, h);
      const Probe down = probe(name, i, -h);
      bool one_sided = false;
      if (up.signature == base.signature && down.signature == base.signature) {
        for (std::size_t k = 0; k < reports.size(); ++k) numeric[k] = (up.values[k] - down.values[k]) / (2 * h);
      } else {
        // Second-order one-sided stencil on a side free of kinks.
        bool done = false;
        for (long double side : {1.0L, -1.0L}) {
          const Probe& near = side > 0 ? up : down;
          if (near.signature != base.signature) continue;
          const Probe far = probe(name, i, 2 * side * h);
          if (far.signature != base.signature) continue;
          for (std::size_t k = 0; k < reports.size(); ++k) {
            numeric[k] = side * (-3 * base.values[k] + 4 * near.values[k] - far.values[k]) / (2 * h);
          }
          done = true;
          break;
        }
        if (!done) {
          for (FdReport& r : reports) ++r.entries_skipped;
          continue;
        }
        one_sided = true;
      }
      for (std::size_t k = 0; k < reports.size(); ++k) {
        record(reports[k], name, i, analytic[k].at(name)[i], static_cast<double>(numeric[k]),
               options.abs_threshold, one_sided);
      }
    }
  }
  return reports;
}

std::vector<FdReport> finite_difference_check_all(const VectorFunction& f,
                                                  const ad::ParameterStore& params,
                                                  const FdOptions& options) {
  require_step(options);
  const std::vector<ad::Gradients> analytic = analytic_gradients(f, params);
  ad::ParameterStore scratch = params;
  Prober probe = [&](const std::string& name, std::size_t index, long double delta) {
    double* entry = nullptr;
    double saved = 0.0;
    if (!name.empty()) {
      entry = &scratch.at(name)[index];
      saved = *entry;
      *entry = saved + static_cast<double>(delta);
    }
    ad::Tape tape;
    ad::Binder binder(tape, scratch, false);
    const std::vector<ad::Var> outs = f(binder);
    Probe p;
    for (const ad::Var& v : outs) p.values.push_back(v.value().item());
    p.signature = tape.branch_signature();
    if (entry != nullptr) *entry = saved;
    return p;
  };
  return finite_difference_check_probe(params, analytic, probe, options);
}

FdReport finite_difference_check(const ad::ScalarFunction& f, const ad::ParameterStore& params,
                                 const FdOptions& options) {
  VectorFunction wrapped = [&f](ad::Binder& b) { return std::vector<ad::Var>{f(b)}; };
  return finite_difference_check_all(wrapped, params, options).front();
}

}  // namespace xmal
