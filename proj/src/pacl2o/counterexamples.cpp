// Copyright 2026 The pacl2o Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pacl2o/counterexamples.hpp"

#include <cmath>
#include <cstdio>

#include "pacl2o/error.hpp"

namespace pacl2o {

Trajectory example1_prefix(std::size_t T) {
  if (T < 1) fail(ErrorCode::InvalidArgument, "example1_prefix: T must be >= 1");
  Trajectory tr;
  tr.family = "analytic";
  tr.algorithm = "example-1";
  tr.losses.reserve(T);
  tr.grad_norms.reserve(T);
  tr.state_norms.reserve(T);
  tr.step_norms.reserve(T - 1);
  double x = 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    if (t > 1) {
      const double step = 1.0 / static_cast<double>(t);
      x += step;
      tr.step_norms.push_back(step);
    }
    const double f = std::exp(-x);
    tr.losses.push_back(f);
    tr.grad_norms.push_back(f);  // |f'(x)| = exp(-x)
    tr.state_norms.push_back(std::abs(x));
  }
  tr.x_last = {x};
  return tr;
}

Trajectory example2_prefix(std::size_t T, std::array<double, 2> x0) {
  Trajectory tr;
  tr.family = "analytic";
  tr.algorithm = "example-2";
  tr.losses.reserve(T + 1);
  tr.grad_norms.reserve(T + 1);
  tr.state_norms.reserve(T + 1);
  tr.step_norms.reserve(T);
  double x1 = x0[0];
  const double x2 = x0[1];
  auto record = [&] {
    tr.losses.push_back(0.5 * x1 * x1 + 0.5 * x2 * x2);
    const double n = std::hypot(x1, x2);  // grad f = x
    tr.grad_norms.push_back(n);
    tr.state_norms.push_back(n);
  };
  record();
  for (std::size_t t = 0; t < T; ++t) {
    const double step = 0.1 * x1;
    x1 -= step;
    tr.step_norms.push_back(std::abs(step));
    record();
  }
  tr.x_last = {x1, x2};
  return tr;
}

std::array<double, 2> example2_limit_point(std::array<double, 2> x0) {
  return {0.0, x0[1]};
}

double example2_limit_grad_norm(std::array<double, 2> x0) {
  const auto p = example2_limit_point(x0);
  return std::hypot(p[0], p[1]);
}

namespace {

std::string violated_conditions(const ConditionReport& r) {
  std::string out;
  auto add = [&out](const char* s) {
    if (!out.empty()) out += ",";
    out += s;
  };
  if (!r.in_A_desc) add("descent");
  if (!r.in_A_err) add("relative-error");
  if (!r.in_A_bound) add("boundedness");
  return out.empty() ? "none" : out;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "none";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

}  // namespace

std::vector<CounterexampleRow> counterexample_table(const DemoOptions& opts) {
  std::vector<CounterexampleRow> rows;
  {
    CounterexampleRow r;
    r.example = "example-1";
    r.T = opts.T1;
    r.report = event_A(example1_prefix(opts.T1), opts.thresholds);
    r.violated = violated_conditions(r.report);
    rows.push_back(std::move(r));
  }
  {
    CounterexampleRow r;
    r.example = "example-2";
    r.T = opts.T2;
    r.report = event_A(example2_prefix(opts.T2, opts.x0), opts.thresholds);
    r.violated = violated_conditions(r.report);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_counterexample_table(const std::vector<CounterexampleRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %8s %12s %12s %12s %6s %6s %6s %5s  %s\n", "example",
                "T", "a_star", "b_star", "c_star", "desc", "err", "bound", "A", "violated");
  out += buf;
  for (const auto& r : rows) {
    const auto& rep = r.report;
    std::snprintf(buf, sizeof buf, "%-10s %8zu %12s %12s %12.6g %6d %6d %6d %5d  %s\n",
                  r.example.c_str(), r.T, fmt_opt(rep.a_star).c_str(),
                  fmt_opt(rep.b_star).c_str(), rep.c_star, rep.in_A_desc, rep.in_A_err,
                  rep.in_A_bound, rep.in_A, r.violated.c_str());
    out += buf;
  }
  return out;
}

}  // namespace pacl2o
