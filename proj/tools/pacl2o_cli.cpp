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

// Command-line front end. Talks to the library only through pacl2o.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pacl2o/pacl2o.h"

namespace {

struct Options {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::size_t T1 = 0;
  std::size_t T2 = 0;
  bool quiet = false;
};

int report_failure(pacl2o_status s, const char* fallback_stage) {
  const char* stage = pacl2o_last_error_stage();
  if (*stage == '\0') stage = fallback_stage;
  std::fprintf(stderr, "pacl2o: error [%s] (%s): %s\n", stage, pacl2o_status_name(s),
               pacl2o_last_error());
  return static_cast<int>(s);
}

void print_line(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

// Spec from --spec, else the resolved config.json of an existing run.
int load_spec(const Options& o, pacl2o_spec** spec, const char* stage) {
  std::string path = o.spec;
  if (path.empty()) {
    path = (std::filesystem::path(o.out) / "config.json").string();
    if (!std::filesystem::exists(path)) {
      std::fprintf(stderr, "pacl2o: error [%s]: --spec is required (no %s)\n", stage,
                   path.c_str());
      return PACL2O_ERR_CONFIG;
    }
  }
  pacl2o_status s = pacl2o_spec_load(path.c_str(), spec);
  if (s != PACL2O_OK) return report_failure(s, stage);
  if (o.seed) s = pacl2o_spec_set_seed(*spec, *o.seed);
  if (s == PACL2O_OK && o.threads) s = pacl2o_spec_set_threads(*spec, *o.threads);
  if (s != PACL2O_OK) {
    pacl2o_spec_free(*spec);
    return report_failure(s, stage);
  }
  return 0;
}

using StageFn = pacl2o_status (*)(const pacl2o_spec*, const char*, pacl2o_log_fn, void*);

int run_stage(const Options& o, const char* stage, StageFn fn) {
  pacl2o_spec* spec = nullptr;
  if (int rc = load_spec(o, &spec, stage)) return rc;
  const pacl2o_status s = fn(spec, o.out.c_str(), o.quiet ? nullptr : print_line, nullptr);
  pacl2o_spec_free(spec);
  return s == PACL2O_OK ? 0 : report_failure(s, stage);
}

pacl2o_status gen_problems(const pacl2o_spec* spec, const char* out, pacl2o_log_fn, void*) {
  return pacl2o_gen_problems(spec, out);
}

int print_report(const Options& o) {
  char* text = nullptr;
  const pacl2o_status s = pacl2o_report(o.out.c_str(), &text, nullptr);
  if (s != PACL2O_OK) return report_failure(s, "report");
  std::fputs(text, stdout);
  pacl2o_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC-Bayesian certificates for learned optimization algorithms"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub, bool with_spec) {
    if (with_spec) {
      sub->add_option("--spec", o.spec, "experiment spec (JSON); defaults to <out>/config.json");
      sub->add_option("--seed", o.seed, "override the spec seed");
      sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
      sub->add_flag("--quiet", o.quiet, "no progress output");
    }
    sub->add_option("--out", o.out, "run directory")->required();
  };

  auto* gen = app.add_subcommand("gen-problems", "sample prior/val/train/test problem sets");
  add_common(gen, true);
  auto* train = app.add_subcommand("train", "performance training and refinement");
  add_common(train, true);
  auto* certify = app.add_subcommand("certify", "prior, posterior and certificate");
  add_common(certify, true);
  auto* evaluate = app.add_subcommand("evaluate", "roll out baselines and the learned update");
  add_common(evaluate, true);
  auto* run = app.add_subcommand("run", "all stages followed by the report");
  add_common(run, true);
  auto* report = app.add_subcommand("report", "summarize a completed run directory");
  add_common(report, false);

  auto* cex = app.add_subcommand("counterexamples", "condition table for the analytic examples");
  cex->add_option("--T1", o.T1, "prefix length of example 1 (default 100000)");
  cex->add_option("--T2", o.T2, "prefix length of example 2 (default 100)");

  CLI11_PARSE(app, argc, argv);

  if (*gen) return run_stage(o, "gen-problems", gen_problems);
  if (*train) return run_stage(o, "train", pacl2o_train);
  if (*certify) return run_stage(o, "certify", pacl2o_certify);
  if (*evaluate) return run_stage(o, "evaluate", pacl2o_evaluate);
  if (*run) {
    const int rc = run_stage(o, "run", pacl2o_run);
    return rc != 0 ? rc : print_report(o);
  }
  if (*report) return print_report(o);
  if (*cex) {
    char* table = nullptr;
    const pacl2o_status s = pacl2o_counterexamples(o.T1, o.T2, &table);
    if (s != PACL2O_OK) return report_failure(s, "counterexamples");
    std::fputs(table, stdout);
    pacl2o_string_free(table);
    return 0;
  }
  return 1;
}
