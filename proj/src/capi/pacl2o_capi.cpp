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

#include "pacl2o/pacl2o.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "pacl2o/counterexamples.hpp"
#include "pacl2o/error.hpp"
#include "pacl2o/experiment.hpp"
#include "pacl2o/pac_bayes.hpp"

struct pacl2o_spec {
  pacl2o::ExperimentSpec spec;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_stage;

pacl2o_status to_status(pacl2o::ErrorCode c) {
  switch (c) {
    case pacl2o::ErrorCode::InvalidArgument: return PACL2O_ERR_INVALID_ARGUMENT;
    case pacl2o::ErrorCode::Config: return PACL2O_ERR_CONFIG;
    case pacl2o::ErrorCode::Io: return PACL2O_ERR_IO;
    case pacl2o::ErrorCode::Numeric: return PACL2O_ERR_NUMERIC;
    case pacl2o::ErrorCode::Format: return PACL2O_ERR_FORMAT;
  }
  return PACL2O_ERR_INTERNAL;
}

template <class Fn>
pacl2o_status guard(Fn&& fn) {
  g_error.clear();
  g_stage.clear();
  try {
    fn();
    return PACL2O_OK;
  } catch (const pacl2o::Error& e) {
    g_error = e.what();
    g_stage = e.stage();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return PACL2O_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return PACL2O_ERR_INTERNAL;
  } catch (...) {
    g_error = "unknown exception";
    return PACL2O_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) pacl2o::fail(pacl2o::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pacl2o::LogFn wrap(pacl2o_log_fn log, void* user) {
  if (log == nullptr) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

pacl2o::DiscreteMeasure measure(const double* w, std::size_t n) {
  pacl2o::DiscreteMeasure m;
  m.weights.assign(w, w + n);
  for (std::size_t i = 0; i < n; ++i) m.atoms.push_back(i);
  m.validate();
  return m;
}

}  // namespace

extern "C" {

const char* pacl2o_version(void) { return "0.1.0"; }

const char* pacl2o_status_name(pacl2o_status s) {
  switch (s) {
    case PACL2O_OK: return "ok";
    case PACL2O_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case PACL2O_ERR_CONFIG: return "config";
    case PACL2O_ERR_IO: return "io";
    case PACL2O_ERR_NUMERIC: return "numeric";
    case PACL2O_ERR_FORMAT: return "format";
    case PACL2O_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* pacl2o_last_error(void) { return g_error.c_str(); }
const char* pacl2o_last_error_stage(void) { return g_stage.c_str(); }
void pacl2o_string_free(char* s) { std::free(s); }

pacl2o_status pacl2o_spec_load(const char* path, pacl2o_spec** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pacl2o_spec{pacl2o::load_spec(path)};
  });
}

pacl2o_status pacl2o_spec_parse(const char* json, pacl2o_spec** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      pacl2o::fail(pacl2o::ErrorCode::Format, e.what());
    }
    *out = new pacl2o_spec{pacl2o::ExperimentSpec::from_json(j)};
  });
}

void pacl2o_spec_free(pacl2o_spec* spec) { delete spec; }

pacl2o_status pacl2o_spec_set_seed(pacl2o_spec* spec, uint64_t seed) {
  return guard([&] {
    need(spec, "spec");
    spec->spec.seed = seed;
    spec->spec.pipeline.seed = seed;
  });
}

pacl2o_status pacl2o_spec_set_threads(pacl2o_spec* spec, size_t threads) {
  return guard([&] {
    need(spec, "spec");
    if (threads < 1) pacl2o::fail(pacl2o::ErrorCode::InvalidArgument, "threads must be >= 1");
    spec->spec.threads = threads;
    spec->spec.pipeline.threads = threads;
  });
}

pacl2o_status pacl2o_spec_to_json(const pacl2o_spec* spec, char** out) {
  return guard([&] {
    need(spec, "spec");
    need(out, "out");
    *out = dup(spec->spec.to_json().dump(2));
  });
}

pacl2o_status pacl2o_gen_problems(const pacl2o_spec* spec, const char* out_dir) {
  return guard([&] {
    need(spec, "spec");
    need(out_dir, "out_dir");
    pacl2o::stage_gen_problems(spec->spec, out_dir);
  });
}

pacl2o_status pacl2o_train(const pacl2o_spec* spec, const char* out_dir, pacl2o_log_fn log,
                           void* user) {
  return guard([&] {
    need(spec, "spec");
    need(out_dir, "out_dir");
    pacl2o::stage_train(spec->spec, out_dir, wrap(log, user));
  });
}

pacl2o_status pacl2o_certify(const pacl2o_spec* spec, const char* out_dir, pacl2o_log_fn log,
                             void* user) {
  return guard([&] {
    need(spec, "spec");
    need(out_dir, "out_dir");
    pacl2o::stage_certify(spec->spec, out_dir, wrap(log, user));
  });
}

pacl2o_status pacl2o_evaluate(const pacl2o_spec* spec, const char* out_dir, pacl2o_log_fn log,
                              void* user) {
  return guard([&] {
    need(spec, "spec");
    need(out_dir, "out_dir");
    pacl2o::stage_evaluate(spec->spec, out_dir, wrap(log, user));
  });
}

pacl2o_status pacl2o_run(const pacl2o_spec* spec, const char* out_dir, pacl2o_log_fn log,
                         void* user) {
  return guard([&] {
    need(spec, "spec");
    need(out_dir, "out_dir");
    pacl2o::run_experiment(spec->spec, out_dir, wrap(log, user));
  });
}

pacl2o_status pacl2o_report(const char* run_dir, char** text, char** json) {
  return guard([&] {
    need(run_dir, "run_dir");
    const auto s = pacl2o::emit_report(run_dir);
    char* t = text ? dup(s.text) : nullptr;
    char* j = nullptr;
    if (json) {
      try {
        j = dup(s.json.dump(2));
      } catch (...) {
        std::free(t);
        throw;
      }
    }
    if (text) *text = t;
    if (json) *json = j;
  });
}

pacl2o_status pacl2o_counterexamples(size_t T1, size_t T2, char** table) {
  return guard([&] {
    need(table, "table");
    pacl2o::DemoOptions opts;
    if (T1 > 0) opts.T1 = T1;
    if (T2 > 0) opts.T2 = T2;
    *table = dup(pacl2o::format_counterexample_table(pacl2o::counterexample_table(opts)));
  });
}

pacl2o_status pacl2o_phi_inverse(double a, double p, double* out) {
  return guard([&] {
    need(out, "out");
    *out = pacl2o::phi_inverse(a, p);
  });
}

pacl2o_status pacl2o_kl_discrete(const double* rho, const double* prior, size_t n, double* out) {
  return guard([&] {
    need(rho, "rho");
    need(prior, "prior");
    need(out, "out");
    *out = pacl2o::kl_discrete(measure(rho, n), measure(prior, n));
  });
}

pacl2o_status pacl2o_gibbs_posterior(const double* prior, const double* risks, size_t n,
                                     double lambda, double* out) {
  return guard([&] {
    need(prior, "prior");
    need(risks, "risks");
    need(out, "out");
    const auto post = pacl2o::gibbs_posterior(measure(prior, n), {risks, n}, lambda);
    std::copy(post.weights.begin(), post.weights.end(), out);
  });
}

pacl2o_status pacl2o_certificate_bound(double posterior_risk, double kl, double lambda,
                                       double eps, size_t N, double* out) {
  return guard([&] {
    need(out, "out");
    *out = pacl2o::certificate_bound(posterior_risk, kl, lambda, eps, N);
  });
}

}  // extern "C"
