/* Copyright 2026 The pacl2o Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to libpacl2o.
 *
 * Every call returns a pacl2o_status. On failure the message and the stage
 * tag of the failing step are kept per thread and can be read with
 * pacl2o_last_error() / pacl2o_last_error_stage() until the next call on the
 * same thread. Strings handed out by the library are released with
 * pacl2o_string_free().
 */

#ifndef PACL2O_PACL2O_H_
#define PACL2O_PACL2O_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PACL2O_API __declspec(dllexport)
#else
#define PACL2O_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pacl2o_status {
  PACL2O_OK = 0,
  PACL2O_ERR_INVALID_ARGUMENT = 1,
  PACL2O_ERR_CONFIG = 2,
  PACL2O_ERR_IO = 3,
  PACL2O_ERR_NUMERIC = 4,
  PACL2O_ERR_FORMAT = 5,
  PACL2O_ERR_INTERNAL = 6
} pacl2o_status;

typedef struct pacl2o_spec pacl2o_spec;

/* Called once per progress line. */
typedef void (*pacl2o_log_fn)(const char* line, void* user);

PACL2O_API const char* pacl2o_version(void);
PACL2O_API const char* pacl2o_status_name(pacl2o_status s);
PACL2O_API const char* pacl2o_last_error(void);
/* Empty string when the failure did not come from a pipeline stage. */
PACL2O_API const char* pacl2o_last_error_stage(void);
PACL2O_API void pacl2o_string_free(char* s);

/* --- experiment spec --- */

PACL2O_API pacl2o_status pacl2o_spec_load(const char* path, pacl2o_spec** out);
PACL2O_API pacl2o_status pacl2o_spec_parse(const char* json, pacl2o_spec** out);
PACL2O_API void pacl2o_spec_free(pacl2o_spec* spec);
PACL2O_API pacl2o_status pacl2o_spec_set_seed(pacl2o_spec* spec, uint64_t seed);
PACL2O_API pacl2o_status pacl2o_spec_set_threads(pacl2o_spec* spec, size_t threads);
/* Fully resolved spec as JSON. */
PACL2O_API pacl2o_status pacl2o_spec_to_json(const pacl2o_spec* spec, char** out);

/* --- pipeline stages, all writing into out_dir --- */

PACL2O_API pacl2o_status pacl2o_gen_problems(const pacl2o_spec* spec, const char* out_dir);
PACL2O_API pacl2o_status pacl2o_train(const pacl2o_spec* spec, const char* out_dir,
                                      pacl2o_log_fn log, void* user);
PACL2O_API pacl2o_status pacl2o_certify(const pacl2o_spec* spec, const char* out_dir,
                                        pacl2o_log_fn log, void* user);
PACL2O_API pacl2o_status pacl2o_evaluate(const pacl2o_spec* spec, const char* out_dir,
                                         pacl2o_log_fn log, void* user);
/* All four stages followed by the report. */
PACL2O_API pacl2o_status pacl2o_run(const pacl2o_spec* spec, const char* out_dir,
                                    pacl2o_log_fn log, void* user);

/* Writes summary.json and summary.txt into run_dir. Either out pointer may
 * be NULL. */
PACL2O_API pacl2o_status pacl2o_report(const char* run_dir, char** text, char** json);

/* --- analytic counterexamples --- */

/* Table over both examples. T1 / T2 of 0 select the defaults. */
PACL2O_API pacl2o_status pacl2o_counterexamples(size_t T1, size_t T2, char** table);

/* --- numeric primitives --- */

PACL2O_API pacl2o_status pacl2o_phi_inverse(double a, double p, double* out);
PACL2O_API pacl2o_status pacl2o_kl_discrete(const double* rho, const double* prior, size_t n,
                                            double* out);
PACL2O_API pacl2o_status pacl2o_gibbs_posterior(const double* prior, const double* risks,
                                                size_t n, double lambda, double* out);
PACL2O_API pacl2o_status pacl2o_certificate_bound(double posterior_risk, double kl,
                                                  double lambda, double eps, size_t N,
                                                  double* out);

#ifdef __cplusplus
}
#endif

#endif /* PACL2O_PACL2O_H_ */
