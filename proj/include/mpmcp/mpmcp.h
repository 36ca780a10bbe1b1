/*
 * Copyright 2026 The mpmcp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to mpmcp: multiple contrast tests across overlapping patient
 * populations (full population, subgroup, complement), their operating
 * characteristics by simulation, and sample-size search.
 *
 * Conventions
 *   - Every fallible function returns an mpmcp_status. On failure the output
 *     arguments are left untouched and mpmcp_last_error() describes the
 *     problem (the message is per thread and valid until the next call that
 *     fails on the same thread).
 *   - Objects are opaque handles created by mpmcp_*_create / load / analyze
 *     style functions and released with the matching *_free function.
 *     Passing NULL to a *_free function is a no-op.
 *   - Strings returned by accessors are owned by the handle they came from.
 *   - Population labels are plain strings. A union of populations is written
 *     with '+', e.g. "S+C".
 */

#ifndef MPMCP_MPMCP_H_
#define MPMCP_MPMCP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(MPMCP_BUILDING)
#define MPMCP_API __declspec(dllexport)
#else
#define MPMCP_API __declspec(dllimport)
#endif
#else
#define MPMCP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mpmcp_status {
  MPMCP_OK = 0,
  MPMCP_INVALID_ARGUMENT = 1,
  MPMCP_DEGENERATE_DATA = 2,
  MPMCP_IO = 3,
  MPMCP_UNREACHABLE = 4,
  MPMCP_NUMERICAL = 5,
  MPMCP_INTERNAL = 6
} mpmcp_status;

typedef struct mpmcp_design mpmcp_design;
typedef struct mpmcp_data mpmcp_data;
typedef struct mpmcp_report mpmcp_report;
typedef struct mpmcp_summary mpmcp_summary;

MPMCP_API const char* mpmcp_version(void);
MPMCP_API const char* mpmcp_last_error(void);
MPMCP_API const char* mpmcp_status_name(mpmcp_status status);

/* ---- Candidate shapes -------------------------------------------------- */

typedef enum mpmcp_shape_kind {
  MPMCP_SHAPE_CONSTANT = 0,
  MPMCP_SHAPE_EMAX = 1,
  MPMCP_SHAPE_LINEAR = 2,
  MPMCP_SHAPE_EXPONENTIAL = 3,
  MPMCP_SHAPE_LOGISTIC = 4,
  MPMCP_SHAPE_QUADRATIC = 5
} mpmcp_shape_kind;

/* Guesstimates; NaN selects the catalogue default. */
typedef struct mpmcp_shape {
  int kind; /* mpmcp_shape_kind */
  double param1;
  double param2;
} mpmcp_shape;

/* Fills `out` with the catalogue shape named `name` ("emax", "linear", ...). */
MPMCP_API mpmcp_status mpmcp_shape_named(const char* name, mpmcp_shape* out);
/* Checks the guesstimates against the shape's parameter constraints. */
MPMCP_API mpmcp_status mpmcp_shape_validate(const mpmcp_shape* shape);

/* ---- Designs ----------------------------------------------------------- */

/*
 * General design. `sizes` holds num_variance * num_doses counts, row-major by
 * variance population. Tested population i is the union given by
 * tested_members[i], e.g. "S+C".
 */
MPMCP_API mpmcp_status mpmcp_design_create(const double* doses, size_t num_doses, const char* const* variance_labels,
                                           const int64_t* sizes, size_t num_variance,
                                           const char* const* tested_labels, const char* const* tested_members,
                                           size_t num_tested, mpmcp_design** out);

/* Full population F, subgroup S and complement C (tested: F, S, C). */
MPMCP_API mpmcp_status mpmcp_design_subgroup(const double* doses, size_t num_doses, const int64_t* subgroup_sizes,
                                             const int64_t* complement_sizes, mpmcp_design** out);

/* Same with n per dose and prevalence; prevalence * n must be an integer. */
MPMCP_API mpmcp_status mpmcp_design_balanced(const double* doses, size_t num_doses, int64_t n_per_dose,
                                             double prevalence, mpmcp_design** out);

/* Residual degrees of freedom of a population: its size minus the number of
 * doses. */
MPMCP_API mpmcp_status mpmcp_design_df(const mpmcp_design* design, const char* population, int64_t* out);
MPMCP_API void mpmcp_design_free(mpmcp_design* design);

/* ---- Trial data -------------------------------------------------------- */

/*
 * Reads a CSV with columns dose (or dose_idx, 1-based), population and
 * response. Population labels must be among `populations`; when `doses` is
 * non-NULL, dose values must be among them.
 */
MPMCP_API mpmcp_status mpmcp_data_load_csv(const char* path, const double* doses, size_t num_doses,
                                           const char* const* populations, size_t num_populations,
                                           mpmcp_data** out);
MPMCP_API mpmcp_status mpmcp_data_write_csv(const mpmcp_data* data, const char* path);
MPMCP_API size_t mpmcp_data_num_records(const mpmcp_data* data);
MPMCP_API void mpmcp_data_free(mpmcp_data* data);

/* Design whose cell counts are taken from the data; the data's populations
 * form the variance family. */
MPMCP_API mpmcp_status mpmcp_design_from_data(const mpmcp_data* data, const char* const* tested_labels,
                                              const char* const* tested_members, size_t num_tested,
                                              mpmcp_design** out);

/* ---- Testing ----------------------------------------------------------- */

typedef enum mpmcp_method_name {
  MPMCP_METHOD_SP = 0,
  MPMCP_METHOD_POOLED = 1,
  MPMCP_METHOD_MINDF = 2,
  MPMCP_METHOD_MULTDF = 3,
  MPMCP_METHOD_NORMAL = 4
} mpmcp_method_name;

typedef struct mpmcp_method {
  int name;             /* mpmcp_method_name */
  const char* strategy; /* tested populations, e.g. "F+S+C" */
  double alpha;         /* one-sided level, e.g. 0.05 */
  double qmc_tol;       /* <= 0 selects the default 1e-4 */
  uint64_t qmc_seed;
} mpmcp_method;

MPMCP_API mpmcp_status mpmcp_method_validate(const mpmcp_method* method);

typedef struct mpmcp_hypothesis {
  const char* population;
  const char* shape;
  double statistic;
  double pvalue;
  double pvalue_se;
  double df; /* infinity for MP-Normal */
  int reject;
} mpmcp_hypothesis;

/* `shapes` may be NULL (num_shapes 0) for the five default candidates. */
MPMCP_API mpmcp_status mpmcp_analyze(const mpmcp_data* data, const mpmcp_design* design, const mpmcp_shape* shapes,
                                     size_t num_shapes, const mpmcp_method* method, mpmcp_report** out);
MPMCP_API size_t mpmcp_report_num_hypotheses(const mpmcp_report* report);
MPMCP_API mpmcp_status mpmcp_report_hypothesis(const mpmcp_report* report, size_t index, mpmcp_hypothesis* out);
MPMCP_API int mpmcp_report_global_reject(const mpmcp_report* report);
MPMCP_API mpmcp_status mpmcp_report_population_reject(const mpmcp_report* report, const char* population, int* out);
/* Shape with the smallest significant p-value; *out is NULL when nothing is
 * rejected. */
MPMCP_API mpmcp_status mpmcp_report_selected_model(const mpmcp_report* report, const char** out);
MPMCP_API mpmcp_status mpmcp_report_write_csv(const mpmcp_report* report, const char* path);
MPMCP_API mpmcp_status mpmcp_report_write_text(const mpmcp_report* report, const char* path);
MPMCP_API mpmcp_status mpmcp_report_write_correlation(const mpmcp_report* report, const char* path);
MPMCP_API void mpmcp_report_free(mpmcp_report* report);

/* ---- Simulation -------------------------------------------------------- */

typedef enum mpmcp_scenario_kind {
  MPMCP_SCENARIO_SAME = 0,
  MPMCP_SCENARIO_DOUBLE = 1,
  MPMCP_SCENARIO_ONLY = 2
} mpmcp_scenario_kind;

typedef enum mpmcp_rounding {
  MPMCP_ROUNDING_EXACT = 0,  /* prevalence * group_size must be an integer */
  MPMCP_ROUNDING_NEAREST = 1 /* round the subgroup size, ties to even */
} mpmcp_rounding;

typedef struct mpmcp_scenario {
  mpmcp_shape shape; /* data-generating shape */
  int scenario;      /* mpmcp_scenario_kind */
  double prevalence;
  double sigma_s;
  double sigma_c;
  int64_t group_size;
  double delta;         /* top-dose effect */
  const double* doses;  /* NULL selects 0, 0.05, 0.2, 0.6, 1 */
  size_t num_doses;
  int rounding; /* mpmcp_rounding */
} mpmcp_scenario;

/* Default scenario: emax, same, prevalence 0.5,
 * sigma 1.478, 75 per dose, delta 0.6. */
MPMCP_API void mpmcp_scenario_init(mpmcp_scenario* scenario);
/* Checks ranges and, for exact rounding, integrality of the subgroup size. */
MPMCP_API mpmcp_status mpmcp_scenario_validate(const mpmcp_scenario* scenario);

MPMCP_API mpmcp_status mpmcp_generate_trial(const mpmcp_scenario* scenario, uint64_t seed, mpmcp_data** out);

typedef struct mpmcp_summary_row {
  const char* method;
  const char* strategy;
  const char* scenario;
  double prevalence;
  const char* shape;
  const char* hypothesis;
  double estimate;
  double se;
  int64_t nsim;
  uint64_t seed;
} mpmcp_summary_row;

/* Analyses use the candidate `shapes` (NULL / 0 for the five defaults).
 * `threads` 0 uses all cores; results do not depend on it. */
MPMCP_API mpmcp_status mpmcp_simulate(const mpmcp_scenario* scenario, const mpmcp_shape* shapes, size_t num_shapes,
                                      const mpmcp_method* methods, size_t num_methods, int64_t nsim, uint64_t seed,
                                      unsigned threads, mpmcp_summary** out);
MPMCP_API size_t mpmcp_summary_num_rows(const mpmcp_summary* summary);
MPMCP_API mpmcp_status mpmcp_summary_row_at(const mpmcp_summary* summary, size_t index, mpmcp_summary_row* out);
/* method_tag is e.g. "SP" or "MP-Pooled(F+S)"; hypothesis is "global", a
 * population label, "select:<shape>" or "failures". */
MPMCP_API mpmcp_status mpmcp_summary_estimate(const mpmcp_summary* summary, const char* method_tag,
                                              const char* hypothesis, double* estimate, double* se);
/* Appends when `append` is non-zero (no header is written then). */
MPMCP_API mpmcp_status mpmcp_summary_write_csv(const mpmcp_summary* summary, const char* path, int append);
MPMCP_API void mpmcp_summary_free(mpmcp_summary* summary);

/* ---- Sample size ------------------------------------------------------- */

typedef struct mpmcp_samplesize_options {
  double target_power;
  int64_t nsim;
  uint64_t seed;
  int64_t n_min;
  int64_t n_max;
  unsigned threads;
} mpmcp_samplesize_options;

typedef struct mpmcp_samplesize_result {
  int64_t n;
  double power;
  double se;
  int monotone;  /* power(n) >= power(n/2) - 3 SE */
  int64_t half_n; /* 0 when the check was not applicable */
  double half_power;
  int64_t evaluations;
} mpmcp_samplesize_result;

/* Smallest feasible n per dose in [n_min, n_max] whose simulated global
 * power reaches target_power (within one SE). MPMCP_UNREACHABLE when even
 * n_max falls short. */
MPMCP_API mpmcp_status mpmcp_required_group_size(const mpmcp_scenario* scenario, const mpmcp_shape* shapes,
                                                 size_t num_shapes, const mpmcp_method* method,
                                                 const mpmcp_samplesize_options* options,
                                                 mpmcp_samplesize_result* out);

/* ---- Probability engine ------------------------------------------------ */

typedef enum mpmcp_family { MPMCP_FAMILY_NORMAL = 0, MPMCP_FAMILY_T = 1 } mpmcp_family;

/* P(lower <= X <= upper) for X ~ N(0, R) or t_df(0, R); R is q x q
 * row-major; bounds may be +-INFINITY. */
MPMCP_API mpmcp_status mpmcp_mv_rect_prob(const double* corr, size_t q, int family, double df, const double* lower,
                                          const double* upper, double tol, uint64_t seed, double* value,
                                          double* error);

/* c with P(max_j X_j <= c) = 1 - alpha. */
MPMCP_API mpmcp_status mpmcp_equicoordinate_quantile(const double* corr, size_t q, int family, double df,
                                                     double alpha, uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MPMCP_MPMCP_H_ */
