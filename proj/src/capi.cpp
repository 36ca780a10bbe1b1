// Copyright 2026 The mpmcp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpmcp/mpmcp.h"

#include <cmath>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include "design.hpp"
#include "error.hpp"
#include "models.hpp"
#include "mvprob.hpp"
#include "samplesize.hpp"
#include "simulate.hpp"
#include "testing.hpp"

#ifndef MPMCP_VERSION_STRING
#define MPMCP_VERSION_STRING "0.0.0"
#endif

struct mpmcp_design {
  mpmcp::DoseDesign value;
};

struct mpmcp_data {
  mpmcp::TrialData value;
};

struct mpmcp_report {
  mpmcp::TestReport value;
  std::optional<std::string> selected;
};

struct mpmcp_summary {
  mpmcp::SimulationSummary value;
};

namespace {

thread_local std::string last_error;

mpmcp_status to_status(mpmcp::Errc code) {
  switch (code) {
    case mpmcp::Errc::invalid_argument: return MPMCP_INVALID_ARGUMENT;
    case mpmcp::Errc::degenerate_data: return MPMCP_DEGENERATE_DATA;
    case mpmcp::Errc::io: return MPMCP_IO;
    case mpmcp::Errc::unreachable: return MPMCP_UNREACHABLE;
    case mpmcp::Errc::numerical: return MPMCP_NUMERICAL;
  }
  return MPMCP_INTERNAL;
}

template <class F>
mpmcp_status guarded(F&& body) {
  try {
    body();
    return MPMCP_OK;
  } catch (const mpmcp::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MPMCP_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MPMCP_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return MPMCP_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) mpmcp::fail(mpmcp::Errc::invalid_argument, std::string(what) + " must not be NULL");
}

std::vector<std::string> split_plus(const char* text) {
  need(text, "population list");
  std::vector<std::string> out;
  std::string cur;
  for (const char* c = text; *c; ++c) {
    if (*c == '+') {
      out.push_back(cur);
      cur.clear();
    } else if (*c != ' ') {
      cur += *c;
    }
  }
  out.push_back(cur);
  for (const auto& s : out) mpmcp::require(!s.empty(), std::string("empty population label in '") + text + "'");
  return out;
}

std::vector<mpmcp::TestedPopulation> tested_from(const char* const* labels, const char* const* members, size_t n) {
  std::vector<mpmcp::TestedPopulation> out;
  for (size_t i = 0; i < n; ++i) {
    need(labels[i], "tested label");
    out.push_back({labels[i], split_plus(members[i])});
  }
  return out;
}

mpmcp::CandidateShape to_shape(const mpmcp_shape& s) {
  if (s.kind < MPMCP_SHAPE_CONSTANT || s.kind > MPMCP_SHAPE_QUADRATIC)
    mpmcp::fail(mpmcp::Errc::invalid_argument, "unknown shape kind " + std::to_string(s.kind));
  auto shape = mpmcp::CandidateShape::with_defaults(static_cast<mpmcp::ShapeKind>(s.kind));
  if (!std::isnan(s.param1)) shape.param1 = s.param1;
  if (!std::isnan(s.param2)) shape.param2 = s.param2;
  shape.validate();
  return shape;
}

std::vector<mpmcp::CandidateShape> to_candidates(const mpmcp_shape* shapes, size_t n) {
  if (n == 0) return mpmcp::default_candidates();
  need(shapes, "shapes");
  std::vector<mpmcp::CandidateShape> out;
  for (size_t i = 0; i < n; ++i) out.push_back(to_shape(shapes[i]));
  return out;
}

mpmcp::MethodSpec to_method(const mpmcp_method* m) {
  need(m, "method");
  if (m->name < MPMCP_METHOD_SP || m->name > MPMCP_METHOD_NORMAL)
    mpmcp::fail(mpmcp::Errc::invalid_argument, "unknown method " + std::to_string(m->name));
  mpmcp::MethodSpec spec;
  spec.name = static_cast<mpmcp::MethodName>(m->name);
  spec.strategy = split_plus(m->strategy);
  spec.alpha = m->alpha;
  if (m->qmc_tol > 0.0) spec.qmc.tol = m->qmc_tol;
  spec.qmc.seed = m->qmc_seed;
  spec.validate();
  return spec;
}

// With sized = false the group size is left to the caller (sample-size
// search), so only the remaining fields are validated.
mpmcp::ScenarioSpec to_scenario(const mpmcp_scenario* s, bool sized = true) {
  need(s, "scenario");
  mpmcp::ScenarioSpec out;
  out.shape = to_shape(s->shape);
  if (s->scenario < MPMCP_SCENARIO_SAME || s->scenario > MPMCP_SCENARIO_ONLY)
    mpmcp::fail(mpmcp::Errc::invalid_argument, "unknown scenario " + std::to_string(s->scenario));
  out.scenario = static_cast<mpmcp::ScenarioKind>(s->scenario);
  out.prevalence = s->prevalence;
  out.sigma_s = s->sigma_s;
  out.sigma_c = s->sigma_c;
  out.group_size = s->group_size;
  out.delta = s->delta;
  if (s->doses) out.doses.assign(s->doses, s->doses + s->num_doses);
  out.rounding = s->rounding == MPMCP_ROUNDING_NEAREST ? mpmcp::SubgroupRounding::nearest
                                                       : mpmcp::SubgroupRounding::exact;
  if (sized) {
    out.validate();
  } else {
    auto probe = out;
    probe.group_size = 1000000;
    probe.rounding = mpmcp::SubgroupRounding::nearest;
    probe.validate();
  }
  return out;
}

Eigen::MatrixXd to_matrix(const double* corr, size_t q) {
  need(corr, "correlation matrix");
  mpmcp::require(q >= 1, "dimension must be positive");
  Eigen::MatrixXd r(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  for (size_t i = 0; i < q; ++i)
    for (size_t j = 0; j < q; ++j) r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = corr[i * q + j];
  return r;
}

mpmcp::JointNullModel to_model(const double* corr, size_t q, int family, double df) {
  auto r = to_matrix(corr, q);
  if (family == MPMCP_FAMILY_NORMAL) return mpmcp::JointNullModel::normal(std::move(r));
  if (family == MPMCP_FAMILY_T) return mpmcp::JointNullModel::t(std::move(r), df);
  mpmcp::fail(mpmcp::Errc::invalid_argument, "unknown family " + std::to_string(family));
}

std::ofstream open_out(const char* path, bool append = false) {
  need(path, "path");
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) mpmcp::fail(mpmcp::Errc::io, std::string("cannot open '") + path + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const char* path) {
  out.close();
  if (!out) mpmcp::fail(mpmcp::Errc::io, std::string("error writing '") + path + "'");
}

}  // namespace

extern "C" {

const char* mpmcp_version(void) { return MPMCP_VERSION_STRING; }

const char* mpmcp_last_error(void) { return last_error.c_str(); }

const char* mpmcp_status_name(mpmcp_status status) {
  switch (status) {
    case MPMCP_OK: return "ok";
    case MPMCP_INVALID_ARGUMENT: return "invalid argument";
    case MPMCP_DEGENERATE_DATA: return "degenerate data";
    case MPMCP_IO: return "i/o error";
    case MPMCP_UNREACHABLE: return "unreachable";
    case MPMCP_NUMERICAL: return "numerical error";
    case MPMCP_INTERNAL: return "internal error";
  }
  return "unknown status";
}

mpmcp_status mpmcp_shape_named(const char* name, mpmcp_shape* out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    const auto s = mpmcp::CandidateShape::named(name);
    *out = {static_cast<int>(s.kind), s.param1, s.param2};
  });
}

mpmcp_status mpmcp_shape_validate(const mpmcp_shape* shape) {
  return guarded([&] {
    need(shape, "shape");
    to_shape(*shape);
  });
}

mpmcp_status mpmcp_method_validate(const mpmcp_method* method) {
  return guarded([&] { to_method(method); });
}

mpmcp_status mpmcp_scenario_validate(const mpmcp_scenario* scenario) {
  return guarded([&] { to_scenario(scenario); });
}

mpmcp_status mpmcp_design_create(const double* doses, size_t num_doses, const char* const* variance_labels,
                                 const int64_t* sizes, size_t num_variance, const char* const* tested_labels,
                                 const char* const* tested_members, size_t num_tested, mpmcp_design** out) {
  return guarded([&] {
    need(doses, "doses");
    need(out, "out");
    need(variance_labels, "variance labels");
    need(sizes, "sizes");
    need(tested_labels, "tested labels");
    need(tested_members, "tested members");
    std::vector<mpmcp::VarianceGroup> v;
    for (size_t p = 0; p < num_variance; ++p) {
      need(variance_labels[p], "variance label");
      v.push_back({variance_labels[p], std::vector<std::int64_t>(sizes + p * num_doses, sizes + (p + 1) * num_doses)});
    }
    auto d = mpmcp::DoseDesign::from_counts(std::vector<double>(doses, doses + num_doses), std::move(v),
                                            tested_from(tested_labels, tested_members, num_tested));
    *out = new mpmcp_design{std::move(d)};
  });
}

mpmcp_status mpmcp_design_subgroup(const double* doses, size_t num_doses, const int64_t* subgroup_sizes,
                                   const int64_t* complement_sizes, mpmcp_design** out) {
  return guarded([&] {
    need(doses, "doses");
    need(subgroup_sizes, "subgroup sizes");
    need(complement_sizes, "complement sizes");
    need(out, "out");
    auto d = mpmcp::DoseDesign::subgroup(std::vector<double>(doses, doses + num_doses),
                                         std::vector<std::int64_t>(subgroup_sizes, subgroup_sizes + num_doses),
                                         std::vector<std::int64_t>(complement_sizes, complement_sizes + num_doses));
    *out = new mpmcp_design{std::move(d)};
  });
}

mpmcp_status mpmcp_design_balanced(const double* doses, size_t num_doses, int64_t n_per_dose, double prevalence,
                                   mpmcp_design** out) {
  return guarded([&] {
    need(doses, "doses");
    need(out, "out");
    auto d = mpmcp::DoseDesign::balanced_subgroup(std::vector<double>(doses, doses + num_doses), n_per_dose,
                                                  prevalence);
    *out = new mpmcp_design{std::move(d)};
  });
}

mpmcp_status mpmcp_design_df(const mpmcp_design* design, const char* population, int64_t* out) {
  return guarded([&] {
    need(design, "design");
    need(population, "population");
    need(out, "out");
    *out = design->value.df(population);
  });
}

void mpmcp_design_free(mpmcp_design* design) { delete design; }

mpmcp_status mpmcp_data_load_csv(const char* path, const double* doses, size_t num_doses,
                                 const char* const* populations, size_t num_populations, mpmcp_data** out) {
  return guarded([&] {
    need(path, "path");
    need(populations, "populations");
    need(out, "out");
    mpmcp::DataSchema schema;
    for (size_t i = 0; i < num_populations; ++i) {
      need(populations[i], "population label");
      schema.populations.emplace_back(populations[i]);
    }
    if (doses) schema.doses = std::vector<double>(doses, doses + num_doses);
    auto data = mpmcp::load_trial_data(std::string(path), schema);
    *out = new mpmcp_data{std::move(data)};
  });
}

mpmcp_status mpmcp_data_write_csv(const mpmcp_data* data, const char* path) {
  return guarded([&] {
    need(data, "data");
    auto out = open_out(path);
    mpmcp::write_trial_data(out, data->value);
    close_out(out, path);
  });
}

size_t mpmcp_data_num_records(const mpmcp_data* data) { return data ? data->value.records().size() : 0; }

void mpmcp_data_free(mpmcp_data* data) { delete data; }

mpmcp_status mpmcp_design_from_data(const mpmcp_data* data, const char* const* tested_labels,
                                    const char* const* tested_members, size_t num_tested, mpmcp_design** out) {
  return guarded([&] {
    need(data, "data");
    need(tested_labels, "tested labels");
    need(tested_members, "tested members");
    need(out, "out");
    auto d = mpmcp::design_from_data(data->value, tested_from(tested_labels, tested_members, num_tested));
    *out = new mpmcp_design{std::move(d)};
  });
}

mpmcp_status mpmcp_analyze(const mpmcp_data* data, const mpmcp_design* design, const mpmcp_shape* shapes,
                           size_t num_shapes, const mpmcp_method* method, mpmcp_report** out) {
  return guarded([&] {
    need(data, "data");
    need(design, "design");
    need(out, "out");
    auto report = mpmcp::run_mcp(data->value, design->value, to_candidates(shapes, num_shapes), to_method(method));
    auto selected = mpmcp::select_best_model(report);
    *out = new mpmcp_report{std::move(report), std::move(selected)};
  });
}

size_t mpmcp_report_num_hypotheses(const mpmcp_report* report) {
  return report ? report->value.hypotheses.size() : 0;
}

mpmcp_status mpmcp_report_hypothesis(const mpmcp_report* report, size_t index, mpmcp_hypothesis* out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    mpmcp::require(index < report->value.hypotheses.size(), "hypothesis index out of range");
    const auto& h = report->value.hypotheses[index];
    *out = {h.population.c_str(), h.shape.c_str(), h.statistic, h.pvalue, h.pvalue_error, h.df, h.reject ? 1 : 0};
  });
}

int mpmcp_report_global_reject(const mpmcp_report* report) { return report && report->value.global_reject ? 1 : 0; }

mpmcp_status mpmcp_report_population_reject(const mpmcp_report* report, const char* population, int* out) {
  return guarded([&] {
    need(report, "report");
    need(population, "population");
    need(out, "out");
    *out = report->value.population_rejected(population) ? 1 : 0;
  });
}

mpmcp_status mpmcp_report_selected_model(const mpmcp_report* report, const char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    *out = report->selected ? report->selected->c_str() : nullptr;
  });
}

mpmcp_status mpmcp_report_write_csv(const mpmcp_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    auto out = open_out(path);
    report->value.write_csv(out);
    close_out(out, path);
  });
}

mpmcp_status mpmcp_report_write_text(const mpmcp_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    auto out = open_out(path);
    report->value.write_text(out);
    close_out(out, path);
  });
}

mpmcp_status mpmcp_report_write_correlation(const mpmcp_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    auto out = open_out(path);
    report->value.correlation.write_csv(out);
    close_out(out, path);
  });
}

void mpmcp_report_free(mpmcp_report* report) { delete report; }

void mpmcp_scenario_init(mpmcp_scenario* scenario) {
  if (!scenario) return;
  const mpmcp::ScenarioSpec d;
  scenario->shape = {static_cast<int>(d.shape.kind), d.shape.param1, d.shape.param2};
  scenario->scenario = MPMCP_SCENARIO_SAME;
  scenario->prevalence = d.prevalence;
  scenario->sigma_s = d.sigma_s;
  scenario->sigma_c = d.sigma_c;
  scenario->group_size = d.group_size;
  scenario->delta = d.delta;
  scenario->doses = nullptr;
  scenario->num_doses = 0;
  scenario->rounding = MPMCP_ROUNDING_EXACT;
}

mpmcp_status mpmcp_generate_trial(const mpmcp_scenario* scenario, uint64_t seed, mpmcp_data** out) {
  return guarded([&] {
    need(out, "out");
    auto data = mpmcp::generate_trial(to_scenario(scenario), seed);
    *out = new mpmcp_data{std::move(data)};
  });
}

mpmcp_status mpmcp_simulate(const mpmcp_scenario* scenario, const mpmcp_shape* shapes, size_t num_shapes,
                            const mpmcp_method* methods, size_t num_methods, int64_t nsim, uint64_t seed,
                            unsigned threads, mpmcp_summary** out) {
  return guarded([&] {
    need(methods, "methods");
    need(out, "out");
    const auto s = to_scenario(scenario);
    std::vector<mpmcp::MethodSpec> specs;
    for (size_t i = 0; i < num_methods; ++i) specs.push_back(to_method(&methods[i]));
    auto summary = mpmcp::estimate_operating_characteristics(s, specs, nsim, seed, threads,
                                                              to_candidates(shapes, num_shapes));
    *out = new mpmcp_summary{std::move(summary)};
  });
}

size_t mpmcp_summary_num_rows(const mpmcp_summary* summary) { return summary ? summary->value.rows.size() : 0; }

mpmcp_status mpmcp_summary_row_at(const mpmcp_summary* summary, size_t index, mpmcp_summary_row* out) {
  return guarded([&] {
    need(summary, "summary");
    need(out, "out");
    mpmcp::require(index < summary->value.rows.size(), "row index out of range");
    const auto& r = summary->value.rows[index];
    *out = {r.method.c_str(), r.strategy.c_str(), r.scenario.c_str(), r.prevalence, r.shape.c_str(),
            r.hypothesis.c_str(), r.estimate, r.se, r.nsim, r.seed};
  });
}

mpmcp_status mpmcp_summary_estimate(const mpmcp_summary* summary, const char* method_tag, const char* hypothesis,
                                    double* estimate, double* se) {
  return guarded([&] {
    need(summary, "summary");
    need(method_tag, "method tag");
    need(hypothesis, "hypothesis");
    const auto& r = summary->value.find(method_tag, hypothesis);
    if (estimate) *estimate = r.estimate;
    if (se) *se = r.se;
  });
}

mpmcp_status mpmcp_summary_write_csv(const mpmcp_summary* summary, const char* path, int append) {
  return guarded([&] {
    need(summary, "summary");
    auto out = open_out(path, append != 0);
    summary->value.write_csv(out, append == 0);
    close_out(out, path);
  });
}

void mpmcp_summary_free(mpmcp_summary* summary) { delete summary; }

mpmcp_status mpmcp_required_group_size(const mpmcp_scenario* scenario, const mpmcp_shape* shapes, size_t num_shapes,
                                       const mpmcp_method* method,
                                       const mpmcp_samplesize_options* options, mpmcp_samplesize_result* out) {
  return guarded([&] {
    need(options, "options");
    need(out, "out");
    mpmcp::SampleSizeOptions o;
    o.target_power = options->target_power;
    o.nsim = options->nsim;
    o.seed = options->seed;
    o.n_min = options->n_min;
    o.n_max = options->n_max;
    o.threads = options->threads;
    const auto r = mpmcp::required_group_size(to_scenario(scenario, false), to_method(method), o,
                                                to_candidates(shapes, num_shapes));
    *out = {r.n,
            r.power,
            r.se,
            r.monotone ? 1 : 0,
            r.half ? r.half->n : 0,
            r.half ? r.half->power : 0.0,
            static_cast<int64_t>(r.evaluations.size())};
  });
}

mpmcp_status mpmcp_mv_rect_prob(const double* corr, size_t q, int family, double df, const double* lower,
                                const double* upper, double tol, uint64_t seed, double* value, double* error) {
  return guarded([&] {
    need(lower, "lower");
    need(upper, "upper");
    need(value, "value");
    const auto model = to_model(corr, q, family, df);
    mpmcp::QmcOptions opts;
    if (tol > 0.0) opts.tol = tol;
    opts.seed = seed;
    const auto r = mpmcp::mv_rect_prob(model, std::span<const double>(lower, q), std::span<const double>(upper, q),
                                       opts);
    *value = r.value;
    if (error) *error = r.error;
  });
}

mpmcp_status mpmcp_equicoordinate_quantile(const double* corr, size_t q, int family, double df, double alpha,
                                           uint64_t seed, double* out) {
  return guarded([&] {
    need(out, "out");
    const auto model = to_model(corr, q, family, df);
    mpmcp::QmcOptions opts;
    opts.seed = seed;
    *out = mpmcp::equicoordinate_quantile(model, alpha, opts);
  });
}

}  // extern "C"
