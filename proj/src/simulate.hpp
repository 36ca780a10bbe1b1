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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "design.hpp"
#include "models.hpp"
#include "testing.hpp"

namespace mpmcp {

/// How the treatment effect differs between subgroup S and complement C.
enum class ScenarioKind {
  same,    // S and C share one slope; the top-dose effect in F is delta
  double_, // S has twice the slope of C; the top-dose effect in S is delta
  only     // C has no effect; the top-dose effect in S is delta
};

std::string_view to_string(ScenarioKind kind);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view text);

/// How the subgroup cell size gamma * n is made an integer.
enum class SubgroupRounding {
  exact,   // gamma * n must already be an integer
  nearest  // round to the nearest integer, ties to even
};

std::string_view to_string(SubgroupRounding r);
std::optional<SubgroupRounding> parse_subgroup_rounding(std::string_view text);

struct ScenarioSpec {
  CandidateShape shape = CandidateShape::with_defaults(ShapeKind::emax);
  ScenarioKind scenario = ScenarioKind::same;
  double prevalence = 0.5;
  double sigma_s = 1.478;
  double sigma_c = 1.478;
  std::int64_t group_size = 75;  // subjects per dose in F
  double delta = 0.6;
  std::vector<double> doses{0.0, 0.05, 0.2, 0.6, 1.0};
  SubgroupRounding rounding = SubgroupRounding::exact;

  void validate() const;
  /// Subgroup subjects per dose.
  std::int64_t subgroup_size() const;
  /// Balanced F/S/C design implied by the scenario.
  DoseDesign design() const;
  /// Mean response per dose in S and in C.
  std::vector<double> subgroup_means() const;
  std::vector<double> complement_means() const;
};

/// Subject-level trial with populations "S" and "C".
TrialData generate_trial(const ScenarioSpec& scenario, std::uint64_t seed);

/// Cell means and sums of squares drawn directly from their sampling
/// distributions (normal mean, scaled chi-square sum of squares), which is
/// equal in distribution to summarising a generate_trial draw.
CellTable sample_cells(const ScenarioSpec& scenario, std::uint64_t seed);

struct SummaryRow {
  std::string method;
  std::string strategy;
  std::string scenario;
  double prevalence = 0.0;
  std::string shape;
  std::string hypothesis;  // global, a population label, select:<shape> or failures
  double estimate = 0.0;
  double se = 0.0;
  std::int64_t nsim = 0;  // replicates behind the estimate
  std::uint64_t seed = 0;
  std::int64_t group_size = 0;
  double sigma_s = 0.0;
  double sigma_c = 0.0;
};

struct SimulationSummary {
  std::vector<SummaryRow> rows;

  /// Estimate for a method tag (e.g. "MP-Pooled(F+S)") and hypothesis.
  const SummaryRow& find(const std::string& method_tag, const std::string& hypothesis) const;
  void write_csv(std::ostream& out, bool header = true) const;
  static void write_csv_header(std::ostream& out);
};

/// Monte-Carlo rejection rates and model-selection frequencies. Replicate r
/// draws from a stream derived from (master_seed, r) only, so results do not
/// depend on `threads` (0 = hardware concurrency). Analyses that fail count
/// as non-rejections and are reported in the "failures" row.
SimulationSummary estimate_operating_characteristics(const ScenarioSpec& scenario,
                                                     std::span<const MethodSpec> methods, std::int64_t nsim,
                                                     std::uint64_t master_seed, unsigned threads = 0,
                                                     std::span<const CandidateShape> candidates = {});

}  // namespace mpmcp
