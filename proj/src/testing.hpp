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

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "contrasts.hpp"
#include "correlation.hpp"
#include "design.hpp"
#include "models.hpp"
#include "mvprob.hpp"

namespace mpmcp {

enum class MethodName { sp, mp_pooled, mp_mindf, mp_multdf, mp_normal };

std::string_view to_string(MethodName name);
/// Accepts "SP", "MP-Pooled", "MP-MinDF", "MP-MultDF", "MP-Normal"
/// (case-insensitive; the "MP-" prefix is optional).
std::optional<MethodName> parse_method_name(std::string_view text);

struct MethodSpec {
  MethodName name = MethodName::sp;
  /// Tested populations U, e.g. {"F"}, {"F", "S"} or {"F", "S", "C"}.
  std::vector<Label> strategy{"F"};
  double alpha = 0.05;
  QmcOptions qmc;

  /// Uses population-specific variances and the plug-in correlation.
  bool heteroscedastic() const;
  /// Display tag such as "MP-Pooled(F+S)".
  std::string tag() const;
  std::string strategy_tag() const;
  void validate() const;
};

/// Pooled within-population variance of P: residuals around P's own cell
/// means, divided by n_P - k.
double pooled_variance_population(const CellTable& cells, const DoseDesign& design, const Label& population);
double pooled_variance_population(const TrialData& data, const DoseDesign& design, const Label& population);

/// Variance used for each population named by the method: the tested
/// populations and, for heteroscedastic methods, the members of V.
struct VarianceEstimates {
  std::vector<std::pair<Label, double>> values;

  double at(const Label& population) const;
};

/// Variance estimates for `method` on `design` restricted to the method's
/// strategy. SP: residual variance of its single full population. MP-Pooled:
/// one estimate pooled over doses and over V. Heteroscedastic methods: one
/// estimate per V member, and for a union P the weighted average
/// (1/n_P) sum_{P* in P} n_{P*} sigma^2_{P*}.
VarianceEstimates variance_estimates(const CellTable& cells, const DoseDesign& design, const MethodSpec& method);
VarianceEstimates variance_estimates(const TrialData& data, const DoseDesign& design, const MethodSpec& method);

/// Contrast statistics stacked in the order of `contrasts`.
std::vector<double> test_statistics(const CellTable& cells, const DoseDesign& design,
                                    std::span<const PopulationContrasts> contrasts,
                                    const VarianceEstimates& variances);
std::vector<double> test_statistics(const TrialData& data, const DoseDesign& design,
                                    std::span<const PopulationContrasts> contrasts,
                                    const VarianceEstimates& variances);

struct HypothesisResult {
  Label population;
  std::string shape;
  double statistic = 0.0;
  double pvalue = 1.0;
  double pvalue_error = 0.0;
  double df = 0.0;  // infinity for MP-Normal
  bool reject = false;
};

struct TestReport {
  std::string method;  // tag, e.g. "MP-MultDF(F+S+C)"
  double alpha = 0.05;
  std::vector<HypothesisResult> hypotheses;
  std::vector<std::pair<Label, bool>> population_reject;
  bool global_reject = false;
  VarianceEstimates variances;
  std::vector<std::pair<Label, double>> df;
  CorrelationMatrix correlation;

  bool population_rejected(const Label& population) const;
  void write_csv(std::ostream& out) const;
  void write_text(std::ostream& out) const;
};

/// Full analysis: contrasts per tested population, correlation, joint null
/// model, adjusted p-values and decisions.
TestReport run_mcp(const TrialData& data, const DoseDesign& design, std::span<const CandidateShape> shapes,
                   const MethodSpec& method);
TestReport run_mcp(const CellTable& cells, const DoseDesign& design, std::span<const CandidateShape> shapes,
                   const MethodSpec& method);

/// Shape with the smallest adjusted p-value among rejected hypotheses across
/// all populations; none when nothing is rejected.
std::optional<std::string> select_best_model(const TestReport& report);

/// Decisions for one simulated trial.
struct TrialDecision {
  bool global = false;
  std::vector<bool> population;  // in strategy order
  std::optional<std::size_t> selected;  // index into the non-constant shapes
};

/// Analysis specialised for repeated trials on one design: contrasts, the
/// homoscedastic correlation and (for SP and MP-Pooled) the critical value
/// are computed once. Heteroscedastic methods decide each hypothesis with
/// exact univariate and Bonferroni bounds and integrate only when those are
/// inconclusive.
class PreparedAnalysis {
 public:
  PreparedAnalysis(const DoseDesign& design, std::span<const CandidateShape> shapes, const MethodSpec& method);

  TrialDecision decide(const CellTable& cells, std::uint64_t qmc_seed) const;

  const DoseDesign& design() const { return design_; }
  const MethodSpec& method() const { return method_; }
  /// Non-constant shapes in contrast order.
  const std::vector<std::string>& shape_names() const { return shape_names_; }
  /// Critical value shared by all rows (SP and MP-Pooled only).
  std::optional<double> critical_value() const { return critical_; }

 private:
  DoseDesign design_;
  MethodSpec method_;
  std::vector<PopulationContrasts> contrasts_;
  std::vector<std::string> shape_names_;
  std::vector<std::size_t> row_pop_;
  std::vector<std::size_t> row_shape_;
  CorrelationMatrix homo_corr_;
  std::optional<double> critical_;
};

}  // namespace mpmcp
