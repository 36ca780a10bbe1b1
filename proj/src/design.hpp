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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mpmcp {

using Label = std::string;

/// A population in the variance family V together with its per-dose counts.
struct VarianceGroup {
  Label label;
  std::vector<std::int64_t> sizes;  // one entry per dose
};

/// A tested population (member of U) written as a union of V members.
struct TestedPopulation {
  Label label;
  std::vector<Label> members;
};

/// Trial design over k dose levels.
///
/// Two population families are kept apart: the variance family V partitions
/// the sample into disjoint groups that may have their own residual
/// variance, and the tested family U holds the (possibly overlapping)
/// populations in which contrast tests are performed. Every member of U is a
/// union of V members, so all counts of U populations and of their
/// intersections derive from the V counts.
class DoseDesign {
 public:
  /// General constructor. Throws Error(invalid_argument) if k < 2, doses are
  /// not strictly increasing, a count is negative, V labels repeat
  /// ("populations overlap"), or a U member names an unknown V label.
  static DoseDesign from_counts(std::vector<double> doses, std::vector<VarianceGroup> variance,
                                std::vector<TestedPopulation> tested);

  /// Builds a design from subject-level population sets, which is how
  /// overlapping populations are defined in the general case. `subject_dose`
  /// holds a 0-based dose index per subject; population sets hold subject ids
  /// (indices into subject_dose). V sets must be pairwise disjoint and cover
  /// every subject; each U set must be an exact union of V sets.
  static DoseDesign from_subjects(std::vector<double> doses, std::span<const std::size_t> subject_dose,
                                  const std::vector<std::pair<Label, std::vector<std::size_t>>>& variance_sets,
                                  const std::vector<std::pair<Label, std::vector<std::size_t>>>& tested_sets);

  /// Full population F, subgroup S and complement C with U = {F, S, C} and
  /// V = {S, C}.
  static DoseDesign subgroup(std::vector<double> doses, std::vector<std::int64_t> subgroup_sizes,
                             std::vector<std::int64_t> complement_sizes);

  /// Balanced F/S/C design with n per dose and prevalence gamma. Requires
  /// gamma * n to be an integer.
  static DoseDesign balanced_subgroup(std::vector<double> doses, std::int64_t n_per_dose, double prevalence);

  std::size_t num_doses() const { return doses_.size(); }
  const std::vector<double>& doses() const { return doses_; }

  const std::vector<VarianceGroup>& variance_groups() const { return variance_; }
  const std::vector<TestedPopulation>& tested() const { return tested_; }
  std::vector<Label> tested_labels() const;
  std::vector<Label> variance_labels() const;

  bool is_variance_population(const Label& p) const;
  bool is_tested_population(const Label& p) const;

  /// Indices into variance_groups() that make up `p`, sorted. `p` may be a
  /// label from U or from V.
  std::vector<std::size_t> members(const Label& p) const;

  std::int64_t group_size(const Label& p, std::size_t dose) const;
  std::vector<std::int64_t> group_sizes(const Label& p) const;
  std::int64_t total_size(const Label& p) const;

  /// Whole-sample size at dose i (sum over V).
  std::int64_t full_size(std::size_t dose) const;
  std::int64_t full_size() const;

  /// Size of the intersection of two populations at one dose.
  std::int64_t intersection_size(const Label& p, const Label& q, std::size_t dose) const;

  /// group_size(p, i) / full_size(i).
  double prevalence(const Label& p, std::size_t dose) const;

  /// nu(P) = sum_i n_i(P) - k.
  std::int64_t df(const Label& p) const;

  /// Sum of df over the variance family.
  std::int64_t pooled_df() const;

  /// Label of a tested population covering the whole sample, if any.
  std::optional<Label> full_population() const;

  /// Same design with U restricted to `labels` (in the given order).
  DoseDesign with_tested(const std::vector<Label>& labels) const;

 private:
  DoseDesign() = default;
  void validate() const;

  std::vector<double> doses_;
  std::vector<VarianceGroup> variance_;
  std::vector<TestedPopulation> tested_;
  std::vector<std::vector<std::size_t>> tested_members_;
};

/// Summary statistics of one (dose, V-population) cell.
struct CellStats {
  std::int64_t n = 0;
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations from the cell mean
};

/// Per-dose, per-V-population sufficient statistics. This is everything the
/// contrast tests need, so simulated trials can be drawn directly in this form.
class CellTable {
 public:
  CellTable(std::vector<double> doses, std::vector<Label> populations);

  std::size_t num_doses() const { return doses_.size(); }
  std::size_t num_populations() const { return labels_.size(); }
  const std::vector<double>& doses() const { return doses_; }
  const std::vector<Label>& populations() const { return labels_; }
  std::optional<std::size_t> population_index(const Label& p) const;

  CellStats& at(std::size_t dose, std::size_t pop) { return cells_[dose * labels_.size() + pop]; }
  const CellStats& at(std::size_t dose, std::size_t pop) const { return cells_[dose * labels_.size() + pop]; }

  /// Pools the cells of the given V indices at one dose (counts add, means
  /// are weighted, and the between-cell spread is folded into ss).
  CellStats pooled(std::size_t dose, std::span<const std::size_t> pops) const;

  bool has_empty_cells() const;

 private:
  std::vector<double> doses_;
  std::vector<Label> labels_;
  std::vector<CellStats> cells_;
};

struct Record {
  std::size_t dose = 0;        // 0-based dose index
  std::size_t population = 0;  // index into TrialData::populations()
  double response = 0.0;
};

/// Subject-level trial data plus derived cell statistics. Immutable after
/// construction.
class TrialData {
 public:
  TrialData(std::vector<double> doses, std::vector<Label> populations, std::vector<Record> records);

  const std::vector<double>& doses() const { return cells_.doses(); }
  const std::vector<Label>& populations() const { return cells_.populations(); }
  const std::vector<Record>& records() const { return records_; }
  const CellTable& cells() const { return cells_; }

  /// Throws if the data's doses, labels or cell counts disagree with `design`.
  void check_against(const DoseDesign& design) const;

 private:
  std::vector<Record> records_;
  CellTable cells_;
};

/// What a data file is validated against. When doses are absent they are
/// taken from the distinct values in the file.
struct DataSchema {
  std::vector<Label> populations;
  std::optional<std::vector<double>> doses;
};

/// Reads CSV with header `dose,response,population` (or `dose_idx` with a
/// 1-based index instead of `dose`; requires schema doses). Errors carry the
/// line number.
TrialData load_trial_data(std::istream& in, const DataSchema& schema);
TrialData load_trial_data(const std::string& path, const DataSchema& schema);

/// Writes `dose,response,population` with round-trip precision.
void write_trial_data(std::ostream& out, const TrialData& data);

/// Design whose V counts are the observed cell counts and whose U family is
/// given by `tested`.
DoseDesign design_from_data(const TrialData& data, std::vector<TestedPopulation> tested);

}  // namespace mpmcp
