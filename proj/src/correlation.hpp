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

#include <Eigen/Core>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "contrasts.hpp"
#include "design.hpp"

namespace mpmcp {

/// Identifies the contrast statistic behind one row of a correlation matrix.
struct RowKey {
  Label population;
  std::string shape;
};

/// Correlation matrix of the stacked contrast statistics, rows ordered
/// population-major in the order of the contrast sets.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(Eigen::MatrixXd values, std::vector<RowKey> rows);

  std::size_t dim() const { return rows_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<RowKey>& rows() const { return rows_; }

  double min_eigenvalue() const;

  void write_csv(std::ostream& out) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<RowKey> rows_;
};

/// Residual variance per member of the variance family V.
class VarianceSpec {
 public:
  /// One shared variance for every V population.
  static VarianceSpec homoscedastic(const DoseDesign& design, double variance);
  /// Explicit per-population variances, in any order; must cover V.
  static VarianceSpec per_population(const DoseDesign& design, const std::vector<std::pair<Label, double>>& values);

  /// Variances in the order of design.variance_groups().
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Homoscedastic correlation: entries depend only on the group sizes of the
/// populations and of their intersections.
CorrelationMatrix corr_homoscedastic(const DoseDesign& design, std::span<const PopulationContrasts> contrasts);

/// Heteroscedastic correlation with plug-in variances, for a candidate set
/// shared across populations.
CorrelationMatrix corr_heteroscedastic(const DoseDesign& design, std::span<const PopulationContrasts> contrasts,
                                       const VarianceSpec& variances);

/// General closed form for arbitrary overlapping populations, per-population
/// candidate sets and dose-dependent prevalence.
CorrelationMatrix corr_general(const DoseDesign& design, std::span<const PopulationContrasts> contrasts,
                               const VarianceSpec& variances);

}  // namespace mpmcp
