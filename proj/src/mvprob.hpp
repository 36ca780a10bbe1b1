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

// Rectangle probabilities of centred multivariate normal and t laws.
//
// The integral over the rectangle is rewritten by sequential conditioning
// (Genz) into an integral over the unit cube and estimated with a randomly
// shifted Richtmyer lattice (z_j = frac(sqrt(p_j))) under the baker's
// transform. The spread across independent shifts gives the standard error.
// Variables are reordered so the most constrained comes first, and a pivoted
// Cholesky factor with pivot tolerance 1e-10 handles singular correlation
// matrices: rows found to be linear combinations of earlier ones become
// extra interval constraints on the last variable they depend on. The t law
// is a scale mixture of normals; its scale takes the first cube coordinate.

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpmcp {

enum class Family { normal, t };

/// Null distribution of the stacked contrast statistics.
struct JointNullModel {
  Eigen::MatrixXd corr;
  Family family = Family::normal;
  /// Shared degrees of freedom (t family without per-row df).
  double df = std::numeric_limits<double>::infinity();
  /// Per-row degrees of freedom; when non-empty, row j's probabilities use
  /// row_df[j].
  std::vector<double> row_df;
  std::string method_tag;

  static JointNullModel normal(Eigen::MatrixXd corr);
  static JointNullModel t(Eigen::MatrixXd corr, double df);
  static JointNullModel multi_df(Eigen::MatrixXd corr, std::vector<double> row_df);

  std::size_t dim() const { return static_cast<std::size_t>(corr.rows()); }
  bool has_row_df() const { return !row_df.empty(); }
  /// Degrees of freedom used for probabilities attached to `row`
  /// (infinity for the normal family).
  double df_for_row(std::size_t row) const;
  void validate() const;
};

struct QmcOptions {
  /// Target standard error of a probability.
  double tol = 1e-4;
  /// Number of independent random shifts (at least 8).
  int shifts = 12;
  /// Cap on lattice points per shift.
  std::int64_t max_points = std::int64_t{1} << 22;
  std::uint64_t seed = 0x5EEDULL;
  /// Standard error targeted while root-finding equicoordinate quantiles.
  double quantile_tol = 5e-5;
};

struct ProbResult {
  double value = 0.0;
  double error = 0.0;  // standard error across shifts
  std::int64_t samples = 0;
  bool converged = true;  // false when the point cap stopped the run first
};

/// P(lower <= X <= upper) for X ~ N(0, corr) (df ignored) or t_df(0, corr).
/// Infinite bounds are allowed.
ProbResult mv_rect_prob(const Eigen::MatrixXd& corr, Family family, double df, std::span<const double> lower,
                        std::span<const double> upper, const QmcOptions& opts = {});

/// Same, under a model with a single df (throws for per-row df models).
ProbResult mv_rect_prob(const JointNullModel& model, std::span<const double> lower, std::span<const double> upper,
                        const QmcOptions& opts = {});

/// q with P(max_j X_j <= q) = 1 - alpha. For per-row df models `row` picks
/// the df (the population whose critical value is wanted).
double equicoordinate_quantile(const JointNullModel& model, double alpha, const QmcOptions& opts = {},
                               std::optional<std::size_t> row = std::nullopt);

/// 1 - P(max_j X_j <= observed) with the df attached to `row`.
ProbResult adjusted_pvalue(const JointNullModel& model, double observed, std::size_t row,
                           const QmcOptions& opts = {});

/// Whether adjusted_pvalue(model, observed, row) < alpha. Uses exact
/// univariate and Bonferroni bounds first and integrates only until the
/// answer is clear of the integration noise.
bool pvalue_below(const JointNullModel& model, double observed, std::size_t row, double alpha,
                  const QmcOptions& opts = {});

/// Whether the adjusted p-value of (observed_a, row_a) is smaller than that
/// of (observed_b, row_b), judged from one paired integration that stops once
/// the sign of the difference is clear (or its standard error reaches tol).
bool pvalue_less(const JointNullModel& model, double observed_a, std::size_t row_a, double observed_b,
                 std::size_t row_b, const QmcOptions& opts = {});

}  // namespace mpmcp
