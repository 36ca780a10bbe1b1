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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpmcp {

enum class ShapeKind { constant, emax, linear, exponential, logistic, quadratic };

std::string_view to_string(ShapeKind kind);
std::optional<ShapeKind> parse_shape_kind(std::string_view name);

/// Location/scale of a full model: f(d) = intercept + slope * f_std(d).
struct FullParams {
  double intercept = 0.2;
  double slope = 0.0;
};

/// A candidate dose-response shape.
///
/// The guesstimates fix the curvature of the standardized model:
///   emax         d / (ed50 + d)                      param1 = ed50
///   linear       d
///   exponential  exp(d / delta) - 1                  param1 = delta
///   logistic     1 / (1 + exp((ed50 - d) / delta))   param1 = ed50, param2 = delta
///   quadratic    d + curvature * d^2                 param1 = curvature
/// The constant shape has no standardized form.
struct CandidateShape {
  ShapeKind kind = ShapeKind::linear;
  double param1 = 0.0;
  double param2 = 0.0;
  std::optional<FullParams> full;

  /// Shape with the catalogue's default guesstimates.
  static CandidateShape with_defaults(ShapeKind kind);

  /// Looks up a shape by catalogue name; throws on unknown names.
  static CandidateShape named(std::string_view name);

  std::string name() const { return std::string(to_string(kind)); }

  /// Throws if the guesstimates violate the shape's parameter constraints.
  void validate() const;
};

/// The five non-constant shapes with default guesstimates, in catalogue order.
std::vector<CandidateShape> default_candidates();

double eval_standardized(const CandidateShape& shape, double d);

std::vector<double> standardized_mean_vector(const CandidateShape& shape, std::span<const double> doses);

/// Evaluates the full model. The constant shape returns its intercept (0.2 by
/// default) at every dose.
double eval_full(const CandidateShape& shape, double d);

/// Slope giving f(d_max) - f(d_min) = target_delta with the guesstimates held
/// fixed; the intercept is the catalogue value 0.2.
FullParams calibrate_effect(const CandidateShape& shape, std::span<const double> doses, double target_delta);

}  // namespace mpmcp
