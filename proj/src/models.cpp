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

#include "models.hpp"

#include <cmath>

#include "error.hpp"

namespace mpmcp {

namespace {

constexpr double kPlaceboResponse = 0.2;

struct CatalogueEntry {
  ShapeKind kind;
  std::string_view name;
  double param1;
  double param2;
};

// Quadratic curvature -1/1.171 puts the vertex of d + c d^2 at d = 0.5855.
constexpr CatalogueEntry kCatalogue[] = {
    {ShapeKind::constant, "constant", 0.0, 0.0},
    {ShapeKind::emax, "emax", 0.2, 0.0},
    {ShapeKind::linear, "linear", 0.0, 0.0},
    {ShapeKind::exponential, "exponential", 0.29, 0.0},
    {ShapeKind::logistic, "logistic", 0.4, 0.091},
    {ShapeKind::quadratic, "quadratic", -1.0 / 1.171, 0.0},
};

const CatalogueEntry& entry(ShapeKind kind) {
  for (const auto& e : kCatalogue)
    if (e.kind == kind) return e;
  fail(Errc::invalid_argument, "unknown shape kind");
}

}  // namespace

std::string_view to_string(ShapeKind kind) { return entry(kind).name; }

std::optional<ShapeKind> parse_shape_kind(std::string_view name) {
  for (const auto& e : kCatalogue)
    if (e.name == name) return e.kind;
  return std::nullopt;
}

CandidateShape CandidateShape::with_defaults(ShapeKind kind) {
  const auto& e = entry(kind);
  CandidateShape s;
  s.kind = kind;
  s.param1 = e.param1;
  s.param2 = e.param2;
  return s;
}

CandidateShape CandidateShape::named(std::string_view name) {
  auto kind = parse_shape_kind(name);
  if (!kind) fail(Errc::invalid_argument, "unknown shape '" + std::string(name) + "'");
  return with_defaults(*kind);
}

void CandidateShape::validate() const {
  switch (kind) {
    case ShapeKind::emax:
      require(param1 > 0.0, "emax ED50 guesstimate must be positive");
      break;
    case ShapeKind::exponential:
      require(param1 > 0.0, "exponential delta guesstimate must be positive");
      break;
    case ShapeKind::logistic:
      require(param2 > 0.0, "logistic delta guesstimate must be positive");
      break;
    case ShapeKind::quadratic:
      require(std::isfinite(param1), "quadratic curvature must be finite");
      break;
    case ShapeKind::constant:
    case ShapeKind::linear:
      break;
  }
}

std::vector<CandidateShape> default_candidates() {
  return {CandidateShape::with_defaults(ShapeKind::emax), CandidateShape::with_defaults(ShapeKind::linear),
          CandidateShape::with_defaults(ShapeKind::exponential), CandidateShape::with_defaults(ShapeKind::logistic),
          CandidateShape::with_defaults(ShapeKind::quadratic)};
}

double eval_standardized(const CandidateShape& shape, double d) {
  shape.validate();
  switch (shape.kind) {
    case ShapeKind::emax:
      return d / (shape.param1 + d);
    case ShapeKind::linear:
      return d;
    case ShapeKind::exponential:
      return std::expm1(d / shape.param1);
    case ShapeKind::logistic:
      return 1.0 / (1.0 + std::exp((shape.param1 - d) / shape.param2));
    case ShapeKind::quadratic:
      return d + shape.param1 * d * d;
    case ShapeKind::constant:
      break;
  }
  fail(Errc::invalid_argument, "the constant shape has no standardized model");
}

std::vector<double> standardized_mean_vector(const CandidateShape& shape, std::span<const double> doses) {
  std::vector<double> mu;
  mu.reserve(doses.size());
  for (double d : doses) mu.push_back(eval_standardized(shape, d));
  return mu;
}

double eval_full(const CandidateShape& shape, double d) {
  require(d >= 0.0, "dose must be nonnegative");
  if (shape.kind == ShapeKind::constant) return shape.full ? shape.full->intercept : kPlaceboResponse;
  if (!shape.full) fail(Errc::invalid_argument, "shape '" + shape.name() + "' has no full-model parameters");
  return shape.full->intercept + shape.full->slope * eval_standardized(shape, d);
}

FullParams calibrate_effect(const CandidateShape& shape, std::span<const double> doses, double target_delta) {
  require(!doses.empty(), "no doses to calibrate against");
  require(shape.kind != ShapeKind::constant, "the constant shape cannot be calibrated to an effect");
  const double range = eval_standardized(shape, doses.back()) - eval_standardized(shape, doses.front());
  require(range != 0.0, "standardized model of '" + shape.name() + "' is flat over the dose range");
  return {kPlaceboResponse, target_delta / range};
}

}  // namespace mpmcp
