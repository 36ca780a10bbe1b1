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

#include "contrasts.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace mpmcp {

ContrastVector optimal_contrast(std::span<const double> mu0, std::span<const std::int64_t> n) {
  const std::size_t k = mu0.size();
  require(k >= 2, "optimal contrast needs at least 2 dose groups");
  require(n.size() == k, "group sizes and mean vector differ in length");
  double total = 0.0;
  double weighted = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    require(n[i] > 0, "optimal contrast needs positive group sizes");
    require(std::isfinite(mu0[i]), "mean vector must be finite");
    total += static_cast<double>(n[i]);
    weighted += static_cast<double>(n[i]) * mu0[i];
    scale = std::max(scale, std::fabs(mu0[i]));
  }
  const double mbar = weighted / total;
  ContrastVector c;
  c.coef.resize(k);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    c.coef[i] = static_cast<double>(n[i]) * (mu0[i] - mbar);
    norm2 += c.coef[i] * c.coef[i];
  }
  const double norm = std::sqrt(norm2);
  if (!(norm > 1e-12 * std::max(scale, 1e-300) * total))
    fail(Errc::invalid_argument, "candidate mean vector is constant; no contrast exists");
  double dot = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    c.coef[i] /= norm;
    dot += c.coef[i] * mu0[i];
  }
  if (dot < 0.0)
    for (auto& x : c.coef) x = -x;
  // Re-centre so the sum-zero invariant holds to rounding.
  double sum = 0.0;
  for (double x : c.coef) sum += x;
  if (std::fabs(sum) > 0.0) {
    for (auto& x : c.coef) x -= sum / static_cast<double>(k);
    double n2 = 0.0;
    for (double x : c.coef) n2 += x * x;
    for (auto& x : c.coef) x /= std::sqrt(n2);
  }
  return c;
}

std::vector<ContrastVector> contrast_set(std::span<const CandidateShape> shapes, std::span<const double> doses,
                                         std::span<const std::int64_t> n, const Label& population) {
  std::vector<ContrastVector> out;
  for (const auto& s : shapes) {
    if (s.kind == ShapeKind::constant) continue;
    auto c = optimal_contrast(standardized_mean_vector(s, doses), n);
    c.shape = s.name();
    c.population = population;
    out.push_back(std::move(c));
  }
  require(!out.empty(), "candidate set contains no non-constant shape");
  return out;
}

std::vector<PopulationContrasts> population_contrasts(
    const DoseDesign& design, std::span<const CandidateShape> shapes,
    const std::vector<std::pair<Label, std::vector<CandidateShape>>>& per_population) {
  std::vector<PopulationContrasts> out;
  for (const auto& t : design.tested()) {
    std::span<const CandidateShape> set = shapes;
    for (const auto& [label, own] : per_population)
      if (label == t.label) set = own;
    const auto n = design.group_sizes(t.label);
    out.push_back({t.label, contrast_set(set, design.doses(), n, t.label)});
  }
  return out;
}

}  // namespace mpmcp
