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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "design.hpp"
#include "models.hpp"

namespace mpmcp {

/// Sum-zero, unit-norm contrast coefficients for one candidate shape.
struct ContrastVector {
  std::vector<double> coef;
  std::string shape;
  Label population;
};

/// Contrasts tested in one population.
struct PopulationContrasts {
  Label population;
  std::vector<ContrastVector> contrasts;
};

/// Optimal contrast for mean profile `mu0` and group sizes `n`:
/// c_i proportional to n_i (mu0_i - weighted mean), scaled to unit norm and
/// oriented so that c'mu0 > 0.
ContrastVector optimal_contrast(std::span<const double> mu0, std::span<const std::int64_t> n);

/// One contrast per non-constant shape; constant shapes are skipped.
std::vector<ContrastVector> contrast_set(std::span<const CandidateShape> shapes, std::span<const double> doses,
                                         std::span<const std::int64_t> n, const Label& population = {});

/// Contrasts for every tested population of `design`, derived from that
/// population's own group sizes. `per_population` optionally overrides the
/// candidate set for individual populations.
std::vector<PopulationContrasts> population_contrasts(
    const DoseDesign& design, std::span<const CandidateShape> shapes,
    const std::vector<std::pair<Label, std::vector<CandidateShape>>>& per_population = {});

}  // namespace mpmcp
