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
#include <optional>
#include <span>
#include <vector>

#include "simulate.hpp"
#include "testing.hpp"

namespace mpmcp {

struct SampleSizeOptions {
  double target_power = 0.8;
  std::int64_t nsim = 10000;
  std::uint64_t seed = 20240101;
  std::int64_t n_min = 4;
  std::int64_t n_max = 2000;
  unsigned threads = 0;
};

struct PowerPoint {
  std::int64_t n = 0;
  double power = 0.0;
  double se = 0.0;
};

struct SampleSizeResult {
  std::int64_t n = 0;
  double power = 0.0;
  double se = 0.0;
  /// Every group size simulated, in evaluation order.
  std::vector<PowerPoint> evaluations;
  /// Power near n/2, used for the monotonicity check (absent when n/2 lies
  /// below the search range).
  std::optional<PowerPoint> half;
  /// power(n) >= power(n/2) - 3 combined standard errors.
  bool monotone = true;
};

/// Whether `n` subjects per dose give valid subgroup and complement cells
/// under the scenario's rounding rule.
bool feasible_group_size(const ScenarioSpec& scenario, std::int64_t n);

/// Smallest feasible group size in [n_min, n_max] whose simulated power to
/// reject the global null is at least target - 1 SE. Doubles from n_min until
/// the target is met, then bisects over feasible sizes. Every evaluation uses
/// the same seed (common random numbers). Throws Error(unreachable) when the
/// target is not met at the largest feasible size.
SampleSizeResult required_group_size(ScenarioSpec scenario, const MethodSpec& method,
                                     const SampleSizeOptions& options,
                                     std::span<const CandidateShape> candidates = {});

}  // namespace mpmcp
