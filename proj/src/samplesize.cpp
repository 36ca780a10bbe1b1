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

#include "samplesize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "error.hpp"

namespace mpmcp {

bool feasible_group_size(const ScenarioSpec& scenario, std::int64_t n) {
  if (n < 2) return false;
  auto s = scenario;
  s.group_size = n;
  try {
    s.subgroup_size();
  } catch (const Error&) {
    return false;
  }
  return true;
}

SampleSizeResult required_group_size(ScenarioSpec scenario, const MethodSpec& method,
                                     const SampleSizeOptions& options, std::span<const CandidateShape> candidates) {
  require(options.target_power >= 0.0 && options.target_power < 1.0, "target power must lie in [0, 1)");
  require(options.nsim >= 1, "nsim must be at least 1");
  require(options.n_min >= 1 && options.n_min <= options.n_max, "invalid group size range");
  method.validate();

  std::vector<std::int64_t> grid;
  for (auto n = options.n_min; n <= options.n_max; ++n)
    if (feasible_group_size(scenario, n)) grid.push_back(n);
  if (grid.empty()) {
    std::ostringstream msg;
    msg << "no group size in [" << options.n_min << ", " << options.n_max << "] gives integer subgroup cells";
    fail(Errc::invalid_argument, msg.str());
  }

  SampleSizeResult out;
  std::map<std::int64_t, PowerPoint> seen;
  const std::vector<MethodSpec> methods{method};
  auto power = [&](std::int64_t n) {
    if (auto it = seen.find(n); it != seen.end()) return it->second;
    scenario.group_size = n;
    const auto summary =
        estimate_operating_characteristics(scenario, methods, options.nsim, options.seed, options.threads, candidates);
    const auto& row = summary.find(method.tag(), "global");
    const PowerPoint p{n, row.estimate, row.se};
    seen.emplace(n, p);
    out.evaluations.push_back(p);
    return p;
  };
  auto accept = [&](const PowerPoint& p) { return p.power >= options.target_power - p.se; };

  std::size_t hi = grid.size();
  std::size_t lo = 0;  // grid[lo] is known to miss the target unless hi == 0
  if (options.target_power <= 0.0 || accept(power(grid[0]))) {
    hi = 0;
  } else {
    std::size_t cur = 0;
    while (true) {
      const auto target_n = 2 * grid[cur];
      auto next = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), target_n) - grid.begin());
      if (next >= grid.size()) next = grid.size() - 1;
      if (next <= cur) {
        const auto p = power(grid[cur]);
        std::ostringstream msg;
        msg << "target power " << options.target_power << " unreachable for n <= " << options.n_max
            << " (power " << p.power << " at n = " << grid[cur] << ")";
        fail(Errc::unreachable, msg.str());
      }
      if (accept(power(grid[next]))) {
        lo = cur;
        hi = next;
        break;
      }
      cur = next;
    }
    while (hi - lo > 1) {
      const auto mid = lo + (hi - lo) / 2;
      if (accept(power(grid[mid])))
        hi = mid;
      else
        lo = mid;
    }
  }

  const auto best = power(grid[hi]);
  out.n = best.n;
  out.power = best.power;
  out.se = best.se;
  const auto half_it = std::lower_bound(grid.begin(), grid.end(), (best.n + 1) / 2);
  if (best.n / 2 >= options.n_min && half_it != grid.end() && *half_it < best.n) {
    const auto h = power(*half_it);
    out.half = h;
    out.monotone = best.power >= h.power - 3.0 * std::sqrt(best.se * best.se + h.se * h.se);
  }
  return out;
}

}  // namespace mpmcp
