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

#include <algorithm>

#include "doctest.h"
#include "error.hpp"
#include "samplesize.hpp"

using namespace mpmcp;

namespace {

MethodSpec sp() {
  MethodSpec m;
  m.name = MethodName::sp;
  return m;
}

}  // namespace

TEST_CASE("feasible group sizes follow the rounding rule") {
  ScenarioSpec sc;
  sc.prevalence = 0.25;
  CHECK(feasible_group_size(sc, 8));
  CHECK_FALSE(feasible_group_size(sc, 10));
  CHECK_FALSE(feasible_group_size(sc, 1));
  sc.rounding = SubgroupRounding::nearest;
  CHECK(feasible_group_size(sc, 10));
  CHECK_FALSE(feasible_group_size(sc, 1));
}

TEST_CASE("zero target returns the smallest feasible size") {
  ScenarioSpec sc;
  sc.prevalence = 0.25;
  SampleSizeOptions o;
  o.target_power = 0.0;
  o.nsim = 50;
  o.n_min = 5;
  const auto r = required_group_size(sc, sp(), o);
  CHECK(r.n == 8);
}

TEST_CASE("unreachable target") {
  ScenarioSpec sc;
  sc.prevalence = 0.25;
  sc.scenario = ScenarioKind::only;
  SampleSizeOptions o;
  o.target_power = 0.999;
  o.nsim = 200;
  o.n_max = 100;
  try {
    required_group_size(sc, sp(), o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unreachable);
  }
}

TEST_CASE("search result is the first accepted feasible size") {
  ScenarioSpec sc;
  sc.prevalence = 0.5;
  SampleSizeOptions o;
  o.nsim = 1000;
  o.n_min = 4;
  o.n_max = 400;
  const auto r = required_group_size(sc, sp(), o);
  CHECK(r.n % 2 == 0);
  CHECK(r.power >= o.target_power - r.se);
  CHECK(r.n > 20);
  CHECK(r.n < 120);
  // The previous feasible size was simulated and missed the target.
  const auto prev = std::find_if(r.evaluations.begin(), r.evaluations.end(),
                                 [&](const PowerPoint& p) { return p.n == r.n - 2; });
  REQUIRE(prev != r.evaluations.end());
  CHECK(prev->power < o.target_power - prev->se);
  REQUIRE(r.half.has_value());
  CHECK(r.monotone);
  CHECK(r.half->power < r.power);

  // Same inputs, same answer.
  const auto again = required_group_size(sc, sp(), o);
  CHECK(again.n == r.n);
  CHECK(again.power == r.power);
}

TEST_CASE("invalid search settings") {
  ScenarioSpec sc;
  sc.prevalence = 0.5;
  SampleSizeOptions o;
  o.target_power = 1.0;
  CHECK_THROWS_AS(required_group_size(sc, sp(), o), Error);
  o.target_power = 0.8;
  o.n_min = 50;
  o.n_max = 10;
  CHECK_THROWS_AS(required_group_size(sc, sp(), o), Error);
  sc.prevalence = 0.3;
  o.n_min = 3;
  o.n_max = 9;
  CHECK_THROWS_AS(required_group_size(sc, sp(), o), Error);
}
