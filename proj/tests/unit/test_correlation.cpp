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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "contrasts.hpp"
#include "correlation.hpp"
#include "doctest.h"
#include "error.hpp"
#include "oracles.hpp"

using namespace mpmcp;

namespace {

const std::vector<double> kDoses{0.0, 0.05, 0.2, 0.6, 1.0};

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

void check_valid(const CorrelationMatrix& r) {
  const auto& m = r.values();
  CHECK(max_abs_diff(m, m.transpose()) < 1e-10);
  for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(std::fabs(m(i, i) - 1.0) < 1e-10);
  CHECK(m.maxCoeff() <= 1.0 + 1e-12);
  CHECK(m.minCoeff() >= -1.0 - 1e-12);
  CHECK(r.min_eigenvalue() >= -1e-8);
}

}  // namespace

TEST_CASE("homoscedastic correlation on the balanced subgroup design") {
  for (double gamma : {0.25, 0.5, 0.75}) {
    const auto design = DoseDesign::balanced_subgroup(kDoses, 40, gamma);
    const auto sets = population_contrasts(design, default_candidates());
    const auto r = corr_homoscedastic(design, sets);
    REQUIRE(r.dim() == 15);
    check_valid(r);
    for (std::size_t m = 0; m < 5; ++m) {
      // Same contrast in F and S: sqrt(gamma).
      CHECK(std::fabs(r(m, 5 + m) - std::sqrt(gamma)) < 1e-12);
      CHECK(std::fabs(r(m, 10 + m) - std::sqrt(1.0 - gamma)) < 1e-12);
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::fabs(r(5 + m, 10 + j)) < 1e-12);
    }
    CHECK(r.rows()[5].population == "S");
    CHECK(r.rows()[5].shape == "emax");
  }
}

TEST_CASE("heteroscedastic correlation hand formula") {
  const double gamma = 0.5, ss = 1.03, sc = 1.926;
  const auto design = DoseDesign::balanced_subgroup(kDoses, 40, gamma);
  const auto sets = population_contrasts(design, default_candidates());
  const auto vars = VarianceSpec::per_population(design, {{"C", sc * sc}, {"S", ss * ss}});
  const auto r = corr_heteroscedastic(design, sets, vars);
  check_valid(r);
  const double expected = ss * std::sqrt(gamma) / std::sqrt(gamma * ss * ss + (1 - gamma) * sc * sc);
  CHECK(expected == doctest::Approx(0.4716).epsilon(1e-4));
  for (std::size_t m = 0; m < 5; ++m) {
    CHECK(std::fabs(r(m, 5 + m) - expected) < 1e-12);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::fabs(r(5 + m, 10 + j)) < 1e-12);
  }
  CHECK(max_abs_diff(r.values(), corr_general(design, sets, vars).values()) < 1e-10);
}

TEST_CASE("equal variances reduce to the homoscedastic matrix") {
  for (double gamma : {0.25, 0.5, 0.75}) {
    const auto design = DoseDesign::balanced_subgroup(kDoses, 60, gamma);
    const auto sets = population_contrasts(design, default_candidates());
    const auto homo = corr_homoscedastic(design, sets);
    const auto vars = VarianceSpec::homoscedastic(design, 2.2);
    CHECK(max_abs_diff(homo.values(), corr_heteroscedastic(design, sets, vars).values()) < 1e-10);
    CHECK(max_abs_diff(homo.values(), corr_general(design, sets, vars).values()) < 1e-10);
  }
}

TEST_CASE("single population reduces to the classic correlation") {
  const std::vector<std::int64_t> n{10, 12, 8, 9, 11};
  const auto design = DoseDesign::from_counts(kDoses, {{"F", n}}, {{"F", {"F"}}});
  const auto sets = population_contrasts(design, default_candidates());
  const auto r = corr_general(design, sets, VarianceSpec::homoscedastic(design, 1.0));
  const auto& cs = sets[0].contrasts;
  for (std::size_t a = 0; a < cs.size(); ++a)
    for (std::size_t b = 0; b < cs.size(); ++b) {
      double ab = 0.0, aa = 0.0, bb = 0.0;
      for (std::size_t l = 0; l < 5; ++l) {
        const double nl = static_cast<double>(n[l]);
        ab += cs[a].coef[l] * cs[b].coef[l] / nl;
        aa += cs[a].coef[l] * cs[a].coef[l] / nl;
        bb += cs[b].coef[l] * cs[b].coef[l] / nl;
      }
      CHECK(std::fabs(r(a, b) - ab / std::sqrt(aa * bb)) < 1e-12);
    }
}

TEST_CASE("closed form equals the explicit matrix product on random designs") {
  std::mt19937_64 gen(2026);
  std::uniform_int_distribution<int> cell(0, 4);
  std::uniform_real_distribution<double> var(0.3, 4.0);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t k = 2 + static_cast<std::size_t>(rep % 4);
    const std::vector<double> doses = [&] {
      std::vector<double> d(k);
      for (std::size_t i = 0; i < k; ++i) d[i] = static_cast<double>(i);
      return d;
    }();
    const std::size_t nv = 2 + static_cast<std::size_t>(rep % 2);
    std::vector<VarianceGroup> groups;
    for (std::size_t g = 0; g < nv; ++g) {
      VarianceGroup vg{"V" + std::to_string(g), {}};
      // Every cell is non-empty so that every union is testable.
      for (std::size_t i = 0; i < k; ++i) vg.sizes.push_back(1 + cell(gen));
      groups.push_back(vg);
    }
    std::vector<TestedPopulation> tested;
    std::vector<std::string> all;
    for (const auto& g : groups) all.push_back(g.label);
    tested.push_back({"ALL", all});
    tested.push_back({"A", {groups[0].label}});
    tested.push_back({"B", {groups[1].label}});
    if (nv == 3) tested.push_back({"AB", {groups[0].label, groups[1].label}});
    const auto design = DoseDesign::from_counts(doses, groups, tested);

    std::vector<PopulationContrasts> sets;
    for (const auto& t : tested) {
      PopulationContrasts pc{t.label, {}};
      const std::size_t z = 1 + static_cast<std::size_t>(cell(gen) % 3);
      for (std::size_t m = 0; m < z; ++m)
        pc.contrasts.push_back({mpmcp_test::random_contrast(gen, k), "shape" + std::to_string(m), t.label});
      sets.push_back(pc);
    }
    std::vector<std::pair<Label, double>> vv;
    std::vector<double> plain;
    for (const auto& g : groups) {
      plain.push_back(var(gen));
      vv.emplace_back(g.label, plain.back());
    }
    const auto r = corr_general(design, sets, VarianceSpec::per_population(design, vv));
    check_valid(r);
    CHECK(max_abs_diff(r.values(), mpmcp_test::explicit_correlation(design, sets, plain)) < 1e-10);
  }
}

TEST_CASE("dose-dependent prevalence matches a Monte-Carlo correlation") {
  const std::vector<std::int64_t> s{4, 8, 10, 12, 16}, c{16, 12, 10, 8, 4};
  const auto design = DoseDesign::subgroup(kDoses, s, c);
  std::mt19937_64 gen(99);
  std::vector<PopulationContrasts> sets;
  for (const auto& label : design.tested_labels()) {
    PopulationContrasts pc{label, {}};
    for (int m = 0; m < 2; ++m) pc.contrasts.push_back({mpmcp_test::random_contrast(gen, 5), "r" + std::to_string(m), label});
    sets.push_back(pc);
  }
  const double vs = 1.03 * 1.03, vc = 1.926 * 1.926;
  const auto r = corr_general(design, sets, VarianceSpec::per_population(design, {{"S", vs}, {"C", vc}}));
  check_valid(r);

  const int reps = 1000000;
  const std::size_t q = r.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  Eigen::VectorXd x(static_cast<Eigen::Index>(q));
  std::normal_distribution<double> z;
  std::vector<double> ms(5), mc(5);
  for (int rep = 0; rep < reps; ++rep) {
    for (std::size_t l = 0; l < 5; ++l) {
      ms[l] = z(gen) * std::sqrt(vs / static_cast<double>(s[l]));
      mc[l] = z(gen) * std::sqrt(vc / static_cast<double>(c[l]));
    }
    std::size_t row = 0;
    for (const auto& pc : sets)
      for (const auto& con : pc.contrasts) {
        double v = 0.0;
        for (std::size_t l = 0; l < 5; ++l) {
          const double ns = static_cast<double>(s[l]), nc = static_cast<double>(c[l]);
          double mean = pc.population == "S" ? ms[l] : pc.population == "C" ? mc[l] : (ns * ms[l] + nc * mc[l]) / (ns + nc);
          v += con.coef[l] * mean;
        }
        x(static_cast<Eigen::Index>(row++)) = v;
      }
    acc.noalias() += x * x.transpose();
  }
  const Eigen::VectorXd sd = acc.diagonal().cwiseSqrt();
  const Eigen::MatrixXd mc_corr = acc.cwiseQuotient(sd * sd.transpose());
  CHECK(max_abs_diff(r.values(), mc_corr) < 0.005);
}

TEST_CASE("correlation input errors") {
  const auto design = DoseDesign::subgroup({0.0, 1.0}, {0, 5}, {5, 5});
  PopulationContrasts pc{"S", {{{-0.7071067811865476, 0.7071067811865476}, "linear", "S"}}};
  std::vector<PopulationContrasts> sets{pc};
  CHECK_THROWS_AS(corr_homoscedastic(design, sets), Error);

  const auto ok = DoseDesign::balanced_subgroup(kDoses, 40, 0.5);
  CHECK_THROWS_AS(VarianceSpec::per_population(ok, {{"S", 1.0}, {"C", 0.0}}), Error);
  CHECK_THROWS_AS(VarianceSpec::per_population(ok, {{"S", 1.0}}), Error);
  CHECK_THROWS_AS(VarianceSpec::homoscedastic(ok, -1.0), Error);
}
