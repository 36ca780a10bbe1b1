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

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "error.hpp"
#include "simulate.hpp"
#include "testing.hpp"

using namespace mpmcp;

namespace {

const std::vector<double> kDoses{0.0, 0.05, 0.2, 0.6, 1.0};

MethodSpec method(MethodName name, std::vector<Label> strategy) {
  MethodSpec m;
  m.name = name;
  m.strategy = std::move(strategy);
  return m;
}

// Responses with exactly the given cell means and per-cell standard deviation.
TrialData two_point_data(const std::vector<double>& doses, const std::vector<Label>& pops,
                         const std::vector<std::vector<double>>& means, double sd, int pairs) {
  std::vector<Record> records;
  for (std::size_t p = 0; p < pops.size(); ++p)
    for (std::size_t i = 0; i < doses.size(); ++i)
      for (int r = 0; r < pairs; ++r) {
        records.push_back({i, p, means[p][i] - sd});
        records.push_back({i, p, means[p][i] + sd});
      }
  return TrialData(doses, pops, records);
}

}  // namespace

TEST_CASE("pooled variance on hand-computed cells") {
  const TrialData data({0.0, 1.0}, {"F"}, {{0, 0, 0.0}, {0, 0, 2.0}, {1, 0, 1.0}, {1, 0, 3.0}});
  const auto design = design_from_data(data, {{"F", {"F"}}});
  CHECK(pooled_variance_population(data, design, "F") == doctest::Approx(2.0).epsilon(1e-14));

  const TrialData flat({0.0, 1.0}, {"F"}, {{0, 0, 1.0}, {0, 0, 1.0}, {1, 0, 4.0}, {1, 0, 4.0}});
  CHECK_THROWS_AS(pooled_variance_population(flat, design_from_data(flat, {{"F", {"F"}}}), "F"), Error);

  const TrialData single({0.0, 1.0}, {"F"}, {{0, 0, 0.0}, {1, 0, 1.0}});
  CHECK_THROWS_AS(pooled_variance_population(single, design_from_data(single, {{"F", {"F"}}}), "F"), Error);
}

TEST_CASE("full-population variance is the weighted average of the parts") {
  const auto design = DoseDesign::balanced_subgroup(kDoses, 20, 0.5);
  CellTable cells(kDoses, {"S", "C"});
  for (std::size_t i = 0; i < 5; ++i) {
    // 10 subjects per cell and 45 residual df per population.
    cells.at(i, 0) = {10, 0.0, 1.0609 * 45.0 / 5.0};
    cells.at(i, 1) = {10, 0.0, 3.7095 * 45.0 / 5.0};
  }
  const auto v = variance_estimates(cells, design, method(MethodName::mp_multdf, {"F", "S", "C"}));
  CHECK(v.at("S") == doctest::Approx(1.0609).epsilon(1e-12));
  CHECK(v.at("C") == doctest::Approx(3.7095).epsilon(1e-12));
  CHECK(v.at("F") == doctest::Approx(2.3852).epsilon(1e-12));

  const auto pooled = variance_estimates(cells, design, method(MethodName::mp_pooled, {"F", "S"}));
  CHECK(pooled.at("F") == doctest::Approx((1.0609 + 3.7095) / 2.0).epsilon(1e-12));
  CHECK(pooled.at("S") == pooled.at("F"));
}

TEST_CASE("variance estimators are consistent") {
  ScenarioSpec sc;
  sc.shape = CandidateShape::named("constant");
  sc.sigma_s = 1.0;
  sc.sigma_c = 1.0;
  sc.group_size = 20000;
  sc.prevalence = 0.5;
  const auto cells = sample_cells(sc, 3);
  const auto design = sc.design();
  CHECK(std::fabs(variance_estimates(cells, design, method(MethodName::mp_pooled, {"F", "S"})).at("F") - 1.0) <
        0.02);
  const auto het = variance_estimates(cells, design, method(MethodName::mp_multdf, {"F", "S"}));
  CHECK(std::fabs(het.at("S") - 1.0) < 0.02);
  CHECK(std::fabs(het.at("C") - 1.0) < 0.02);

  sc.sigma_s = 1.03;
  sc.sigma_c = 1.926;
  const auto hv = variance_estimates(sample_cells(sc, 4), design, method(MethodName::mp_mindf, {"F", "S"}));
  CHECK(std::fabs(hv.at("S") - 1.0609) < 0.02);
}

TEST_CASE("two-dose statistic by hand") {
  // Cell means (0, 1), two subjects per cell, residual variance 1.
  const double h = std::sqrt(0.5);
  const TrialData data({0.0, 1.0}, {"F"}, {{0, 0, -h}, {0, 0, h}, {1, 0, 1.0 - h}, {1, 0, 1.0 + h}});
  const auto design = design_from_data(data, {{"F", {"F"}}});
  const auto m = method(MethodName::sp, {"F"});
  const auto var = variance_estimates(data, design, m);
  CHECK(var.at("F") == doctest::Approx(1.0).epsilon(1e-14));
  std::vector<PopulationContrasts> contrasts{{"F", {{{-h, h}, "linear", "F"}}}};
  // T = (0.7071 * 1) / sqrt(1 * (0.5 / 2 + 0.5 / 2)) = 1.
  const auto t = test_statistics(data, design, contrasts, var);
  REQUIRE(t.size() == 1);
  CHECK(t[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("statistics are invariant to response scale and location") {
  ScenarioSpec sc;
  sc.group_size = 20;
  const auto data = generate_trial(sc, 17);
  const auto design = sc.design();
  const auto m = method(MethodName::mp_pooled, {"F", "S", "C"});
  const auto contrasts = population_contrasts(design.with_tested(m.strategy), default_candidates());
  const auto base = test_statistics(data, design, contrasts, variance_estimates(data, design, m));

  std::vector<Record> scaled = data.records();
  for (auto& r : scaled) r.response = 3.0 * r.response - 7.0;
  const TrialData other(data.doses(), data.populations(), scaled);
  const auto t = test_statistics(other, design, contrasts, variance_estimates(other, design, m));
  REQUIRE(t.size() == base.size());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == doctest::Approx(base[i]).epsilon(1e-10));
}

TEST_CASE("raising the top dose never lowers a statistic with a positive top coefficient") {
  ScenarioSpec sc;
  sc.group_size = 40;
  const auto design = sc.design();
  const auto m = method(MethodName::mp_pooled, {"F", "S", "C"});
  const auto contrasts = population_contrasts(design.with_tested(m.strategy), default_candidates());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cells = sample_cells(sc, seed);
    const auto var = variance_estimates(cells, design, m);
    const auto before = test_statistics(cells, design, contrasts, var);
    for (std::size_t p = 0; p < 2; ++p) cells.at(4, p).mean += 0.5;
    const auto after = test_statistics(cells, design, contrasts, var);
    std::size_t row = 0;
    for (const auto& pc : contrasts)
      for (const auto& c : pc.contrasts) {
        if (c.coef.back() > 0) CHECK(after[row] >= before[row]);
        ++row;
      }
  }
}

TEST_CASE("zero variance is a degenerate-data error") {
  const auto data = two_point_data({0.0, 1.0}, {"F"}, {{0.0, 1.0}}, 0.0, 2);
  const auto design = design_from_data(data, {{"F", {"F"}}});
  try {
    run_mcp(data, design, default_candidates(), method(MethodName::sp, {"F"}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_data);
  }
}

TEST_CASE("degrees of freedom per method") {
  const auto design = DoseDesign::subgroup(kDoses, {6, 7, 8, 9, 10}, {20, 21, 22, 23, 24});
  std::mt19937_64 gen(1);
  std::normal_distribution<double> z;
  std::vector<Record> records;
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::int64_t s = 0; s < design.group_size(p == 0 ? "S" : "C", i); ++s) records.push_back({i, p, z(gen)});
  const TrialData data(kDoses, {"S", "C"}, records);
  const double nu_s = 40 - 5, nu_c = 110 - 5, nu_f = 150 - 5;
  auto df_of = [&](MethodName name) {
    auto report = run_mcp(data, design, default_candidates(), method(name, {"F", "S", "C"}));
    std::vector<double> out;
    for (const auto& h : report.hypotheses) out.push_back(h.df);
    return out;
  };
  for (double d : df_of(MethodName::mp_pooled)) CHECK(d == nu_s + nu_c);
  for (double d : df_of(MethodName::mp_mindf)) CHECK(d == std::min(nu_s, nu_c));
  for (double d : df_of(MethodName::mp_normal)) CHECK(std::isinf(d));
  const auto mult = df_of(MethodName::mp_multdf);
  REQUIRE(mult.size() == 15);
  CHECK(mult[0] == nu_f);
  CHECK(mult[5] == nu_s);
  CHECK(mult[10] == nu_c);
  CHECK(std::set<double>(mult.begin(), mult.end()).size() == 3);

  const auto sp = run_mcp(data, design, default_candidates(), method(MethodName::sp, {"F"}));
  for (const auto& h : sp.hypotheses) CHECK(h.df == nu_f);
}

TEST_CASE("single-population analysis matches the classic procedure") {
  ScenarioSpec sc;
  sc.group_size = 30;
  const auto cells = sample_cells(sc, 5);
  const auto design = sc.design();
  const auto report = run_mcp(cells, design, default_candidates(), method(MethodName::sp, {"F"}));
  REQUIRE(report.hypotheses.size() == 5);
  // Classic correlation for balanced groups is the inner product of the unit contrasts.
  const auto set = contrast_set(default_candidates(), kDoses, std::vector<std::int64_t>(5, 30));
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b) {
      double ip = 0.0;
      for (std::size_t l = 0; l < 5; ++l) ip += set[a].coef[l] * set[b].coef[l];
      CHECK(report.correlation(a, b) == doctest::Approx(ip).epsilon(1e-12));
    }
  const auto model = JointNullModel::t(report.correlation.values(), 150 - 5);
  const double crit = equicoordinate_quantile(model, 0.05);
  for (const auto& h : report.hypotheses) {
    if (std::fabs(h.statistic - crit) < 0.01) continue;
    CHECK(h.reject == (h.statistic > crit));
    CHECK(h.reject == (h.pvalue < 0.05));
  }
}

TEST_CASE("decisions agree with p-values and critical values") {
  ScenarioSpec sc;
  sc.group_size = 40;
  sc.scenario = ScenarioKind::only;
  const auto design = sc.design();
  const auto m = method(MethodName::mp_pooled, {"F", "S", "C"});
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto report = run_mcp(sample_cells(sc, seed), design, default_candidates(), m);
    const auto model = JointNullModel::t(report.correlation.values(), report.hypotheses[0].df);
    const double crit = equicoordinate_quantile(model, 0.05);
    bool any = false;
    for (const auto& h : report.hypotheses) {
      CHECK(h.reject == (h.pvalue < 0.05));
      any = any || h.reject;
      if (std::fabs(h.statistic - crit) > 0.01) {
        CHECK(h.reject == (h.statistic > crit));
        ++checked;
      }
    }
    CHECK(report.global_reject == any);
    for (const auto& [label, rej] : report.population_reject) {
      bool pop_any = false;
      for (const auto& h : report.hypotheses)
        if (h.population == label) pop_any = pop_any || h.reject;
      CHECK(rej == pop_any);
    }
  }
  CHECK(checked > 60);
}

TEST_CASE("strong effect is detected with a tiny p-value") {
  ScenarioSpec sc;
  sc.delta = 2.0;
  sc.sigma_s = sc.sigma_c = 0.1;
  sc.group_size = 60;
  const auto data = generate_trial(sc, 1);
  for (auto name : {MethodName::sp, MethodName::mp_pooled, MethodName::mp_multdf}) {
    const auto report = run_mcp(data, sc.design(), default_candidates(),
                                method(name, name == MethodName::sp ? std::vector<Label>{"F"}
                                                                    : std::vector<Label>{"F", "S"}));
    CHECK(report.global_reject);
    double best = 1.0;
    for (const auto& h : report.hypotheses) best = std::min(best, h.pvalue);
    CHECK(best < 1e-6);
  }
}

TEST_CASE("model selection") {
  TestReport none;
  none.hypotheses = {{"F", "emax", 1.0, 0.3, 0.0, 10, false}};
  CHECK_FALSE(select_best_model(none).has_value());

  TestReport one;
  one.hypotheses = {{"F", "emax", 1.0, 0.3, 0.0, 10, false}, {"S", "linear", 3.0, 0.01, 0.0, 10, true}};
  CHECK(select_best_model(one) == std::optional<std::string>("linear"));

  TestReport across;
  across.hypotheses = {{"F", "emax", 3.0, 0.004, 0.0, 10, true},
                       {"S", "linear", 3.5, 0.002, 0.0, 10, true},
                       {"C", "quadratic", 3.9, 0.003, 0.0, 10, true}};
  CHECK(select_best_model(across) == std::optional<std::string>("linear"));
}

TEST_CASE("method and strategy validation") {
  const auto design = DoseDesign::from_counts(kDoses, {{"F", {5, 5, 5, 5, 5}}}, {{"F", {"F"}}});
  CellTable cells(kDoses, {"F"});
  for (std::size_t i = 0; i < 5; ++i) cells.at(i, 0) = {5, 0.1 * static_cast<double>(i), 4.0};
  try {
    run_mcp(cells, design, default_candidates(), method(MethodName::mp_pooled, {"F", "S"}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("absent from design") != std::string::npos);
  }
  CHECK_THROWS_AS(method(MethodName::sp, {"F", "S"}).validate(), Error);
  const auto fsc = DoseDesign::balanced_subgroup(kDoses, 10, 0.5);
  CellTable sc(kDoses, {"S", "C"});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t g = 0; g < 2; ++g) sc.at(i, g) = {5, 0.1 * static_cast<double>(i), 4.0};
  CHECK_THROWS_AS(run_mcp(sc, fsc, default_candidates(), method(MethodName::sp, {"S"})), Error);
  CHECK(parse_method_name("mp-multdf") == MethodName::mp_multdf);
  CHECK(parse_method_name("MinDF") == MethodName::mp_mindf);
  CHECK_FALSE(parse_method_name("bonferroni").has_value());
  CHECK(method(MethodName::mp_pooled, {"F", "S", "C"}).tag() == "MP-Pooled(F+S+C)");
}

TEST_CASE("report serialisation") {
  ScenarioSpec sc;
  sc.group_size = 20;
  const auto report = run_mcp(sample_cells(sc, 2), sc.design(), default_candidates(),
                              method(MethodName::mp_multdf, {"F", "S"}));
  std::ostringstream csv, text;
  report.write_csv(csv);
  report.write_text(text);
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  CHECK(lines == 1 + report.hypotheses.size());
  CHECK(text.str().find("MP-MultDF(F+S)") != std::string::npos);
}

TEST_CASE("prepared analysis matches the full analysis") {
  for (auto name : {MethodName::sp, MethodName::mp_pooled, MethodName::mp_multdf, MethodName::mp_mindf,
                    MethodName::mp_normal}) {
    ScenarioSpec sc;
    sc.group_size = 40;
    sc.scenario = ScenarioKind::double_;
    sc.sigma_s = 1.03;
    sc.sigma_c = 1.926;
    const auto design = sc.design();
    auto m = method(name, name == MethodName::sp ? std::vector<Label>{"F"} : std::vector<Label>{"F", "S", "C"});
    m.qmc.tol = 1e-3;
    const PreparedAnalysis prepared(design, default_candidates(), m);
    int compared = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const auto cells = sample_cells(sc, seed);
      const auto report = run_mcp(cells, design, default_candidates(), m);
      bool close = false;
      for (const auto& h : report.hypotheses) close = close || std::fabs(h.pvalue - 0.05) < 5e-3;
      if (close) continue;
      ++compared;
      const auto d = prepared.decide(cells, 99);
      CHECK(d.global == report.global_reject);
      for (std::size_t p = 0; p < d.population.size(); ++p)
        CHECK(d.population[p] == report.population_reject[p].second);
      const auto best = select_best_model(report);
      CHECK(d.selected.has_value() == best.has_value());
      if (d.selected && best) {
        // Ties between near-equal p-values may resolve either way.
        double p_best = 1.0, p_chosen = 1.0;
        for (const auto& h : report.hypotheses)
          if (h.reject) {
            if (h.shape == *best) p_best = std::min(p_best, h.pvalue);
            if (h.shape == prepared.shape_names()[*d.selected]) p_chosen = std::min(p_chosen, h.pvalue);
          }
        CHECK(p_chosen <= p_best + 5e-3);
      }
    }
    CHECK(compared > 8);
  }
}
