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

// Acceptance checks. Each criterion prints one PASS/FAIL line followed by
// the numbers behind it; the exit status is non-zero if any check fails.
// Usage: mpmcp_acceptance [criterion ...] with criteria 1-9 (9 is the
// power-curve monotonicity property); no arguments runs all of them.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "correlation.hpp"
#include "distributions.hpp"
#include "mvprob.hpp"
#include "oracles.hpp"
#include "samplesize.hpp"
#include "simulate.hpp"
#include "testing.hpp"

namespace fs = std::filesystem;
using namespace mpmcp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const std::vector<double> kDoses{0.0, 0.05, 0.2, 0.6, 1.0};

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    detail << "    " << (ok ? "ok   " : "MISS ") << what << '\n';
    pass = pass && ok;
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.setf(std::ios::scientific);
  s.precision(2);
  s << v;
  return s.str();
}

MethodSpec method(MethodName name, std::vector<Label> strategy = {"F"}) {
  MethodSpec m;
  m.name = name;
  m.strategy = std::move(strategy);
  return m;
}

ScenarioSpec scenario(ScenarioKind kind, double prevalence, std::int64_t n, const std::string& shape = "emax",
                      double sigma_s = 1.478, double sigma_c = 1.478) {
  ScenarioSpec s;
  s.shape = CandidateShape::named(shape);
  s.scenario = kind;
  s.prevalence = prevalence;
  s.group_size = n;
  s.sigma_s = sigma_s;
  s.sigma_c = sigma_c;
  s.rounding = SubgroupRounding::nearest;
  return s;
}

// ---- 1. homoscedastic FWER -------------------------------------------------

void fwer_homoscedastic(Outcome& out) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<MethodSpec> methods{method(MethodName::sp), method(MethodName::mp_pooled, {"F", "S"}),
                                        method(MethodName::mp_pooled, {"F", "S", "C"})};
  for (double gamma : {0.25, 0.5, 0.75}) {
    const auto s = estimate_operating_characteristics(scenario(ScenarioKind::same, gamma, 75, "constant"), methods,
                                                      10000, 20240102);
    for (const auto& m : methods) {
      const auto& row = s.find(m.tag(), "global");
      out.check(std::fabs(row.estimate - 0.05) <= 0.007,
                m.tag() + " gamma=" + fmt(gamma, 2) + ": FWER " + fmt(row.estimate) + " (target 0.05 +- 0.007)");
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.check(secs < 600.0, "runtime " + fmt(secs, 1) + " s (target < 600 s)");
}

// ---- 2 and 7. Table of rejection rates and model selection -----------------

struct SpotCell {
  MethodSpec method;
  ScenarioKind scenario;
  double prevalence;
  std::string hypothesis;
  double expected;
};

std::map<std::string, SimulationSummary> table_cache;

const SimulationSummary& table_cell(const MethodSpec& m, ScenarioKind kind, double prevalence) {
  const std::string key = m.tag() + "/" + std::string(to_string(kind)) + "/" + fmt(prevalence, 2);
  auto it = table_cache.find(key);
  if (it == table_cache.end()) {
    const std::vector<MethodSpec> ms{m};
    it = table_cache
             .emplace(key, estimate_operating_characteristics(scenario(kind, prevalence, 75), ms, 5000, 20240101))
             .first;
  }
  return it->second;
}

void table_rejections(Outcome& out) {
  using K = ScenarioKind;
  const auto sp = method(MethodName::sp);
  const auto pfs = method(MethodName::mp_pooled, {"F", "S"});
  const auto pfsc = method(MethodName::mp_pooled, {"F", "S", "C"});
  const auto mfs = method(MethodName::mp_multdf, {"F", "S"});
  const auto mfsc = method(MethodName::mp_multdf, {"F", "S", "C"});
  const std::vector<SpotCell> cells{
      {sp, K::same, 0.25, "global", 0.88},   {sp, K::only, 0.25, "global", 0.16},
      {pfs, K::only, 0.5, "global", 0.59},   {pfsc, K::only, 0.25, "C", 0.02},
      {sp, K::double_, 0.5, "global", 0.69}, {pfs, K::same, 0.25, "global", 0.84},
      {pfs, K::only, 0.25, "S", 0.30},       {pfsc, K::double_, 0.75, "global", 0.75},
      {mfs, K::only, 0.5, "global", 0.59},   {mfsc, K::same, 0.5, "F", 0.77},
      {mfsc, K::double_, 0.25, "C", 0.20},   {sp, K::only, 0.75, "global", 0.66},
  };
  for (const auto& c : cells) {
    const auto& row = table_cell(c.method, c.scenario, c.prevalence).find(c.method.tag(), c.hypothesis);
    out.check(std::fabs(row.estimate - c.expected) <= 0.02,
              c.method.tag() + " " + std::string(to_string(c.scenario)) + "/" + fmt(c.prevalence, 2) + " " +
                  c.hypothesis + ": " + fmt(row.estimate) + " (expected " + fmt(c.expected, 2) + " +- 0.02, se " +
                  fmt(row.se) + ")");
  }
}

void model_selection(Outcome& out) {
  const auto sp = method(MethodName::sp);
  const auto& row = table_cell(sp, ScenarioKind::same, 0.25).find("SP", "select:emax");
  out.check(std::fabs(row.estimate - 0.50) <= 0.03, "SP same/0.25 correct-model probability " + fmt(row.estimate) +
                                                         " over " + std::to_string(row.nsim) +
                                                         " rejections (expected 0.50 +- 0.03)");
}

// ---- 3. Sample sizes --------------------------------------------------------

void sample_sizes(Outcome& out) {
  struct Cell {
    MethodSpec method;
    ScenarioKind kind;
    double prevalence;
    double expected;
    double tolerance;
  };
  const std::vector<Cell> cells{
      {method(MethodName::sp), ScenarioKind::same, 0.25, 59, 3},
      {method(MethodName::sp), ScenarioKind::only, 0.25, 932, 0.03 * 932},
      {method(MethodName::mp_pooled, {"F", "S"}), ScenarioKind::only, 0.5, 131, 3},
      {method(MethodName::mp_pooled, {"F", "S", "C"}), ScenarioKind::only, 0.75, 97, 3},
  };
  for (const auto& c : cells) {
    auto sc = scenario(c.kind, c.prevalence, 4);
    sc.rounding = SubgroupRounding::exact;
    SampleSizeOptions o;
    o.nsim = 10000;
    o.seed = 20240101;
    o.n_min = 4;
    o.n_max = 2000;
    const auto r = required_group_size(sc, c.method, o);
    out.check(std::fabs(static_cast<double>(r.n) - c.expected) <= c.tolerance,
              c.method.tag() + " " + std::string(to_string(c.kind)) + "/" + fmt(c.prevalence, 2) + ": n = " +
                  std::to_string(r.n) + " (power " + fmt(r.power) + ", expected " + fmt(c.expected, 0) + " +- " +
                  fmt(c.tolerance, 1) + ")");
  }
}

// ---- 4. Heteroscedastic FWER ------------------------------------------------

void fwer_heteroscedastic(Outcome& out) {
  const std::vector<MethodSpec> methods{
      method(MethodName::mp_pooled, {"F", "S", "C"}), method(MethodName::mp_mindf, {"F", "S", "C"}),
      method(MethodName::mp_multdf, {"F", "S", "C"}), method(MethodName::mp_normal, {"F", "S", "C"})};
  auto run = [&](std::int64_t n, std::span<const MethodSpec> ms) {
    return estimate_operating_characteristics(scenario(ScenarioKind::same, 0.75, n, "constant", 1.03, 1.926), ms,
                                              25000, 20240103);
  };
  const auto at60 = run(60, methods);
  const auto& pooled = at60.find("MP-Pooled(F+S+C)", "global");
  const auto& mindf = at60.find("MP-MinDF(F+S+C)", "global");
  const auto& multdf = at60.find("MP-MultDF(F+S+C)", "global");
  out.check(pooled.estimate > 0.08, "MP-Pooled n=60: " + fmt(pooled.estimate) + " (> 0.08)");
  out.check(mindf.estimate <= 0.05 + 3 * mindf.se,
            "MP-MinDF n=60: " + fmt(mindf.estimate) + " (<= " + fmt(0.05 + 3 * mindf.se) + ")");
  out.check(multdf.estimate <= 0.06, "MP-MultDF n=60: " + fmt(multdf.estimate) + " (<= 0.06)");
  const std::vector<MethodSpec> normal{methods[3]};
  const auto at10 = run(10, normal), at100 = run(100, normal);
  const auto& n10 = at10.find("MP-Normal(F+S+C)", "global");
  const auto& n100 = at100.find("MP-Normal(F+S+C)", "global");
  out.check(n10.estimate > n100.estimate,
            "MP-Normal n=10: " + fmt(n10.estimate) + " > n=100: " + fmt(n100.estimate));
}

// ---- 5. Correlation oracle --------------------------------------------------

void correlation_oracle(Outcome& out) {
  std::mt19937_64 gen(20240105);
  std::uniform_int_distribution<int> cell(1, 4);
  std::uniform_real_distribution<double> var(0.3, 4.0);
  double worst = 0.0;
  int designs = 0;
  for (int rep = 0; rep < 24; ++rep) {
    const std::size_t k = 2 + static_cast<std::size_t>(rep % 4);
    std::vector<double> doses(k);
    for (std::size_t i = 0; i < k; ++i) doses[i] = 0.25 * static_cast<double>(i);
    const std::size_t nv = 2 + static_cast<std::size_t>(rep % 2);
    std::vector<VarianceGroup> groups;
    for (std::size_t g = 0; g < nv; ++g) {
      VarianceGroup vg{"V" + std::to_string(g), {}};
      for (std::size_t i = 0; i < k; ++i) vg.sizes.push_back(cell(gen));
      groups.push_back(vg);
    }
    std::vector<std::string> all;
    for (const auto& g : groups) all.push_back(g.label);
    std::vector<TestedPopulation> tested{{"ALL", all}, {"A", {"V0"}}, {"B", {"V1"}}};
    if (nv == 3) tested.push_back({"AC", {"V0", "V2"}});
    const auto design = DoseDesign::from_counts(doses, groups, tested);
    std::vector<PopulationContrasts> sets;
    for (const auto& t : tested) {
      PopulationContrasts pc{t.label, {}};
      const int z = 1 + rep % 3;
      for (int m = 0; m < z; ++m)
        pc.contrasts.push_back({mpmcp_test::random_contrast(gen, k), "c" + std::to_string(m), t.label});
      sets.push_back(pc);
    }
    std::vector<std::pair<Label, double>> vv;
    std::vector<double> plain;
    for (const auto& g : groups) {
      plain.push_back(var(gen));
      vv.emplace_back(g.label, plain.back());
    }
    const auto r = corr_general(design, sets, VarianceSpec::per_population(design, vv));
    worst = std::max(worst, (r.values() - mpmcp_test::explicit_correlation(design, sets, plain)).cwiseAbs().maxCoeff());
    ++designs;
  }
  out.check(worst <= 1e-10, std::to_string(designs) + " random designs: max |closed form - explicit| = " +
                                sci(worst) + " (<= 1e-10)");

  double reduce = 0.0, homo_err = 0.0, het_err = 0.0;
  for (double gamma : {0.25, 0.5, 0.75}) {
    const auto design = DoseDesign::balanced_subgroup(kDoses, 40, gamma);
    const auto sets = population_contrasts(design, default_candidates());
    const auto homo = corr_homoscedastic(design, sets);
    const auto equal = corr_heteroscedastic(design, sets, VarianceSpec::per_population(design, {{"S", 2.0}, {"C", 2.0}}));
    reduce = std::max(reduce, (homo.values() - equal.values()).cwiseAbs().maxCoeff());
    const double ss = 1.03, sc = 1.926;
    const auto het = corr_heteroscedastic(design, sets, VarianceSpec::per_population(design, {{"S", ss * ss}, {"C", sc * sc}}));
    const double hand = ss * std::sqrt(gamma) / std::sqrt(gamma * ss * ss + (1 - gamma) * sc * sc);
    for (std::size_t m = 0; m < 5; ++m) {
      homo_err = std::max(homo_err, std::fabs(homo(m, 5 + m) - std::sqrt(gamma)));
      het_err = std::max(het_err, std::fabs(het(m, 5 + m) - hand));
    }
  }
  out.check(reduce <= 1e-10, "equal variances: max |hetero - homo| = " + sci(reduce) + " (<= 1e-10)");
  out.check(homo_err <= 1e-12, "F-S same-contrast entry vs sqrt(gamma): " + sci(homo_err) + " (<= 1e-12)");
  out.check(het_err <= 1e-12, "heteroscedastic F-S entry vs hand formula: " + sci(het_err) + " (<= 1e-12)");
}

// ---- 6. Probability engine --------------------------------------------------

struct Mc {
  double p, se;
};

Mc plain_monte_carlo(const Eigen::MatrixXd& corr, Family family, double df, const std::vector<double>& lo,
                     const std::vector<double>& hi, long draws, std::uint64_t seed) {
  const Eigen::MatrixXd l = corr.llt().matrixL();
  const auto q = corr.rows();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::chi_squared_distribution<double> chi(family == Family::t ? df : 1.0);
  Eigen::VectorXd u(q), x(q);
  long hits = 0;
  for (long r = 0; r < draws; ++r) {
    for (Eigen::Index j = 0; j < q; ++j) u(j) = z(gen);
    x.noalias() = l.triangularView<Eigen::Lower>() * u;
    if (family == Family::t) x /= std::sqrt(chi(gen) / df);
    bool in = true;
    for (Eigen::Index j = 0; j < q && in; ++j)
      in = x(j) >= lo[static_cast<std::size_t>(j)] && x(j) <= hi[static_cast<std::size_t>(j)];
    hits += in;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(draws);
  return {p, std::sqrt(p * (1 - p) / static_cast<double>(draws))};
}

void probability_engine(Outcome& out) {
  std::mt19937_64 gen(20240106);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (int rep = 0; rep < 10; ++rep) {
    const int q = 2 + (rep * 13) % 14;  // 2..15
    const auto r = mpmcp_test::random_corr(gen, q);
    std::vector<double> lo(static_cast<std::size_t>(q)), hi(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
      hi[static_cast<std::size_t>(j)] = 0.8 + u(gen);
      lo[static_cast<std::size_t>(j)] = j % 2 ? -kInf : -1.0 - u(gen);
    }
    const Family family = rep % 2 ? Family::t : Family::normal;
    const double df = family == Family::t ? 3.0 + 2 * rep : kInf;
    const auto qmc = mv_rect_prob(r, family, df, lo, hi);
    const auto mc = plain_monte_carlo(r, family, df, lo, hi, 10000000, 500 + static_cast<std::uint64_t>(rep));
    const double z = std::fabs(qmc.value - mc.p) / std::hypot(qmc.error, mc.se);
    out.check(z <= 3.0, std::string(family == Family::t ? "t" : "normal") + " q=" + std::to_string(q) +
                            ": qmc " + fmt(qmc.value, 6) + " vs mc " + fmt(mc.p, 6) + " (" + fmt(z, 2) +
                            " combined SE)");
  }
  for (int rep = 0; rep < 5; ++rep) {
    const int q = 3 + 3 * rep;
    const auto r = mpmcp_test::random_corr(gen, q);
    const auto model = rep % 2 ? JointNullModel::t(r, 10.0 + rep) : JointNullModel::normal(r);
    const double crit = equicoordinate_quantile(model, 0.05);
    QmcOptions fine;
    fine.tol = 2e-5;
    fine.seed = 9000 + static_cast<std::uint64_t>(rep);
    const std::vector<double> lo(static_cast<std::size_t>(q), -kInf), hi(static_cast<std::size_t>(q), crit);
    const double p = mv_rect_prob(model, lo, hi, fine).value;
    out.check(std::fabs(p - 0.95) <= 2e-4, "round trip q=" + std::to_string(q) + ": P(max <= " + fmt(crit) +
                                               ") = " + fmt(p, 6) + " (0.95 +- 2e-4)");
  }
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const double zq = equicoordinate_quantile(JointNullModel::normal(one), 0.05);
  const double tq = equicoordinate_quantile(JointNullModel::t(one, 10.0), 0.05);
  out.check(std::fabs(zq - 1.6449) <= 5e-3, "q=1 normal quantile " + fmt(zq) + " (1.6449 +- 5e-3)");
  out.check(std::fabs(tq - 1.812) <= 5e-3, "q=1 t(10) quantile " + fmt(tq) + " (1.812 +- 5e-3)");
}

// ---- 8. CLI determinism -----------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.filename().string() + "\n" + slurp(f);
  return all;
}

void cli_determinism(Outcome& out) {
  const fs::path work = fs::current_path() / "acceptance_work";
  fs::create_directories(work);
  std::ofstream(work / "samplesize.cfg") << R"({
  "method": [{"name": "SP"}, {"name": "MP-MinDF", "strategy": "F+S+C"}],
  "samplesize": {"nsim": 200, "n_max": 200, "grid": {"scenario": ["same", "double"], "prevalence": 0.5}}
})";
  std::ofstream(work / "simulate.cfg") << R"({
  "master_seed": 99,
  "method": [{"name": "SP"}, {"name": "MP-Pooled", "strategy": "F+S+C"}, {"name": "MP-MultDF", "strategy": "F+S"},
             {"name": "MP-Normal", "strategy": "F+S+C"}],
  "simulation": {"nsim": 150, "grid": {"scenario": ["same", "only"], "prevalence": [0.25, 0.5],
                                       "sigma_s": 1.03, "sigma_c": 1.926, "group_size": 40}}
})";
  const std::string cfg_dir = MPMCP_CONFIG_DIR;
  const std::vector<std::pair<std::string, std::string>> runs{
      {"analyze", cfg_dir + "/analyze_example.cfg"},
      {"simulate", (work / "simulate.cfg").string()},
      {"samplesize", (work / "samplesize.cfg").string()},
      {"generate", cfg_dir + "/generate_example.cfg"},
  };
  for (const auto& [cmd, cfg] : runs) {
    std::string first;
    bool same = true, ok = true;
    for (int threads : {1, 4, 1}) {
      const auto dir = work / (cmd + "_t" + std::to_string(threads));
      fs::remove_all(dir);
      const std::string line = std::string("\"") + MPMCP_CLI_PATH + "\" " + cmd + " -q -c \"" + cfg + "\" -o \"" +
                               dir.string() + "\" --threads " + std::to_string(threads);
      const int status = std::system(line.c_str());
      ok = ok && WIFEXITED(status) && WEXITSTATUS(status) == 0;
      if (!ok) break;
      const auto digest = dir_digest(dir);
      if (first.empty())
        first = digest;
      else
        same = same && digest == first;
    }
    out.check(ok && same, cmd + ": " + (ok ? (same ? "byte-identical for --threads 1, 4, 1" : "outputs differ")
                                           : "command failed"));
  }
}

// ---- 9. Power grows with the group size -------------------------------------

void power_monotone(Outcome& out) {
  const std::vector<MethodSpec> methods{method(MethodName::sp), method(MethodName::mp_pooled, {"F", "S"}),
                                        method(MethodName::mp_pooled, {"F", "S", "C"})};
  const std::vector<std::int64_t> grid{10, 20, 30, 40, 60, 80, 100};
  for (auto kind : {ScenarioKind::same, ScenarioKind::double_, ScenarioKind::only}) {
    std::vector<SimulationSummary> by_n;
    for (auto n : grid)
      by_n.push_back(estimate_operating_characteristics(scenario(kind, 0.5, n), methods, 5000, 20240104));
    for (const auto& m : methods) {
      bool mono = true;
      std::string curve;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& row = by_n[i].find(m.tag(), "global");
        curve += (i ? " " : "") + fmt(row.estimate, 3);
        if (i > 0) {
          const auto& prev = by_n[i - 1].find(m.tag(), "global");
          mono = mono && row.estimate >= prev.estimate - 3 * std::hypot(row.se, prev.se);
        }
      }
      out.check(mono, m.tag() + " " + std::string(to_string(kind)) + ": " + curve);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"1 homoscedastic FWER at the nominal level", fwer_homoscedastic},
      {"2 rejection-rate table spot cells", table_rejections},
      {"3 required sample sizes", sample_sizes},
      {"4 heteroscedastic FWER ordering", fwer_heteroscedastic},
      {"5 correlation closed form vs explicit oracle", correlation_oracle},
      {"6 probability engine vs Monte Carlo", probability_engine},
      {"7 model-selection probability", model_selection},
      {"8 CLI determinism across runs and thread counts", cli_determinism},
      {"9 power nondecreasing in group size", power_monotone},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!wanted.empty() && !wanted.count(static_cast<int>(i + 1))) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << criteria[i].first << " (" << fmt(secs, 1) << " s)\n"
              << o.detail.str() << std::flush;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
