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

#include "simulate.hpp"

#include <algorithm>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace mpmcp {

namespace {

constexpr std::uint64_t kStreamSubjects = 1;
constexpr std::uint64_t kStreamCells = 2;
constexpr std::uint64_t kStreamQmc = 3;

std::vector<double> means_with_slope(const ScenarioSpec& s, double factor) {
  std::vector<double> out;
  if (s.shape.kind == ShapeKind::constant) {
    for (double d : s.doses) out.push_back(eval_full(s.shape, d));
    return out;
  }
  auto shape = s.shape;
  auto full = calibrate_effect(shape, s.doses, s.delta);
  full.slope *= factor;
  shape.full = full;
  for (double d : s.doses) out.push_back(eval_full(shape, d));
  return out;
}

struct Counts {
  std::int64_t global = 0;
  std::vector<std::int64_t> population;
  std::vector<std::int64_t> selected;
  std::int64_t failures = 0;

  void add(const Counts& o) {
    global += o.global;
    failures += o.failures;
    for (std::size_t i = 0; i < population.size(); ++i) population[i] += o.population[i];
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] += o.selected[i];
  }
};

double binomial_se(double p, std::int64_t n) {
  return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::same: return "same";
    case ScenarioKind::double_: return "double";
    case ScenarioKind::only: return "only";
  }
  return "?";
}

std::optional<ScenarioKind> parse_scenario_kind(std::string_view text) {
  if (text == "same") return ScenarioKind::same;
  if (text == "double") return ScenarioKind::double_;
  if (text == "only") return ScenarioKind::only;
  return std::nullopt;
}

std::string_view to_string(SubgroupRounding r) { return r == SubgroupRounding::exact ? "exact" : "nearest"; }

std::optional<SubgroupRounding> parse_subgroup_rounding(std::string_view text) {
  if (text == "exact") return SubgroupRounding::exact;
  if (text == "nearest") return SubgroupRounding::nearest;
  return std::nullopt;
}

void ScenarioSpec::validate() const {
  shape.validate();
  require(prevalence > 0.0 && prevalence < 1.0, "prevalence must lie in (0, 1)");
  require(sigma_s > 0.0 && std::isfinite(sigma_s) && sigma_c > 0.0 && std::isfinite(sigma_c),
          "sigma_s and sigma_c must be positive");
  require(group_size >= 1, "group size must be positive");
  require(delta >= 0.0 && std::isfinite(delta), "delta must be non-negative");
  design();
}

std::int64_t ScenarioSpec::subgroup_size() const {
  const double sn = prevalence * static_cast<double>(group_size);
  if (rounding == SubgroupRounding::exact && std::fabs(sn - std::round(sn)) > 1e-9)
    fail(Errc::invalid_argument, "subgroup cell size prevalence * group size = " + std::to_string(sn) +
                                     " is not an integer");
  const auto ns = static_cast<std::int64_t>(std::nearbyint(sn));
  if (ns < 1 || ns >= group_size)
    fail(Errc::invalid_argument, "subgroup and complement need at least one subject per dose");
  return ns;
}

DoseDesign ScenarioSpec::design() const {
  const auto ns = subgroup_size();
  return DoseDesign::subgroup(doses, std::vector<std::int64_t>(doses.size(), ns),
                              std::vector<std::int64_t>(doses.size(), group_size - ns));
}

std::vector<double> ScenarioSpec::subgroup_means() const { return means_with_slope(*this, 1.0); }

std::vector<double> ScenarioSpec::complement_means() const {
  switch (scenario) {
    case ScenarioKind::same: return means_with_slope(*this, 1.0);
    case ScenarioKind::double_: return means_with_slope(*this, 0.5);
    case ScenarioKind::only: return means_with_slope(*this, 0.0);
  }
  return {};
}

TrialData generate_trial(const ScenarioSpec& scenario, std::uint64_t seed) {
  scenario.validate();
  const std::int64_t ns = scenario.subgroup_size();
  const std::int64_t counts[2] = {ns, scenario.group_size - ns};
  const std::vector<double> means[2] = {scenario.subgroup_means(), scenario.complement_means()};
  const double sigma[2] = {scenario.sigma_s, scenario.sigma_c};
  std::vector<Record> records;
  records.reserve(static_cast<std::size_t>(scenario.group_size) * scenario.doses.size());
  for (std::size_t i = 0; i < scenario.doses.size(); ++i) {
    for (std::size_t p = 0; p < 2; ++p) {
      CounterRng rng(derive_key(seed, {kStreamSubjects, i, p}));
      boost::random::normal_distribution<double> eps(0.0, sigma[p]);
      for (std::int64_t j = 0; j < counts[p]; ++j) records.push_back({i, p, means[p][i] + eps(rng)});
    }
  }
  return TrialData(scenario.doses, {"S", "C"}, std::move(records));
}

namespace {

// Scenario quantities needed per replicate, computed once.
struct CellSampler {
  std::vector<double> doses;
  std::int64_t n[2];
  std::vector<double> means[2];
  double sigma[2];

  explicit CellSampler(const ScenarioSpec& s)
      : doses(s.doses), means{s.subgroup_means(), s.complement_means()}, sigma{s.sigma_s, s.sigma_c} {
    n[0] = s.subgroup_size();
    n[1] = s.group_size - n[0];
  }

  CellTable draw(std::uint64_t seed) const {
    CellTable cells(doses, {"S", "C"});
    for (std::size_t i = 0; i < doses.size(); ++i) {
      for (std::size_t p = 0; p < 2; ++p) {
        auto& c = cells.at(i, p);
        c.n = n[p];
        if (c.n == 0) {
          c.mean = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        CounterRng rng(derive_key(seed, {kStreamCells, i, p}));
        boost::random::normal_distribution<double> z;
        const double nn = static_cast<double>(c.n);
        c.mean = means[p][i] + sigma[p] * z(rng) / std::sqrt(nn);
        if (c.n > 1) {
          boost::random::chi_squared_distribution<double> chi(nn - 1.0);
          c.ss = sigma[p] * sigma[p] * chi(rng);
        }
      }
    }
    return cells;
  }
};

}  // namespace

CellTable sample_cells(const ScenarioSpec& scenario, std::uint64_t seed) {
  scenario.validate();
  return CellSampler(scenario).draw(seed);
}

const SummaryRow& SimulationSummary::find(const std::string& method_tag, const std::string& hypothesis) const {
  for (const auto& r : rows) {
    const std::string tag = r.method == "SP" ? r.method : r.method + "(" + r.strategy + ")";
    if (tag == method_tag && r.hypothesis == hypothesis) return r;
  }
  fail(Errc::invalid_argument, "no summary row for " + method_tag + " / " + hypothesis);
}

void SimulationSummary::write_csv_header(std::ostream& out) {
  out << "method,strategy,scenario,prevalence,shape,hypothesis,estimate,se,nsim,seed,group_size,sigma_s,sigma_c\n";
}

void SimulationSummary::write_csv(std::ostream& out, bool header) const {
  std::ostringstream buf;
  if (header) write_csv_header(buf);
  buf << std::setprecision(10);
  for (const auto& r : rows) {
    buf << r.method << ',' << r.strategy << ',' << r.scenario << ',' << r.prevalence << ',' << r.shape << ','
        << r.hypothesis << ',' << r.estimate << ',' << r.se << ',' << r.nsim << ',' << r.seed << ',' << r.group_size
        << ',' << r.sigma_s << ',' << r.sigma_c << '\n';
  }
  out << buf.str();
}

SimulationSummary estimate_operating_characteristics(const ScenarioSpec& scenario,
                                                     std::span<const MethodSpec> methods, std::int64_t nsim,
                                                     std::uint64_t master_seed, unsigned threads,
                                                     std::span<const CandidateShape> candidates) {
  scenario.validate();
  require(nsim >= 1, "nsim must be at least 1");
  require(!methods.empty(), "no methods given");
  const auto design = scenario.design();
  const auto defaults = default_candidates();
  if (candidates.empty()) candidates = defaults;

  std::vector<PreparedAnalysis> prepared;
  for (const auto& m : methods) prepared.emplace_back(design, candidates, m);
  const CellSampler sampler(scenario);

  const std::size_t nm = prepared.size();
  auto fresh = [&] {
    std::vector<Counts> c(nm);
    for (std::size_t m = 0; m < nm; ++m) {
      c[m].population.assign(prepared[m].method().strategy.size(), 0);
      c[m].selected.assign(prepared[m].shape_names().size(), 0);
    }
    return c;
  };

  auto run_range = [&](std::int64_t begin, std::int64_t end, std::vector<Counts>& counts) {
    for (std::int64_t r = begin; r < end; ++r) {
      const auto rep = derive_key(master_seed, {static_cast<std::uint64_t>(r)});
      const auto cells = sampler.draw(rep);
      for (std::size_t m = 0; m < nm; ++m) {
        try {
          const auto d = prepared[m].decide(cells, derive_key(rep, {kStreamQmc, m}));
          auto& c = counts[m];
          if (d.global) ++c.global;
          for (std::size_t p = 0; p < d.population.size(); ++p)
            if (d.population[p]) ++c.population[p];
          if (d.selected) ++c.selected[*d.selected];
        } catch (const Error&) {
          ++counts[m].failures;
        }
      }
    }
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::int64_t>(workers, nsim));
  auto total = fresh();
  if (workers <= 1) {
    run_range(0, nsim, total);
  } else {
    std::vector<std::vector<Counts>> parts(workers, fresh());
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      const std::int64_t b = nsim * w / workers;
      const std::int64_t e = nsim * (w + 1) / workers;
      pool.emplace_back([&, w, b, e] {
        try {
          run_range(b, e, parts[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (const auto& p : parts)
      for (std::size_t m = 0; m < nm; ++m) total[m].add(p[m]);
  }

  SimulationSummary out;
  for (std::size_t m = 0; m < nm; ++m) {
    const auto& spec = prepared[m].method();
    SummaryRow base;
    base.method = std::string(to_string(spec.name));
    base.strategy = spec.strategy_tag();
    base.scenario = std::string(to_string(scenario.scenario));
    base.prevalence = scenario.prevalence;
    base.shape = scenario.shape.name();
    base.seed = master_seed;
    base.group_size = scenario.group_size;
    base.sigma_s = scenario.sigma_s;
    base.sigma_c = scenario.sigma_c;
    auto push = [&](std::string hyp, std::int64_t k, std::int64_t n) {
      SummaryRow r = base;
      r.hypothesis = std::move(hyp);
      r.estimate = n > 0 ? static_cast<double>(k) / static_cast<double>(n) : 0.0;
      r.se = binomial_se(r.estimate, n);
      r.nsim = n;
      out.rows.push_back(std::move(r));
    };
    const auto& c = total[m];
    push("global", c.global, nsim);
    for (std::size_t p = 0; p < spec.strategy.size(); ++p) push(spec.strategy[p], c.population[p], nsim);
    for (std::size_t s = 0; s < c.selected.size(); ++s)
      push("select:" + prepared[m].shape_names()[s], c.selected[s], c.global);
    push("failures", c.failures, nsim);
  }
  return out;
}

}  // namespace mpmcp
