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

#include "testing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "error.hpp"

namespace mpmcp {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::size_t> cell_indices(const CellTable& cells, const DoseDesign& design, const Label& population) {
  std::vector<std::size_t> out;
  for (auto v : design.members(population)) {
    const auto& label = design.variance_groups()[v].label;
    const auto idx = cells.population_index(label);
    if (!idx) fail(Errc::invalid_argument, "data has no population '" + label + "'");
    out.push_back(*idx);
  }
  return out;
}

struct PooledSS {
  double ss = 0.0;
  std::int64_t n = 0;
};

PooledSS pooled_ss(const CellTable& cells, const DoseDesign& design, const Label& population) {
  require(cells.num_doses() == design.num_doses(), "data and design differ in the number of doses");
  const auto idx = cell_indices(cells, design, population);
  PooledSS out;
  for (std::size_t i = 0; i < cells.num_doses(); ++i) {
    const auto c = cells.pooled(i, idx);
    if (c.n < 1)
      fail(Errc::invalid_argument,
           "population '" + population + "' has no observations at dose index " + std::to_string(i));
    out.ss += c.ss;
    out.n += c.n;
  }
  return out;
}

double checked_variance(double ss, std::int64_t df, const std::string& what) {
  if (df < 1) fail(Errc::invalid_argument, "zero residual degrees of freedom for " + what);
  const double v = ss / static_cast<double>(df);
  if (!(v > 0.0) || !std::isfinite(v)) fail(Errc::degenerate_data, "zero variance estimate for " + what);
  return v;
}

DoseDesign restrict_design(const DoseDesign& design, const MethodSpec& method) {
  for (const auto& label : method.strategy)
    if (!design.is_tested_population(label) && !design.is_variance_population(label))
      fail(Errc::invalid_argument, "strategy population '" + label + "' absent from design");
  auto d = design.with_tested(method.strategy);
  if (method.name == MethodName::sp && d.members(method.strategy[0]).size() != d.variance_groups().size())
    fail(Errc::invalid_argument, "SP tests the full population only; '" + method.strategy[0] +
                                     "' does not cover the whole sample");
  return d;
}

JointNullModel build_model(const DoseDesign& d, const MethodSpec& method, Eigen::MatrixXd corr,
                           const std::vector<Label>& row_pops) {
  JointNullModel m;
  switch (method.name) {
    case MethodName::sp:
      m = JointNullModel::t(std::move(corr), static_cast<double>(d.df(method.strategy[0])));
      break;
    case MethodName::mp_pooled:
      m = JointNullModel::t(std::move(corr), static_cast<double>(d.pooled_df()));
      break;
    case MethodName::mp_mindf: {
      std::int64_t nu = std::numeric_limits<std::int64_t>::max();
      for (const auto& g : d.variance_groups()) nu = std::min(nu, d.df(g.label));
      m = JointNullModel::t(std::move(corr), static_cast<double>(nu));
      break;
    }
    case MethodName::mp_multdf: {
      std::vector<double> row_df;
      for (const auto& p : row_pops) row_df.push_back(static_cast<double>(d.df(p)));
      m = JointNullModel::multi_df(std::move(corr), std::move(row_df));
      break;
    }
    case MethodName::mp_normal:
      m = JointNullModel::normal(std::move(corr));
      break;
  }
  m.method_tag = method.tag();
  return m;
}

VarianceSpec plugin_spec(const DoseDesign& d, const VarianceEstimates& v) {
  std::vector<std::pair<Label, double>> pairs;
  for (const auto& g : d.variance_groups()) pairs.emplace_back(g.label, v.at(g.label));
  return VarianceSpec::per_population(d, pairs);
}

std::vector<Label> row_populations(std::span<const PopulationContrasts> contrasts) {
  std::vector<Label> out;
  for (const auto& p : contrasts)
    for (std::size_t m = 0; m < p.contrasts.size(); ++m) out.push_back(p.population);
  return out;
}

// Critical values depend only on the design, contrasts and QMC settings, so
// repeated simulations on one design share them.
double cached_critical_value(const JointNullModel& model, const MethodSpec& method) {
  std::ostringstream key;
  key << std::setprecision(17) << method.tag() << '|' << method.alpha << '|' << method.qmc.seed << '|'
      << method.qmc.tol << '|' << method.qmc.quantile_tol << '|' << method.qmc.shifts << '|'
      << method.qmc.max_points << '|' << model.df << '|';
  for (Eigen::Index i = 0; i < model.corr.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) key << model.corr(i, j) << ',';
  static std::mutex mu;
  static std::map<std::string, double> cache;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key.str()); it != cache.end()) return it->second;
  }
  const double c = equicoordinate_quantile(model, method.alpha, method.qmc);
  std::lock_guard lock(mu);
  cache.emplace(key.str(), c);
  return c;
}

}  // namespace

std::string_view to_string(MethodName name) {
  switch (name) {
    case MethodName::sp: return "SP";
    case MethodName::mp_pooled: return "MP-Pooled";
    case MethodName::mp_mindf: return "MP-MinDF";
    case MethodName::mp_multdf: return "MP-MultDF";
    case MethodName::mp_normal: return "MP-Normal";
  }
  return "?";
}

std::optional<MethodName> parse_method_name(std::string_view text) {
  auto s = lower(text);
  if (s == "sp") return MethodName::sp;
  if (s.rfind("mp-", 0) == 0) s = s.substr(3);
  if (s == "pooled") return MethodName::mp_pooled;
  if (s == "mindf") return MethodName::mp_mindf;
  if (s == "multdf") return MethodName::mp_multdf;
  if (s == "normal") return MethodName::mp_normal;
  return std::nullopt;
}

bool MethodSpec::heteroscedastic() const {
  return name == MethodName::mp_mindf || name == MethodName::mp_multdf || name == MethodName::mp_normal;
}

std::string MethodSpec::strategy_tag() const {
  std::string s;
  for (const auto& p : strategy) s += (s.empty() ? "" : "+") + p;
  return s;
}

std::string MethodSpec::tag() const {
  if (name == MethodName::sp) return "SP";
  return std::string(to_string(name)) + "(" + strategy_tag() + ")";
}

void MethodSpec::validate() const {
  require(alpha > 0.0 && alpha <= 0.5, "alpha must lie in (0, 0.5]");
  require(!strategy.empty(), "strategy names no population");
  for (std::size_t i = 0; i < strategy.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) require(strategy[i] != strategy[j], "strategy repeats '" + strategy[i] + "'");
  if (name == MethodName::sp) require(strategy.size() == 1, "SP requires a single full population");
  require(qmc.tol > 0.0, "QMC tolerance must be positive");
}

double VarianceEstimates::at(const Label& population) const {
  for (const auto& [label, v] : values)
    if (label == population) return v;
  fail(Errc::invalid_argument, "no variance estimate for population '" + population + "'");
}

double pooled_variance_population(const CellTable& cells, const DoseDesign& design, const Label& population) {
  const auto s = pooled_ss(cells, design, population);
  return checked_variance(s.ss, s.n - static_cast<std::int64_t>(design.num_doses()), "population '" + population + "'");
}

double pooled_variance_population(const TrialData& data, const DoseDesign& design, const Label& population) {
  return pooled_variance_population(data.cells(), design, population);
}

VarianceEstimates variance_estimates(const CellTable& cells, const DoseDesign& design, const MethodSpec& method) {
  VarianceEstimates out;
  auto add = [&](const Label& l, double v) {
    for (const auto& [label, _] : out.values)
      if (label == l) return;
    out.values.emplace_back(l, v);
  };
  const auto k = static_cast<std::int64_t>(design.num_doses());
  switch (method.name) {
    case MethodName::sp:
      add(method.strategy[0], pooled_variance_population(cells, design, method.strategy[0]));
      break;
    case MethodName::mp_pooled: {
      double ss = 0.0;
      std::int64_t df = 0;
      for (const auto& g : design.variance_groups()) {
        const auto s = pooled_ss(cells, design, g.label);
        ss += s.ss;
        df += s.n - k;
      }
      const double v = checked_variance(ss, df, "the pooled estimate");
      for (const auto& p : method.strategy) add(p, v);
      for (const auto& g : design.variance_groups()) add(g.label, v);
      break;
    }
    default: {
      std::vector<double> by_v;
      for (const auto& g : design.variance_groups()) {
        by_v.push_back(pooled_variance_population(cells, design, g.label));
      }
      for (const auto& p : method.strategy) {
        double num = 0.0;
        double n = 0.0;
        for (auto v : design.members(p)) {
          const auto nv = static_cast<double>(design.total_size(design.variance_groups()[v].label));
          num += nv * by_v[v];
          n += nv;
        }
        add(p, num / n);
      }
      for (std::size_t v = 0; v < by_v.size(); ++v) add(design.variance_groups()[v].label, by_v[v]);
      break;
    }
  }
  return out;
}

VarianceEstimates variance_estimates(const TrialData& data, const DoseDesign& design, const MethodSpec& method) {
  return variance_estimates(data.cells(), design, method);
}

std::vector<double> test_statistics(const CellTable& cells, const DoseDesign& design,
                                    std::span<const PopulationContrasts> contrasts,
                                    const VarianceEstimates& variances) {
  const std::size_t k = design.num_doses();
  require(cells.num_doses() == k, "data and design differ in the number of doses");
  std::vector<double> out;
  std::vector<double> mean(k), n(k);
  for (const auto& pc : contrasts) {
    const auto idx = cell_indices(cells, design, pc.population);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = cells.pooled(i, idx);
      if (c.n < 1)
        fail(Errc::invalid_argument,
             "population '" + pc.population + "' has no observations at dose index " + std::to_string(i));
      mean[i] = c.mean;
      n[i] = static_cast<double>(c.n);
    }
    const double s2 = variances.at(pc.population);
    if (!(s2 > 0.0)) fail(Errc::degenerate_data, "zero variance estimate for population '" + pc.population + "'");
    for (const auto& c : pc.contrasts) {
      require(c.coef.size() == k, "contrast length differs from the number of doses");
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        num += c.coef[i] * mean[i];
        den += c.coef[i] * c.coef[i] / n[i];
      }
      out.push_back(num / std::sqrt(s2 * den));
    }
  }
  return out;
}

std::vector<double> test_statistics(const TrialData& data, const DoseDesign& design,
                                    std::span<const PopulationContrasts> contrasts,
                                    const VarianceEstimates& variances) {
  return test_statistics(data.cells(), design, contrasts, variances);
}

bool TestReport::population_rejected(const Label& population) const {
  for (const auto& [label, r] : population_reject)
    if (label == population) return r;
  fail(Errc::invalid_argument, "population '" + population + "' was not tested");
}

void TestReport::write_csv(std::ostream& out) const {
  std::ostringstream buf;
  buf << std::setprecision(12);
  buf << "method,population,shape,statistic,pvalue,pvalue_se,df,reject\n";
  for (const auto& h : hypotheses) {
    buf << method << ',' << h.population << ',' << h.shape << ',' << h.statistic << ',' << h.pvalue << ','
        << h.pvalue_error << ',';
    if (std::isfinite(h.df))
      buf << h.df;
    else
      buf << "inf";
    buf << ',' << (h.reject ? "true" : "false") << '\n';
  }
  out << buf.str();
}

void TestReport::write_text(std::ostream& out) const {
  std::ostringstream buf;
  buf << "Multiple contrast test: " << method << ", one-sided alpha = " << alpha << "\n\n";
  buf << std::fixed;
  buf << "Variance estimates:\n";
  for (const auto& [label, v] : variances.values) buf << "  " << label << ": " << std::setprecision(6) << v << '\n';
  buf << "Degrees of freedom:\n";
  for (const auto& [label, d] : df) {
    buf << "  " << label << ": ";
    if (std::isfinite(d))
      buf << std::setprecision(0) << d << '\n';
    else
      buf << "inf (normal)\n";
  }
  buf << "\n  " << std::left << std::setw(12) << "population" << std::setw(14) << "shape" << std::right
      << std::setw(11) << "T" << std::setw(13) << "adj. p" << "  decision\n";
  for (const auto& h : hypotheses) {
    buf << "  " << std::left << std::setw(12) << h.population << std::setw(14) << h.shape << std::right
        << std::setw(11) << std::setprecision(4) << h.statistic << std::setw(13) << std::setprecision(6) << h.pvalue
        << "  " << (h.reject ? "reject" : "retain") << '\n';
  }
  buf << "\nPopulation null hypotheses:\n";
  for (const auto& [label, r] : population_reject) buf << "  " << label << ": " << (r ? "rejected" : "retained") << '\n';
  buf << "Global null hypothesis: " << (global_reject ? "rejected" : "retained") << '\n';
  const auto best = select_best_model(*this);
  buf << "Selected model: " << (best ? *best : std::string("none")) << '\n';
  out << buf.str();
}

TestReport run_mcp(const CellTable& cells, const DoseDesign& design, std::span<const CandidateShape> shapes,
                   const MethodSpec& method) {
  method.validate();
  const auto d = restrict_design(design, method);
  const auto contrasts = population_contrasts(d, shapes);
  TestReport report;
  report.method = method.tag();
  report.alpha = method.alpha;
  report.variances = variance_estimates(cells, d, method);
  const auto t = test_statistics(cells, d, contrasts, report.variances);
  report.correlation = method.heteroscedastic() ? corr_general(d, contrasts, plugin_spec(d, report.variances))
                                                : corr_homoscedastic(d, contrasts);
  const auto pops = row_populations(contrasts);
  const auto model = build_model(d, method, report.correlation.values(), pops);

  std::size_t row = 0;
  for (const auto& pc : contrasts) {
    bool any = false;
    report.df.emplace_back(pc.population, model.df_for_row(row));
    for (const auto& c : pc.contrasts) {
      HypothesisResult h;
      h.population = pc.population;
      h.shape = c.shape;
      h.statistic = t[row];
      const auto p = adjusted_pvalue(model, t[row], row, method.qmc);
      h.pvalue = p.value;
      h.pvalue_error = p.error;
      h.df = model.df_for_row(row);
      h.reject = h.pvalue < method.alpha;
      any = any || h.reject;
      report.hypotheses.push_back(std::move(h));
      ++row;
    }
    report.population_reject.emplace_back(pc.population, any);
    report.global_reject = report.global_reject || any;
  }
  return report;
}

TestReport run_mcp(const TrialData& data, const DoseDesign& design, std::span<const CandidateShape> shapes,
                   const MethodSpec& method) {
  data.check_against(design);
  return run_mcp(data.cells(), design, shapes, method);
}

std::optional<std::string> select_best_model(const TestReport& report) {
  const HypothesisResult* best = nullptr;
  for (const auto& h : report.hypotheses)
    if (h.reject && (!best || h.pvalue < best->pvalue || (h.pvalue == best->pvalue && h.statistic > best->statistic)))
      best = &h;
  if (!best) return std::nullopt;
  return best->shape;
}

PreparedAnalysis::PreparedAnalysis(const DoseDesign& design, std::span<const CandidateShape> shapes,
                                   const MethodSpec& method)
    : design_(restrict_design(design, (method.validate(), method))), method_(method) {
  contrasts_ = population_contrasts(design_, shapes);
  for (const auto& c : contrasts_[0].contrasts) shape_names_.push_back(c.shape);
  for (std::size_t p = 0; p < contrasts_.size(); ++p) {
    require(contrasts_[p].contrasts.size() == shape_names_.size(), "populations differ in candidate sets");
    for (std::size_t m = 0; m < contrasts_[p].contrasts.size(); ++m) {
      row_pop_.push_back(p);
      row_shape_.push_back(m);
    }
  }
  homo_corr_ = corr_homoscedastic(design_, contrasts_);
  if (!method_.heteroscedastic()) {
    const auto model = build_model(design_, method_, homo_corr_.values(), row_populations(contrasts_));
    critical_ = cached_critical_value(model, method_);
  }
}

TrialDecision PreparedAnalysis::decide(const CellTable& cells, std::uint64_t qmc_seed) const {
  const auto var = variance_estimates(cells, design_, method_);
  const auto t = test_statistics(cells, design_, contrasts_, var);
  const std::size_t np = contrasts_.size();
  TrialDecision out;
  out.population.assign(np, false);

  // Row with the largest statistic in each population.
  std::vector<std::size_t> top(np, t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    auto& cur = top[row_pop_[r]];
    if (cur == t.size() || t[r] > t[cur]) cur = r;
  }

  if (critical_) {
    for (std::size_t p = 0; p < np; ++p) out.population[p] = t[top[p]] > *critical_;
  } else {
    const auto corr = corr_general(design_, contrasts_, plugin_spec(design_, var));
    const auto model = build_model(design_, method_, corr.values(), row_populations(contrasts_));
    auto opts = method_.qmc;
    opts.seed = qmc_seed;
    if (model.has_row_df()) {
      for (std::size_t p = 0; p < np; ++p)
        out.population[p] = pvalue_below(model, t[top[p]], top[p], method_.alpha, opts);
    } else {
      // With one df the p-value is monotone in the statistic, so populations
      // are decided from the largest statistic downwards.
      std::vector<std::size_t> order(np);
      for (std::size_t p = 0; p < np; ++p) order[p] = p;
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return t[top[a]] > t[top[b]]; });
      for (auto p : order) {
        out.population[p] = pvalue_below(model, t[top[p]], top[p], method_.alpha, opts);
        if (!out.population[p]) break;
      }
    }
    if (model.has_row_df()) {
      std::vector<std::size_t> cand;
      for (std::size_t p = 0; p < np; ++p)
        if (out.population[p]) cand.push_back(top[p]);
      if (cand.size() > 1) {
        std::size_t best = cand[0];
        for (std::size_t i = 1; i < cand.size(); ++i)
          if (pvalue_less(model, t[cand[i]], cand[i], t[best], best, opts)) best = cand[i];
        out.global = true;
        out.selected = row_shape_[best];
        return out;
      }
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t p = 0; p < np; ++p)
    if (out.population[p]) {
      out.global = true;
      if (!best || t[top[p]] > t[*best]) best = top[p];
    }
  if (best) out.selected = row_shape_[*best];
  return out;
}

}  // namespace mpmcp
