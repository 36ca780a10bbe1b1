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

#include "design.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "error.hpp"

namespace mpmcp {

namespace {

std::size_t index_of(const std::vector<VarianceGroup>& groups, const Label& l) {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].label == l) return i;
  return groups.size();
}

}  // namespace

DoseDesign DoseDesign::from_counts(std::vector<double> doses, std::vector<VarianceGroup> variance,
                                   std::vector<TestedPopulation> tested) {
  DoseDesign d;
  d.doses_ = std::move(doses);
  d.variance_ = std::move(variance);
  d.tested_ = std::move(tested);
  d.validate();
  for (const auto& t : d.tested_) {
    std::vector<std::size_t> idx;
    for (const auto& m : t.members) idx.push_back(index_of(d.variance_, m));
    std::sort(idx.begin(), idx.end());
    d.tested_members_.push_back(std::move(idx));
  }
  return d;
}

void DoseDesign::validate() const {
  const std::size_t k = doses_.size();
  require(k >= 2, "design needs at least 2 dose levels");
  for (std::size_t i = 1; i < k; ++i)
    require(doses_[i] > doses_[i - 1], "doses must be strictly increasing");
  for (double x : doses_) require(std::isfinite(x), "doses must be finite");
  require(!variance_.empty(), "variance family V is empty");
  std::set<Label> seen;
  for (const auto& g : variance_) {
    require(!g.label.empty(), "empty population label");
    require(seen.insert(g.label).second, "populations overlap: V label '" + g.label + "' appears twice");
    require(g.sizes.size() == k, "population '" + g.label + "' must have one group size per dose");
    for (auto n : g.sizes) require(n >= 0, "negative group size in population '" + g.label + "'");
  }
  std::set<Label> tested_seen;
  for (const auto& t : tested_) {
    require(!t.label.empty(), "empty population label");
    require(tested_seen.insert(t.label).second, "tested population '" + t.label + "' listed twice");
    require(!t.members.empty(), "tested population '" + t.label + "' has no members");
    std::set<Label> m;
    for (const auto& v : t.members) {
      require(index_of(variance_, v) < variance_.size(),
              "tested population '" + t.label + "' is not a union of V members (unknown '" + v + "')");
      require(m.insert(v).second, "tested population '" + t.label + "' lists '" + v + "' twice");
    }
    // A U label that is also a V label must denote the same set.
    if (index_of(variance_, t.label) < variance_.size())
      require(t.members.size() == 1 && t.members[0] == t.label,
              "label '" + t.label + "' names different sets in U and V");
  }
}

DoseDesign DoseDesign::from_subjects(std::vector<double> doses, std::span<const std::size_t> subject_dose,
                                     const std::vector<std::pair<Label, std::vector<std::size_t>>>& variance_sets,
                                     const std::vector<std::pair<Label, std::vector<std::size_t>>>& tested_sets) {
  const std::size_t n = subject_dose.size();
  const std::size_t k = doses.size();
  for (auto di : subject_dose) require(di < k, "subject dose index out of range");

  std::vector<std::ptrdiff_t> owner(n, -1);
  std::vector<VarianceGroup> variance;
  for (std::size_t v = 0; v < variance_sets.size(); ++v) {
    const auto& [label, ids] = variance_sets[v];
    VarianceGroup g{label, std::vector<std::int64_t>(k, 0)};
    for (auto id : ids) {
      require(id < n, "subject id out of range in population '" + label + "'");
      if (owner[id] >= 0)
        fail(Errc::invalid_argument, "populations overlap: subject " + std::to_string(id) + " is in both '" +
                                         variance_sets[owner[id]].first + "' and '" + label + "'");
      owner[id] = static_cast<std::ptrdiff_t>(v);
      ++g.sizes[subject_dose[id]];
    }
    variance.push_back(std::move(g));
  }
  for (std::size_t id = 0; id < n; ++id)
    require(owner[id] >= 0, "variance populations do not cover subject " + std::to_string(id));

  std::vector<TestedPopulation> tested;
  for (const auto& [label, ids] : tested_sets) {
    std::vector<std::size_t> hits(variance.size(), 0);
    std::set<std::size_t> uniq(ids.begin(), ids.end());
    for (auto id : uniq) {
      require(id < n, "subject id out of range in population '" + label + "'");
      ++hits[owner[id]];
    }
    TestedPopulation t{label, {}};
    for (std::size_t v = 0; v < variance.size(); ++v) {
      const auto full = variance_sets[v].second.size();
      if (hits[v] == 0) continue;
      require(hits[v] == full, "population '" + label + "' is not a union of V members (splits '" +
                                   variance[v].label + "')");
      t.members.push_back(variance[v].label);
    }
    tested.push_back(std::move(t));
  }
  return from_counts(std::move(doses), std::move(variance), std::move(tested));
}

DoseDesign DoseDesign::subgroup(std::vector<double> doses, std::vector<std::int64_t> subgroup_sizes,
                                std::vector<std::int64_t> complement_sizes) {
  return from_counts(std::move(doses),
                     {{"S", std::move(subgroup_sizes)}, {"C", std::move(complement_sizes)}},
                     {{"F", {"S", "C"}}, {"S", {"S"}}, {"C", {"C"}}});
}

DoseDesign DoseDesign::balanced_subgroup(std::vector<double> doses, std::int64_t n_per_dose, double prevalence) {
  require(n_per_dose >= 0, "group size must be nonnegative");
  require(prevalence >= 0.0 && prevalence <= 1.0, "prevalence must lie in [0, 1]");
  const double ns = prevalence * static_cast<double>(n_per_dose);
  const double rounded = std::round(ns);
  require(std::fabs(ns - rounded) < 1e-9,
          "prevalence * group size must be an integer (got " + std::to_string(ns) + ")");
  const auto s = static_cast<std::int64_t>(rounded);
  const std::size_t k = doses.size();
  return subgroup(std::move(doses), std::vector<std::int64_t>(k, s), std::vector<std::int64_t>(k, n_per_dose - s));
}

std::vector<Label> DoseDesign::tested_labels() const {
  std::vector<Label> out;
  for (const auto& t : tested_) out.push_back(t.label);
  return out;
}

std::vector<Label> DoseDesign::variance_labels() const {
  std::vector<Label> out;
  for (const auto& g : variance_) out.push_back(g.label);
  return out;
}

bool DoseDesign::is_variance_population(const Label& p) const { return index_of(variance_, p) < variance_.size(); }

bool DoseDesign::is_tested_population(const Label& p) const {
  return std::any_of(tested_.begin(), tested_.end(), [&](const auto& t) { return t.label == p; });
}

std::vector<std::size_t> DoseDesign::members(const Label& p) const {
  for (std::size_t i = 0; i < tested_.size(); ++i)
    if (tested_[i].label == p) return tested_members_[i];
  const auto v = index_of(variance_, p);
  if (v < variance_.size()) return {v};
  fail(Errc::invalid_argument, "population '" + p + "' is absent from the design");
}

std::int64_t DoseDesign::group_size(const Label& p, std::size_t dose) const {
  require(dose < doses_.size(), "dose index out of range");
  std::int64_t n = 0;
  for (auto v : members(p)) n += variance_[v].sizes[dose];
  return n;
}

std::vector<std::int64_t> DoseDesign::group_sizes(const Label& p) const {
  const auto m = members(p);
  std::vector<std::int64_t> out(doses_.size(), 0);
  for (std::size_t i = 0; i < doses_.size(); ++i)
    for (auto v : m) out[i] += variance_[v].sizes[i];
  return out;
}

std::int64_t DoseDesign::total_size(const Label& p) const {
  const auto n = group_sizes(p);
  return std::accumulate(n.begin(), n.end(), std::int64_t{0});
}

std::int64_t DoseDesign::full_size(std::size_t dose) const {
  std::int64_t n = 0;
  for (const auto& g : variance_) n += g.sizes.at(dose);
  return n;
}

std::int64_t DoseDesign::full_size() const {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < doses_.size(); ++i) n += full_size(i);
  return n;
}

std::int64_t DoseDesign::intersection_size(const Label& p, const Label& q, std::size_t dose) const {
  const auto a = members(p);
  const auto b = members(q);
  std::int64_t n = 0;
  for (auto v : a)
    if (std::binary_search(b.begin(), b.end(), v)) n += variance_[v].sizes.at(dose);
  return n;
}

double DoseDesign::prevalence(const Label& p, std::size_t dose) const {
  const auto full = full_size(dose);
  require(full > 0, "prevalence undefined for an empty dose group");
  return static_cast<double>(group_size(p, dose)) / static_cast<double>(full);
}

std::int64_t DoseDesign::df(const Label& p) const {
  return total_size(p) - static_cast<std::int64_t>(doses_.size());
}

std::int64_t DoseDesign::pooled_df() const {
  std::int64_t nu = 0;
  for (const auto& g : variance_) nu += df(g.label);
  return nu;
}

std::optional<Label> DoseDesign::full_population() const {
  for (std::size_t i = 0; i < tested_.size(); ++i)
    if (tested_members_[i].size() == variance_.size()) return tested_[i].label;
  return std::nullopt;
}

DoseDesign DoseDesign::with_tested(const std::vector<Label>& labels) const {
  std::vector<TestedPopulation> sub;
  for (const auto& l : labels) {
    auto it = std::find_if(tested_.begin(), tested_.end(), [&](const auto& t) { return t.label == l; });
    if (it == tested_.end()) {
      require(is_variance_population(l), "strategy population '" + l + "' absent from design");
      sub.push_back({l, {l}});
    } else {
      sub.push_back(*it);
    }
  }
  return from_counts(doses_, variance_, std::move(sub));
}

// --------------------------------------------------------------------------

CellTable::CellTable(std::vector<double> doses, std::vector<Label> populations)
    : doses_(std::move(doses)), labels_(std::move(populations)), cells_(doses_.size() * labels_.size()) {}

std::optional<std::size_t> CellTable::population_index(const Label& p) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == p) return i;
  return std::nullopt;
}

CellStats CellTable::pooled(std::size_t dose, std::span<const std::size_t> pops) const {
  if (pops.size() == 1) return at(dose, pops[0]);
  CellStats out;
  double sum = 0.0;
  for (auto p : pops) {
    const auto& c = at(dose, p);
    out.n += c.n;
    sum += c.mean * static_cast<double>(c.n);
    out.ss += c.ss;
  }
  if (out.n == 0) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.mean = sum / static_cast<double>(out.n);
  for (auto p : pops) {
    const auto& c = at(dose, p);
    if (c.n > 0) out.ss += static_cast<double>(c.n) * (c.mean - out.mean) * (c.mean - out.mean);
  }
  return out;
}

bool CellTable::has_empty_cells() const {
  return std::any_of(cells_.begin(), cells_.end(), [](const CellStats& c) { return c.n == 0; });
}

TrialData::TrialData(std::vector<double> doses, std::vector<Label> populations, std::vector<Record> records)
    : records_(std::move(records)), cells_(std::move(doses), std::move(populations)) {
  const std::size_t k = cells_.num_doses();
  const std::size_t v = cells_.num_populations();
  std::vector<double> sums(k * v, 0.0);
  for (const auto& r : records_) {
    require(r.dose < k, "record dose index out of range");
    require(r.population < v, "record population index out of range");
    require(std::isfinite(r.response), "non-finite response");
    ++cells_.at(r.dose, r.population).n;
    sums[r.dose * v + r.population] += r.response;
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t p = 0; p < v; ++p) {
      auto& c = cells_.at(i, p);
      c.mean = c.n > 0 ? sums[i * v + p] / static_cast<double>(c.n) : std::numeric_limits<double>::quiet_NaN();
    }
  for (const auto& r : records_) {
    auto& c = cells_.at(r.dose, r.population);
    c.ss += (r.response - c.mean) * (r.response - c.mean);
  }
}

void TrialData::check_against(const DoseDesign& design) const {
  require(design.doses() == doses(), "data doses differ from the design doses");
  for (const auto& g : design.variance_groups()) {
    auto idx = cells_.population_index(g.label);
    require(idx.has_value(), "design population '" + g.label + "' missing from data");
    for (std::size_t i = 0; i < doses().size(); ++i)
      require(cells_.at(i, *idx).n == g.sizes[i],
              "cell count mismatch for population '" + g.label + "' at dose index " + std::to_string(i));
  }
}

// --------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || b == e) return std::nullopt;
  return v;
}

[[noreturn]] void data_error(std::size_t line, const std::string& what) {
  fail(Errc::invalid_argument, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

TrialData load_trial_data(std::istream& in, const DataSchema& schema) {
  require(!schema.populations.empty(), "data schema declares no populations");
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) fail(Errc::invalid_argument, "data file is empty");
  if (!header.empty() && header[0].size() >= 3 && static_cast<unsigned char>(header[0][0]) == 0xEF)
    header[0] = header[0].substr(3);

  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto c_dose = col("dose");
  const auto c_idx = col("dose_idx");
  const auto c_resp = col("response");
  const auto c_pop = col("population");
  if (!c_resp || !c_pop || (!c_dose && !c_idx))
    data_error(lineno, "header must contain dose (or dose_idx), response and population");
  if (!c_dose && !schema.doses) data_error(lineno, "dose_idx column requires declared doses");

  struct Raw {
    double dose;
    std::size_t idx;
    std::size_t pop;
    double y;
    std::size_t line;
  };
  std::vector<Raw> raw;
  const std::size_t need = std::max({c_dose.value_or(0), c_idx.value_or(0), *c_resp, *c_pop}) + 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() < need) data_error(lineno, "expected at least " + std::to_string(need) + " fields");
    Raw r{0.0, 0, 0, 0.0, lineno};
    auto y = parse_double(f[*c_resp]);
    if (!y || !std::isfinite(*y)) data_error(lineno, "non-numeric response '" + f[*c_resp] + "'");
    r.y = *y;
    auto pit = std::find(schema.populations.begin(), schema.populations.end(), f[*c_pop]);
    if (pit == schema.populations.end()) data_error(lineno, "unknown population label '" + f[*c_pop] + "'");
    r.pop = static_cast<std::size_t>(pit - schema.populations.begin());
    if (c_dose) {
      auto d = parse_double(f[*c_dose]);
      if (!d) data_error(lineno, "non-numeric dose '" + f[*c_dose] + "'");
      r.dose = *d;
    } else {
      auto d = parse_double(f[*c_idx]);
      if (!d || *d != std::floor(*d) || *d < 1 || *d > static_cast<double>(schema.doses->size()))
        data_error(lineno, "dose_idx '" + f[*c_idx] + "' outside 1.." + std::to_string(schema.doses->size()));
      r.idx = static_cast<std::size_t>(*d) - 1;
      r.dose = (*schema.doses)[r.idx];
    }
    raw.push_back(r);
  }

  std::vector<double> doses;
  if (schema.doses) {
    doses = *schema.doses;
  } else {
    for (const auto& r : raw) doses.push_back(r.dose);
    std::sort(doses.begin(), doses.end());
    doses.erase(std::unique(doses.begin(), doses.end()), doses.end());
  }
  std::vector<Record> records;
  records.reserve(raw.size());
  for (const auto& r : raw) {
    std::size_t idx = r.idx;
    if (c_dose) {
      auto it = std::find(doses.begin(), doses.end(), r.dose);
      if (it == doses.end()) data_error(r.line, "dose " + std::to_string(r.dose) + " is not a design dose");
      idx = static_cast<std::size_t>(it - doses.begin());
    }
    records.push_back({idx, r.pop, r.y});
  }
  return TrialData(std::move(doses), schema.populations, std::move(records));
}

TrialData load_trial_data(const std::string& path, const DataSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open data file '" + path + "'");
  try {
    return load_trial_data(in, schema);
  } catch (const Error& e) {
    throw Error(e.code(), path + ":" + e.what());
  }
}

void write_trial_data(std::ostream& out, const TrialData& data) {
  std::ostringstream buf;
  buf << std::setprecision(std::numeric_limits<double>::max_digits10);
  buf << "dose,response,population\n";
  for (const auto& r : data.records())
    buf << data.doses()[r.dose] << ',' << r.response << ',' << data.populations()[r.population] << '\n';
  out << buf.str();
}

DoseDesign design_from_data(const TrialData& data, std::vector<TestedPopulation> tested) {
  std::vector<VarianceGroup> groups;
  for (std::size_t p = 0; p < data.populations().size(); ++p) {
    VarianceGroup g{data.populations()[p], {}};
    for (std::size_t i = 0; i < data.doses().size(); ++i) g.sizes.push_back(data.cells().at(i, p).n);
    groups.push_back(std::move(g));
  }
  return DoseDesign::from_counts(data.doses(), std::move(groups), std::move(tested));
}

}  // namespace mpmcp
