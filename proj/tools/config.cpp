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

#include "config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mpmcp_cli {
namespace {

constexpr std::array<const char*, 6> kShapeNames{"constant", "emax", "linear", "exponential", "logistic",
                                                 "quadratic"};
// Config names of param1/param2 per shape kind; empty when unused.
constexpr std::array<std::array<const char*, 2>, 6> kShapeParams{{
    {"", ""},
    {"ed50", ""},
    {"", ""},
    {"delta", ""},
    {"ed50", "delta"},
    {"curvature", ""},
}};
constexpr std::array<const char*, 5> kMethodNames{"SP", "MP-Pooled", "MP-MinDF", "MP-MultDF", "MP-Normal"};
constexpr std::array<const char*, 3> kScenarioNames{"same", "double", "only"};
constexpr std::array<const char*, 2> kRoundingNames{"exact", "nearest"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string pointer_token(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

class Scanner {
 public:
  Scanner(std::string_view text, std::map<std::string, int>& lines) : s_(text), lines_(lines) {}

  void run() { value(""); }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }

  std::string string() {
    std::string out;
    ++i_;  // opening quote
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
        ++i_;
        if (s_[i_] == 'u') {
          // Keys with \u escapes are rare; keep the raw escape so lookups
          // degrade to the parent's line rather than fail.
          out += "\\u";
          ++i_;
          continue;
        }
        out += s_[i_] == 'n' ? '\n' : s_[i_] == 't' ? '\t' : s_[i_];
      } else {
        out += s_[i_];
      }
      ++i_;
    }
    ++i_;  // closing quote
    return out;
  }

  void value(const std::string& ptr) {
    ws();
    if (i_ >= s_.size()) return;
    lines_.emplace(ptr, line_);
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      ws();
      if (i_ < s_.size() && s_[i_] == '}') {
        ++i_;
        return;
      }
      while (i_ < s_.size()) {
        ws();
        const std::string key = string();
        ws();
        ++i_;  // ':'
        value(ptr + "/" + pointer_token(key));
        ws();
        if (i_ < s_.size() && s_[i_++] == '}') return;
      }
    } else if (c == '[') {
      ++i_;
      ws();
      if (i_ < s_.size() && s_[i_] == ']') {
        ++i_;
        return;
      }
      for (std::size_t k = 0; i_ < s_.size(); ++k) {
        value(ptr + "/" + std::to_string(k));
        ws();
        if (i_ < s_.size() && s_[i_++] == ']') return;
      }
    } else if (c == '"') {
      string();
    } else {
      while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) && s_[i_] != ',' &&
             s_[i_] != ']' && s_[i_] != '}')
        ++i_;
    }
  }

  std::string_view s_;
  std::map<std::string, int>& lines_;
  std::size_t i_ = 0;
  int line_ = 1;
};

// A JSON value plus where it came from, for error messages.
class Node {
 public:
  Node(const Json& j, std::string ptr, const std::string& source, const LineMap& lines)
      : j_(j), ptr_(std::move(ptr)), source_(source), lines_(lines) {}

  const Json& json() const { return j_; }
  const std::string& pointer() const { return ptr_; }

  [[noreturn]] void fail(const std::string& msg) const {
    const std::string where = ptr_.empty() ? std::string("top level") : ptr_;
    throw ConfigError(source_ + ":" + std::to_string(lines_.line(ptr_)) + ": " + where + ": " + msg);
  }

  bool has(const char* key) const { return j_.contains(key); }

  Node at(const std::string& key) const { return {j_.at(key), ptr_ + "/" + pointer_token(key), source_, lines_}; }

  Node at(std::size_t index) const { return {j_.at(index), ptr_ + "/" + std::to_string(index), source_, lines_}; }

  void expect_object() const {
    if (!j_.is_object()) fail("expected an object");
  }

  void allow_keys(std::initializer_list<const char*> keys) const {
    expect_object();
    for (const auto& [k, v] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
        at(k).fail("unknown key '" + k + "'");
    }
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }

  std::int64_t integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer() const {
    if (j_.is_number_unsigned()) return j_.get<std::uint64_t>();
    if (j_.is_number_integer() && j_.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j_.get<std::int64_t>());
    fail("expected a non-negative integer");
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  /// Elements of an array, or the value itself when it is a scalar.
  std::vector<Node> elements() const {
    std::vector<Node> out;
    if (j_.is_array()) {
      if (j_.empty()) fail("expected a non-empty list");
      for (std::size_t i = 0; i < j_.size(); ++i) out.push_back(at(i));
    } else {
      out.push_back(*this);
    }
    return out;
  }

 private:
  const Json& j_;
  std::string ptr_;
  const std::string& source_;
  const LineMap& lines_;
};

void check_status(const Node& node, mpmcp_status status) {
  if (status != MPMCP_OK) node.fail(mpmcp_last_error());
}

int pick(const Node& node, std::string_view value, const auto& names, const char* what) {
  const auto v = lower(value);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (v == lower(names[i])) return static_cast<int>(i);
  std::string list;
  for (const char* n : names) list += std::string(list.empty() ? "" : ", ") + n;
  node.fail("unknown " + std::string(what) + " '" + std::string(value) + "' (expected one of " + list + ")");
}

ShapeConfig parse_shape(const Node& node) {
  ShapeConfig out;
  const bool object = node.json().is_object();
  if (object && !node.has("kind")) node.fail("missing key 'kind'");
  const Node kind_node = object ? node.at("kind") : node;
  const std::string kind = kind_node.string();
  if (mpmcp_shape_named(lower(kind).c_str(), &out.shape) != MPMCP_OK)
    kind_node.fail("unknown shape '" + kind + "' (expected one of constant, emax, linear, exponential, "
                   "logistic, quadratic)");
  if (object) {
    const auto& params = kShapeParams[static_cast<std::size_t>(out.shape.kind)];
    for (const auto& [k, v] : node.json().items()) {
      if (k == "kind") continue;
      if (params[0][0] && k == params[0])
        out.shape.param1 = node.at(k).number();
      else if (params[1][0] && k == params[1])
        out.shape.param2 = node.at(k).number();
      else
        node.at(k).fail("unknown parameter '" + k + "' for shape " + out.name());
    }
  }
  check_status(node, mpmcp_shape_validate(&out.shape));
  return out;
}

Json shape_json(const ShapeConfig& s) {
  Json j;
  j["kind"] = s.name();
  const auto& params = kShapeParams[static_cast<std::size_t>(s.shape.kind)];
  if (params[0][0]) j[params[0]] = s.shape.param1;
  if (params[1][0]) j[params[1]] = s.shape.param2;
  return j;
}

std::string normalize_members(const Node& node, const std::string& text) {
  std::string out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) node.fail("empty population label in '" + text + "'");
    out += (out.empty() ? "" : "+") + cur;
    cur.clear();
  };
  for (char c : text) {
    if (c == '+')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      cur += c;
  }
  flush();
  return out;
}

MethodConfig parse_method(const Node& node, std::uint64_t seed) {
  node.allow_keys({"name", "strategy", "alpha", "qmc_tol"});
  if (!node.has("name")) node.fail("missing key 'name'");
  MethodConfig m;
  // The "MP-" prefix is optional, as in "MinDF".
  std::string name(node.at("name").string());
  if (lower(name) != "sp" && lower(name).rfind("mp-", 0) != 0) name = "MP-" + name;
  m.name = pick(node.at("name"), name, kMethodNames, "method");
  if (m.name != MPMCP_METHOD_SP) m.strategy = "F+S";
  if (node.has("strategy")) m.strategy = normalize_members(node.at("strategy"), node.at("strategy").string());
  if (node.has("alpha")) m.alpha = node.at("alpha").number();
  if (node.has("qmc_tol")) m.qmc_tol = node.at("qmc_tol").number();
  const mpmcp_method c{m.name, m.strategy.c_str(), m.alpha, m.qmc_tol, seed};
  check_status(node, mpmcp_method_validate(&c));
  return m;
}

template <class T, class F>
std::vector<T> list_of(const Node& parent, const char* key, std::vector<T> fallback, F&& one) {
  if (!parent.has(key)) return fallback;
  std::vector<T> out;
  for (const auto& e : parent.at(key).elements()) out.push_back(one(e));
  return out;
}

ScenarioGrid parse_grid(const Node* node, bool with_group_size) {
  ScenarioGrid g;
  g.shape = {ShapeConfig{}};
  mpmcp_shape_named("emax", &g.shape[0].shape);
  g.scenario = {MPMCP_SCENARIO_SAME};
  g.prevalence = {0.5};
  g.sigma_s = {1.478};
  g.sigma_c = {1.478};
  g.group_size = {75};
  g.delta = {0.6};
  if (!node) return g;
  if (with_group_size)
    node->allow_keys({"shape", "scenario", "prevalence", "sigma_s", "sigma_c", "group_size", "delta"});
  else
    node->allow_keys({"shape", "scenario", "prevalence", "sigma_s", "sigma_c", "delta"});
  g.shape = list_of(*node, "shape", g.shape, parse_shape);
  g.scenario = list_of(*node, "scenario", g.scenario,
                       [](const Node& n) { return pick(n, n.string(), kScenarioNames, "scenario"); });
  auto num = [](const Node& n) { return n.number(); };
  g.prevalence = list_of(*node, "prevalence", g.prevalence, num);
  g.sigma_s = list_of(*node, "sigma_s", g.sigma_s, num);
  g.sigma_c = list_of(*node, "sigma_c", g.sigma_c, num);
  if (with_group_size) g.group_size = list_of(*node, "group_size", g.group_size, [](const Node& n) {
    return n.integer();
  });
  g.delta = list_of(*node, "delta", g.delta, num);
  return g;
}

template <class T>
Json arr(const std::vector<T>& v) {
  Json j = Json::array();
  for (const auto& x : v) j.push_back(x);
  return j;
}

Json grid_json(const ScenarioGrid& g, bool with_group_size) {
  Json j;
  j["shape"] = Json::array();
  for (const auto& s : g.shape) j["shape"].push_back(shape_json(s));
  j["scenario"] = Json::array();
  for (int s : g.scenario) j["scenario"].push_back(kScenarioNames[static_cast<std::size_t>(s)]);
  j["prevalence"] = arr(g.prevalence);
  j["sigma_s"] = arr(g.sigma_s);
  j["sigma_c"] = arr(g.sigma_c);
  if (with_group_size) j["group_size"] = arr(g.group_size);
  j["delta"] = arr(g.delta);
  return j;
}

void validate_grid(const Node& node, const ScenarioGrid& g, const std::vector<double>& doses, int rounding,
                   std::optional<std::int64_t> group_size) {
  for (auto s : g.expand(doses, rounding)) {
    if (group_size) {
      // Sample-size searches pick their own n; only the other fields matter.
      s.group_size = *group_size;
      s.rounding = MPMCP_ROUNDING_NEAREST;
    }
    check_status(node, mpmcp_scenario_validate(&s));
  }
}

}  // namespace

LineMap LineMap::scan(std::string_view text) {
  LineMap map;
  Scanner(text, map.lines_).run();
  return map;
}

int LineMap::line(std::string pointer) const {
  for (;;) {
    if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
    if (pointer.empty()) return 1;
    pointer.erase(pointer.rfind('/'));
  }
}

std::string ShapeConfig::name() const { return kShapeNames[static_cast<std::size_t>(shape.kind)]; }

std::string MethodConfig::tag() const {
  if (name == MPMCP_METHOD_SP) return "SP";
  return std::string(kMethodNames[static_cast<std::size_t>(name)]) + "(" + strategy + ")";
}

std::vector<mpmcp_scenario> ScenarioGrid::expand(const std::vector<double>& doses, int rounding) const {
  std::vector<mpmcp_scenario> out;
  for (const auto& sh : shape)
    for (int sc : scenario)
      for (double p : prevalence)
        for (double ss : sigma_s)
          for (double sgc : sigma_c)
            for (auto n : group_size)
              for (double d : delta) {
                mpmcp_scenario s;
                mpmcp_scenario_init(&s);
                s.shape = sh.shape;
                s.scenario = sc;
                s.prevalence = p;
                s.sigma_s = ss;
                s.sigma_c = sgc;
                s.group_size = n;
                s.delta = d;
                s.doses = doses.data();
                s.num_doses = doses.size();
                s.rounding = rounding;
                out.push_back(s);
              }
  return out;
}

Config parse_config(std::string_view text, const std::string& source_name, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const auto upto = text.substr(0, std::min<std::size_t>(e.byte, text.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    std::string what = e.what();
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    throw ConfigError(source_name + ":" + std::to_string(line) + ": syntax error: " + what);
  }
  const LineMap lines = LineMap::scan(text);
  const Node top(root, "", source_name, lines);
  top.allow_keys({"master_seed", "design", "shapes", "method", "simulation", "samplesize", "output"});

  Config c;
  if (top.has("master_seed")) c.master_seed = top.at("master_seed").unsigned_integer();

  if (top.has("design")) {
    const Node d = top.at("design");
    d.allow_keys({"doses", "populations", "tested", "data"});
    if (d.has("doses")) {
      c.design.doses.clear();
      for (const auto& e : d.at("doses").elements()) c.design.doses.push_back(e.number());
      if (c.design.doses.size() < 2) d.at("doses").fail("need at least two doses");
      for (std::size_t i = 1; i < c.design.doses.size(); ++i)
        if (!(c.design.doses[i] > c.design.doses[i - 1])) d.at("doses").fail("doses must be strictly increasing");
    }
    if (d.has("populations")) {
      c.design.populations.clear();
      std::set<std::string> seen;
      for (const auto& e : d.at("populations").elements()) {
        auto label = e.string();
        if (label.empty() || !seen.insert(label).second) e.fail("population labels must be non-empty and distinct");
        c.design.populations.push_back(label);
      }
    }
    if (d.has("tested")) {
      const Node t = d.at("tested");
      t.expect_object();
      if (t.json().empty()) t.fail("expected at least one tested population");
      c.design.tested.clear();
      for (const auto& [label, v] : t.json().items()) {
        const Node m = t.at(label);
        const auto members = normalize_members(m, m.string());
        std::istringstream split(members);
        for (std::string part; std::getline(split, part, '+');)
          if (std::find(c.design.populations.begin(), c.design.populations.end(), part) == c.design.populations.end())
            m.fail("'" + part + "' is not one of design.populations");
        c.design.tested.emplace_back(label, members);
      }
    }
    if (d.has("data")) {
      std::filesystem::path p = d.at("data").string();
      if (p.is_relative()) p = base_dir / p;
      c.design.data = std::filesystem::weakly_canonical(p).string();
    }
  }

  if (top.has("shapes")) {
    for (const auto& e : top.at("shapes").elements()) c.shapes.push_back(parse_shape(e));
  } else {
    for (const char* n : {"emax", "linear", "exponential", "logistic", "quadratic"}) {
      ShapeConfig s;
      mpmcp_shape_named(n, &s.shape);
      c.shapes.push_back(s);
    }
  }

  if (top.has("method")) {
    for (const auto& e : top.at("method").elements()) c.methods.push_back(parse_method(e, c.master_seed));
  } else {
    c.methods.push_back(MethodConfig{});
  }

  {
    const Node s = top.has("simulation") ? top.at("simulation") : top;
    if (top.has("simulation")) {
      s.allow_keys({"nsim", "rounding", "grid"});
      if (s.has("nsim")) c.simulation.nsim = s.at("nsim").integer();
      if (c.simulation.nsim < 1) s.at("nsim").fail("nsim must be at least 1");
      if (s.has("rounding"))
        c.simulation.rounding = pick(s.at("rounding"), s.at("rounding").string(), kRoundingNames, "rounding");
    }
    const bool given = top.has("simulation") && s.has("grid");
    const Node g = given ? s.at("grid") : s;
    c.simulation.grid = parse_grid(given ? &g : nullptr, true);
    validate_grid(g, c.simulation.grid, c.design.doses, c.simulation.rounding, std::nullopt);
  }

  {
    const Node s = top.has("samplesize") ? top.at("samplesize") : top;
    if (top.has("samplesize")) {
      s.allow_keys({"target_power", "nsim", "n_min", "n_max", "rounding", "grid"});
      if (s.has("target_power")) c.samplesize.target_power = s.at("target_power").number();
      if (c.samplesize.target_power < 0.0 || c.samplesize.target_power >= 1.0)
        s.at("target_power").fail("target_power must lie in [0, 1)");
      if (s.has("nsim")) c.samplesize.nsim = s.at("nsim").integer();
      if (c.samplesize.nsim < 1) s.at("nsim").fail("nsim must be at least 1");
      if (s.has("n_min")) c.samplesize.n_min = s.at("n_min").integer();
      if (s.has("n_max")) c.samplesize.n_max = s.at("n_max").integer();
      if (c.samplesize.n_min < 2 || c.samplesize.n_max < c.samplesize.n_min) s.fail("need 2 <= n_min <= n_max");
      if (s.has("rounding"))
        c.samplesize.rounding = pick(s.at("rounding"), s.at("rounding").string(), kRoundingNames, "rounding");
    }
    const bool given = top.has("samplesize") && s.has("grid");
    const Node g = given ? s.at("grid") : s;
    c.samplesize.grid = parse_grid(given ? &g : nullptr, false);
    validate_grid(g, c.samplesize.grid, c.design.doses, c.samplesize.rounding, c.samplesize.n_max);
  }

  if (top.has("output")) {
    const Node o = top.at("output");
    o.allow_keys({"report_csv", "report_text", "correlation_csv", "simulation_csv", "simulation_table_csv",
                  "samplesize_csv", "samplesize_table_csv", "trial_csv"});
    auto file = [&](const char* key, std::string& dst) {
      if (!o.has(key)) return;
      dst = o.at(key).string();
      if (dst.find('/') != std::string::npos || dst == "." || dst == "..")
        o.at(key).fail("output names are plain file names inside --out");
    };
    file("report_csv", c.output.report_csv);
    file("report_text", c.output.report_text);
    file("correlation_csv", c.output.correlation_csv);
    file("simulation_csv", c.output.simulation_csv);
    file("simulation_table_csv", c.output.simulation_table_csv);
    file("samplesize_csv", c.output.samplesize_csv);
    file("samplesize_table_csv", c.output.samplesize_table_csv);
    file("trial_csv", c.output.trial_csv);
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ":0: cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), path.parent_path());
}

Json Config::to_json() const {
  Json j;
  j["master_seed"] = master_seed;
  Json& d = j["design"];
  d["doses"] = arr(design.doses);
  d["populations"] = arr(design.populations);
  d["tested"] = Json::object();
  for (const auto& [label, members] : design.tested) d["tested"][label] = members;
  if (!design.data.empty()) d["data"] = design.data;
  j["shapes"] = Json::array();
  for (const auto& s : shapes) j["shapes"].push_back(shape_json(s));
  j["method"] = Json::array();
  for (const auto& m : methods) {
    Json mj;
    mj["name"] = kMethodNames[static_cast<std::size_t>(m.name)];
    mj["strategy"] = m.strategy;
    mj["alpha"] = m.alpha;
    mj["qmc_tol"] = m.qmc_tol;
    j["method"].push_back(mj);
  }
  Json& s = j["simulation"];
  s["nsim"] = simulation.nsim;
  s["rounding"] = kRoundingNames[static_cast<std::size_t>(simulation.rounding)];
  s["grid"] = grid_json(simulation.grid, true);
  Json& n = j["samplesize"];
  n["target_power"] = samplesize.target_power;
  n["nsim"] = samplesize.nsim;
  n["n_min"] = samplesize.n_min;
  n["n_max"] = samplesize.n_max;
  n["rounding"] = kRoundingNames[static_cast<std::size_t>(samplesize.rounding)];
  n["grid"] = grid_json(samplesize.grid, false);
  Json& o = j["output"];
  o["report_csv"] = output.report_csv;
  o["report_text"] = output.report_text;
  o["correlation_csv"] = output.correlation_csv;
  o["simulation_csv"] = output.simulation_csv;
  o["simulation_table_csv"] = output.simulation_table_csv;
  o["samplesize_csv"] = output.samplesize_csv;
  o["samplesize_table_csv"] = output.samplesize_table_csv;
  o["trial_csv"] = output.trial_csv;
  return j;
}

std::string canonical_text(const Config& config) { return config.to_json().dump(2) + "\n"; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

}  // namespace mpmcp_cli
