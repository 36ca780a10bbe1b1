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
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mpmcp/mpmcp.h"

namespace mpmcp_cli {

using Json = nlohmann::ordered_json;

/// A config problem; the message starts with "file:line:".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line of every JSON value in a document, keyed by JSON pointer.
class LineMap {
 public:
  static LineMap scan(std::string_view text);
  /// Line of `pointer`, or of its nearest ancestor that has one.
  int line(std::string pointer) const;

 private:
  std::map<std::string, int> lines_;
};

struct ShapeConfig {
  mpmcp_shape shape{};
  std::string name() const;
};

struct MethodConfig {
  int name = MPMCP_METHOD_SP;
  std::string strategy = "F";
  double alpha = 0.05;
  double qmc_tol = 1e-4;

  std::string tag() const;  // "SP" or "MP-Pooled(F+S)"
};

/// Cartesian grid of scenario settings; every field may list several values.
struct ScenarioGrid {
  std::vector<ShapeConfig> shape;
  std::vector<int> scenario;
  std::vector<double> prevalence;
  std::vector<double> sigma_s;
  std::vector<double> sigma_c;
  std::vector<std::int64_t> group_size;
  std::vector<double> delta;

  /// Expanded in row-major order: shape, scenario, prevalence, sigma_s,
  /// sigma_c, group_size, delta (delta varies fastest).
  std::vector<mpmcp_scenario> expand(const std::vector<double>& doses, int rounding) const;
};

struct Config {
  std::uint64_t master_seed = 20240101;

  struct {
    std::vector<double> doses{0.0, 0.05, 0.2, 0.6, 1.0};
    std::vector<std::string> populations{"S", "C"};
    std::vector<std::pair<std::string, std::string>> tested{{"F", "S+C"}, {"S", "S"}, {"C", "C"}};
    std::string data;  // absolute path, empty when not given
  } design;

  std::vector<ShapeConfig> shapes;  // analysis candidates
  std::vector<MethodConfig> methods;

  struct {
    std::int64_t nsim = 1000;
    int rounding = MPMCP_ROUNDING_NEAREST;
    ScenarioGrid grid;
  } simulation;

  struct {
    double target_power = 0.8;
    std::int64_t nsim = 10000;
    std::int64_t n_min = 4;
    std::int64_t n_max = 2000;
    int rounding = MPMCP_ROUNDING_EXACT;
    ScenarioGrid grid;
  } samplesize;

  struct {
    std::string report_csv = "report.csv";
    std::string report_text = "report.txt";
    std::string correlation_csv;  // empty: not written
    std::string simulation_csv = "simulation.csv";
    std::string simulation_table_csv = "simulation_table.csv";
    std::string samplesize_csv = "samplesize.csv";
    std::string samplesize_table_csv = "samplesize_table.csv";
    std::string trial_csv = "trial.csv";
  } output;

  /// Fully resolved config; parsing it again yields an equal Config.
  Json to_json() const;
};

/// Parses and validates a config file. Relative data paths are resolved
/// against the config file's directory.
Config load_config(const std::filesystem::path& path);
Config parse_config(std::string_view text, const std::string& source_name,
                    const std::filesystem::path& base_dir);

std::string canonical_text(const Config& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace mpmcp_cli
