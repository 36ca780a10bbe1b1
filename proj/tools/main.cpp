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

// mpmcp-cli: batch front-end for analysis, simulation and sample-size runs.
//
// Exit codes: 0 success, 1 analysis or I/O failure, 2 usage or config
// error, 3 target power unreachable.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "mpmcp/mpmcp.h"

namespace fs = std::filesystem;
using mpmcp_cli::Config;
using mpmcp_cli::ConfigError;
using mpmcp_cli::Json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitUnreachable = 3;

class RunError : public std::runtime_error {
 public:
  RunError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

void check(mpmcp_status status, const std::string& context) {
  if (status == MPMCP_OK) return;
  const int code = status == MPMCP_UNREACHABLE ? kExitUnreachable : kExitFailure;
  throw RunError(code, context + ": " + mpmcp_last_error());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

const char* scenario_name(int s) {
  static const char* names[] = {"same", "double", "only"};
  return names[s];
}

std::string shape_name(const mpmcp_shape& s) {
  static const char* names[] = {"constant", "emax", "linear", "exponential", "logistic", "quadratic"};
  return names[s.kind];
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw RunError(kExitFailure, "cannot write " + p.string());
}

std::string hash_of(const std::string& bytes) { return "fnv1a64:" + mpmcp_cli::hex64(mpmcp_cli::fnv1a64(bytes)); }

struct Shared {
  std::string config_path;
  std::string out_dir = "out";
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  bool dump = false;
  bool quiet = false;
  std::string data;  // analyze only
  bool correlation = false;
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("-c,--config", s.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", s.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("-t,--threads", s.threads, "Worker threads (0 = all cores); results do not depend on it");
  cmd->add_option("-s,--seed", s.seed, "Override master_seed");
  cmd->add_flag("--dump-config", s.dump, "Print the fully resolved config and exit");
  cmd->add_flag("-q,--quiet", s.quiet, "No progress messages");
}

// Tracks written files for the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  void write_manifest(const std::string& command, const Config& cfg, const std::string& config_text,
                      const Json& inputs) const {
    Json m;
    m["tool"] = "mpmcp-cli";
    m["version"] = mpmcp_version();
    m["command"] = command;
    m["config_hash"] = hash_of(config_text);
    m["master_seed"] = cfg.master_seed;
    m["build"] = {{"compiler", std::string("gcc-compatible ") + __VERSION__}, {"cxx_standard", __cplusplus}};
    if (!inputs.empty()) m["inputs"] = inputs;
    Json files = Json::object();
    for (const auto& n : names_) files[n] = hash_of(read_file(dir_ / n));
    m["outputs"] = files;
    write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::string with_suffix(const std::string& name, const std::string& suffix) {
  const auto dot = name.rfind('.');
  if (dot == std::string::npos || dot == 0) return name + "-" + suffix;
  return name.substr(0, dot) + "-" + suffix + name.substr(dot);
}

std::string slug(const std::string& tag) {
  std::string out;
  for (char c : tag) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += c;
    else if (c == '+')
      out += '_';
    else if (!out.empty() && out.back() != '-')
      out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::vector<mpmcp_shape> c_shapes(const Config& cfg) {
  std::vector<mpmcp_shape> out;
  for (const auto& s : cfg.shapes) out.push_back(s.shape);
  return out;
}

mpmcp_method c_method(const mpmcp_cli::MethodConfig& m, std::uint64_t seed) {
  return {m.name, m.strategy.c_str(), m.alpha, m.qmc_tol, seed};
}

// Row-keyed pivot with one column per (scenario, prevalence) pair.
class Pivot {
 public:
  explicit Pivot(std::string key_header) : key_header_(std::move(key_header)) {}

  void set(const std::string& row, const std::string& column, const std::string& value) {
    if (std::find(rows_.begin(), rows_.end(), row) == rows_.end()) rows_.push_back(row);
    if (std::find(cols_.begin(), cols_.end(), column) == cols_.end()) cols_.push_back(column);
    cells_[row + '\x1f' + column] = value;
  }

  std::string csv() const {
    std::string out = key_header_;
    for (const auto& c : cols_) out += "," + c;
    out += "\n";
    for (const auto& r : rows_) {
      out += r;
      for (const auto& c : cols_) {
        out += ",";
        if (auto it = cells_.find(r + '\x1f' + c); it != cells_.end()) out += it->second;
      }
      out += "\n";
    }
    return out;
  }

 private:
  std::string key_header_;
  std::vector<std::string> rows_;
  std::vector<std::string> cols_;
  std::map<std::string, std::string> cells_;
};

std::string column_of(const mpmcp_scenario& s) {
  return std::string(scenario_name(s.scenario)) + ":" + short_num(s.prevalence);
}

void progress(const Shared& s, const std::string& msg) {
  if (!s.quiet) std::cerr << msg << std::endl;
}

void run_analyze(const Shared& opts, const Config& cfg, const std::string& config_text, Outputs& out) {
  if (cfg.design.data.empty())
    throw RunError(kExitConfig, "analyze needs a data file (design.data in the config or --data)");

  std::vector<const char*> pops;
  for (const auto& p : cfg.design.populations) pops.push_back(p.c_str());
  mpmcp_data* data = nullptr;
  check(mpmcp_data_load_csv(cfg.design.data.c_str(), cfg.design.doses.data(), cfg.design.doses.size(), pops.data(),
                            pops.size(), &data),
        "loading " + cfg.design.data);
  std::unique_ptr<mpmcp_data, decltype(&mpmcp_data_free)> data_guard(data, mpmcp_data_free);

  std::vector<const char*> labels;
  std::vector<const char*> members;
  for (const auto& [l, m] : cfg.design.tested) {
    labels.push_back(l.c_str());
    members.push_back(m.c_str());
  }
  mpmcp_design* design = nullptr;
  check(mpmcp_design_from_data(data, labels.data(), members.data(), labels.size(), &design), "building design");
  std::unique_ptr<mpmcp_design, decltype(&mpmcp_design_free)> design_guard(design, mpmcp_design_free);

  const auto shapes = c_shapes(cfg);
  for (const auto& m : cfg.methods) {
    const auto method = c_method(m, cfg.master_seed);
    mpmcp_report* report = nullptr;
    progress(opts, "analyze: " + m.tag());
    check(mpmcp_analyze(data, design, shapes.data(), shapes.size(), &method, &report), m.tag());
    std::unique_ptr<mpmcp_report, decltype(&mpmcp_report_free)> guard(report, mpmcp_report_free);
    auto name = [&](const std::string& base) {
      return cfg.methods.size() == 1 ? base : with_suffix(base, slug(m.tag()));
    };
    check(mpmcp_report_write_csv(report, out.path(name(cfg.output.report_csv)).c_str()), "writing report");
    check(mpmcp_report_write_text(report, out.path(name(cfg.output.report_text)).c_str()), "writing report");
    if (opts.correlation || !cfg.output.correlation_csv.empty()) {
      const auto base = cfg.output.correlation_csv.empty() ? std::string("correlation.csv") : cfg.output.correlation_csv;
      check(mpmcp_report_write_correlation(report, out.path(name(base)).c_str()), "writing correlation");
    }
    if (!opts.quiet) {
      const char* selected = nullptr;
      mpmcp_report_selected_model(report, &selected);
      std::cerr << "  global reject: " << (mpmcp_report_global_reject(report) ? "yes" : "no")
                << (selected ? std::string(", selected model: ") + selected : std::string()) << "\n";
    }
  }
  Json inputs;
  inputs["data"] = {{"path", cfg.design.data}, {"hash", hash_of(read_file(cfg.design.data))}};
  out.write_manifest("analyze", cfg, config_text, inputs);
}

void run_simulate(const Shared& opts, const Config& cfg, const std::string& config_text, Outputs& out) {
  const auto shapes = c_shapes(cfg);
  std::vector<mpmcp_method> methods;
  for (const auto& m : cfg.methods) methods.push_back(c_method(m, cfg.master_seed));
  const auto cells = cfg.simulation.grid.expand(cfg.design.doses, cfg.simulation.rounding);

  const auto csv_path = out.path(cfg.output.simulation_csv);
  Pivot table("method,hypothesis,shape,sigma_s,sigma_c,group_size,delta");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& s = cells[i];
    progress(opts, "simulate: cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()) + " (" +
                       shape_name(s.shape) + ", " + column_of(s) + ", n=" + std::to_string(s.group_size) + ")");
    mpmcp_summary* summary = nullptr;
    check(mpmcp_simulate(&s, shapes.data(), shapes.size(), methods.data(), methods.size(), cfg.simulation.nsim,
                         cfg.master_seed, opts.threads, &summary),
          "simulation");
    std::unique_ptr<mpmcp_summary, decltype(&mpmcp_summary_free)> guard(summary, mpmcp_summary_free);
    check(mpmcp_summary_write_csv(summary, csv_path.c_str(), i == 0 ? 0 : 1), "writing " + csv_path.string());
    const auto rows = mpmcp_summary_num_rows(summary);
    for (std::size_t r = 0; r < rows; ++r) {
      mpmcp_summary_row row;
      check(mpmcp_summary_row_at(summary, r, &row), "reading summary");
      const std::string tag =
          std::string(row.method) == "SP" ? std::string("SP") : std::string(row.method) + "(" + row.strategy + ")";
      const std::string key = tag + "," + row.hypothesis + "," + row.shape + "," +
                              num(s.sigma_s) + "," + num(s.sigma_c) + "," + std::to_string(s.group_size) + "," +
                              num(s.delta);
      table.set(key, column_of(s), num(row.estimate));
    }
  }
  write_file(out.path(cfg.output.simulation_table_csv), table.csv());
  out.write_manifest("simulate", cfg, config_text, Json());
}

void run_samplesize(const Shared& opts, const Config& cfg, const std::string& config_text, Outputs& out) {
  const auto shapes = c_shapes(cfg);
  const auto cells = cfg.samplesize.grid.expand(cfg.design.doses, cfg.samplesize.rounding);
  const mpmcp_samplesize_options o{cfg.samplesize.target_power, cfg.samplesize.nsim, cfg.master_seed,
                                   cfg.samplesize.n_min,        cfg.samplesize.n_max, opts.threads};

  std::string csv =
      "method,strategy,scenario,prevalence,shape,sigma_s,sigma_c,delta,target_power,n,power,se,nsim,seed,"
      "half_n,half_power,monotone,evaluations\n";
  Pivot table("method,shape,sigma_s,sigma_c,delta");
  std::size_t done = 0;
  const std::size_t total = cells.size() * cfg.methods.size();
  for (const auto& s : cells) {
    for (const auto& m : cfg.methods) {
      progress(opts, "samplesize: " + std::to_string(++done) + "/" + std::to_string(total) + " (" + m.tag() + ", " +
                         shape_name(s.shape) + ", " + column_of(s) + ")");
      const auto method = c_method(m, cfg.master_seed);
      mpmcp_samplesize_result r;
      check(mpmcp_required_group_size(&s, shapes.data(), shapes.size(), &method, &o, &r),
            m.tag() + " at " + column_of(s));
      csv += m.tag().substr(0, m.tag().find('(')) + "," + m.strategy + "," +
             scenario_name(s.scenario) + "," + num(s.prevalence) + "," + shape_name(s.shape) + "," + num(s.sigma_s) +
             "," + num(s.sigma_c) + "," + num(s.delta) + "," + num(o.target_power) + "," + std::to_string(r.n) +
             "," + num(r.power) + "," + num(r.se) + "," + std::to_string(o.nsim) + "," +
             std::to_string(o.seed) + "," + std::to_string(r.half_n) + "," + num(r.half_power) + "," +
             std::to_string(r.monotone) + "," + std::to_string(r.evaluations) + "\n";
      const std::string key =
          m.tag() + "," + shape_name(s.shape) + "," + num(s.sigma_s) + "," + num(s.sigma_c) + "," + num(s.delta);
      table.set(key, column_of(s), std::to_string(r.n));
    }
  }
  write_file(out.path(cfg.output.samplesize_csv), csv);
  write_file(out.path(cfg.output.samplesize_table_csv), table.csv());
  out.write_manifest("samplesize", cfg, config_text, Json());
}

void run_generate(const Shared&, const Config& cfg, const std::string& config_text, Outputs& out) {
  const auto cells = cfg.simulation.grid.expand(cfg.design.doses, cfg.simulation.rounding);
  if (cells.size() != 1)
    throw RunError(kExitConfig, "generate needs simulation.grid to describe exactly one scenario (got " +
                                    std::to_string(cells.size()) + ")");
  mpmcp_data* data = nullptr;
  check(mpmcp_generate_trial(&cells[0], cfg.master_seed, &data), "generating trial");
  std::unique_ptr<mpmcp_data, decltype(&mpmcp_data_free)> guard(data, mpmcp_data_free);
  check(mpmcp_data_write_csv(data, out.path(cfg.output.trial_csv).c_str()), "writing trial data");
  out.write_manifest("generate", cfg, config_text, Json());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-population multiple contrast tests: analysis, simulation and sample size"};
  app.set_version_flag("--version", std::string(mpmcp_version()));
  app.require_subcommand(1);

  Shared opts;
  auto* analyze = app.add_subcommand("analyze", "Test a dataset and write report CSV and text");
  auto* simulate = app.add_subcommand("simulate", "Estimate rejection rates over a scenario grid");
  auto* samplesize = app.add_subcommand("samplesize", "Find per-dose sample sizes reaching a target power");
  auto* generate = app.add_subcommand("generate", "Write one simulated trial (simulation.grid) as data CSV");
  for (auto* cmd : {analyze, simulate, samplesize, generate}) add_shared(cmd, opts);
  analyze->add_option("-d,--data", opts.data, "Trial data CSV (overrides design.data)")->check(CLI::ExistingFile);
  analyze->add_flag("--correlation", opts.correlation, "Also write the correlation matrix of the statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    Config cfg = mpmcp_cli::load_config(opts.config_path);
    if (opts.seed) cfg.master_seed = *opts.seed;
    if (!opts.data.empty()) cfg.design.data = fs::weakly_canonical(fs::absolute(opts.data)).string();
    const std::string config_text = mpmcp_cli::canonical_text(cfg);
    if (opts.dump) {
      std::cout << config_text;
      return 0;
    }

    fs::create_directories(opts.out_dir);
    Outputs out(opts.out_dir);
    write_file(out.path("config.json"), config_text);
    if (analyze->parsed())
      run_analyze(opts, cfg, config_text, out);
    else if (simulate->parsed())
      run_simulate(opts, cfg, config_text, out);
    else if (samplesize->parsed())
      run_samplesize(opts, cfg, config_text, out);
    else
      run_generate(opts, cfg, config_text, out);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RunError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
