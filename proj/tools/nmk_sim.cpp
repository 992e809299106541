// Copyright 2026 The nmk-sim Authors
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

// nmk-sim: experiment driver.
//   nmk-sim <subcommand> --config <path> [--out <dir>] [--jobs <n>]
// The subcommand overrides the config's "mode" field. Exit codes: 0 ok,
// 2 invalid config, 3 numerical failure, 1 anything else.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nmk/error.hpp"
#include "nmk/experiment.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("nmk");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  // NMK_SIM_LOG takes spdlog level syntax: "debug", "info", "off", ...
  if (const char* env = std::getenv("NMK_SIM_LOG")) spdlog::cfg::helpers::load_levels(env);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Certified Markovian dilation of non-Markovian open quantum systems"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  int jobs = 1;

  const std::pair<const char*, nmk::Mode> commands[] = {
      {"chain-map", nmk::Mode::ChainMap},
      {"simulate", nmk::Mode::Simulate},
      {"certify", nmk::Mode::Certify},
      {"compare-oracle", nmk::Mode::CompareOracle},
      {"sweep", nmk::Mode::Sweep},
  };
  const char* help[] = {
      "map each regularized coupling to chain coefficients (chains.json)",
      "evolve the truncated chain model (trajectory.csv)",
      "evolve and emit the error budget with measured refinement gaps (budget.json)",
      "compare the chain dynamics with a star or Lindblad oracle (comparison.csv)",
      "run the cartesian sweep grid concurrently (sweep.csv)",
  };
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->add_option("--config", config_path, "experiment JSON document")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--jobs", jobs, "concurrent sweep points")
        ->capture_default_str()
        ->check(CLI::Range(1, std::max(1, static_cast<int>(4 * std::thread::hardware_concurrency()))));
  }
  CLI11_PARSE(app, argc, argv);

  nmk::Mode mode = nmk::Mode::Simulate;
  for (const auto& [name, m] : commands)
    if (app.got_subcommand(name)) mode = m;

  try {
    nmk::ExperimentConfig cfg = nmk::load_config(config_path);
    if (mode == nmk::Mode::Sweep && cfg.sweep.empty()) {
      std::cerr << "config error: line 0, field /sweep: sweep needs at least one non-empty sweep axis\n";
      return 2;
    }
    if (cfg.mode != mode) spdlog::info("subcommand {} overrides config mode {}", nmk::to_string(mode), nmk::to_string(cfg.mode));
    cfg.mode = mode;
    nmk::run_experiment(cfg, out_dir, jobs);
  } catch (const nmk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nmk::Error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
