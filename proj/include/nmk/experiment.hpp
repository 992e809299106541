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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nmk/dynamics.hpp"
#include "nmk/oracle.hpp"

namespace nmk {

// A config document that is syntactically or structurally invalid. `pointer`
// is the JSON pointer of the offending field, `line` its 1-based line (0 if unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, int line, const std::string& what);
  const std::string& pointer() const { return pointer_; }
  int line() const { return line_; }

 private:
  std::string pointer_;
  int line_;
};

enum class Mode { ChainMap, Simulate, Certify, CompareOracle, Sweep };

const char* to_string(Mode m);

struct EnvSpec {
  BathStateKind kind = BathStateKind::Vacuum;
  std::optional<Wavepacket> packet;
  cx_vec amplitudes;  // chain-mode photon amplitudes or coherent displacements
};

struct OracleSpec {
  enum class Kind { Star, Lindblad } kind = Kind::Star;
  int star_modes = 64;
  std::vector<double> rates;  // Lindblad only; empty means mu^_a(0)
};

struct SweepAxes {
  std::vector<double> epsilon;
  std::vector<double> omega_c;
  std::vector<int> n_modes;
  std::vector<int> particle_cap;

  bool empty() const { return epsilon.empty() && omega_c.empty() && n_modes.empty() && particle_cap.empty(); }
};

struct ExperimentConfig {
  Mode mode = Mode::Simulate;
  SystemModel system;
  cx_vec initial_state;
  std::vector<MemoryKernel> kernels;
  std::vector<EnvSpec> environment;
  MollifierFamily family = MollifierFamily::StandardBump;
  double epsilon = 0.1;
  std::optional<FrequencyGrid> grid;
  double omega_c = 4.0;
  int n_modes = 8;
  int particle_cap = 1;
  double t_final = 1.0;
  double output_step = 0.1;
  double tolerance = 1e-10;
  OracleSpec oracle;
  SweepAxes sweep;
  std::uint64_t seed = 0;
  std::vector<ChainCoefficients> chains;  // optional override of the chain mapping
};

// Throws ConfigError on any schema violation.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json chain_to_json(const ChainCoefficients& c);
ChainCoefficients chain_from_json(const nlohmann::json& j);

// One point of parameter space.
struct PointParams {
  double epsilon;
  double omega_c;
  int n_modes;
  int p;
};

PointParams base_point(const ExperimentConfig& cfg);
std::vector<PointParams> sweep_points(const ExperimentConfig& cfg);

std::vector<RegularizedCoupling> make_couplings(const ExperimentConfig& cfg, double epsilon);
std::vector<ChainCoefficients> make_chains(const ExperimentConfig& cfg, const std::vector<RegularizedCoupling>& couplings,
                                           double omega_c, int n_modes);
InitialEnvState chain_environment(const ExperimentConfig& cfg, const std::vector<RegularizedCoupling>& couplings,
                                  const std::vector<ChainCoefficients>& chains);
InitialEnvState star_environment(const ExperimentConfig& cfg, const std::vector<StarDiscretization>& stars);

StepControl step_control(const ExperimentConfig& cfg);

// Measured distances between neighbouring discretizations at t_final:
// p vs p + 2, N_m vs N_m + 8 (chain), and w_c vs 2 w_c (star with aligned midpoints).
struct RefinementGaps {
  double truncation = 0.0;
  double chain = 0.0;
  double cutoff = 0.0;

  double max() const { return std::max({truncation, chain, cutoff}); }
};

struct PointResult {
  PointParams params;
  std::vector<ChainCoefficients> chains;
  Trajectory trajectory;
  std::optional<ErrorBudget> budget;
  std::optional<RefinementGaps> gaps;
};

PointResult run_point(const ExperimentConfig& cfg, const PointParams& params, bool certify);

struct OracleComparison {
  Trajectory chain;
  Trajectory star;                  // empty unless the star oracle ran
  std::vector<cx_mat> lindblad;     // empty unless the Lindblad oracle ran
  std::vector<double> trace_distance;
};

OracleComparison compare_with_oracle(const ExperimentConfig& cfg);

// Artifact writers (17 significant digits).
std::string format_double(double x);
void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const std::string& oracle, bool header = true);
nlohmann::json budget_to_json(const ErrorBudget& b, const std::optional<RefinementGaps>& gaps);

// Run the configured mode and write its artifacts into `out_dir`.
void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace nmk
