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

#include <string>
#include <vector>

#include "nmk/chain.hpp"
#include "nmk/fock.hpp"
#include "nmk/kernels.hpp"
#include "nmk/types.hpp"

namespace nmk {

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

// y = c0 * fixed * x + sum_i c_i * driven_i * x, without forming the sum.
struct LinearCombination {
  const HamiltonianSeries* series = nullptr;
  double fixed_coef = 1.0;
  std::vector<double> driven_coefs;

  static LinearCombination at(const HamiltonianSeries& s, double t);
  void apply(const cx_vec& x, cx_vec& y) const;
  Index dimension() const { return series->fixed.rows(); }
};

// exp(-i A dt) v by restarted Lanczos with full reorthogonalization. The
// substep is halved until beta_m |[e^{-iT h}]_{m,1}| <= tol * h * ||v||.
cx_vec expmv(const LinearCombination& a, const cx_vec& v, double dt, double tol = 1e-11, int krylov_dim = 30);
cx_vec expmv(const cx_sp_mat& h, const cx_vec& v, double dt, double tol = 1e-11, int krylov_dim = 30);

struct StepControl {
  double output_step = 0.1;
  double tolerance = 1e-10;   // local error per unit time
  int krylov_dim = 30;
  double initial_step = 0.05;  // time-dependent scheme only
  double min_step = 1e-9;
  bool keep_states = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<cx_mat> rho;                  // reduced system states
  std::vector<std::vector<double>> mu1;     // [time][bath]
  std::vector<std::vector<double>> mu2;
  std::vector<double> norm;                 // ||psi(t)||
  std::vector<cx_vec> states;               // only with keep_states
  cx_vec final_state;
  std::string source = "chain";

  // Metadata for the certificates: l_a = ||v_a|| ||L_a|| and initial moments.
  std::vector<double> ell;
  std::vector<double> mu1_initial;
  std::vector<double> mu2_initial;
  int cap = 0;

  double max_norm_drift() const;
  double max_trace_drift() const;
  double min_eigenvalue() const;
  double max_hermiticity_defect() const;
};

Trajectory evolve(const SystemModel& model, const std::vector<BathModes>& baths, const TruncatedSpace& space,
                  const cx_vec& psi0, double t_final, const StepControl& control = {});
Trajectory evolve(const SystemModel& model, const std::vector<ChainCoefficients>& chains, const TruncatedSpace& space,
                  const cx_vec& psi0, double t_final, const StepControl& control = {});

cx_mat reduced_density(const TruncatedSpace& space, const cx_vec& psi);

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

struct Moments {
  std::vector<double> mu1;  // <N_a>
  std::vector<double> mu2;  // <N_a^2>
};

Moments measure_moments(const TruncatedSpace& space, const cx_vec& psi);

// M^(0) = ||Phi||^2, M^(k) = 2 mu^(k) + 2^(2k-3) l^2 t^2 (||Phi||^2 + M^(k-1))^2.
// initial_moments[k-1] holds mu^(k)(0); returns M^(0..k_max).
std::vector<double> moment_bound(double ell, double t, const std::vector<double>& initial_moments, int k_max,
                                 double norm_squared = 1.0);

// (sqrt(mu1(0)) + l t)^2
double first_moment_apriori(double ell, double t, double mu1_0);
// Largest u^2 with F(u) <= F(sqrt(mu2(0))) + 2 l (sqrt(mu1(0)) t + l t^2 / 2), F(u) = u - log(1 + 2u) / 2.
double second_moment_apriori(double ell, double t, double mu1_0, double mu2_0);

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

enum class MomentSource { APriori, Measured };

// Bound on || psi(t) - U_p(t, 0) P_p psi0 || at the trajectory's final time.
double truncation_certificate(const Trajectory& trajectory, int p, MomentSource source = MomentSource::APriori);
// Same at an arbitrary time from explicit metadata (a-priori moments only).
double truncation_certificate(const std::vector<double>& ell, const std::vector<double>& mu1_0,
                              const std::vector<double>& mu2_0, int p, double t);

// sqrt((2 / sqrt(w_c)) sum ||L|| ||w v^||_inf (||L|| ||v|| t^2 + 2 mu1 t)).
double cutoff_error_bound(const SystemModel& model, const std::vector<RegularizedCoupling>& couplings, double omega_c,
                          double t, const std::vector<double>& mu1_0);

// 2 t (1 + 2 mu1 + 2 t^2 l^2)^(1/2) sum ||L|| sup_s ||nu_s v - tau_s v||, sup on 64 times, +10%.
double chain_error_bound(const SystemModel& model, const std::vector<SpectralWeight>& weights,
                         const std::vector<ChainCoefficients>& chains, double t, const std::vector<double>& mu1_0);
double chain_error_bound(const SystemModel& model, const std::vector<RegularizedCoupling>& couplings,
                         const std::vector<ChainCoefficients>& chains, double t, const std::vector<double>& mu1_0);

// Per-bath constants of the initial environment state entering the
// regularization bound. Vacuum: both zero.
struct StateConstants {
  double c_mu = 0.0;      // sqrt(pi / 2) || sqrt(mu^) u^ (1 + w^2) ||_inf
  double c_mu_rho = 0.0;  // || sqrt(mu^) u^ (1 + w^2)^2 ||_inf * sup |rho^'|
};

std::vector<StateConstants> state_constants(const std::vector<RegularizedCoupling>& couplings,
                                            const InitialEnvState& env);

// Squared-norm bound on the distance between the regularized and the exact
// dynamics; the budget takes its square root.
double regularization_error_bound(const SystemModel& model, const std::vector<MemoryKernel>& kernels, double epsilon,
                                  double t, const std::vector<StateConstants>& constants);

// ---------------------------------------------------------------------------
// Budget
// ---------------------------------------------------------------------------

struct BudgetTerm {
  double value = 0.0;
  double epsilon = 0.0;
  double omega_c = 0.0;
  int n_modes = 0;
  int p = 0;
};

struct ErrorBudget {
  BudgetTerm regularization;
  BudgetTerm cutoff;
  BudgetTerm chain;
  BudgetTerm truncation;
  BudgetTerm initialization;
  double total = 0.0;
  double t = 0.0;

  void finalize();
};

struct BudgetRequest {
  const SystemModel* model = nullptr;
  const std::vector<RegularizedCoupling>* couplings = nullptr;
  const std::vector<ChainCoefficients>* chains = nullptr;
  const InitialEnvState* env = nullptr;
  int p = 1;
  double t = 1.0;
};

ErrorBudget compute_budget(const BudgetRequest& request);

}  // namespace nmk
