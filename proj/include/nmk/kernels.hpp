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

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "nmk/types.hpp"

namespace nmk {

// ---------------------------------------------------------------------------
// Memory kernels
//
// Conventions: f^(w) = int f(t) e^{-iwt} dt / sqrt(2 pi), <mu, f> = int mu^ f^ dw / sqrt(2 pi).
// The time-domain density of the continuous part is therefore
//   kappa(t) = (1 / 2 pi) int mu^(w) e^{-iwt} dw,
// a delta at the origin has mu^ == 1, and int kappa = mu^(0).
// ---------------------------------------------------------------------------

enum class KernelKind { LorentzianSum, DeltaTrain, ComplexGaussianSum, Tabulated };

struct Lorentzian {
  double alpha;   // > 0
  double center;  // rad / time
  double gamma;   // > 0
};

struct Atom {
  cplx weight;
  double tau;
};

struct ComplexGaussian {
  cplx c;
  double k;  // chirp, 1 / time^2
};

// mu^ sampled on a uniform grid, linearly interpolated, zero outside.
struct TabulatedDensity {
  double omega_min = 0.0;
  double omega_max = 0.0;
  std::vector<double> samples;

  double spacing() const { return (omega_max - omega_min) / static_cast<double>(samples.size() - 1); }
};

struct MemoryKernel {
  KernelKind kind = KernelKind::LorentzianSum;
  std::vector<Lorentzian> lorentzians;
  std::vector<Atom> atoms;
  std::vector<ComplexGaussian> gaussians;
  TabulatedDensity tabulated;
  std::vector<double> phase_poly;  // phi(w) = sum_k phase_poly[k] w^k

  static MemoryKernel lorentzian_sum(std::vector<Lorentzian> terms);
  static MemoryKernel delta_train(std::vector<Atom> atoms);
  static MemoryKernel complex_gaussian_sum(std::vector<ComplexGaussian> terms);
  static MemoryKernel tabulated_density(double omega_min, double omega_max, std::vector<double> samples);

  // Throws InvalidArgument if an invariant of the chosen kind is broken.
  void validate() const;

  double phase(double omega) const;
  // Continuous-part density kappa(t); zero for delta trains.
  cplx kappa(double t) const;
  bool has_continuous_part() const { return kind != KernelKind::DeltaTrain; }
  // Points where mu^ is not smooth (tabulation nodes); used to align panels.
  std::vector<double> breakpoints() const;
  // sup |kappa'| over the real line, finite for the continuous kinds used here.
  double kappa_derivative_bound() const;
};

double eval_spectral_density(const MemoryKernel& kernel, double omega);

double total_variation(const MemoryKernel& kernel, double a, double b);

struct ErrorFunctions {
  double delta0;
  double delta1;
};

ErrorFunctions error_functions(const MemoryKernel& kernel, double a, double b, double epsilon);

// Value and derivative samples of a C^1 function on a uniform grid over [a, b].
struct SampledFunction {
  double a = 0.0;
  double b = 1.0;
  cx_vec values;
  cx_vec derivatives;

  Index size() const { return values.size(); }
  double step() const { return (b - a) / static_cast<double>(values.size() - 1); }
};

cplx apply_mu_star(const MemoryKernel& kernel, const SampledFunction& f, double tol = 1e-8);

// ---------------------------------------------------------------------------
// Mollifiers
// ---------------------------------------------------------------------------

enum class MollifierFamily { StandardBump, ScaledBumpVariant };

namespace detail {
struct BumpTable;
}

class Mollifier {
 public:
  explicit Mollifier(double epsilon, MollifierFamily family = MollifierFamily::StandardBump);

  double epsilon() const { return epsilon_; }
  MollifierFamily family() const { return family_; }

  // Unit-scale density rho(x) on [-1, 1].
  double density(double x) const;
  // rho^(k) for the unit-scale mollifier; the regularization uses hat(w * epsilon).
  double hat(double k) const;
  double hat_scaled(double omega) const { return hat(omega * epsilon_); }
  // (1 / sqrt(2 pi)) int |x| rho(x) dx, an upper bound on sup |rho^'|.
  double hat_derivative_bound() const;
  // int rho(x) dx evaluated by quadrature (checks the unit-mass invariant).
  double mass() const;
  double l2_norm_squared() const;

 private:
  double epsilon_;
  MollifierFamily family_;
  std::shared_ptr<const detail::BumpTable> table_;
};

// rho^(w epsilon) by direct quadrature on [-1, 1]; real because rho is even.
cplx mollifier_fourier(const Mollifier& m, double omega);

// ---------------------------------------------------------------------------
// Regularized couplings
// ---------------------------------------------------------------------------

struct FrequencyGrid {
  double omega_max;  // Omega
  Index points;
};

struct RegularizedCoupling {
  MemoryKernel kernel;
  Mollifier mollifier{1.0};
  rvec grid;
  cx_vec values;
  double epsilon = 0.0;
  double l2_norm = 0.0;
  double sup_omega_vhat = 0.0;

  double omega_max() const { return grid.size() ? grid(grid.size() - 1) : 0.0; }
  // Exact v^_eps(w) = sqrt(mu^(w)) rho^(w eps) e^{i phi(w)} at any frequency.
  cplx vhat(double omega) const;
  // |v^_eps(w)|^2.
  double weight(double omega) const;
  std::vector<double> breakpoints() const { return kernel.breakpoints(); }
};

RegularizedCoupling regularize(const MemoryKernel& kernel, const Mollifier& mollifier,
                               const FrequencyGrid& grid);

// Smallest symmetric window whose tail passes the regularize() precondition,
// with a spacing that resolves the kernel's finest spectral feature.
FrequencyGrid suggest_grid(const MemoryKernel& kernel, const Mollifier& mollifier);

// Any nonnegative weight on the real line, usable wherever a coupling's |v^|^2 is.
struct SpectralWeight {
  std::function<double(double)> density;
  std::vector<double> breakpoints;

  static SpectralWeight of(const RegularizedCoupling& c);
  static SpectralWeight flat(double level = 1.0);
};

}  // namespace nmk
