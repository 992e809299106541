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

#include "nmk/kernels.hpp"
#include "nmk/quadrature.hpp"
#include "nmk/types.hpp"

namespace nmk {

struct QuadratureRule {
  rvec nodes;    // strictly increasing, inside [-omega_c, omega_c]
  rvec weights;  // >= 0, summing to one
  Index count() const { return nodes.size(); }
};

struct ChainCoefficients {
  rvec onsite;   // omega_1 .. omega_N
  rvec hopping;  // t_1 .. t_{N-1}
  double v_norm = 0.0;
  double omega_c = 0.0;
  int panels = 0;  // discretization the coefficients converged on (0 if unknown)

  int modes() const { return static_cast<int>(onsite.size()); }
  // Tridiagonal single-particle matrix A (onsite on the diagonal).
  rmat jacobi() const;
  // Orthonormal polynomials P_1..P_N at w; the mode functions are P_j(w) v^(w).
  rvec mode_polynomials(double omega) const;
};

// Discrete measure {x_k, |v^(x_k)|^2 * quadrature weight} on [-omega_c, omega_c].
PointRule discretize_weight(const SpectralWeight& weight, double omega_c, int panels, int per_panel = 8);

QuadratureRule gauss_quadrature(const SpectralWeight& weight, double omega_c, int n);
QuadratureRule gauss_quadrature(const RegularizedCoupling& coupling, double omega_c, int n);

ChainCoefficients star_to_chain(const SpectralWeight& weight, double omega_c, int n_modes);
ChainCoefficients star_to_chain(const RegularizedCoupling& coupling, double omega_c, int n_modes);

// Lanczos recursion on an explicit discrete measure (nodes, weights).
ChainCoefficients stieltjes(const rvec& nodes, const rvec& weights, int n_modes, double omega_c);

cx_vec chain_propagate_single(const ChainCoefficients& coeffs, const cx_vec& c0, double t);

struct ChainError {
  double actual;  // (1/2) || tau_t v - nu_t v ||^2
  double bound;   // ||v||^2 N^2 (2 e omega_c t / N)^N
};

ChainError chain_error_single(const ChainCoefficients& coeffs, const SpectralWeight& weight, double t);
ChainError chain_error_single(const ChainCoefficients& coeffs, const RegularizedCoupling& coupling, double t);

// chain_error_single on many times with a single sweep over the quadrature nodes.
std::vector<ChainError> chain_error_curve(const ChainCoefficients& coeffs, const SpectralWeight& weight,
                                          const std::vector<double>& times);

// Gram matrix of the mode functions under |v^|^2 on a refined rule.
rmat mode_gram(const ChainCoefficients& coeffs, const SpectralWeight& weight);

}  // namespace nmk
