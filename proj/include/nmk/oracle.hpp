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

#include <vector>

#include "nmk/dynamics.hpp"
#include "nmk/fock.hpp"
#include "nmk/kernels.hpp"

namespace nmk {

// Uniform midpoint discretization of the coupling on [-w_c, w_c]:
// w_k = -w_c + (k + 1/2) dw, g_k = v^(w_k) sqrt(dw).
struct StarDiscretization {
  rvec frequencies;
  cx_vec couplings;
  double omega_c = 0.0;
  double delta_omega = 0.0;
  double norm_gap = 0.0;  // | sum |g_k|^2 - int_{-w_c}^{w_c} |v^|^2 | / int |v^|^2

  int count() const { return static_cast<int>(frequencies.size()); }
  BathModes modes() const;
};

StarDiscretization make_star(const RegularizedCoupling& coupling, double omega_c, int k);

// Star-geometry space with K modes per bath and per-bath cap p.
TruncatedSpace star_space(const SystemModel& model, const std::vector<StarDiscretization>& stars, int p);

// Photon amplitudes u(w_k) sqrt(dw) of a wavepacket on the star modes (normalized).
BathInitialState star_wavepacket(const StarDiscretization& star, const Wavepacket& packet);

Trajectory star_evolve(const SystemModel& model, const std::vector<StarDiscretization>& stars,
                       const TruncatedSpace& space, const cx_vec& psi0, double t_final,
                       const StepControl& control = {});

// Lindblad master equation, RK4 with step doubling; one state per output time.
std::vector<cx_mat> lindblad_evolve(const SystemModel& model, const std::vector<double>& rates, const cx_mat& rho0,
                                    const std::vector<double>& times, double tol = 1e-11);
cx_mat lindblad_evolve(const SystemModel& model, const std::vector<double>& rates, const cx_mat& rho0, double t,
                       double tol = 1e-11);

}  // namespace nmk
