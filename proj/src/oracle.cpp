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

#include "nmk/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "nmk/error.hpp"
#include "nmk/quadrature.hpp"

namespace nmk {

BathModes StarDiscretization::modes() const {
  BathModes b;
  b.onsite = frequencies;
  b.hopping = rvec::Zero(std::max(count() - 1, 0));
  b.coupling = couplings;
  return b;
}

StarDiscretization make_star(const RegularizedCoupling& coupling, double omega_c, int k) {
  if (k < 1 || !(omega_c > 0.0)) throw Error(ErrorKind::InvalidArgument, "star needs K >= 1 and w_c > 0");
  StarDiscretization s;
  s.omega_c = omega_c;
  s.delta_omega = 2.0 * omega_c / k;
  s.frequencies.resize(k);
  s.couplings.resize(k);
  double discrete = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = -omega_c + (i + 0.5) * s.delta_omega;
    s.frequencies(i) = w;
    s.couplings(i) = coupling.vhat(w) * std::sqrt(s.delta_omega);
    discrete += std::norm(s.couplings(i));
  }
  const std::vector<double> edges = chebyshev_edges(omega_c, 256, coupling.breakpoints());
  const PointRule rule = composite_gauss_legendre(edges, 12);
  double exact = 0.0;
  for (Index i = 0; i < rule.nodes.size(); ++i) exact += rule.weights(i) * coupling.weight(rule.nodes(i));
  s.norm_gap = exact > 0.0 ? std::abs(discrete - exact) / exact : 0.0;
  return s;
}

TruncatedSpace star_space(const SystemModel& model, const std::vector<StarDiscretization>& stars, int p) {
  if (stars.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one star");
  for (const auto& s : stars)
    if (s.count() != stars.front().count()) throw Error(ErrorKind::ShapeMismatch, "stars differ in mode count");
  return enumerate_basis(model.n, model.d, int(stars.size()), stars.front().count(), p);
}

BathInitialState star_wavepacket(const StarDiscretization& star, const Wavepacket& packet) {
  cx_vec c(star.count());
  for (int i = 0; i < star.count(); ++i) c(i) = packet(star.frequencies(i)) * std::sqrt(star.delta_omega);
  const double captured = c.squaredNorm();
  BathInitialState s = BathInitialState::single_photon(c);
  s.packet = packet;
  s.residual = std::clamp(1.0 - captured, 0.0, 1.0);
  return s;
}

Trajectory star_evolve(const SystemModel& model, const std::vector<StarDiscretization>& stars,
                       const TruncatedSpace& space, const cx_vec& psi0, double t_final, const StepControl& control) {
  std::vector<BathModes> baths;
  for (const auto& s : stars) baths.push_back(s.modes());
  Trajectory tr = evolve(model, baths, space, psi0, t_final, control);
  tr.source = "star";
  return tr;
}

namespace {

struct Liouvillian {
  const SystemModel& model;
  std::vector<cx_mat> l;
  std::vector<cx_mat> ldl;
  std::vector<double> rates;
  cx_mat h_static;
  bool driven;

  cx_mat operator()(double t, const cx_mat& rho) const {
    const cx_mat h = driven ? model.hamiltonian(t) : h_static;
    cx_mat out = -kI * (h * rho - rho * h);
    for (size_t a = 0; a < l.size(); ++a) {
      if (rates[a] == 0.0) continue;
      out += rates[a] * (l[a] * rho * l[a].adjoint() - 0.5 * (ldl[a] * rho + rho * ldl[a]));
    }
    return out;
  }
};

cx_mat rk4(const Liouvillian& f, double t, const cx_mat& y, double h) {
  const cx_mat k1 = f(t, y);
  const cx_mat k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
  const cx_mat k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
  const cx_mat k4 = f(t + h, y + h * k3);
  return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::vector<cx_mat> lindblad_evolve(const SystemModel& model, const std::vector<double>& rates, const cx_mat& rho0,
                                    const std::vector<double>& times, double tol) {
  model.validate();
  if (rho0.rows() != model.dim() || rho0.cols() != model.dim())
    throw Error(ErrorKind::ShapeMismatch, "density matrix dimension");
  for (double g : rates)
    if (g < 0.0) throw Error(ErrorKind::InvalidArgument, "rates must be nonnegative");
  Liouvillian f{model, {}, {}, rates, model.hamiltonian(0.0), model.time_dependent()};
  for (size_t a = 0; a < rates.size(); ++a) {
    f.l.push_back(model.jump(int(a)));
    f.ldl.push_back(f.l.back().adjoint() * f.l.back());
  }
  std::vector<cx_mat> out;
  cx_mat rho = rho0;
  double t = 0.0, h = 0.01;
  for (double target : times) {
    if (target < t - 1e-14) throw Error(ErrorKind::InvalidArgument, "output times must increase");
    while (target - t > 1e-14 * std::max(1.0, target)) {
      const double step = std::min(h, target - t);
      const cx_mat full = rk4(f, t, rho, step);
      const cx_mat half = rk4(f, t + 0.5 * step, rk4(f, t, rho, 0.5 * step), 0.5 * step);
      const double err = (full - half).norm() / 15.0;
      const double factor = err > 0.0 ? 0.9 * std::pow(tol * step / err, 0.2) : 2.0;
      if (err <= tol * step) {
        rho = half;
        rho = 0.5 * (rho + rho.adjoint()).eval();
        t += step;
        if (step == h) h *= std::clamp(factor, 1.0, 2.0);
      } else {
        h = step * std::clamp(factor, 0.2, 0.9);
        if (h < 1e-12) throw Error(ErrorKind::StepControlFailure, "Lindblad step underflow");
      }
    }
    t = target;
    out.push_back(rho);
  }
  return out;
}

cx_mat lindblad_evolve(const SystemModel& model, const std::vector<double>& rates, const cx_mat& rho0, double t,
                       double tol) {
  return lindblad_evolve(model, rates, rho0, std::vector<double>{t}, tol).front();
}

}  // namespace nmk
