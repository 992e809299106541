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

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "nmk/dynamics.hpp"
#include "nmk/error.hpp"
#include "nmk/linalg.hpp"

namespace nmk {

namespace {

// Commutator-free fourth-order exponential integrator (two exponentials).
const double kSqrt3 = std::sqrt(3.0);
const double kA1 = 0.25 + kSqrt3 / 6.0, kA2 = 0.25 - kSqrt3 / 6.0;
const double kC1 = 0.5 - kSqrt3 / 6.0, kC2 = 0.5 + kSqrt3 / 6.0;

template <typename Apply>
cx_vec lanczos_expmv(Apply&& apply, Index n, const cx_vec& v, double dt, double tol, int m) {
  const double nv = v.norm();
  if (nv == 0.0 || dt == 0.0) return v;
  const double sign = dt > 0 ? 1.0 : -1.0;
  double remaining = std::abs(dt);
  cx_vec w = v;
  cx_mat basis(n, m);
  cx_vec u(n);
  while (remaining > 0.0) {
    const double beta0 = w.norm();
    basis.col(0) = w / beta0;
    rvec alpha = rvec::Zero(m), beta = rvec::Zero(m);
    int k = 0;
    bool happy = false;
    double scale = 0.0;
    for (int j = 0; j < m; ++j) {
      apply(basis.col(j), u);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        cx_vec c = basis.leftCols(j + 1).adjoint() * u;
        u.noalias() -= basis.leftCols(j + 1) * c;
        alpha(j) += c(j).real();
      }
      k = j + 1;
      const double b = u.norm();
      scale = std::max(scale, std::abs(alpha(j)) + b);
      if (b <= 1e-14 * std::max(scale, 1e-300)) {
        happy = true;
        break;
      }
      beta(j) = b;
      if (j + 1 < m) basis.col(j + 1) = u / b;
    }
    rmat t = rmat::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      t(j, j) = alpha(j);
      if (j + 1 < k) t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<rmat> es(t);
    const rvec lam = es.eigenvalues();
    const rmat q = es.eigenvectors();
    auto first_column = [&](double h) {
      cx_vec d(k);
      for (int i = 0; i < k; ++i) d(i) = std::exp(cplx(0.0, -sign * lam(i) * h)) * q(0, i);
      return cx_vec(q.cast<cplx>() * d);
    };
    double h = remaining;
    cx_vec y = first_column(h);
    if (!happy) {
      while (beta(k - 1) * std::abs(y(k - 1)) > tol * h) {
        h *= 0.5;
        if (h < 1e-13 * std::abs(dt))
          throw Error(ErrorKind::StepControlFailure, "Krylov substep underflow");
        y = first_column(h);
      }
    }
    w = beta0 * (basis.leftCols(k) * y);
    remaining -= h;
    if (remaining < 1e-15 * std::abs(dt)) remaining = 0.0;
  }
  return w;
}

std::vector<double> output_times(double t_final, double step) {
  if (!(t_final >= 0.0) || !(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "need t_final >= 0 and output_step > 0");
  std::vector<double> ts{0.0};
  const auto n = static_cast<long>(std::floor(t_final / step + 1e-9));
  for (long i = 1; i <= n; ++i) ts.push_back(i * step);
  if (t_final - ts.back() > 1e-9 * std::max(1.0, t_final)) ts.push_back(t_final);
  else ts.back() = t_final;
  return ts;
}

cx_vec cf4_step(const HamiltonianSeries& s, const cx_vec& psi, double t, double h, double tol, int m) {
  LinearCombination a1{&s, 0.5, {}}, a2{&s, 0.5, {}};
  for (const auto& [f, mat] : s.driven) {
    const double f1 = f(t + kC1 * h), f2 = f(t + kC2 * h);
    a1.driven_coefs.push_back(kA1 * f1 + kA2 * f2);
    a2.driven_coefs.push_back(kA2 * f1 + kA1 * f2);
  }
  return expmv(a2, expmv(a1, psi, h, tol, m), h, tol, m);
}

}  // namespace

LinearCombination LinearCombination::at(const HamiltonianSeries& s, double t) {
  LinearCombination c{&s, 1.0, {}};
  for (const auto& d : s.driven) c.driven_coefs.push_back(d.first(t));
  return c;
}

void LinearCombination::apply(const cx_vec& x, cx_vec& y) const {
  y.noalias() = series->fixed * x;
  if (fixed_coef != 1.0) y *= fixed_coef;
  for (size_t i = 0; i < driven_coefs.size(); ++i)
    if (driven_coefs[i] != 0.0) y.noalias() += driven_coefs[i] * (series->driven[i].second * x);
}

cx_vec expmv(const LinearCombination& a, const cx_vec& v, double dt, double tol, int krylov_dim) {
  return lanczos_expmv([&](const auto& x, cx_vec& y) { a.apply(cx_vec(x), y); }, a.dimension(), v, dt, tol,
                       krylov_dim);
}

cx_vec expmv(const cx_sp_mat& h, const cx_vec& v, double dt, double tol, int krylov_dim) {
  return lanczos_expmv([&](const auto& x, cx_vec& y) { y.noalias() = h * x; }, h.rows(), v, dt, tol, krylov_dim);
}

cx_mat reduced_density(const TruncatedSpace& space, const cx_vec& psi) {
  if (psi.size() != space.dimension()) throw Error(ErrorKind::ShapeMismatch, "state dimension");
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> m(psi.data(), space.system_dim(), space.env_dim());
  return m * m.adjoint();
}

Moments measure_moments(const TruncatedSpace& space, const cx_vec& psi) {
  if (psi.size() != space.dimension()) throw Error(ErrorKind::ShapeMismatch, "state dimension");
  const int M = space.baths();
  Moments out{std::vector<double>(M, 0.0), std::vector<double>(M, 0.0)};
  // Marginal weight of each local state per bath.
  std::vector<rvec> marginal(M, rvec::Zero(space.local_dim()));
  for (Index i = 0; i < psi.size(); ++i) {
    const double w = std::norm(psi(i));
    if (w == 0.0) continue;
    for (int a = 0; a < M; ++a) marginal[a](space.local_index(i, a)) += w;
  }
  for (int a = 0; a < M; ++a)
    for (Index s = 0; s < space.local_dim(); ++s) {
      const double n = space.local_particles(s);
      out.mu1[a] += n * marginal[a](s);
      out.mu2[a] += n * n * marginal[a](s);
    }
  return out;
}

double Trajectory::max_norm_drift() const {
  double d = 0.0;
  for (double n : norm) d = std::max(d, std::abs(n - norm.front()));
  return d;
}

double Trajectory::max_trace_drift() const {
  double d = 0.0;
  for (const auto& r : rho) d = std::max(d, std::abs(r.trace() - rho.front().trace()));
  return d;
}

double Trajectory::min_eigenvalue() const {
  double m = 1.0;
  for (const auto& r : rho) m = std::min(m, nmk::min_eigenvalue(r));
  return m;
}

double Trajectory::max_hermiticity_defect() const {
  double d = 0.0;
  for (const auto& r : rho) d = std::max(d, hermiticity_defect(r));
  return d;
}

Trajectory evolve(const SystemModel& model, const std::vector<BathModes>& baths, const TruncatedSpace& space,
                  const cx_vec& psi0, double t_final, const StepControl& control) {
  if (psi0.size() != space.dimension()) throw Error(ErrorKind::ShapeMismatch, "initial state dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw Error(ErrorKind::InvalidArgument, "initial state not normalized");
  const HamiltonianSeries series = assemble_hamiltonian(model, baths, space);

  Trajectory traj;
  traj.cap = space.cap();
  for (int a = 0; a < space.baths(); ++a) traj.ell.push_back(baths[a].coupling_norm() * model.jump_norm(a));
  const Moments m0 = measure_moments(space, psi0);
  traj.mu1_initial = m0.mu1;
  traj.mu2_initial = m0.mu2;

  auto record = [&](double t, const cx_vec& psi) {
    traj.times.push_back(t);
    traj.rho.push_back(reduced_density(space, psi));
    const Moments m = measure_moments(space, psi);
    traj.mu1.push_back(m.mu1);
    traj.mu2.push_back(m.mu2);
    traj.norm.push_back(psi.norm());
    if (control.keep_states) traj.states.push_back(psi);
  };

  const std::vector<double> ts = output_times(t_final, control.output_step);
  cx_vec psi = psi0;
  record(0.0, psi);
  if (!series.time_dependent()) {
    const LinearCombination h = LinearCombination::at(series, 0.0);
    for (size_t i = 1; i < ts.size(); ++i) {
      psi = expmv(h, psi, ts[i] - ts[i - 1], control.tolerance, control.krylov_dim);
      record(ts[i], psi);
    }
  } else {
    const double tol = control.tolerance;
    const double ktol = 0.1 * tol;
    double t = 0.0, h = control.initial_step;
    for (size_t i = 1; i < ts.size(); ++i) {
      while (ts[i] - t > 1e-13 * std::max(1.0, t_final)) {
        const double step = std::min(h, ts[i] - t);
        const cx_vec full = cf4_step(series, psi, t, step, ktol, control.krylov_dim);
        const cx_vec half = cf4_step(series, cf4_step(series, psi, t, 0.5 * step, ktol, control.krylov_dim),
                                     t + 0.5 * step, 0.5 * step, ktol, control.krylov_dim);
        const double err = (full - half).norm() / 15.0;
        const double factor = err > 0.0 ? 0.9 * std::pow(tol * step / err, 0.2) : 2.0;
        if (err <= tol * step) {
          psi = half;
          t += step;
          if (step == h) h *= std::clamp(factor, 1.0, 2.0);
        } else {
          h = step * std::clamp(factor, 0.2, 0.9);
          if (h < control.min_step)
            throw Error(ErrorKind::StepControlFailure, "step fell below " + std::to_string(control.min_step));
        }
      }
      t = ts[i];
      record(t, psi);
    }
  }
  traj.final_state = psi;
  return traj;
}

Trajectory evolve(const SystemModel& model, const std::vector<ChainCoefficients>& chains, const TruncatedSpace& space,
                  const cx_vec& psi0, double t_final, const StepControl& control) {
  std::vector<BathModes> baths;
  for (size_t a = 0; a < chains.size(); ++a) {
    if (chains[a].modes() != space.modes())
      throw Error(ErrorKind::ShapeMismatch, "chain length differs from the space", long(a));
    baths.push_back(BathModes::from_chain(chains[a]));
  }
  return evolve(model, baths, space, psi0, t_final, control);
}

}  // namespace nmk
