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

#include "nmk/chain.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "nmk/error.hpp"

namespace nmk {

namespace {

constexpr int kPerPanel = 8;
constexpr int kMaxRefinements = 7;

int initial_panels(int n) { return std::max(16, 8 * n); }

double coefficient_gap(const ChainCoefficients& a, const ChainCoefficients& b) {
  double gap = (a.onsite - b.onsite).cwiseAbs().maxCoeff();
  if (a.hopping.size()) gap = std::max(gap, (a.hopping - b.hopping).cwiseAbs().maxCoeff());
  return std::max(gap, std::abs(a.v_norm - b.v_norm));
}

ChainCoefficients converged_chain(const SpectralWeight& weight, double omega_c, int n_modes) {
  if (!(omega_c > 0.0)) throw Error(ErrorKind::InvalidArgument, "cutoff must be > 0");
  if (n_modes < 1) throw Error(ErrorKind::InvalidArgument, "chain needs >= 1 mode");
  int panels = initial_panels(n_modes);
  PointRule m = discretize_weight(weight, omega_c, panels, kPerPanel);
  ChainCoefficients prev = stieltjes(m.nodes, m.weights, n_modes, omega_c);
  const double tol = 1e-9 * std::max(1.0, omega_c);
  for (int r = 0; r < kMaxRefinements; ++r) {
    panels *= 2;
    m = discretize_weight(weight, omega_c, panels, kPerPanel);
    ChainCoefficients next = stieltjes(m.nodes, m.weights, n_modes, omega_c);
    const double gap = coefficient_gap(prev, next);
    next.panels = panels;
    if (gap < tol) return next;
    prev = std::move(next);
  }
  throw Error(ErrorKind::QuadratureNotConverged, "chain coefficients still moving after refinement");
}

}  // namespace

rmat ChainCoefficients::jacobi() const {
  const int n = modes();
  rmat a = rmat::Zero(n, n);
  a.diagonal() = onsite;
  for (int j = 0; j + 1 < n; ++j) a(j, j + 1) = a(j + 1, j) = hopping(j);
  return a;
}

rvec ChainCoefficients::mode_polynomials(double omega) const {
  const int n = modes();
  rvec p(n);
  p(0) = 1.0 / v_norm;
  if (n > 1) p(1) = (omega - onsite(0)) * p(0) / hopping(0);
  for (int j = 1; j + 1 < n; ++j) p(j + 1) = ((omega - onsite(j)) * p(j) - hopping(j - 1) * p(j - 1)) / hopping(j);
  return p;
}

PointRule discretize_weight(const SpectralWeight& weight, double omega_c, int panels, int per_panel) {
  PointRule rule = composite_gauss_legendre(chebyshev_edges(omega_c, panels, weight.breakpoints), per_panel);
  for (Index i = 0; i < rule.nodes.size(); ++i) rule.weights(i) *= weight.density(rule.nodes(i));
  return rule;
}

ChainCoefficients stieltjes(const rvec& nodes, const rvec& weights, int n_modes, double omega_c) {
  const Index k = nodes.size();
  const double mass = weights.sum();
  if (!(mass > 0.0)) throw Error(ErrorKind::DegenerateWeight, "weight vanishes on the cutoff window");
  Index support = (weights.array() > 1e-300).count();
  if (support < n_modes)
    throw Error(ErrorKind::DegenerateWeight,
                "weight has " + std::to_string(support) + " points of increase, fewer than " + std::to_string(n_modes));

  ChainCoefficients out;
  out.onsite.resize(n_modes);
  out.hopping.resize(std::max(n_modes - 1, 0));
  out.v_norm = std::sqrt(mass);
  out.omega_c = omega_c;

  // Lanczos on diag(x) with start sqrt(w) / ||sqrt(w)||; q holds p_j(x) sqrt(w).
  rvec q_prev = rvec::Zero(k);
  rvec q = weights.cwiseSqrt() / out.v_norm;
  double beta_prev = 0.0;
  for (int j = 0; j < n_modes; ++j) {
    const double alpha = (nodes.array() * q.array().square()).sum();
    out.onsite(j) = alpha;
    if (j + 1 == n_modes) break;
    rvec r = (nodes.array() - alpha).matrix().cwiseProduct(q) - beta_prev * q_prev;
    // One reorthogonalization pass against the two active vectors keeps the
    // three-term recursion honest when the measure is very lopsided.
    r -= q.dot(r) * q;
    r -= q_prev.dot(r) * q_prev;
    const double beta = r.norm();
    if (!(beta > 1e-12 * std::max(1.0, omega_c)))
      throw Error(ErrorKind::RecursionBreakdown,
                  "hopping " + std::to_string(j + 1) + " collapsed to " + std::to_string(beta), j + 1);
    out.hopping(j) = beta;
    q_prev = q;
    q = r / beta;
    beta_prev = beta;
  }
  return out;
}

QuadratureRule gauss_quadrature(const SpectralWeight& weight, double omega_c, int n) {
  ChainCoefficients c;
  try {
    c = converged_chain(weight, omega_c, n);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::RecursionBreakdown) throw Error(ErrorKind::DegenerateWeight, e.what());
    throw;
  }
  Eigen::SelfAdjointEigenSolver<rmat> es;
  es.computeFromTridiagonal(c.onsite, c.hopping, Eigen::ComputeEigenvectors);
  QuadratureRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  for (Index i = 0; i < rule.nodes.size(); ++i) rule.nodes(i) = std::clamp(rule.nodes(i), -omega_c, omega_c);
  return rule;
}

QuadratureRule gauss_quadrature(const RegularizedCoupling& coupling, double omega_c, int n) {
  if (coupling.omega_max() < omega_c)
    throw Error(ErrorKind::InvalidArgument, "coupling grid does not cover the cutoff window");
  return gauss_quadrature(SpectralWeight::of(coupling), omega_c, n);
}

ChainCoefficients star_to_chain(const SpectralWeight& weight, double omega_c, int n_modes) {
  return converged_chain(weight, omega_c, n_modes);
}

ChainCoefficients star_to_chain(const RegularizedCoupling& coupling, double omega_c, int n_modes) {
  if (coupling.omega_max() < omega_c)
    throw Error(ErrorKind::InvalidArgument, "coupling grid does not cover the cutoff window");
  return converged_chain(SpectralWeight::of(coupling), omega_c, n_modes);
}

cx_vec chain_propagate_single(const ChainCoefficients& coeffs, const cx_vec& c0, double t) {
  if (c0.size() != coeffs.modes()) throw Error(ErrorKind::ShapeMismatch, "amplitude vector length != modes");
  if (t == 0.0) return c0;
  Eigen::SelfAdjointEigenSolver<rmat> es;
  es.computeFromTridiagonal(coeffs.onsite, coeffs.hopping, Eigen::ComputeEigenvectors);
  const rmat& v = es.eigenvectors();
  cx_vec phases = (es.eigenvalues() * (-t)).unaryExpr([](double a) { return std::polar(1.0, a); });
  cx_vec y = v.transpose().cast<cplx>() * c0;
  return v.cast<cplx>() * phases.cwiseProduct(y);
}

std::vector<ChainError> chain_error_curve(const ChainCoefficients& coeffs, const SpectralWeight& weight,
                                          const std::vector<double>& times) {
  const int n = coeffs.modes();
  const double v2 = coeffs.v_norm * coeffs.v_norm;
  const std::size_t nt = times.size();
  std::vector<ChainError> out(nt, ChainError{0.0, 0.0});
  cx_mat conj_c(n, nt);
  cx_vec e1 = cx_vec::Zero(n);
  e1(0) = coeffs.v_norm;
  for (std::size_t i = 0; i < nt; ++i) {
    out[i].bound = v2 * n * n * std::pow(2.0 * std::exp(1.0) * coeffs.omega_c * std::abs(times[i]) / n, n);
    conj_c.col(i) = chain_propagate_single(coeffs, e1, times[i]).conjugate();
  }

  // <phi_j, tau_t v> = int P_j |v^|^2 e^{-iwt}, on a rule twice as fine as the
  // one the coefficients were built on.
  const int panels = 2 * std::max(coeffs.panels, initial_panels(n));
  const PointRule m = discretize_weight(weight, coeffs.omega_c, panels, kPerPanel);
  cx_vec overlap = cx_vec::Zero(nt);
  double mass = 0.0;
  for (Index k = 0; k < m.nodes.size(); ++k) {
    const double x = m.nodes(k), w = m.weights(k);
    if (w == 0.0) continue;
    const rvec p = coeffs.mode_polynomials(x);
    const cx_vec proj = conj_c.transpose() * p.cast<cplx>();  // sum_j conj(c_j(t)) P_j(x)
    for (std::size_t i = 0; i < nt; ++i) overlap(i) += w * proj(i) * std::polar(1.0, -x * times[i]);
    mass += w;
  }
  // ||v||^2 comes from the same rule so the difference is not swamped by
  // discretization drift in the norm itself.
  for (std::size_t i = 0; i < nt; ++i)
    out[i].actual = times[i] == 0.0 ? 0.0 : std::max(0.0, mass - overlap(i).real());
  return out;
}

ChainError chain_error_single(const ChainCoefficients& coeffs, const SpectralWeight& weight, double t) {
  return chain_error_curve(coeffs, weight, {t}).front();
}

ChainError chain_error_single(const ChainCoefficients& coeffs, const RegularizedCoupling& coupling, double t) {
  return chain_error_single(coeffs, SpectralWeight::of(coupling), t);
}

rmat mode_gram(const ChainCoefficients& coeffs, const SpectralWeight& weight) {
  const int n = coeffs.modes();
  const int panels = 2 * std::max(coeffs.panels, initial_panels(n));
  const PointRule m = discretize_weight(weight, coeffs.omega_c, panels, kPerPanel + 4);
  rmat g = rmat::Zero(n, n);
  for (Index k = 0; k < m.nodes.size(); ++k) {
    const rvec p = coeffs.mode_polynomials(m.nodes(k));
    g.noalias() += m.weights(k) * p * p.transpose();
  }
  return g;
}

}  // namespace nmk
