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
#include <limits>

#include "nmk/dynamics.hpp"
#include "nmk/error.hpp"
#include "nmk/quadrature.hpp"

namespace nmk {

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// int_0^t g(s) ds for smooth g, 48-point Gauss-Legendre.
template <typename G>
double integrate_smooth(G&& g, double t) {
  if (t <= 0.0) return 0.0;
  const PointRule& gl = gauss_legendre(48);
  double acc = 0.0;
  for (Index i = 0; i < gl.nodes.size(); ++i) acc += gl.weights(i) * g(0.5 * t * (gl.nodes(i) + 1.0));
  return 0.5 * t * acc;
}

double truncation_integrand(const std::vector<double>& ell, const std::vector<double>& mu2, int p) {
  double root_sum = 0.0;
  for (double m : mu2) root_sum += std::sqrt(std::max(m, 0.0));
  double acc = 0.0;
  for (size_t a = 0; a < ell.size(); ++a)
    acc += ell[a] * std::sqrt(std::sqrt(std::max(mu2[a], 0.0)) * root_sum / p);
  return acc;
}

}  // namespace

std::vector<double> moment_bound(double ell, double t, const std::vector<double>& initial_moments, int k_max,
                                 double norm_squared) {
  if (ell < 0.0 || t < 0.0) throw Error(ErrorKind::InvalidArgument, "moment_bound needs l >= 0 and t >= 0");
  if (int(initial_moments.size()) < k_max) throw Error(ErrorKind::ShapeMismatch, "need mu^(1..k_max)(0)");
  std::vector<double> m{norm_squared};
  for (int k = 1; k <= k_max; ++k) {
    const double x = norm_squared + m.back();
    m.push_back(2.0 * initial_moments[k - 1] + std::ldexp(1.0, 2 * k - 3) * ell * ell * t * t * x * x);
  }
  return m;
}

double first_moment_apriori(double ell, double t, double mu1_0) {
  const double r = std::sqrt(std::max(mu1_0, 0.0)) + ell * t;
  return r * r;
}

double second_moment_apriori(double ell, double t, double mu1_0, double mu2_0) {
  auto f = [](double u) { return u - 0.5 * std::log1p(2.0 * u); };
  const double target =
      f(std::sqrt(std::max(mu2_0, 0.0))) + 2.0 * ell * (std::sqrt(std::max(mu1_0, 0.0)) * t + 0.5 * ell * t * t);
  double lo = 0.0, hi = 1.0;
  while (f(hi) <= target) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) <= target ? lo : hi) = mid;
  }
  return hi * hi;
}

double truncation_certificate(const std::vector<double>& ell, const std::vector<double>& mu1_0,
                              const std::vector<double>& mu2_0, int p, double t) {
  if (ell.size() != mu1_0.size() || ell.size() != mu2_0.size())
    throw Error(ErrorKind::ShapeMismatch, "one coupling and moment pair per bath");
  if (p < 1) return std::numeric_limits<double>::infinity();
  double leak = 0.0;
  for (size_t a = 0; a < ell.size(); ++a) leak += first_moment_apriori(ell[a], t, mu1_0[a]);
  const double flow = integrate_smooth(
      [&](double s) {
        std::vector<double> mu2(ell.size());
        for (size_t a = 0; a < ell.size(); ++a) mu2[a] = second_moment_apriori(ell[a], s, mu1_0[a], mu2_0[a]);
        return truncation_integrand(ell, mu2, p);
      },
      t);
  return std::sqrt(leak / p) + flow;
}

double truncation_certificate(const Trajectory& tr, int p, MomentSource source) {
  if (tr.times.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");
  if (source == MomentSource::APriori)
    return truncation_certificate(tr.ell, tr.mu1_initial, tr.mu2_initial, p, tr.times.back());
  if (p < 1) return std::numeric_limits<double>::infinity();
  // Trapezoid over the recorded output times.
  double flow = 0.0;
  for (size_t i = 1; i < tr.times.size(); ++i)
    flow += 0.5 * (tr.times[i] - tr.times[i - 1]) *
            (truncation_integrand(tr.ell, tr.mu2[i - 1], p) + truncation_integrand(tr.ell, tr.mu2[i], p));
  return std::sqrt(sum(tr.mu1.back()) / p) + flow;
}

double cutoff_error_bound(const SystemModel& model, const std::vector<RegularizedCoupling>& couplings, double omega_c,
                          double t, const std::vector<double>& mu1_0) {
  if (!(omega_c > 0.0)) throw Error(ErrorKind::InvalidArgument, "cutoff must be positive");
  if (mu1_0.size() != couplings.size()) throw Error(ErrorKind::ShapeMismatch, "one moment per bath");
  const double mu1 = sum(mu1_0);
  double acc = 0.0;
  for (size_t a = 0; a < couplings.size(); ++a) {
    const double l = model.jump_norm(int(a));
    acc += l * couplings[a].sup_omega_vhat * (l * couplings[a].l2_norm * t * t + 2.0 * mu1 * t);
  }
  return std::sqrt(2.0 / std::sqrt(omega_c) * acc);
}

double chain_error_bound(const SystemModel& model, const std::vector<SpectralWeight>& weights,
                         const std::vector<ChainCoefficients>& chains, double t, const std::vector<double>& mu1_0) {
  if (weights.size() != chains.size() || mu1_0.size() != chains.size())
    throw Error(ErrorKind::ShapeMismatch, "one weight, chain and moment per bath");
  if (t <= 0.0) return 0.0;
  std::vector<double> times(64);
  for (int i = 0; i < 64; ++i) times[i] = t * i / 63.0;
  double ell = 0.0, acc = 0.0;
  for (size_t a = 0; a < chains.size(); ++a) {
    const double l = model.jump_norm(int(a));
    ell += l * chains[a].v_norm;
    if (l == 0.0) continue;
    double sup = 0.0;
    for (const auto& e : chain_error_curve(chains[a], weights[a], times))
      sup = std::max(sup, std::sqrt(2.0 * std::max(e.actual, 0.0)));
    acc += l * 1.1 * sup;
  }
  return 2.0 * t * std::sqrt(1.0 + 2.0 * sum(mu1_0) + 2.0 * t * t * ell * ell) * acc;
}

double chain_error_bound(const SystemModel& model, const std::vector<RegularizedCoupling>& couplings,
                         const std::vector<ChainCoefficients>& chains, double t, const std::vector<double>& mu1_0) {
  std::vector<SpectralWeight> w;
  for (const auto& c : couplings) w.push_back(SpectralWeight::of(c));
  return chain_error_bound(model, w, chains, t, mu1_0);
}

std::vector<StateConstants> state_constants(const std::vector<RegularizedCoupling>& couplings,
                                            const InitialEnvState& env) {
  if (env.baths.size() != couplings.size()) throw Error(ErrorKind::ShapeMismatch, "one bath state per coupling");
  std::vector<StateConstants> out(couplings.size());
  for (size_t a = 0; a < couplings.size(); ++a) {
    const BathInitialState& b = env.baths[a];
    if (b.kind == BathStateKind::Vacuum) continue;
    if (b.kind != BathStateKind::SinglePhoton || !b.packet)
      throw Error(ErrorKind::UnsupportedInitialState,
                  "regularization constants need vacuum or a frequency-domain single photon", long(a));
    const Wavepacket& u = *b.packet;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i <= 8000; ++i) {
      const double w = u.center + u.width * (-16.0 + 32.0 * i / 8000.0);
      const double base = std::sqrt(eval_spectral_density(couplings[a].kernel, w)) * std::abs(u(w));
      s1 = std::max(s1, base * (1.0 + w * w));
      s2 = std::max(s2, base * (1.0 + w * w) * (1.0 + w * w));
    }
    out[a].c_mu = std::sqrt(kPi / 2.0) * s1;
    out[a].c_mu_rho = s2 * couplings[a].mollifier.hat_derivative_bound();
  }
  return out;
}

double regularization_error_bound(const SystemModel& model, const std::vector<MemoryKernel>& kernels, double epsilon,
                                  double t, const std::vector<StateConstants>& constants) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (constants.size() != kernels.size()) throw Error(ErrorKind::ShapeMismatch, "one constant set per kernel");
  if (t <= 0.0) return 0.0;
  const size_t M = kernels.size();
  std::vector<double> lnorm(M), comm(M);
  for (size_t a = 0; a < M; ++a) {
    lnorm[a] = model.jump_norm(int(a));
    comm[a] = model.commutator_bound(int(a), t);
  }
  double cross_c = 0.0;
  for (size_t b = 0; b < M; ++b) cross_c += lnorm[b] * constants[b].c_mu;

  // Integrand at tau, summed over baths.
  auto integrand = [&](double tau) {
    std::vector<double> tv(M);
    double cross_tv = 0.0;
    for (size_t b = 0; b < M; ++b) {
      tv[b] = total_variation(kernels[b], -1.0, tau + 1.0);
      cross_tv += lnorm[b] * lnorm[b] * tv[b];
    }
    double acc = 0.0;
    for (size_t a = 0; a < M; ++a) {
      const double l = lnorm[a];
      if (l == 0.0) continue;
      double e = 4.0 * l * l * tv[a];
      if (tau > 4.0 * epsilon) {
        const ErrorFunctions d1 = error_functions(kernels[a], 0.0, tau, epsilon);
        const ErrorFunctions d2 = error_functions(kernels[a], 0.0, tau, 2.0 * epsilon);
        const double k = l * comm[a] + 4.0 * l * l * cross_c + 6.0 * l * l * cross_tv;
        const double eb = 2.0 * (2.0 * d1.delta1 + d2.delta1) * k + 2.0 * (2.0 * d1.delta0 + d2.delta0) * l * l;
        e = std::min(e, eb);
      }
      acc += e + 4.0 * l * constants[a].c_mu_rho * epsilon;
    }
    return acc;
  };

  // Midpoint sums on [0, 4 eps] and [4 eps, t]; the integrand jumps at 4 eps
  // and, for atoms, wherever an atom crosses a window edge.
  auto midpoint = [&](double lo, double hi, int n) {
    if (hi <= lo) return 0.0;
    double acc = 0.0;
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) acc += integrand(lo + (i + 0.5) * h);
    return acc * h;
  };
  const double knee = std::min(4.0 * epsilon, t);
  return midpoint(0.0, knee, 64) + midpoint(knee, t, 512);
}

void ErrorBudget::finalize() {
  for (const BudgetTerm* term : {&regularization, &cutoff, &chain, &truncation, &initialization})
    if (!(term->value >= 0.0)) throw Error(ErrorKind::InvalidArgument, "budget terms must be nonnegative");
  total = regularization.value + cutoff.value + chain.value + truncation.value + initialization.value;
}

ErrorBudget compute_budget(const BudgetRequest& r) {
  if (!r.model || !r.couplings || !r.chains || !r.env) throw Error(ErrorKind::InvalidArgument, "incomplete budget request");
  const auto& model = *r.model;
  const auto& couplings = *r.couplings;
  const auto& chains = *r.chains;
  const auto& env = *r.env;
  const size_t M = couplings.size();
  if (chains.size() != M || env.baths.size() != M) throw Error(ErrorKind::ShapeMismatch, "bath counts disagree");

  std::vector<double> mu1(M), mu2(M), ell(M);
  std::vector<MemoryKernel> kernels;
  for (size_t a = 0; a < M; ++a) {
    mu1[a] = env.baths[a].mu1;
    mu2[a] = env.baths[a].mu2;
    ell[a] = chains[a].v_norm * model.jump_norm(int(a));
    kernels.push_back(couplings[a].kernel);
  }
  const double eps = M ? couplings[0].epsilon : 0.0;
  const double wc = M ? chains[0].omega_c : 0.0;
  const int nm = M ? chains[0].modes() : 0;
  auto stamp = [&](double v) { return BudgetTerm{v, eps, wc, nm, r.p}; };

  ErrorBudget b;
  b.t = r.t;
  b.regularization =
      stamp(std::sqrt(regularization_error_bound(model, kernels, eps, r.t, state_constants(couplings, env))));
  b.cutoff = stamp(cutoff_error_bound(model, couplings, wc, r.t, mu1));
  b.chain = stamp(chain_error_bound(model, couplings, chains, r.t, mu1));
  b.truncation = stamp(truncation_certificate(ell, mu1, mu2, r.p, r.t));
  b.initialization = stamp(env.initialization_error(r.p));
  b.finalize();
  return b;
}

}  // namespace nmk
