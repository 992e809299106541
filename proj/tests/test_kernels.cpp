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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmk/error.hpp"
#include "nmk/kernels.hpp"
#include "nmk/quadrature.hpp"

using namespace nmk;
using doctest::Approx;

namespace {

MemoryKernel unit_lorentzian() { return MemoryKernel::lorentzian_sum({{1.0, 0.0, 1.0}}); }

SampledFunction sample(double a, double b, Index n, const std::function<cplx(double)>& f,
                       const std::function<cplx(double)>& df) {
  SampledFunction s;
  s.a = a;
  s.b = b;
  s.values.resize(n);
  s.derivatives.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = a + (b - a) * i / double(n - 1);
    s.values(i) = f(x);
    s.derivatives(i) = df(x);
  }
  return s;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("spectral density examples") {
  CHECK(eval_spectral_density(MemoryKernel::delta_train({{1.0, 0.0}}), 3.7) == Approx(1.0));
  CHECK(eval_spectral_density(unit_lorentzian(), 0.0) == Approx(1.0));
  auto flat = MemoryKernel::tabulated_density(-1.0, 1.0, {1.0, 1.0, 1.0, 1.0, 1.0});
  CHECK(eval_spectral_density(flat, 0.5) == Approx(1.0));
  // symmetric pair: 1 + cos(w)
  auto pair = MemoryKernel::delta_train({{0.5, -1.0}, {1.0, 0.0}, {0.5, 1.0}});
  CHECK(eval_spectral_density(pair, 0.3) == Approx(1.0 + std::cos(0.3)));
  CHECK(kind_of([] { eval_spectral_density(MemoryKernel::delta_train({{1.0, 0.5}}), 1.0); }) ==
        ErrorKind::NonPositiveDensity);
  CHECK(kind_of([] { eval_spectral_density(MemoryKernel::complex_gaussian_sum({{1.0, 2.0}}), 0.4); }) ==
        ErrorKind::NonPositiveDensity);
}

TEST_CASE("total variation") {
  auto train = MemoryKernel::delta_train({{1.0, 0.5}, {cplx(0, 2), 0.7}});
  CHECK(total_variation(train, 0.0, 1.0) == Approx(3.0));
  CHECK(total_variation(MemoryKernel::delta_train({{1.0, 2.0}}), 0.0, 1.0) == 0.0);
  CHECK(total_variation(unit_lorentzian(), -20.0, 20.0) == Approx(1.0 - std::exp(-20.0)).epsilon(1e-9));
  // superadditivity and monotonicity
  const double whole = total_variation(unit_lorentzian(), -2.0, 3.0);
  const double parts = total_variation(unit_lorentzian(), -2.0, 0.5) + total_variation(unit_lorentzian(), 0.5, 3.0);
  CHECK(whole >= parts - 1e-12);
  CHECK(total_variation(unit_lorentzian(), -1.0, 1.0) <= whole);
  // Gaussian: |e^{i k t^2}| = 1
  CHECK(total_variation(MemoryKernel::complex_gaussian_sum({{1.0, 2.0}}), 0.0, 1.0) == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("error functions") {
  auto l = error_functions(unit_lorentzian(), 0.0, 1.0, 0.1);
  // eps * alpha * sqrt(gamma^2 + w^2) / (2 gamma) = 0.1 * 1 * 1 / 2
  CHECK(l.delta0 == Approx(0.05));
  CHECK(l.delta1 == 0.0);
  auto d = error_functions(MemoryKernel::delta_train({{1.0, 0.5}}), 0.0, 1.0, 0.1);
  CHECK(d.delta0 == 0.0);
  CHECK(d.delta1 == Approx(0.1));
  auto g = error_functions(MemoryKernel::complex_gaussian_sum({{1.0, 2.0}}), 0.0, 1.0, 0.1);
  CHECK(g.delta0 == Approx(0.3));
  CHECK(g.delta1 == 0.0);
  CHECK(kind_of([] { error_functions(unit_lorentzian(), 0.0, 1.0, 0.5); }) == ErrorKind::EpsilonTooLarge);

  // Delta0 monotone for every kind; Delta1 for the continuous kinds.
  auto train = MemoryKernel::delta_train({{1.0, 0.05}, {-0.5, 0.3}, {2.0, 0.97}, {1.0, 1.04}});
  for (double e : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    for (double ep : {e / 2.0, e / 3.0}) {
      CHECK(error_functions(train, 0.0, 1.0, ep).delta0 <= error_functions(train, 0.0, 1.0, e).delta0 + 1e-15);
      CHECK(error_functions(unit_lorentzian(), 0.0, 1.0, ep).delta0 <=
            error_functions(unit_lorentzian(), 0.0, 1.0, e).delta0);
    }
  }
  // The printed delta-train Delta1 is not monotone: an atom just inside a+eps.
  auto near_edge = MemoryKernel::delta_train({{1.0, 0.05}});
  CHECK(error_functions(near_edge, 0.0, 1.0, 0.1).delta1 == 0.0);
  CHECK(error_functions(near_edge, 0.0, 1.0, 0.04).delta1 == Approx(0.04));
}

TEST_CASE("mu star") {
  auto one = [](double) { return cplx(1.0); };
  auto zero = [](double) { return cplx(0.0); };
  auto id = [](double x) { return cplx(x); };
  CHECK(std::abs(apply_mu_star(MemoryKernel::delta_train({{1.0, 0.5}}), sample(0, 1, 65, id, one)) - 0.5) < 1e-14);
  CHECK(std::abs(apply_mu_star(MemoryKernel::delta_train({{1.0, 0.0}}), sample(0, 1, 65, one, zero)) - 0.5) < 1e-14);
  // Lorentzian with f = 1 on [-20, 20]: oracle 1 - e^{-20}.
  cplx v = apply_mu_star(unit_lorentzian(), sample(-20, 20, 4001, one, zero));
  CHECK(std::abs(v - (1.0 - std::exp(-20.0))) < 1e-6);

  // Compactly supported f: agrees with direct <mu, f> = int kappa f.
  auto bump = [](double x) { return cplx(x * x * (1 - x) * (1 - x) * std::cos(3 * x)); };
  auto dbump = [](double x) {
    return cplx((2 * x * (1 - x) * (1 - x) - 2 * x * x * (1 - x)) * std::cos(3 * x) -
                3 * x * x * (1 - x) * (1 - x) * std::sin(3 * x));
  };
  auto lor = MemoryKernel::lorentzian_sum({{1.0, 2.0, 0.5}});
  cplx star = apply_mu_star(lor, sample(0, 1, 2049, bump, dbump));
  double re = integrate_adaptive([&](double t) { return (lor.kappa(t) * bump(t)).real(); }, 0, 1, 1e-13).value;
  double im = integrate_adaptive([&](double t) { return (lor.kappa(t) * bump(t)).imag(); }, 0, 1, 1e-13).value;
  CHECK(std::abs(star - cplx(re, im)) < 1e-8);

  // Mollified convergence bound: |<mu*, f> - <mu, rho_eps * f>| <= D0 sup|f| + D1 sup|f'|.
  // For a delta train the mollified pairing is sum a_i (rho_eps * f)(tau_i).
  auto train = MemoryKernel::delta_train({{1.0, 0.0}, {0.7, 0.35}, {-0.4, 0.9}});
  const double eps = 0.08;
  Mollifier m(eps);
  const PointRule& gl = gauss_legendre(40);
  auto f = [](double x) { return std::sin(2.0 * x) + x * x; };
  auto conv = [&](double y) {  // int_{[0,1]} rho_eps(y - x) f(x) dx
    double acc = 0.0;
    for (Index k = 0; k < gl.nodes.size(); ++k) {
      const double x = y + eps * gl.nodes(k);
      if (x < 0.0 || x > 1.0) continue;
      acc += gl.weights(k) * m.density(gl.nodes(k)) * f(x);
    }
    return acc;
  };
  cplx star_t = apply_mu_star(train, sample(0, 1, 257, [&](double x) { return cplx(f(x)); },
                                             [](double x) { return cplx(2 * std::cos(2 * x) + 2 * x); }));
  CHECK(std::abs(star_t - cplx(0.5 * 0.0 + 0.7 * f(0.35) - 0.4 * f(0.9))) < 1e-12);
  const double mollified = 1.0 * conv(0.0) + 0.7 * conv(0.35) - 0.4 * conv(0.9);
  const auto df = error_functions(train, 0.0, 1.0, eps);
  const double sup_f = std::sin(2.0) + 1.0, sup_df = 4.0;
  CHECK(std::abs(star_t.real() - mollified) <= df.delta0 * sup_f + df.delta1 * sup_df);
}

TEST_CASE("mollifier") {
  Mollifier m(0.1);
  CHECK(m.mass() == Approx(1.0).epsilon(1e-12));
  CHECK(m.hat(0.0) == Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-12));
  // Frozen oracle values (independent high-precision quadrature).
  const std::vector<std::pair<double, double>> ref = {
      {1.0, 0.36827120325761004},     {10.0, 0.01313929907189958},      {20.0, -5.048873116144083e-4},
      {50.0, -5.98557063722585e-5},   {100.0, 2.0082190087098983e-6},   {150.0, -2.2034864225552183e-8},
      {200.0, -2.216109953002074e-8}, {300.0, 2.7746748983106016e-10},  {400.0, -1.2168447907951675e-11}};
  for (auto [k, v] : ref) {
    CHECK(std::abs(m.hat(k) - v) < 1e-12 * std::max(1.0, std::abs(v)) + 1e-15);
    CHECK(std::abs(mollifier_fourier(m, k / 0.1).real() - v) < 1e-11);
  }
  CHECK(std::abs(m.hat(1000.0) - mollifier_fourier(m, 10000.0).real()) < 1e-13);
  CHECK(std::abs(mollifier_fourier(m, 37.0).imag()) < 1e-12);
  CHECK(std::abs(m.hat(300.0)) < 1e-8);  // superpolynomial decay, checked past the first slow lobe

  Mollifier sq(0.1, MollifierFamily::ScaledBumpVariant);
  CHECK(sq.mass() == Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(sq.hat(10.0) - -3.956374202284908e-3) < 1e-13);
  CHECK(std::abs(sq.hat(100.0) - -1.4507903771352396e-7) < 1e-15);
  CHECK(std::abs(sq.hat(200.0) - -2.4166143365459544e-10) < 1e-15);
  // hat' bound dominates sampled slopes
  for (double k = 0.0; k < 20.0; k += 0.37)
    CHECK(std::abs(m.hat(k + 1e-5) - m.hat(k - 1e-5)) / 2e-5 <= m.hat_derivative_bound() + 1e-8);
}

TEST_CASE("regularize") {
  // delta at 0: ||v_eps||^2 = (1/eps) int |rho^|^2 = ||rho||^2 / eps
  auto delta = MemoryKernel::delta_train({{1.0, 0.0}});
  Mollifier m1(0.2), m2(0.1);
  auto r1 = regularize(delta, m1, suggest_grid(delta, m1));
  auto r2 = regularize(delta, m2, suggest_grid(delta, m2));
  CHECK(r2.l2_norm * r2.l2_norm / (r1.l2_norm * r1.l2_norm) == Approx(2.0).epsilon(1e-8));
  CHECK(r1.l2_norm * r1.l2_norm == Approx(m1.l2_norm_squared() / 0.2).epsilon(1e-8));

  auto flat = MemoryKernel::tabulated_density(-1.0, 1.0, std::vector<double>(21, 1.0));
  Mollifier m3(0.01);
  auto r3 = regularize(flat, m3, {2.0, 4001});
  CHECK(std::norm(r3.vhat(0.0)) == Approx(1.0 / (2.0 * kPi)).epsilon(1e-12));

  CHECK(kind_of([&] { regularize(unit_lorentzian(), Mollifier(0.05), {200.0, 4001}); }) ==
        ErrorKind::TailNotNegligible);
  auto lr = regularize(unit_lorentzian(), Mollifier(0.05), {600.0, 240001});
  auto oracle = integrate_adaptive([&](double w) { return lr.weight(w); }, 0.0, 600.0, 1e-13).value * 2.0;
  CHECK(lr.l2_norm * lr.l2_norm == Approx(oracle).epsilon(1e-6));
  for (Index i = 0; i < lr.grid.size(); i += 9973) {
    const double w = lr.grid(i);
    CHECK(std::norm(lr.values(i)) ==
          Approx(eval_spectral_density(unit_lorentzian(), w) * std::pow(Mollifier(0.05).hat(w * 0.05), 2)));
  }
}
