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

#include "nmk/chain.hpp"
#include "nmk/error.hpp"

using namespace nmk;
using doctest::Approx;

TEST_CASE("gauss quadrature on a flat weight") {
  auto flat = SpectralWeight::flat();
  auto q1 = gauss_quadrature(flat, 1.0, 1);
  CHECK(std::abs(q1.nodes(0)) < 1e-13);
  CHECK(q1.weights(0) == Approx(1.0));
  auto q2 = gauss_quadrature(flat, 1.0, 2);
  CHECK(q2.nodes(0) == Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(q2.nodes(1) == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(q2.weights(0) == Approx(0.5).epsilon(1e-12));
  auto q5 = gauss_quadrature(flat, 1.0, 5);
  CHECK(q5.weights.sum() == Approx(1.0).epsilon(1e-12));
  for (int k = 0; k <= 9; ++k) {
    double s = 0.0;
    for (Index i = 0; i < 5; ++i) s += q5.weights(i) * std::pow(q5.nodes(i), k);
    const double exact = (k % 2) ? 0.0 : 1.0 / (k + 1.0);
    CHECK(std::abs(s - exact) < 1e-12);
  }
}

TEST_CASE("chain coefficients of a flat weight") {
  const double wc = 2.5;
  auto c = star_to_chain(SpectralWeight::flat(3.0), wc, 12);
  CHECK(c.v_norm == Approx(std::sqrt(3.0 * 2.0 * wc)).epsilon(1e-12));
  for (int a = 0; a < 12; ++a) CHECK(std::abs(c.onsite(a)) < 1e-12);
  for (int a = 1; a < 12; ++a) CHECK(c.hopping(a - 1) == Approx(wc * a / std::sqrt(4.0 * a * a - 1.0)).epsilon(1e-10));
  // scaling covariance
  auto c2 = star_to_chain(SpectralWeight::flat(3.0), 2.0 * wc, 12);
  CHECK((c2.hopping - 2.0 * c.hopping).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("chain of a regularized lorentzian") {
  auto k = MemoryKernel::lorentzian_sum({{1.0, 0.7, 0.5}});
  Mollifier m(0.1);
  auto coupling = regularize(k, m, suggest_grid(k, m));
  const double wc = 6.0;
  auto c = star_to_chain(coupling, wc, 20);
  CHECK(c.onsite.cwiseAbs().maxCoeff() <= wc);
  CHECK(c.hopping.minCoeff() > 0.0);
  CHECK(c.hopping.maxCoeff() <= wc);
  auto w = SpectralWeight::of(coupling);
  rmat g = mode_gram(c, w);
  CHECK((g - rmat::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-8);
  // Quadrature exactness against the weight itself.
  auto q = gauss_quadrature(coupling, wc, 8);
  CHECK(q.weights.sum() == Approx(1.0).epsilon(1e-12));
  for (Index i = 1; i < q.count(); ++i) CHECK(q.nodes(i) > q.nodes(i - 1));
  CHECK(q.nodes(0) >= -wc);
  CHECK(q.nodes(q.count() - 1) <= wc);
  // phase never enters
  auto kp = k;
  kp.phase_poly = {0.3, -0.2, 0.05};
  auto cp = star_to_chain(regularize(kp, m, suggest_grid(kp, m)), wc, 20);
  CHECK((cp.hopping - c.hopping).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("degenerate and breakdown cases") {
  SpectralWeight two{[](double w) { return std::abs(w) < 0.5 ? 1.0 : 0.0; }, {-0.5, 0.5}};
  CHECK_NOTHROW(star_to_chain(two, 1.0, 3));
  rvec nodes(2), weights(2);
  nodes << -0.5, 0.5;
  weights << 0.5, 0.5;
  CHECK_THROWS_AS(stieltjes(nodes, weights, 3, 1.0), Error);
  try {
    stieltjes(nodes, weights, 3, 1.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateWeight);
  }
}

TEST_CASE("single particle propagation") {
  ChainCoefficients c;
  c.onsite = rvec::Constant(1, 2.0);
  c.hopping.resize(0);
  cx_vec c0 = cx_vec::Ones(1);
  CHECK(std::abs(chain_propagate_single(c, c0, kPi)(0) - 1.0) < 1e-12);
  c.onsite = rvec::Zero(2);
  c.hopping = rvec::Ones(1);
  cx_vec e1 = cx_vec::Zero(2);
  e1(0) = 1.0;
  CHECK(std::abs(chain_propagate_single(c, e1, 0.0)(0) - 1.0) < 1e-15);
  cx_vec r = chain_propagate_single(c, e1, kPi / 2);
  CHECK(std::abs(r(0)) < 1e-12);
  CHECK(std::abs(r(1) - cplx(0, -1)) < 1e-12);
  auto big = star_to_chain(SpectralWeight::flat(), 3.0, 15);
  cx_vec v = cx_vec::Random(15);
  CHECK(chain_propagate_single(big, v, 2.3).norm() == Approx(v.norm()).epsilon(1e-10));
}

TEST_CASE("chain error") {
  auto flat = SpectralWeight::flat(1.0 / 2.0);
  auto c = star_to_chain(flat, 1.0, 16);
  CHECK(chain_error_single(c, flat, 0.0).actual < 1e-13);
  auto e = chain_error_single(c, flat, 1.0);
  CHECK(e.actual < 1e-6 * c.v_norm * c.v_norm);
  CHECK(e.actual <= e.bound);
  // monotone in t, and decreasing in N once N > 2 e w_c t
  std::vector<double> ts;
  for (int i = 0; i <= 20; ++i) ts.push_back(0.15 * i);
  auto curve = chain_error_curve(c, flat, ts);
  for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].actual >= curve[i - 1].actual - 1e-14);
  double prev = 1e300;
  for (int n : {10, 12, 14, 16}) {
    auto cn = star_to_chain(flat, 1.0, n);
    auto en = chain_error_single(cn, flat, 4.0);
    CHECK(en.actual < prev);
    if (2.0 * std::exp(1.0) * 4.0 < n) CHECK(en.actual <= en.bound);
    prev = en.actual;
  }
}
