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
#include "nmk/linalg.hpp"
#include "nmk/oracle.hpp"

using namespace nmk;
using doctest::Approx;

namespace {

SystemModel qubit(const cx_mat& h, const cx_mat& l) {
  SystemModel m;
  m.hs_terms.push_back({{0}, h, {}});
  m.jumps.push_back({{0}, l, 0});
  return m;
}

RegularizedCoupling desk_coupling(double alpha = 0.5) {
  const auto k = MemoryKernel::lorentzian_sum({{alpha, 0.0, 1.0}});
  const Mollifier m(0.1);
  return regularize(k, m, suggest_grid(k, m));
}

cx_vec excited_qubit() {
  cx_vec e = cx_vec::Zero(2);
  e(0) = 1.0;
  return e;
}

double rho_ee(const cx_mat& rho) { return rho(0, 0).real(); }

}  // namespace

TEST_CASE("star nodes are cell midpoints weighted by sqrt(dw)") {
  const auto c = desk_coupling();
  const auto s = make_star(c, 4.0, 16);
  CHECK(s.count() == 16);
  CHECK(s.delta_omega == Approx(0.5));
  for (int k = 0; k < 16; ++k) {
    CHECK(s.frequencies(k) == Approx(-4.0 + (k + 0.5) * 0.5).epsilon(1e-14));
    CHECK(std::abs(s.couplings(k) - c.vhat(s.frequencies(k)) * std::sqrt(0.5)) < 1e-14);
  }
  // Midpoint rule on a smooth weight: the norm gap shrinks like dw^2.
  const double g16 = make_star(c, 4.0, 16).norm_gap;
  const double g64 = make_star(c, 4.0, 64).norm_gap;
  CHECK(g64 < g16 / 10.0);
  CHECK_THROWS_AS(make_star(c, 4.0, 0), Error);
}

TEST_CASE("zero coupling star evolves the system alone") {
  const auto m = qubit(0.5 * pauli_z(), sigma_minus());
  StarDiscretization s;
  s.frequencies = rvec::LinSpaced(4, -1.5, 1.5);
  s.couplings = cx_vec::Zero(4);
  s.omega_c = 2.0;
  s.delta_omega = 1.0;
  const std::vector<StarDiscretization> stars{s};
  const auto space = star_space(m, stars, 1);
  const cx_vec plus = cx_vec::Constant(2, 1.0 / std::sqrt(2.0));
  const auto tr = star_evolve(m, stars, space, make_initial_state(space, plus, InitialEnvState::vacuum(1)), 2.0, {0.5});
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    CHECK(std::abs(tr.rho[i](0, 1) - 0.5 * std::exp(cplx(0.0, -t))) < 1e-9);
    CHECK(tr.mu1[i][0] < 1e-20);
  }
  CHECK(tr.source == "star");
}

TEST_CASE("a one-mode star is Jaynes-Cummings") {
  const double g = 0.7;
  const auto m = qubit(cx_mat::Zero(2, 2), sigma_minus());
  StarDiscretization s;
  s.frequencies = rvec::Zero(1);
  s.couplings = cx_vec::Constant(1, g);
  s.omega_c = 1.0;
  s.delta_omega = 2.0;
  const std::vector<StarDiscretization> stars{s};
  const auto space = star_space(m, stars, 1);
  const auto tr = star_evolve(m, stars, space, make_initial_state(space, excited_qubit(), InitialEnvState::vacuum(1)),
                              3.0, {0.25});
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double c = std::cos(g * tr.times[i]);
    CHECK(rho_ee(tr.rho[i]) == Approx(c * c).epsilon(1e-9));
    CHECK(tr.mu1[i][0] == Approx(1.0 - c * c).epsilon(1e-9));
  }
}

TEST_CASE("star wavepacket amplitudes are normalized samples") {
  const auto c = desk_coupling();
  const auto s = make_star(c, 8.0, 64);
  const Wavepacket w{0.5, 0.4, 1.0};
  const auto b = star_wavepacket(s, w);
  CHECK(b.kind == BathStateKind::SinglePhoton);
  CHECK(b.amplitudes.norm() == Approx(1.0).epsilon(1e-12));
  const cplx ratio = b.amplitudes(40) / b.amplitudes(30);
  CHECK(std::abs(ratio - w(s.frequencies(40)) / w(s.frequencies(30))) < 1e-10);
}

TEST_CASE("lindblad amplitude damping") {
  const double gamma = 0.8;
  const auto m = qubit(0.5 * pauli_z(), sigma_minus());
  const cx_vec plus = cx_vec::Constant(2, 1.0 / std::sqrt(2.0));
  const std::vector<double> times{0.0, 0.5, 1.0, 2.0, 4.0};
  const auto rho = lindblad_evolve(m, {gamma}, plus * plus.adjoint(), times);
  REQUIRE(rho.size() == times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    CHECK(rho_ee(rho[i]) == Approx(0.5 * std::exp(-gamma * t)).epsilon(1e-9));
    CHECK(std::abs(rho[i](0, 1) - 0.5 * std::exp(cplx(-gamma * t / 2.0, -t))) < 1e-9);
    CHECK(std::abs(rho[i].trace() - 1.0) < 1e-12);
  }
}

TEST_CASE("lindblad with zero rate is unitary") {
  const auto m = qubit(0.5 * pauli_x(), sigma_minus());
  const cx_vec e = excited_qubit();
  const auto rho = lindblad_evolve(m, {0.0}, e * e.adjoint(), 2.0);
  const double c = std::cos(1.0);
  CHECK(rho_ee(rho) == Approx(c * c).epsilon(1e-10));
  CHECK(std::abs((rho * rho).trace() - 1.0) < 1e-10);
}

TEST_CASE("lindblad keeps a positive unit-trace state under dephasing and driving") {
  const auto m = qubit(0.3 * pauli_x() + 0.5 * pauli_z(), pauli_x());
  const cx_vec e = excited_qubit();
  std::vector<double> times;
  for (int i = 0; i <= 20; ++i) times.push_back(0.25 * i);
  for (const auto& rho : lindblad_evolve(m, {0.6}, e * e.adjoint(), times)) {
    CHECK(std::abs(rho.trace() - 1.0) < 1e-12);
    CHECK(hermiticity_defect(rho) < 1e-12);
    CHECK(min_eigenvalue(rho) > -1e-10);
  }
  CHECK_THROWS_AS(lindblad_evolve(m, {-1.0}, e * e.adjoint(), 1.0), Error);
}

TEST_CASE("star oracle approaches the chain model as K grows") {
  const auto m = qubit(0.5 * pauli_z(), pauli_x());
  const auto c = desk_coupling();
  const double wc = 4.0, t = 2.0;
  const std::vector<ChainCoefficients> chains{star_to_chain(c, wc, 8)};
  const auto cspace = enumerate_basis(1, 2, 1, 8, 2);
  const auto chain = evolve(m, chains, cspace,
                            make_initial_state(cspace, excited_qubit(), InitialEnvState::vacuum(1)), t);
  double previous = 1.0;
  for (int k : {8, 16, 32}) {
    const std::vector<StarDiscretization> stars{make_star(c, wc, k)};
    const auto space = star_space(m, stars, 2);
    const auto star = star_evolve(m, stars, space,
                                  make_initial_state(space, excited_qubit(), InitialEnvState::vacuum(1)), t);
    CHECK(star.max_norm_drift() < 1e-8);
    CHECK(star.min_eigenvalue() > -1e-8);
    const double d = trace_distance(star.rho.back(), chain.rho.back());
    MESSAGE("K = " << k << ": trace distance " << d);
    CHECK(d < previous);
    previous = d;
  }
  CHECK(previous < 5e-3);
}
