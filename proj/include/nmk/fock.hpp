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

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nmk/chain.hpp"
#include "nmk/kernels.hpp"
#include "nmk/types.hpp"

namespace nmk {

// ---------------------------------------------------------------------------
// System model
// ---------------------------------------------------------------------------

enum class ProfileKind { Constant, Cosine, Sine, Linear };

// Scalar factor multiplying a constant Hamiltonian term:
//   Constant: amplitude
//   Cosine:   amplitude cos(frequency t + phase)
//   Sine:     amplitude sin(frequency t + phase)
//   Linear:   amplitude (1 + frequency t)   (frequency doubles as a ramp rate)
struct TimeProfile {
  ProfileKind kind = ProfileKind::Constant;
  double amplitude = 1.0;
  double frequency = 0.0;
  double phase = 0.0;

  double operator()(double t) const;
  // sup over [0, t_final] of |f|.
  double sup_abs(double t_final) const;
  bool is_constant() const { return kind == ProfileKind::Constant; }
};

struct SystemTerm {
  std::vector<int> support;
  cx_mat matrix;
  TimeProfile profile;
};

struct JumpOperator {
  std::vector<int> support;
  cx_mat matrix;
  int bath = 0;
};

struct SystemModel {
  int n = 1;  // qudits
  int d = 2;  // local dimension
  std::vector<SystemTerm> hs_terms;
  std::vector<JumpOperator> jumps;
  bool k_local = false;  // enforce |support| <= k and unit operator norms
  int k = 0;

  void validate() const;
  Index dim() const;
  int bath_count() const;
  bool time_dependent() const;
  cx_mat hamiltonian(double t) const;
  // Sum of L over all jump entries attached to `bath`.
  cx_mat jump(int bath) const;
  double jump_norm(int bath) const;
  // sup_s ||[H_S(s), L_bath]|| bounded termwise by sup|f_i| ||[H_i, L]||.
  double commutator_bound(int bath, double t_final) const;
  double hamiltonian_norm_bound(double t_final) const;
};

// Place a d^|support| operator on the listed qudits of an n-qudit register
// (qudit 0 is the most significant digit).
cx_mat embed_local(const cx_mat& m, const std::vector<int>& support, int n, int d);

cx_mat pauli_x();
cx_mat pauli_y();
cx_mat pauli_z();
cx_mat sigma_minus();  // |g><e| with |e> = index 0
cx_mat sigma_plus();

// ---------------------------------------------------------------------------
// Truncated space
//
// Basis index = system * B^M + sum_a local_a * B^(M-1-a), B = C(N_m + p, p).
// Local states of one bath are occupation vectors (n_1..n_Nm) with sum <= p in
// lexicographic order, n_1 most significant: the vacuum is local state 0.
// ---------------------------------------------------------------------------

inline constexpr Index kDefaultDimensionCap = Index(1) << 24;

class TruncatedSpace {
 public:
  using Sparse = std::vector<std::pair<int, int>>;  // (mode, occupation), modes increasing

  TruncatedSpace(int n, int d, int M, int n_modes, int p, Index cap = kDefaultDimensionCap);

  int qudits() const { return n_; }
  int local_dim_system() const { return d_; }
  int baths() const { return m_; }
  int modes() const { return n_modes_; }
  int cap() const { return p_; }

  Index dimension() const { return system_dim_ * env_dim_; }
  Index system_dim() const { return system_dim_; }
  Index local_dim() const { return local_dim_; }
  Index env_dim() const { return env_dim_; }
  Index stride(int bath) const { return strides_[bath]; }

  const Sparse& local_state(Index s) const { return local_[s]; }
  int local_particles(Index s) const { return particles_[s]; }
  Index local_rank(const Sparse& occupation) const;
  Index local_rank_dense(const std::vector<int>& occupation) const;
  std::vector<int> local_dense(Index s) const;

  struct Labels {
    std::vector<int> system_digits;
    std::vector<std::vector<int>> occupations;  // per bath, length N_m
  };
  Labels labels(Index i) const;
  Index index(const Labels& l) const;

  Index system_index(Index i) const { return i / env_dim_; }
  Index local_index(Index i, int bath) const { return (i % env_dim_) / strides_[bath] % local_dim_; }
  // Particles in `bath` for full basis state i.
  int particles(Index i, int bath) const { return particles_[local_index(i, bath)]; }

 private:
  int n_, d_, m_, n_modes_, p_;
  Index system_dim_, local_dim_, env_dim_;
  std::vector<Index> strides_;
  std::vector<std::vector<Index>> count_;  // count_[m][q] = C(m + q, q)
  std::vector<Sparse> local_;
  std::vector<int> particles_;
};

TruncatedSpace enumerate_basis(int n, int d, int M, int n_modes, int p, Index cap = kDefaultDimensionCap);

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

struct SparseOperator {
  cx_sp_mat matrix;
  bool hermitian = false;

  Index dimension() const { return matrix.rows(); }
  // Text dump: "# nmk-coo <dim> <nnz> <hermitian>" then "row col re im" per entry (0-based).
  void write_coordinate(std::ostream& os) const;
  static SparseOperator read_coordinate(std::istream& is);
  // max |A - A^H| over stored entries.
  double hermiticity_defect() const;
};

enum class LadderKind { Lower, Raise };

SparseOperator ladder(const TruncatedSpace& space, int bath, int mode, LadderKind kind);

// Single-particle data of one bath: onsite energies, nearest-neighbour hoppings
// and the amplitudes g_k in L a^dag(g) + h.c. A chain has g = (||v||, 0, ..).
struct BathModes {
  rvec onsite;
  rvec hopping;
  cx_vec coupling;

  int modes() const { return static_cast<int>(onsite.size()); }
  double coupling_norm() const { return coupling.norm(); }
  double max_frequency() const;
  static BathModes from_chain(const ChainCoefficients& c);
};

// H(t) = fixed + sum_i f_i(t) driven_i, cached so stepping only rescales.
struct HamiltonianSeries {
  cx_sp_mat fixed;
  std::vector<std::pair<TimeProfile, cx_sp_mat>> driven;

  cx_sp_mat at(double t) const;
  bool time_dependent() const { return !driven.empty(); }
};

HamiltonianSeries assemble_hamiltonian(const SystemModel& model, const std::vector<BathModes>& baths,
                                       const TruncatedSpace& space);

SparseOperator build_hamiltonian(const SystemModel& model, const std::vector<ChainCoefficients>& chains,
                                 const TruncatedSpace& space, double t);
SparseOperator build_hamiltonian(const SystemModel& model, const std::vector<BathModes>& baths,
                                 const TruncatedSpace& space, double t);

// The a-priori norm estimate ||H_S|| + 2 sqrt(p+1) sum ||L|| ||v|| + p M N_m w_c + 2 w_c (p+1) M (N_m - 1).
double hamiltonian_norm_estimate(const SystemModel& model, const std::vector<ChainCoefficients>& chains,
                                 const TruncatedSpace& space, double t_final);

cx_vec project_particle_sector(const TruncatedSpace& space, const cx_vec& state, int q);

// Re-express a state on a larger space (more modes or a higher cap). mode_map[a][j]
// is the target mode of source mode j in bath a; empty means identity.
cx_vec embed_state(const TruncatedSpace& from, const TruncatedSpace& to, const cx_vec& state,
                   const std::vector<std::vector<int>>& mode_map = {});

// ---------------------------------------------------------------------------
// Initial environment states
// ---------------------------------------------------------------------------

enum class BathStateKind { Vacuum, SinglePhoton, Coherent };

// Normalized Gaussian wavepacket u^(w) = (2 pi s^2)^(-1/4) exp(-(w - w0)^2 / 4 s^2 - i w t0).
struct Wavepacket {
  double center = 0.0;
  double width = 1.0;
  double delay = 0.0;

  cplx operator()(double omega) const;
};

struct BathInitialState {
  BathStateKind kind = BathStateKind::Vacuum;
  cx_vec amplitudes;                  // photon amplitudes or displacements per mode
  std::optional<Wavepacket> packet;   // frequency-domain origin, if any
  double residual = 0.0;              // norm^2 lost when projecting onto the chain modes
  double mu1 = 0.0;                   // <N> of the untruncated state
  double mu2 = 0.0;                   // <N^2> of the untruncated state

  static BathInitialState vacuum() { return {}; }
  static BathInitialState single_photon(const cx_vec& amplitudes);
  static BathInitialState coherent(const cx_vec& displacement);
};

struct InitialEnvState {
  std::vector<BathInitialState> baths;

  static InitialEnvState vacuum(int baths);
  bool is_vacuum() const;
  // Distance between the requested product state and the normalized state
  // prepared under a per-bath cap p (mode projection plus cap truncation).
  double initialization_error(int p) const;
};

// Project a frequency-domain photon onto the chain modes P_j(w) v^(w).
BathInitialState project_wavepacket(const ChainCoefficients& chain, const RegularizedCoupling& coupling,
                                    const Wavepacket& packet);

// Norm^2 of a coherent state above p particles (Poisson tail).
double coherent_cap_residual(const cx_vec& displacement, int p);

cx_vec make_initial_state(const TruncatedSpace& space, const cx_vec& system_state, const InitialEnvState& env);

}  // namespace nmk
