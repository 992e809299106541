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

#include "nmk/fock.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "nmk/error.hpp"
#include "nmk/linalg.hpp"
#include "nmk/quadrature.hpp"

namespace nmk {

namespace {

using Triplet = Eigen::Triplet<cplx>;

Index ipow(Index base, int e) {
  Index r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

cx_sp_mat sparse_identity(Index n) {
  cx_sp_mat id(n, n);
  id.setIdentity();
  return id;
}

cx_sp_mat to_sparse(const cx_mat& m) {
  cx_sp_mat s = m.sparseView(1.0, 1e-300);
  s.makeCompressed();
  return s;
}

cx_sp_mat kron(const cx_sp_mat& a, const cx_sp_mat& b) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(a.nonZeros()) * static_cast<size_t>(b.nonZeros()));
  for (Index i = 0; i < a.outerSize(); ++i)
    for (cx_sp_mat::InnerIterator ia(a, i); ia; ++ia)
      for (Index k = 0; k < b.outerSize(); ++k)
        for (cx_sp_mat::InnerIterator ib(b, k); ib; ++ib)
          trip.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                            ia.value() * ib.value());
  cx_sp_mat out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// sys (x) I_pre (x) local (x) I_post.
cx_sp_mat place(const cx_sp_mat& sys, const cx_sp_mat& local, const TruncatedSpace& space, int bath) {
  const Index pre = ipow(space.local_dim(), bath);
  const Index post = space.stride(bath);
  cx_sp_mat env = kron(kron(sparse_identity(pre), local), sparse_identity(post));
  return kron(sys, env);
}

using Occ = TruncatedSpace::Sparse;

int occupation_of(const Occ& s, int mode) {
  for (const auto& [m, n] : s)
    if (m == mode) return n;
  return 0;
}

Occ shifted(const Occ& s, int mode, int delta) {
  Occ out = s;
  auto it = std::lower_bound(out.begin(), out.end(), mode,
                             [](const std::pair<int, int>& e, int m) { return e.first < m; });
  if (it != out.end() && it->first == mode) {
    it->second += delta;
    if (it->second == 0) out.erase(it);
  } else {
    out.insert(it, {mode, delta});
  }
  return out;
}

cx_sp_mat local_raise(const TruncatedSpace& sp, const cx_vec& amplitude) {
  std::vector<Triplet> trip;
  for (Index s = 0; s < sp.local_dim(); ++s) {
    if (sp.local_particles(s) >= sp.cap()) continue;
    const Occ& occ = sp.local_state(s);
    for (int j = 0; j < sp.modes(); ++j) {
      if (amplitude(j) == cplx(0.0)) continue;
      const int n = occupation_of(occ, j);
      trip.emplace_back(sp.local_rank(shifted(occ, j, +1)), s, amplitude(j) * std::sqrt(n + 1.0));
    }
  }
  cx_sp_mat out(sp.local_dim(), sp.local_dim());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

cx_sp_mat local_free(const TruncatedSpace& sp, const BathModes& b) {
  std::vector<Triplet> trip;
  for (Index s = 0; s < sp.local_dim(); ++s) {
    const Occ& occ = sp.local_state(s);
    double diag = 0.0;
    for (const auto& [j, n] : occ) {
      diag += b.onsite(j) * n;
      if (j + 1 < sp.modes() && b.hopping(j) != 0.0) {
        const int n1 = occupation_of(occ, j + 1);
        const Index t = sp.local_rank(shifted(shifted(occ, j, -1), j + 1, +1));
        const double amp = b.hopping(j) * std::sqrt(double(n) * (n1 + 1.0));
        trip.emplace_back(t, s, amp);
        trip.emplace_back(s, t, amp);
      }
    }
    if (diag != 0.0) trip.emplace_back(s, s, diag);
  }
  cx_sp_mat out(sp.local_dim(), sp.local_dim());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

int digit(Index i, int q, int n, int d) { return static_cast<int>((i / ipow(d, n - 1 - q)) % d); }

}  // namespace

// ---------------------------------------------------------------------------
// System model
// ---------------------------------------------------------------------------

double TimeProfile::operator()(double t) const {
  switch (kind) {
    case ProfileKind::Constant: return amplitude;
    case ProfileKind::Cosine: return amplitude * std::cos(frequency * t + phase);
    case ProfileKind::Sine: return amplitude * std::sin(frequency * t + phase);
    case ProfileKind::Linear: return amplitude * (1.0 + frequency * t);
  }
  return 0.0;
}

double TimeProfile::sup_abs(double t_final) const {
  if (kind == ProfileKind::Linear)
    return std::abs(amplitude) * std::max(1.0, std::abs(1.0 + frequency * t_final));
  return std::abs(amplitude);
}

cx_mat embed_local(const cx_mat& m, const std::vector<int>& support, int n, int d) {
  const int k = static_cast<int>(support.size());
  const Index sub = ipow(d, k);
  if (m.rows() != sub || m.cols() != sub)
    throw Error(ErrorKind::ShapeMismatch, "local operator has the wrong dimension for its support");
  const Index full = ipow(d, n);
  std::vector<Index> weight(k);
  for (int a = 0; a < k; ++a) weight[a] = ipow(d, n - 1 - support[a]);
  cx_mat out = cx_mat::Zero(full, full);
  for (Index i = 0; i < full; ++i) {
    Index si = 0, base = i;
    for (int a = 0; a < k; ++a) {
      const int dg = digit(i, support[a], n, d);
      si = si * d + dg;
      base -= dg * weight[a];
    }
    for (Index b = 0; b < sub; ++b) {
      const cplx v = m(si, b);
      if (v == cplx(0.0)) continue;
      Index j = base, rest = b;
      for (int a = k - 1; a >= 0; --a) {
        j += (rest % d) * weight[a];
        rest /= d;
      }
      out(i, j) += v;
    }
  }
  return out;
}

cx_mat pauli_x() { cx_mat m(2, 2); m << 0, 1, 1, 0; return m; }
cx_mat pauli_y() { cx_mat m(2, 2); m << 0, -kI, kI, 0; return m; }
cx_mat pauli_z() { cx_mat m(2, 2); m << 1, 0, 0, -1; return m; }
cx_mat sigma_minus() { cx_mat m(2, 2); m << 0, 0, 1, 0; return m; }
cx_mat sigma_plus() { return sigma_minus().adjoint(); }

namespace {
void check_support(const std::vector<int>& support, int n, const char* what) {
  std::vector<int> s = support;
  std::sort(s.begin(), s.end());
  if (s.empty() || s.front() < 0 || s.back() >= n || std::adjacent_find(s.begin(), s.end()) != s.end())
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " support must list distinct qudits in range");
}
}  // namespace

void SystemModel::validate() const {
  if (n < 1 || d < 2) throw Error(ErrorKind::InvalidArgument, "need n >= 1 qudits of dimension d >= 2");
  if (ipow(d, n) > (Index(1) << 12)) throw Error(ErrorKind::DimensionOverflow, "system register too large");
  for (const auto& h : hs_terms) {
    check_support(h.support, n, "hamiltonian term");
    if (h.matrix.rows() != ipow(d, h.support.size()) || h.matrix.cols() != h.matrix.rows())
      throw Error(ErrorKind::ShapeMismatch, "hamiltonian term dimension");
    if (!is_hermitian(h.matrix, 1e-12)) throw Error(ErrorKind::InvalidArgument, "hamiltonian term not Hermitian");
    if (k_local && (int(h.support.size()) > k || spectral_norm(h.matrix) > 1.0 + 1e-12))
      throw Error(ErrorKind::InvalidArgument, "hamiltonian term violates the k-local flags");
  }
  for (const auto& j : jumps) {
    check_support(j.support, n, "jump operator");
    if (j.matrix.rows() != ipow(d, j.support.size()) || j.matrix.cols() != j.matrix.rows())
      throw Error(ErrorKind::ShapeMismatch, "jump operator dimension");
    if (j.bath < 0) throw Error(ErrorKind::InvalidArgument, "negative bath index");
    if (k_local && (int(j.support.size()) > k || spectral_norm(j.matrix) > 1.0 + 1e-12))
      throw Error(ErrorKind::InvalidArgument, "jump operator violates the k-local flags");
  }
}

Index SystemModel::dim() const { return ipow(d, n); }

int SystemModel::bath_count() const {
  int m = 0;
  for (const auto& j : jumps) m = std::max(m, j.bath + 1);
  return m;
}

bool SystemModel::time_dependent() const {
  return std::any_of(hs_terms.begin(), hs_terms.end(), [](const SystemTerm& h) { return !h.profile.is_constant(); });
}

cx_mat SystemModel::hamiltonian(double t) const {
  cx_mat h = cx_mat::Zero(dim(), dim());
  for (const auto& term : hs_terms) h += term.profile(t) * embed_local(term.matrix, term.support, n, d);
  return h;
}

cx_mat SystemModel::jump(int bath) const {
  cx_mat l = cx_mat::Zero(dim(), dim());
  for (const auto& j : jumps)
    if (j.bath == bath) l += embed_local(j.matrix, j.support, n, d);
  return l;
}

double SystemModel::jump_norm(int bath) const { return spectral_norm(jump(bath)); }

double SystemModel::commutator_bound(int bath, double t_final) const {
  const cx_mat l = jump(bath);
  double s = 0.0;
  for (const auto& term : hs_terms)
    s += term.profile.sup_abs(t_final) * spectral_norm(commutator(embed_local(term.matrix, term.support, n, d), l));
  return s;
}

double SystemModel::hamiltonian_norm_bound(double t_final) const {
  double s = 0.0;
  for (const auto& term : hs_terms) s += term.profile.sup_abs(t_final) * spectral_norm(term.matrix);
  return s;
}

// ---------------------------------------------------------------------------
// Truncated space
// ---------------------------------------------------------------------------

TruncatedSpace::TruncatedSpace(int n, int d, int M, int n_modes, int p, Index cap)
    : n_(n), d_(d), m_(M), n_modes_(n_modes), p_(p) {
  if (n < 1 || d < 1 || M < 1 || n_modes < 1 || p < 0)
    throw Error(ErrorKind::InvalidArgument, "space counts must be >= 1 (p >= 0)");
  // Dimension estimate in floating point before any integer arithmetic.
  double local = 1.0;
  for (int q = 1; q <= p; ++q) local = local * (n_modes + q) / q;
  const double total = std::pow(double(d), n) * std::pow(local, M);
  if (total > double(cap) + 0.5)
    throw Error(ErrorKind::DimensionOverflow, "truncated space has " + std::to_string(total) + " states");

  count_.assign(n_modes + 1, std::vector<Index>(p + 1, 1));
  for (int m = 1; m <= n_modes; ++m)
    for (int q = 1; q <= p; ++q) count_[m][q] = count_[m - 1][q] + count_[m][q - 1];
  local_dim_ = count_[n_modes][p];
  system_dim_ = ipow(d, n);
  env_dim_ = ipow(local_dim_, M);
  strides_.resize(M);
  for (int a = 0; a < M; ++a) strides_[a] = ipow(local_dim_, M - 1 - a);

  local_.resize(local_dim_);
  particles_.resize(local_dim_);
  for (Index r0 = 0; r0 < local_dim_; ++r0) {
    Index r = r0;
    int rem = p, j = 0;
    Occ occ;
    while (r > 0) {
      // First mode with a nonzero occupation: count_[N-j-1][rem] decreases in j.
      int lo = j, hi = n_modes - 1;
      while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (r >= count_[n_modes - mid - 1][rem]) hi = mid; else lo = mid + 1;
      }
      j = lo;
      int v = 0;
      while (r >= count_[n_modes - j - 1][rem - v]) {
        r -= count_[n_modes - j - 1][rem - v];
        ++v;
      }
      occ.emplace_back(j, v);
      rem -= v;
      ++j;
    }
    particles_[r0] = p - rem;
    local_[r0] = std::move(occ);
  }
}

Index TruncatedSpace::local_rank(const Sparse& occupation) const {
  Index r = 0;
  int rem = p_;
  for (const auto& [j, n] : occupation) {
    for (int v = 0; v < n; ++v) r += count_[n_modes_ - j - 1][rem - v];
    rem -= n;
  }
  return r;
}

Index TruncatedSpace::local_rank_dense(const std::vector<int>& occupation) const {
  if (int(occupation.size()) != n_modes_) throw Error(ErrorKind::ShapeMismatch, "occupation length");
  Sparse s;
  int total = 0;
  for (int j = 0; j < n_modes_; ++j)
    if (occupation[j] > 0) {
      s.emplace_back(j, occupation[j]);
      total += occupation[j];
    } else if (occupation[j] < 0) {
      throw Error(ErrorKind::InvalidArgument, "negative occupation");
    }
  if (total > p_) throw Error(ErrorKind::InvalidArgument, "occupation above the particle cap");
  return local_rank(s);
}

std::vector<int> TruncatedSpace::local_dense(Index s) const {
  std::vector<int> out(n_modes_, 0);
  for (const auto& [j, n] : local_[s]) out[j] = n;
  return out;
}

TruncatedSpace::Labels TruncatedSpace::labels(Index i) const {
  Labels l;
  const Index sys = system_index(i);
  for (int q = 0; q < n_; ++q) l.system_digits.push_back(digit(sys, q, n_, d_));
  for (int a = 0; a < m_; ++a) l.occupations.push_back(local_dense(local_index(i, a)));
  return l;
}

Index TruncatedSpace::index(const Labels& l) const {
  if (int(l.system_digits.size()) != n_ || int(l.occupations.size()) != m_)
    throw Error(ErrorKind::ShapeMismatch, "labels do not match the space");
  Index sys = 0;
  for (int dg : l.system_digits) sys = sys * d_ + dg;
  Index i = sys * env_dim_;
  for (int a = 0; a < m_; ++a) i += local_rank_dense(l.occupations[a]) * strides_[a];
  return i;
}

TruncatedSpace enumerate_basis(int n, int d, int M, int n_modes, int p, Index cap) {
  return TruncatedSpace(n, d, M, n_modes, p, cap);
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

void SparseOperator::write_coordinate(std::ostream& os) const {
  os << "# nmk-coo " << matrix.rows() << ' ' << matrix.nonZeros() << ' ' << (hermitian ? 1 : 0) << '\n';
  os << std::setprecision(17);
  for (Index i = 0; i < matrix.outerSize(); ++i)
    for (cx_sp_mat::InnerIterator it(matrix, i); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

SparseOperator SparseOperator::read_coordinate(std::istream& is) {
  std::string hash, tag;
  Index dim = 0, nnz = 0;
  int herm = 0;
  if (!(is >> hash >> tag >> dim >> nnz >> herm) || hash != "#" || tag != "nmk-coo")
    throw Error(ErrorKind::InvalidArgument, "not an nmk coordinate dump");
  std::vector<Triplet> trip;
  trip.reserve(nnz);
  for (Index e = 0; e < nnz; ++e) {
    Index r, c;
    double re, im;
    if (!(is >> r >> c >> re >> im)) throw Error(ErrorKind::InvalidArgument, "truncated coordinate dump");
    trip.emplace_back(r, c, cplx(re, im));
  }
  SparseOperator op;
  op.matrix.resize(dim, dim);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.hermitian = herm != 0;
  return op;
}

double SparseOperator::hermiticity_defect() const {
  cx_sp_mat diff = matrix - cx_sp_mat(matrix.adjoint());
  double m = 0.0;
  for (Index i = 0; i < diff.outerSize(); ++i)
    for (cx_sp_mat::InnerIterator it(diff, i); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

SparseOperator ladder(const TruncatedSpace& space, int bath, int mode, LadderKind kind) {
  if (bath < 0 || bath >= space.baths() || mode < 0 || mode >= space.modes())
    throw Error(ErrorKind::InvalidArgument, "ladder index out of range");
  cx_vec amp = cx_vec::Zero(space.modes());
  amp(mode) = 1.0;
  cx_sp_mat raise = local_raise(space, amp);
  cx_sp_mat local = kind == LadderKind::Raise ? raise : cx_sp_mat(raise.adjoint());
  return {place(sparse_identity(space.system_dim()), local, space, bath), false};
}

double BathModes::max_frequency() const { return onsite.size() ? onsite.cwiseAbs().maxCoeff() : 0.0; }

BathModes BathModes::from_chain(const ChainCoefficients& c) {
  BathModes b;
  b.onsite = c.onsite;
  b.hopping = c.hopping;
  b.coupling = cx_vec::Zero(c.modes());
  if (c.modes() > 0) b.coupling(0) = c.v_norm;
  return b;
}

cx_sp_mat HamiltonianSeries::at(double t) const {
  cx_sp_mat h = fixed;
  for (const auto& [f, m] : driven) h += f(t) * m;
  return h;
}

HamiltonianSeries assemble_hamiltonian(const SystemModel& model, const std::vector<BathModes>& baths,
                                       const TruncatedSpace& space) {
  model.validate();
  if (space.system_dim() != model.dim() || int(baths.size()) != space.baths() || model.bath_count() > space.baths())
    throw Error(ErrorKind::ShapeMismatch, "model, baths and space disagree");
  for (size_t a = 0; a < baths.size(); ++a) {
    const BathModes& b = baths[a];
    if (b.modes() != space.modes() || b.coupling.size() != space.modes() ||
        b.hopping.size() != std::max(0, space.modes() - 1))
      throw Error(ErrorKind::ShapeMismatch, "bath mode count differs from the space", long(a));
  }
  const cx_sp_mat id_env = sparse_identity(space.env_dim());
  const cx_sp_mat id_sys = sparse_identity(space.system_dim());

  HamiltonianSeries hs;
  cx_mat static_sys = cx_mat::Zero(model.dim(), model.dim());
  for (const auto& term : model.hs_terms) {
    cx_mat m = embed_local(term.matrix, term.support, model.n, model.d);
    if (term.profile.is_constant())
      static_sys += term.profile.amplitude * m;
    else
      hs.driven.emplace_back(term.profile, kron(to_sparse(m), id_env));
  }
  hs.fixed = kron(to_sparse(static_sys), id_env);
  for (int a = 0; a < space.baths(); ++a) {
    hs.fixed += place(id_sys, local_free(space, baths[a]), space, a);
    const cx_mat l = model.jump(a);
    if (l.isZero(0.0) || baths[a].coupling.isZero(0.0)) continue;
    const cx_sp_mat adag = local_raise(space, baths[a].coupling);
    hs.fixed += place(to_sparse(l), adag, space, a);
    hs.fixed += place(to_sparse(l.adjoint()), cx_sp_mat(adag.adjoint()), space, a);
  }
  hs.fixed.prune(cplx(0.0), 0.0);
  hs.fixed.makeCompressed();
  return hs;
}

SparseOperator build_hamiltonian(const SystemModel& model, const std::vector<BathModes>& baths,
                                 const TruncatedSpace& space, double t) {
  SparseOperator op{assemble_hamiltonian(model, baths, space).at(t), true};
  op.matrix.makeCompressed();
  return op;
}

SparseOperator build_hamiltonian(const SystemModel& model, const std::vector<ChainCoefficients>& chains,
                                 const TruncatedSpace& space, double t) {
  std::vector<BathModes> baths;
  for (size_t a = 0; a < chains.size(); ++a) {
    if (chains[a].modes() != space.modes())
      throw Error(ErrorKind::ShapeMismatch, "chain length differs from the space", long(a));
    baths.push_back(BathModes::from_chain(chains[a]));
  }
  return build_hamiltonian(model, baths, space, t);
}

double hamiltonian_norm_estimate(const SystemModel& model, const std::vector<ChainCoefficients>& chains,
                                 const TruncatedSpace& space, double t_final) {
  const double p = space.cap(), M = space.baths(), nm = space.modes();
  double wc = 0.0, coupling = 0.0;
  for (size_t a = 0; a < chains.size(); ++a) {
    wc = std::max(wc, chains[a].omega_c);
    coupling += model.jump_norm(int(a)) * chains[a].v_norm;
  }
  return model.hamiltonian_norm_bound(t_final) + 2.0 * std::sqrt(p + 1.0) * coupling + p * M * nm * wc +
         2.0 * wc * (p + 1.0) * M * (nm - 1.0);
}

cx_vec project_particle_sector(const TruncatedSpace& space, const cx_vec& state, int q) {
  if (state.size() != space.dimension()) throw Error(ErrorKind::ShapeMismatch, "state dimension");
  if (q < 0 || q > space.cap()) throw Error(ErrorKind::InvalidArgument, "sector cap must lie in [0, p]");
  cx_vec out = state;
  if (q == space.cap()) return out;
  for (Index i = 0; i < out.size(); ++i)
    for (int a = 0; a < space.baths(); ++a)
      if (space.particles(i, a) > q) {
        out(i) = 0.0;
        break;
      }
  return out;
}

cx_vec embed_state(const TruncatedSpace& from, const TruncatedSpace& to, const cx_vec& state,
                   const std::vector<std::vector<int>>& mode_map) {
  if (state.size() != from.dimension()) throw Error(ErrorKind::ShapeMismatch, "state dimension");
  if (from.system_dim() != to.system_dim() || from.baths() != to.baths())
    throw Error(ErrorKind::ShapeMismatch, "spaces differ in system or bath count");
  // Precompute the target rank of every source local state, -1 if it leaves the cap.
  std::vector<std::vector<Index>> target(from.baths(), std::vector<Index>(from.local_dim(), -1));
  for (int a = 0; a < from.baths(); ++a) {
    const bool identity = mode_map.empty() || mode_map[a].empty();
    if (!identity && int(mode_map[a].size()) != from.modes())
      throw Error(ErrorKind::ShapeMismatch, "mode map length", a);
    for (Index s = 0; s < from.local_dim(); ++s) {
      if (from.local_particles(s) > to.cap()) continue;
      std::vector<int> occ(to.modes(), 0);
      for (const auto& [j, n] : from.local_state(s)) {
        const int tj = identity ? j : mode_map[a][j];
        if (tj < 0 || tj >= to.modes()) throw Error(ErrorKind::ShapeMismatch, "mode map out of range", a);
        occ[tj] += n;
      }
      target[a][s] = to.local_rank_dense(occ);
    }
  }
  cx_vec out = cx_vec::Zero(to.dimension());
  for (Index i = 0; i < state.size(); ++i) {
    if (state(i) == cplx(0.0)) continue;
    Index j = from.system_index(i) * to.env_dim();
    bool keep = true;
    for (int a = 0; a < from.baths() && keep; ++a) {
      const Index t = target[a][from.local_index(i, a)];
      if (t < 0) keep = false; else j += t * to.stride(a);
    }
    if (keep) out(j) += state(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initial environment states
// ---------------------------------------------------------------------------

cplx Wavepacket::operator()(double omega) const {
  const double x = omega - center;
  return std::pow(2.0 * kPi * width * width, -0.25) * std::exp(-x * x / (4.0 * width * width)) *
         std::exp(-kI * omega * delay);
}

BathInitialState BathInitialState::single_photon(const cx_vec& amplitudes) {
  const double nrm = amplitudes.norm();
  if (!(nrm > 0.0)) throw Error(ErrorKind::InvalidArgument, "photon amplitudes vanish");
  BathInitialState s;
  s.kind = BathStateKind::SinglePhoton;
  s.amplitudes = amplitudes / nrm;
  s.mu1 = 1.0;
  s.mu2 = 1.0;
  return s;
}

BathInitialState BathInitialState::coherent(const cx_vec& displacement) {
  BathInitialState s;
  s.kind = BathStateKind::Coherent;
  s.amplitudes = displacement;
  const double n = displacement.squaredNorm();
  s.mu1 = n;
  s.mu2 = n * n + n;
  return s;
}

InitialEnvState InitialEnvState::vacuum(int baths) {
  InitialEnvState e;
  e.baths.assign(baths, BathInitialState::vacuum());
  return e;
}

bool InitialEnvState::is_vacuum() const {
  return std::all_of(baths.begin(), baths.end(), [](const BathInitialState& b) { return b.kind == BathStateKind::Vacuum; });
}

double coherent_cap_residual(const cx_vec& displacement, int p) {
  const double n = displacement.squaredNorm();
  double term = std::exp(-n), kept = 0.0;
  for (int k = 0; k <= p; ++k) {
    kept += term;
    term *= n / (k + 1.0);
  }
  return std::max(0.0, 1.0 - kept);
}

double InitialEnvState::initialization_error(int p) const {
  double e = 0.0;
  for (const auto& b : baths) {
    double r = b.residual;
    if (b.kind == BathStateKind::Coherent) r = 1.0 - (1.0 - r) * (1.0 - coherent_cap_residual(b.amplitudes, p));
    if (b.kind == BathStateKind::SinglePhoton && p < 1) r = 1.0;
    r = std::clamp(r, 0.0, 1.0);
    // Distance between a unit vector and its normalized projection of weight 1 - r.
    e += std::sqrt(std::max(0.0, 2.0 - 2.0 * std::sqrt(1.0 - r)));
  }
  return e;
}

BathInitialState project_wavepacket(const ChainCoefficients& chain, const RegularizedCoupling& coupling,
                                    const Wavepacket& packet) {
  const double wc = chain.omega_c;
  const int n = chain.modes();
  const int panels = std::clamp(int(std::ceil(std::max({8.0 * n, 64.0, 16.0 * wc / packet.width}))), 64, 20000);
  std::vector<double> edges(panels + 1);
  for (int i = 0; i <= panels; ++i) edges[i] = -wc + 2.0 * wc * i / panels;
  const PointRule rule = composite_gauss_legendre(edges, 12);
  cx_vec c = cx_vec::Zero(n);
  for (Index q = 0; q < rule.nodes.size(); ++q) {
    const double w = rule.nodes(q);
    const cplx u = packet(w);
    if (coupling.weight(w) == 0.0) continue;
    c += (rule.weights(q) * std::conj(coupling.vhat(w)) * u) * chain.mode_polynomials(w).cast<cplx>();
  }
  const double captured = c.squaredNorm();
  BathInitialState s = BathInitialState::single_photon(c);
  s.packet = packet;
  s.residual = std::clamp(1.0 - captured, 0.0, 1.0);
  return s;
}

cx_vec make_initial_state(const TruncatedSpace& space, const cx_vec& system_state, const InitialEnvState& env) {
  if (system_state.size() != space.system_dim()) throw Error(ErrorKind::ShapeMismatch, "system state dimension");
  if (std::abs(system_state.norm() - 1.0) > 1e-10) throw Error(ErrorKind::InvalidArgument, "system state not normalized");
  if (int(env.baths.size()) != space.baths()) throw Error(ErrorKind::ShapeMismatch, "one bath state per bath");
  cx_vec psi = system_state;
  for (int a = 0; a < space.baths(); ++a) {
    const BathInitialState& b = env.baths[a];
    cx_vec local = cx_vec::Zero(space.local_dim());
    switch (b.kind) {
      case BathStateKind::Vacuum: local(0) = 1.0; break;
      case BathStateKind::SinglePhoton:
        if (space.cap() < 1) throw Error(ErrorKind::InvalidArgument, "single photon needs p >= 1", a);
        if (b.amplitudes.size() != space.modes()) throw Error(ErrorKind::ShapeMismatch, "photon amplitudes", a);
        for (int j = 0; j < space.modes(); ++j) local(space.local_rank({{j, 1}})) = b.amplitudes(j);
        break;
      case BathStateKind::Coherent:
        if (b.amplitudes.size() != space.modes()) throw Error(ErrorKind::ShapeMismatch, "displacements", a);
        for (Index s = 0; s < space.local_dim(); ++s) {
          cplx amp = std::exp(-0.5 * b.amplitudes.squaredNorm());
          for (const auto& [j, n] : space.local_state(s))
            amp *= std::pow(b.amplitudes(j), n) / std::sqrt(std::tgamma(n + 1.0));
          local(s) = amp;
        }
        break;
    }
    const double nrm = local.norm();
    if (!(nrm > 0.0)) throw Error(ErrorKind::InvalidArgument, "bath state vanishes under the cap", a);
    local /= nrm;
    cx_vec next(psi.size() * local.size());
    for (Index i = 0; i < psi.size(); ++i) next.segment(i * local.size(), local.size()) = psi(i) * local;
    psi = std::move(next);
  }
  return psi;
}

}  // namespace nmk
