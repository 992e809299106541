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

#include "nmk/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>

#include "nmk/error.hpp"
#include "nmk/quadrature.hpp"

namespace nmk {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;

double density_tolerance(double scale) { return 1e-12 * std::max(1.0, scale); }

// int_0^h (A + B s) e^{-i s t} ds, stable for small |t h|.
cplx linear_segment_transform(double A, double B, double h, double t) {
  const double th = t * h;
  if (std::abs(th) < 0.05) {
    cplx sum = 0.0;
    cplx factor = 1.0;  // (-i t)^n / n!
    double hp = h;      // h^{n+1}
    for (int n = 0; n < 14; ++n) {
      sum += factor * (A * hp / (n + 1.0) + B * hp * h / (n + 2.0));
      factor *= cplx(0.0, -t) / static_cast<double>(n + 1);
      hp *= h;
    }
    return sum;
  }
  auto anti = [&](double s) {
    const cplx e = std::exp(cplx(0.0, -s * t));
    return e * (A * kI / t + B * (kI * s / t + 1.0 / (t * t)));
  };
  return anti(h) - anti(0.0);
}

bool on_endpoint(double tau, double end, double scale) { return std::abs(tau - end) <= 1e-12 * scale; }

}  // namespace

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveDensity: return "NonPositiveDensity";
    case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorKind::EpsilonTooLarge: return "EpsilonTooLarge";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::TailNotNegligible: return "TailNotNegligible";
    case ErrorKind::DegenerateWeight: return "DegenerateWeight";
    case ErrorKind::RecursionBreakdown: return "RecursionBreakdown";
    case ErrorKind::DimensionOverflow: return "DimensionOverflow";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::StepControlFailure: return "StepControlFailure";
    case ErrorKind::UnsupportedInitialState: return "UnsupportedInitialState";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// MemoryKernel
// ---------------------------------------------------------------------------

MemoryKernel MemoryKernel::lorentzian_sum(std::vector<Lorentzian> terms) {
  MemoryKernel k;
  k.kind = KernelKind::LorentzianSum;
  k.lorentzians = std::move(terms);
  k.validate();
  return k;
}

MemoryKernel MemoryKernel::delta_train(std::vector<Atom> atoms) {
  MemoryKernel k;
  k.kind = KernelKind::DeltaTrain;
  k.atoms = std::move(atoms);
  k.validate();
  return k;
}

MemoryKernel MemoryKernel::complex_gaussian_sum(std::vector<ComplexGaussian> terms) {
  MemoryKernel k;
  k.kind = KernelKind::ComplexGaussianSum;
  k.gaussians = std::move(terms);
  k.validate();
  return k;
}

MemoryKernel MemoryKernel::tabulated_density(double omega_min, double omega_max,
                                             std::vector<double> samples) {
  MemoryKernel k;
  k.kind = KernelKind::Tabulated;
  k.tabulated = TabulatedDensity{omega_min, omega_max, std::move(samples)};
  k.validate();
  return k;
}

void MemoryKernel::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); };
  switch (kind) {
    case KernelKind::LorentzianSum:
      if (lorentzians.empty()) fail("lorentzian_sum needs at least one term");
      for (const auto& l : lorentzians)
        if (!(l.alpha > 0.0) || !(l.gamma > 0.0) || !std::isfinite(l.center))
          fail("lorentzian terms need alpha > 0, gamma > 0");
      break;
    case KernelKind::DeltaTrain:
      if (atoms.empty()) fail("delta_train needs at least one atom");
      for (std::size_t i = 1; i < atoms.size(); ++i)
        if (!(atoms[i].tau > atoms[i - 1].tau)) fail("atom locations must be strictly increasing");
      break;
    case KernelKind::ComplexGaussianSum:
      if (gaussians.empty()) fail("complex_gaussian_sum needs at least one term");
      for (const auto& g : gaussians)
        if (g.k == 0.0) fail("complex gaussian chirp must be nonzero");
      break;
    case KernelKind::Tabulated:
      if (tabulated.samples.size() < 2 || !(tabulated.omega_max > tabulated.omega_min))
        fail("tabulated density needs >= 2 samples on a nonempty interval");
      for (double s : tabulated.samples)
        if (!(s >= 0.0)) fail("tabulated samples must be >= 0");
      break;
  }
}

double MemoryKernel::phase(double omega) const {
  double acc = 0.0;
  for (auto it = phase_poly.rbegin(); it != phase_poly.rend(); ++it) acc = acc * omega + *it;
  return acc;
}

cplx MemoryKernel::kappa(double t) const {
  cplx acc = 0.0;
  switch (kind) {
    case KernelKind::LorentzianSum:
      for (const auto& l : lorentzians)
        acc += l.alpha / (2.0 * l.gamma) * std::exp(-l.gamma * std::abs(t)) *
               std::exp(cplx(0.0, -l.center * t));
      return acc;
    case KernelKind::DeltaTrain:
      return 0.0;
    case KernelKind::ComplexGaussianSum:
      for (const auto& g : gaussians) acc += g.c * std::exp(cplx(0.0, g.k * t * t));
      return acc;
    case KernelKind::Tabulated: {
      const auto& tab = tabulated;
      const double h = tab.spacing();
      for (std::size_t n = 0; n + 1 < tab.samples.size(); ++n) {
        const double w0 = tab.omega_min + n * h;
        const double y0 = tab.samples[n], y1 = tab.samples[n + 1];
        if (y0 == 0.0 && y1 == 0.0) continue;
        acc += std::exp(cplx(0.0, -w0 * t)) * linear_segment_transform(y0, (y1 - y0) / h, h, t);
      }
      return acc / (2.0 * kPi);
    }
  }
  return acc;
}

std::vector<double> MemoryKernel::breakpoints() const {
  std::vector<double> out;
  if (kind == KernelKind::Tabulated) {
    const double h = tabulated.spacing();
    for (std::size_t n = 0; n < tabulated.samples.size(); ++n) out.push_back(tabulated.omega_min + n * h);
  }
  return out;
}

double MemoryKernel::kappa_derivative_bound() const {
  double acc = 0.0;
  switch (kind) {
    case KernelKind::LorentzianSum:
      for (const auto& l : lorentzians)
        acc += l.alpha * std::sqrt(l.gamma * l.gamma + l.center * l.center) / (2.0 * l.gamma);
      return acc;
    case KernelKind::Tabulated: {
      // |kappa'(t)| <= (1 / 2 pi) int |w| mu^(w) dw; integrand is piecewise quadratic.
      const auto& tab = tabulated;
      const double h = tab.spacing();
      std::vector<double> edges;
      for (std::size_t n = 0; n < tab.samples.size(); ++n) edges.push_back(tab.omega_min + n * h);
      if (tab.omega_min < 0.0 && tab.omega_max > 0.0) {
        edges.push_back(0.0);
        std::sort(edges.begin(), edges.end());
      }
      PointRule rule = composite_gauss_legendre(edges, 3);
      for (Index i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights(i) * std::abs(rule.nodes(i)) * eval_spectral_density(*this, rule.nodes(i));
      return acc / (2.0 * kPi);
    }
    default:
      throw Error(ErrorKind::InvalidArgument, "kappa' bound only defined for smooth continuous kinds");
  }
}

double eval_spectral_density(const MemoryKernel& kernel, double omega) {
  switch (kernel.kind) {
    case KernelKind::LorentzianSum: {
      double acc = 0.0;
      for (const auto& l : kernel.lorentzians) {
        const double d = omega - l.center;
        acc += l.alpha / (d * d + l.gamma * l.gamma);
      }
      return acc;
    }
    case KernelKind::DeltaTrain: {
      cplx acc = 0.0;
      double scale = 0.0;
      for (const auto& a : kernel.atoms) {
        acc += a.weight * std::exp(cplx(0.0, omega * a.tau));
        scale += std::abs(a.weight);
      }
      const double tol = density_tolerance(scale);
      if (std::abs(acc.imag()) > tol || acc.real() < -tol)
        throw Error(ErrorKind::NonPositiveDensity,
                    "delta train is not a positive spectral measure at w = " + std::to_string(omega));
      return std::max(acc.real(), 0.0);
    }
    case KernelKind::ComplexGaussianSum: {
      cplx acc = 0.0;
      double scale = 0.0;
      for (const auto& g : kernel.gaussians) {
        // int e^{ikt^2} e^{iwt} dt = sqrt(pi / |k|) e^{+-i pi/4} e^{-i w^2 / 4k}
        const double mag = std::sqrt(kPi / std::abs(g.k));
        const double ph = (g.k > 0 ? 0.25 : -0.25) * kPi - omega * omega / (4.0 * g.k);
        acc += g.c * std::polar(mag, ph);
        scale += std::abs(g.c) * mag;
      }
      const double tol = density_tolerance(scale);
      if (std::abs(acc.imag()) > tol || acc.real() < -tol)
        throw Error(ErrorKind::NonPositiveDensity,
                    "complex gaussian sum has a complex spectral density at w = " + std::to_string(omega));
      return std::max(acc.real(), 0.0);
    }
    case KernelKind::Tabulated: {
      const auto& tab = kernel.tabulated;
      if (omega < tab.omega_min || omega > tab.omega_max) return 0.0;
      const double h = tab.spacing();
      const double s = (omega - tab.omega_min) / h;
      const auto n = std::min(static_cast<std::size_t>(s), tab.samples.size() - 2);
      const double frac = s - static_cast<double>(n);
      return (1.0 - frac) * tab.samples[n] + frac * tab.samples[n + 1];
    }
  }
  return 0.0;
}

double total_variation(const MemoryKernel& kernel, double a, double b) {
  if (!(a < b)) throw Error(ErrorKind::InvalidArgument, "total_variation needs a < b");
  if (kernel.kind == KernelKind::DeltaTrain) {
    double acc = 0.0;
    for (const auto& at : kernel.atoms)
      if (at.tau >= a && at.tau <= b) acc += std::abs(at.weight);
    return acc;
  }
  // Split at the origin (kink of |kappa| for Lorentzians) and into unit pieces
  // so the adaptive rule never has to discover structure on its own.
  std::vector<double> cuts{a};
  for (double x = std::ceil(a); x < b; x += 1.0)
    if (x > a) cuts.push_back(x);
  cuts.push_back(b);
  auto f = [&](double t) { return std::abs(kernel.kappa(t)); };
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) acc += integrate_adaptive(f, cuts[i], cuts[i + 1], 1e-12).value;
  return acc;
}

ErrorFunctions error_functions(const MemoryKernel& kernel, double a, double b, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "error functions need epsilon > 0");
  if (epsilon >= 0.5 * (b - a))
    throw Error(ErrorKind::EpsilonTooLarge, "epsilon must be below (b - a) / 2");
  switch (kernel.kind) {
    case KernelKind::LorentzianSum:
    case KernelKind::Tabulated:
      return {epsilon * kernel.kappa_derivative_bound(), 0.0};
    case KernelKind::ComplexGaussianSum: {
      double acc = 0.0;
      for (const auto& g : kernel.gaussians) acc += std::abs(g.c * g.k);
      const double reach = std::max(std::abs((3.0 * b - a) / 2.0), std::abs((3.0 * a - b) / 2.0));
      return {epsilon * acc * reach, 0.0};
    }
    case KernelKind::DeltaTrain: {
      const double scale = std::max(1.0, b - a);
      double outer = 0.0, inner = 0.0, interior = 0.0, ends = 0.0;
      for (const auto& at : kernel.atoms) {
        const double y = at.tau, w = std::abs(at.weight);
        const bool is_a = on_endpoint(y, a, scale), is_b = on_endpoint(y, b, scale);
        if ((y >= a - epsilon && y < a && !is_a) || (y > b && y <= b + epsilon && !is_b)) outer += w;
        if ((y > a && y <= a + epsilon && !is_a) || (y > b - epsilon && (y <= b || is_b))) inner += w;
        if (y > a + epsilon && y < b - epsilon) interior += w;
        if (is_a || is_b) ends += w;
      }
      return {outer + 2.0 * inner, epsilon * (interior + 0.5 * ends)};
    }
  }
  return {0.0, 0.0};
}

namespace {

// Cubic Hermite interpolation of a sampled function at x.
cplx hermite_at(const SampledFunction& f, double x) {
  const double h = f.step();
  double s = (x - f.a) / h;
  Index n = std::clamp<Index>(static_cast<Index>(std::floor(s)), 0, f.size() - 2);
  s -= static_cast<double>(n);
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * f.values(n) + h10 * h * f.derivatives(n) + h01 * f.values(n + 1) +
         h11 * h * f.derivatives(n + 1);
}

// Composite Simpson on nodes stride `stride`; (n - 1) / stride must be even.
cplx simpson(const cx_vec& g, double h, Index stride) {
  const Index n = (g.size() - 1) / stride;
  cplx acc = g(0) + g(n * stride);
  for (Index i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(i * stride);
  return acc * h * static_cast<double>(stride) / 3.0;
}

cplx trapezoid(const cx_vec& g, double h, Index stride) {
  const Index n = (g.size() - 1) / stride;
  cplx acc = 0.5 * (g(0) + g(n * stride));
  for (Index i = 1; i < n; ++i) acc += g(i * stride);
  return acc * h * static_cast<double>(stride);
}

}  // namespace

cplx apply_mu_star(const MemoryKernel& kernel, const SampledFunction& f, double tol) {
  const Index n = f.size();
  if (n < 5 || f.derivatives.size() != n || !(f.b > f.a))
    throw Error(ErrorKind::InvalidArgument, "apply_mu_star needs >= 5 value/derivative samples on a < b");
  if ((n - 1) % 2 != 0)
    throw Error(ErrorKind::GridTooCoarse, "apply_mu_star needs an even number of grid intervals");

  cplx result = 0.0;
  if (kernel.kind == KernelKind::DeltaTrain) {
    const double scale = std::max(1.0, f.b - f.a);
    for (const auto& at : kernel.atoms) {
      if (on_endpoint(at.tau, f.a, scale)) result += 0.5 * at.weight * f.values(0);
      else if (on_endpoint(at.tau, f.b, scale)) result += 0.5 * at.weight * f.values(n - 1);
      else if (at.tau > f.a && at.tau < f.b) result += at.weight * hermite_at(f, at.tau);
    }
    return result;
  }

  // phi_c(x) = int_a^x kappa, accumulated cell by cell with an 8-point rule;
  // cells straddling the origin are split so the Lorentzian kink is exact.
  const double h = f.step();
  const PointRule& gl = gauss_legendre(8);
  cx_vec phi(n);
  phi(0) = 0.0;
  auto cell = [&](double lo, double hi) {
    cplx acc = 0.0;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int k = 0; k < 8; ++k) acc += gl.weights(k) * kernel.kappa(mid + half * gl.nodes(k));
    return acc * half;
  };
  for (Index i = 1; i < n; ++i) {
    const double lo = f.a + (i - 1) * h, hi = f.a + i * h;
    phi(i) = phi(i - 1) + ((lo < 0.0 && hi > 0.0) ? cell(lo, 0.0) + cell(0.0, hi) : cell(lo, hi));
  }

  cx_vec g = phi.cwiseProduct(f.derivatives);
  cplx integral;
  double err_est;
  if ((n - 1) % 4 == 0) {
    integral = simpson(g, h, 1);
    err_est = std::abs(integral - simpson(g, h, 2)) / 15.0;
  } else {
    const cplx fine = trapezoid(g, h, 1), coarse = trapezoid(g, h, 2);
    err_est = std::abs(fine - coarse) / 3.0;
    integral = fine + (fine - coarse) / 3.0;
  }
  result = f.values(n - 1) * phi(n - 1) - f.values(0) * phi(0) - integral;
  if (err_est > tol * std::max(1.0, std::abs(result)))
    throw Error(ErrorKind::GridTooCoarse,
                "Richardson estimate " + std::to_string(err_est) + " exceeds tolerance");
  return result;
}

// ---------------------------------------------------------------------------
// Mollifier
// ---------------------------------------------------------------------------

namespace detail {

struct BumpTable {
  MollifierFamily family;
  double sharpness;  // rho ~ exp(-sharpness / (1 - x^2))
  double norm;       // int exp(-sharpness / (1 - x^2)) over [-1, 1]
  rvec x;            // nodes on [0, 1]
  rvec c;            // weight * rho(x)
  double step;       // table spacing in k
  double k_max;
  rvec value;
  rvec slope;
  double abs_moment;  // int |x| rho
  double l2;          // int rho^2
};

}  // namespace detail

namespace {

constexpr double kTableStep = 1.0 / 64.0;
constexpr double kTableMax = 512.0;

double raw_bump(double x, double sharpness) {
  const double d = 1.0 - x * x;
  return d <= 0.0 ? 0.0 : std::exp(-sharpness / d);
}

std::shared_ptr<const detail::BumpTable> build_table(MollifierFamily family) {
  auto t = std::make_shared<detail::BumpTable>();
  t->family = family;
  t->sharpness = family == MollifierFamily::StandardBump ? 1.0 : 2.0;
  std::vector<double> edges;
  for (int i = 0; i <= 64; ++i) edges.push_back(i / 64.0);
  PointRule rule = composite_gauss_legendre(edges, 16);
  t->x = rule.nodes;
  double half = 0.0;
  rvec raw(rule.nodes.size());
  for (Index i = 0; i < raw.size(); ++i) {
    raw(i) = raw_bump(rule.nodes(i), t->sharpness);
    half += rule.weights(i) * raw(i);
  }
  t->norm = 2.0 * half;
  t->c = rule.weights.cwiseProduct(raw) / t->norm;
  t->abs_moment = 2.0 * t->c.dot(t->x);
  t->l2 = 2.0 * (t->c.array() * raw.array()).sum() / t->norm;

  // Tabulate rho^ and its slope; angles advance by rotation and are re-seeded
  // every 256 steps so rounding never accumulates past ~1e-14.
  const Index steps = static_cast<Index>(kTableMax / kTableStep);
  t->step = kTableStep;
  t->k_max = kTableMax;
  t->value.resize(steps + 1);
  t->slope.resize(steps + 1);
  const Index m = t->x.size();
  Eigen::ArrayXcd rot(m), cur(m);
  for (Index i = 0; i < m; ++i) rot(i) = std::polar(1.0, kTableStep * t->x(i));
  const double pref = 2.0 * kInvSqrt2Pi;
  for (Index j = 0; j <= steps; ++j) {
    if (j % 256 == 0)
      for (Index i = 0; i < m; ++i) cur(i) = std::polar(1.0, j * kTableStep * t->x(i));
    double v = 0.0, s = 0.0;
    for (Index i = 0; i < m; ++i) {
      v += t->c(i) * cur(i).real();
      s -= t->c(i) * t->x(i) * cur(i).imag();
    }
    t->value(j) = pref * v;
    t->slope(j) = pref * s;
    cur *= rot;
  }
  return t;
}

std::shared_ptr<const detail::BumpTable> bump_table(MollifierFamily family) {
  static std::once_flag flags[2];
  static std::shared_ptr<const detail::BumpTable> tables[2];
  const int idx = family == MollifierFamily::StandardBump ? 0 : 1;
  std::call_once(flags[idx], [&] { tables[idx] = build_table(family); });
  return tables[idx];
}

// Direct rho^(k) with panel count scaled to the oscillation.
cplx direct_hat(const detail::BumpTable& t, double k) {
  const int panels = std::max(64, static_cast<int>(std::ceil(std::abs(k) / 4.0)));
  std::vector<double> edges;
  for (int i = 0; i <= 2 * panels; ++i) edges.push_back(-1.0 + static_cast<double>(i) / panels);
  edges.back() = 1.0;
  PointRule rule = composite_gauss_legendre(edges, 16);
  cplx acc = 0.0;
  for (Index i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes(i);
    acc += rule.weights(i) * raw_bump(x, t.sharpness) * std::exp(cplx(0.0, -k * x));
  }
  return acc * kInvSqrt2Pi / t.norm;
}

}  // namespace

Mollifier::Mollifier(double epsilon, MollifierFamily family)
    : epsilon_(epsilon), family_(family), table_(bump_table(family)) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorKind::InvalidArgument, "mollifier scale must be > 0");
}

double Mollifier::density(double x) const { return raw_bump(x, table_->sharpness) / table_->norm; }

double Mollifier::hat(double k) const {
  k = std::abs(k);
  const auto& t = *table_;
  if (k >= t.k_max) return direct_hat(t, k).real();
  const double s = k / t.step;
  const Index j = static_cast<Index>(s);
  const double u = s - static_cast<double>(j);
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  return h00 * t.value(j) + h10 * t.step * t.slope(j) + h01 * t.value(j + 1) + h11 * t.step * t.slope(j + 1);
}

double Mollifier::hat_derivative_bound() const { return kInvSqrt2Pi * table_->abs_moment; }

double Mollifier::mass() const {
  // Independent rule (different panelling and order) from the one that fixed the norm.
  std::vector<double> edges;
  for (int i = 0; i <= 37; ++i) edges.push_back(-1.0 + 2.0 * i / 37.0);
  PointRule rule = composite_gauss_legendre(edges, 12);
  double acc = 0.0;
  for (Index i = 0; i < rule.nodes.size(); ++i) acc += rule.weights(i) * density(rule.nodes(i));
  return acc;
}

double Mollifier::l2_norm_squared() const { return table_->l2; }

cplx mollifier_fourier(const Mollifier& m, double omega) {
  return direct_hat(*bump_table(m.family()), omega * m.epsilon());
}

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

cplx RegularizedCoupling::vhat(double omega) const {
  const double mu = eval_spectral_density(kernel, omega);
  const double amp = std::sqrt(mu) * mollifier.hat_scaled(omega);
  if (kernel.phase_poly.empty()) return amp;
  return std::polar(amp, kernel.phase(omega));
}

double RegularizedCoupling::weight(double omega) const {
  const double r = mollifier.hat_scaled(omega);
  return eval_spectral_density(kernel, omega) * r * r;
}

namespace {

double tail_max(const MemoryKernel& kernel, const Mollifier& m, double omega_max, double* sup_w) {
  double worst = 0.0;
  for (int i = 0; i <= 256; ++i) {
    const double w = omega_max * (1.0 + 0.25 * i / 256.0);
    for (double s : {w, -w}) {
      const double r = m.hat_scaled(s);
      const double val = eval_spectral_density(kernel, s) * r * r;
      worst = std::max(worst, val);
      if (sup_w) *sup_w = std::max(*sup_w, std::abs(s) * std::sqrt(val));
    }
  }
  return worst;
}

}  // namespace

RegularizedCoupling regularize(const MemoryKernel& kernel, const Mollifier& mollifier,
                               const FrequencyGrid& grid) {
  kernel.validate();
  if (grid.points < 64) throw Error(ErrorKind::InvalidArgument, "regularization grid needs >= 64 points");
  if (!(grid.omega_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid half-width must be > 0");

  RegularizedCoupling out;
  out.kernel = kernel;
  out.mollifier = mollifier;
  out.epsilon = mollifier.epsilon();

  double sup_w = 0.0;
  const double tail = tail_max(kernel, mollifier, grid.omega_max, &sup_w);
  if (tail >= 1e-12)
    throw Error(ErrorKind::TailNotNegligible,
                "|rho^(W eps)|^2 mu^(W) = " + std::to_string(tail) + " at W = " + std::to_string(grid.omega_max));

  out.grid = rvec::LinSpaced(grid.points, -grid.omega_max, grid.omega_max);
  out.values.resize(grid.points);
  double acc = 0.0;
  const double h = out.grid(1) - out.grid(0);
  for (Index i = 0; i < grid.points; ++i) {
    out.values(i) = out.vhat(out.grid(i));
    const double w2 = std::norm(out.values(i));
    acc += (i == 0 || i == grid.points - 1 ? 0.5 : 1.0) * w2;
    sup_w = std::max(sup_w, std::abs(out.grid(i)) * std::abs(out.values(i)));
  }
  out.l2_norm = std::sqrt(acc * h);
  out.sup_omega_vhat = sup_w;
  return out;
}

FrequencyGrid suggest_grid(const MemoryKernel& kernel, const Mollifier& mollifier) {
  double omega = 8.0 / mollifier.epsilon();
  double spacing = 1.0 / (16.0 * mollifier.epsilon());
  switch (kernel.kind) {
    case KernelKind::LorentzianSum:
      for (const auto& l : kernel.lorentzians) {
        omega = std::max(omega, std::abs(l.center) + 10.0 * l.gamma);
        spacing = std::min(spacing, l.gamma / 8.0);
      }
      break;
    case KernelKind::DeltaTrain: {
      double reach = 0.0;
      for (const auto& a : kernel.atoms) reach = std::max(reach, std::abs(a.tau));
      if (reach > 0.0) spacing = std::min(spacing, 2.0 * kPi / (32.0 * reach));
      break;
    }
    case KernelKind::Tabulated:
      omega = std::max(omega, std::max(std::abs(kernel.tabulated.omega_min), std::abs(kernel.tabulated.omega_max)));
      spacing = std::min(spacing, kernel.tabulated.spacing() / 2.0);
      break;
    case KernelKind::ComplexGaussianSum:
      break;
  }
  for (int i = 0; i < 60 && tail_max(kernel, mollifier, omega, nullptr) >= 1e-13; ++i) omega *= 1.25;
  Index points = static_cast<Index>(std::ceil(2.0 * omega / spacing)) + 1;
  points = std::clamp<Index>(points, 257, Index(1) << 22);
  return {omega, points};
}

SpectralWeight SpectralWeight::of(const RegularizedCoupling& c) {
  return {[c](double w) { return c.weight(w); }, c.breakpoints()};
}

SpectralWeight SpectralWeight::flat(double level) {
  return {[level](double) { return level; }, {}};
}

}  // namespace nmk
