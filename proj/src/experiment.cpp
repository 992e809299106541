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

#include "nmk/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "nmk/error.hpp"
#include "nmk/linalg.hpp"

namespace nmk {

using nlohmann::json;
namespace fs = std::filesystem;

ConfigError::ConfigError(std::string pointer, int line, const std::string& what)
    : std::runtime_error(what), pointer_(std::move(pointer)), line_(line) {}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::ChainMap: return "chain-map";
    case Mode::Simulate: return "simulate";
    case Mode::Certify: return "certify";
    case Mode::CompareOracle: return "compare-oracle";
    case Mode::Sweep: return "sweep";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------------------
// Line index: maps every JSON pointer of a (valid) document to the line where
// its value or key starts, so diagnostics can name both.
// ---------------------------------------------------------------------------

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    skip();
    if (pos_ < s_.size()) value("");
  }

  int line(std::string pointer) const {
    for (;;) {
      auto it = lines_.find(pointer);
      if (it != lines_.end()) return it->second;
      if (pointer.empty()) return 0;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      if (s_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') {
        ++pos_;
        if (pos_ < s_.size() && s_[pos_] == 'u') {
          out += '?';  // code points are irrelevant for pointer matching of ASCII keys
          pos_ += 5;
          continue;
        }
      }
      if (pos_ < s_.size()) out += s_[pos_++];
    }
    ++pos_;
    return out;
  }

  void value(const std::string& ptr) {
    skip();
    lines_.emplace(ptr, line_);
    if (pos_ >= s_.size()) return;
    const char c = s_[pos_];
    if (c == '{') {
      ++pos_;
      skip();
      if (s_[pos_] == '}') { ++pos_; return; }
      for (;;) {
        skip();
        const int key_line = line_;
        const std::string child = ptr + "/" + escape_token(string());
        skip();
        ++pos_;  // ':'
        value(child);
        lines_[child] = key_line;
        skip();
        if (s_[pos_++] == '}') return;
      }
    } else if (c == '[') {
      ++pos_;
      skip();
      if (s_[pos_] == ']') { ++pos_; return; }
      for (int i = 0;; ++i) {
        value(ptr + "/" + std::to_string(i));
        skip();
        if (s_[pos_++] == ']') return;
      }
    } else if (c == '"') {
      string();
    } else {
      while (pos_ < s_.size() && !std::strchr(",]} \t\r\n", s_[pos_])) ++pos_;
    }
  }
};

// ---------------------------------------------------------------------------
// Typed field access with pointer/line diagnostics.
// ---------------------------------------------------------------------------

class Reader {
 public:
  explicit Reader(const LineIndex& lines) : lines_(lines) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    const int line = lines_.line(ptr);
    const std::string where = ptr.empty() ? "/" : ptr;
    throw ConfigError(where, line, "line " + std::to_string(line) + ", field " + where + ": " + msg);
  }

  void object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(ptr, "expected an object");
    for (const auto& [key, _] : j.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
        fail(ptr + "/" + escape_token(key), "unknown field '" + key + "'");
    }
  }

  const json& require(const json& obj, const std::string& ptr, const char* key) const {
    if (!obj.contains(key)) fail(ptr, std::string("missing required field '") + key + "'");
    return obj.at(key);
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(ptr, "expected a finite number");
    return x;
  }

  double positive(const json& j, const std::string& ptr) const {
    const double x = number(j, ptr);
    if (!(x > 0.0)) fail(ptr, "must be > 0");
    return x;
  }

  int integer(const json& j, const std::string& ptr, int min) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    const auto v = j.get<long long>();
    if (v < min || v > (1LL << 30)) fail(ptr, "must be an integer >= " + std::to_string(min));
    return static_cast<int>(v);
  }

  cplx complex(const json& j, const std::string& ptr) const {
    if (j.is_number()) return number(j, ptr);
    if (j.is_array() && j.size() == 2) return {number(j[0], ptr + "/0"), number(j[1], ptr + "/1")};
    fail(ptr, "expected a number or a [re, im] pair");
  }

  std::string text(const json& j, const std::string& ptr) const {
    if (!j.is_string()) fail(ptr, "expected a string");
    return j.get<std::string>();
  }

  const json& array(const json& j, const std::string& ptr, bool nonempty) const {
    if (!j.is_array()) fail(ptr, "expected an array");
    if (nonempty && j.empty()) fail(ptr, "must not be empty");
    return j;
  }

  template <typename F>
  auto list(const json& j, const std::string& ptr, bool nonempty, F&& each) const {
    array(j, ptr, nonempty);
    std::vector<decltype(each(j, ptr))> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(each(j[i], ptr + "/" + std::to_string(i)));
    return out;
  }

 private:
  const LineIndex& lines_;
};

cx_mat kron(const cx_mat& a, const cx_mat& b) {
  cx_mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

cx_mat named_matrix(const Reader& r, const std::string& name, const std::string& ptr, int d) {
  if (name == "identity") return cx_mat::Identity(d, d);
  if (d != 2) r.fail(ptr, "named operator '" + name + "' needs d = 2 (only 'identity' works for other d)");
  if (name == "sigma_x") return pauli_x();
  if (name == "sigma_y") return pauli_y();
  if (name == "sigma_z") return pauli_z();
  if (name == "sigma_minus") return sigma_minus();
  if (name == "sigma_plus") return sigma_plus();
  r.fail(ptr, "unknown operator name '" + name + "'");
}

// A matrix is a name, a list of names (tensor product, one per support site)
// or explicit rows of entries.
cx_mat parse_matrix(const Reader& r, const json& j, const std::string& ptr, int d, std::size_t support) {
  const Index want = static_cast<Index>(std::llround(std::pow(d, static_cast<double>(support))));
  cx_mat m;
  if (j.is_string()) {
    if (support != 1 && j.get<std::string>() != "identity")
      r.fail(ptr, "a single operator name needs a one-site support; use a list of names");
    m = named_matrix(r, j.get<std::string>(), ptr, d);
    if (support != 1) m = cx_mat::Identity(want, want);
  } else if (j.is_array() && !j.empty() && j[0].is_string()) {
    if (j.size() != support) r.fail(ptr, "need one operator name per support site");
    m = cx_mat::Identity(1, 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = ptr + "/" + std::to_string(i);
      m = kron(m, named_matrix(r, r.text(j[i], p), p, d));
    }
  } else {
    r.array(j, ptr, true);
    const Index rows = static_cast<Index>(j.size());
    m.resize(rows, rows);
    for (Index i = 0; i < rows; ++i) {
      const std::string row_ptr = ptr + "/" + std::to_string(i);
      const json& row = r.array(j[i], row_ptr, true);
      if (static_cast<Index>(row.size()) != rows) r.fail(row_ptr, "matrix must be square");
      for (Index k = 0; k < rows; ++k) m(i, k) = r.complex(row[k], row_ptr + "/" + std::to_string(k));
    }
  }
  if (m.rows() != want) r.fail(ptr, "matrix dimension " + std::to_string(m.rows()) + " does not match d^|support| = " +
                                        std::to_string(want));
  return m;
}

std::vector<int> parse_support(const Reader& r, const json& obj, const std::string& ptr, int n) {
  const std::string p = ptr + "/support";
  auto sites = r.list(r.require(obj, ptr, "support"), p, true,
                      [&](const json& j, const std::string& q) { return r.integer(j, q, 0); });
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i] >= n) r.fail(p + "/" + std::to_string(i), "qudit index out of range");
    for (std::size_t k = 0; k < i; ++k)
      if (sites[k] == sites[i]) r.fail(p + "/" + std::to_string(i), "repeated qudit");
  }
  return sites;
}

TimeProfile parse_profile(const Reader& r, const json& j, const std::string& ptr) {
  r.object(j, ptr, {"kind", "amplitude", "frequency", "phase"});
  TimeProfile f;
  const std::string kind = r.text(r.require(j, ptr, "kind"), ptr + "/kind");
  if (kind == "constant") f.kind = ProfileKind::Constant;
  else if (kind == "cosine") f.kind = ProfileKind::Cosine;
  else if (kind == "sine") f.kind = ProfileKind::Sine;
  else if (kind == "linear") f.kind = ProfileKind::Linear;
  else r.fail(ptr + "/kind", "expected constant, cosine, sine or linear");
  if (j.contains("amplitude")) f.amplitude = r.number(j["amplitude"], ptr + "/amplitude");
  if (j.contains("frequency")) f.frequency = r.number(j["frequency"], ptr + "/frequency");
  if (j.contains("phase")) f.phase = r.number(j["phase"], ptr + "/phase");
  return f;
}

void parse_system(const Reader& r, const json& j, const std::string& ptr, ExperimentConfig& cfg) {
  r.object(j, ptr, {"n", "d", "hamiltonian", "jumps", "initial_state", "k_local"});
  SystemModel& m = cfg.system;
  m.n = r.integer(r.require(j, ptr, "n"), ptr + "/n", 1);
  m.d = r.integer(r.require(j, ptr, "d"), ptr + "/d", 2);
  if (std::pow(double(m.d), double(m.n)) > double(1 << 20)) r.fail(ptr + "/n", "system dimension d^n is too large");

  if (j.contains("hamiltonian")) {
    const std::string hp = ptr + "/hamiltonian";
    r.array(j["hamiltonian"], hp, false);
    for (std::size_t i = 0; i < j["hamiltonian"].size(); ++i) {
      const json& t = j["hamiltonian"][i];
      const std::string tp = hp + "/" + std::to_string(i);
      r.object(t, tp, {"support", "matrix", "scale", "profile"});
      SystemTerm term;
      term.support = parse_support(r, t, tp, m.n);
      term.matrix = parse_matrix(r, r.require(t, tp, "matrix"), tp + "/matrix", m.d, term.support.size());
      if (t.contains("scale")) term.matrix *= r.number(t["scale"], tp + "/scale");
      if (hermiticity_defect(term.matrix) > 1e-12) r.fail(tp + "/matrix", "hamiltonian terms must be Hermitian");
      if (t.contains("profile")) term.profile = parse_profile(r, t["profile"], tp + "/profile");
      m.hs_terms.push_back(std::move(term));
    }
  }

  const std::string jp = ptr + "/jumps";
  r.array(r.require(j, ptr, "jumps"), jp, true);
  for (std::size_t i = 0; i < j["jumps"].size(); ++i) {
    const json& t = j["jumps"][i];
    const std::string tp = jp + "/" + std::to_string(i);
    r.object(t, tp, {"support", "matrix", "scale", "bath"});
    JumpOperator op;
    op.support = parse_support(r, t, tp, m.n);
    op.matrix = parse_matrix(r, r.require(t, tp, "matrix"), tp + "/matrix", m.d, op.support.size());
    if (t.contains("scale")) op.matrix *= r.complex(t["scale"], tp + "/scale");
    op.bath = t.contains("bath") ? r.integer(t["bath"], tp + "/bath", 0) : 0;
    m.jumps.push_back(std::move(op));
  }

  if (j.contains("k_local")) {
    m.k = r.integer(j["k_local"], ptr + "/k_local", 0);
    m.k_local = m.k > 0;
  }

  const Index dim = m.dim();
  const json& s = r.require(j, ptr, "initial_state");
  const std::string sp = ptr + "/initial_state";
  cfg.initial_state = cx_vec::Zero(dim);
  if (s.is_string()) {
    const std::string name = s.get<std::string>();
    if (name == "excited") cfg.initial_state(0) = 1.0;
    else if (name == "ground") cfg.initial_state(dim - 1) = 1.0;
    else if (name == "plus") cfg.initial_state.setConstant(1.0 / std::sqrt(double(dim)));
    else r.fail(sp, "expected excited, ground, plus or an amplitude array");
  } else {
    r.array(s, sp, true);
    if (static_cast<Index>(s.size()) != dim) r.fail(sp, "needs d^n = " + std::to_string(dim) + " amplitudes");
    for (Index i = 0; i < dim; ++i) cfg.initial_state(i) = r.complex(s[i], sp + "/" + std::to_string(i));
    const double norm = cfg.initial_state.norm();
    if (!(norm > 0.0)) r.fail(sp, "state must be nonzero");
    cfg.initial_state /= norm;
  }
}

MemoryKernel parse_kernel(const Reader& r, const json& j, const std::string& ptr) {
  const std::string kind = r.text(r.require(j, ptr, "kind"), ptr + "/kind");
  MemoryKernel k;
  if (kind == "lorentzian_sum") {
    r.object(j, ptr, {"kind", "terms", "phase_poly"});
    k = MemoryKernel::lorentzian_sum(
        r.list(r.require(j, ptr, "terms"), ptr + "/terms", true, [&](const json& t, const std::string& p) {
          r.object(t, p, {"alpha", "omega", "gamma"});
          return Lorentzian{r.positive(r.require(t, p, "alpha"), p + "/alpha"),
                            r.number(r.require(t, p, "omega"), p + "/omega"),
                            r.positive(r.require(t, p, "gamma"), p + "/gamma")};
        }));
  } else if (kind == "delta_train") {
    r.object(j, ptr, {"kind", "atoms", "phase_poly"});
    k = MemoryKernel::delta_train(
        r.list(r.require(j, ptr, "atoms"), ptr + "/atoms", true, [&](const json& t, const std::string& p) {
          r.object(t, p, {"weight", "tau"});
          return Atom{r.complex(r.require(t, p, "weight"), p + "/weight"), r.number(r.require(t, p, "tau"), p + "/tau")};
        }));
  } else if (kind == "complex_gaussian_sum") {
    r.object(j, ptr, {"kind", "terms", "phase_poly"});
    k = MemoryKernel::complex_gaussian_sum(
        r.list(r.require(j, ptr, "terms"), ptr + "/terms", true, [&](const json& t, const std::string& p) {
          r.object(t, p, {"c", "k"});
          return ComplexGaussian{r.complex(r.require(t, p, "c"), p + "/c"), r.number(r.require(t, p, "k"), p + "/k")};
        }));
  } else if (kind == "tabulated") {
    r.object(j, ptr, {"kind", "omega_min", "omega_max", "samples", "phase_poly"});
    const double lo = r.number(r.require(j, ptr, "omega_min"), ptr + "/omega_min");
    const double hi = r.number(r.require(j, ptr, "omega_max"), ptr + "/omega_max");
    if (!(hi > lo)) r.fail(ptr + "/omega_max", "must exceed omega_min");
    auto samples = r.list(r.require(j, ptr, "samples"), ptr + "/samples", true,
                          [&](const json& t, const std::string& p) { return r.number(t, p); });
    if (samples.size() < 2) r.fail(ptr + "/samples", "needs at least two samples");
    k = MemoryKernel::tabulated_density(lo, hi, std::move(samples));
  } else {
    r.fail(ptr + "/kind", "expected lorentzian_sum, delta_train, complex_gaussian_sum or tabulated");
  }
  if (j.contains("phase_poly"))
    k.phase_poly = r.list(j["phase_poly"], ptr + "/phase_poly", false,
                          [&](const json& t, const std::string& p) { return r.number(t, p); });
  try {
    k.validate();
  } catch (const Error& e) {
    r.fail(ptr, e.what());
  }
  return k;
}

cx_vec parse_amplitudes(const Reader& r, const json& j, const std::string& ptr) {
  auto v = r.list(j, ptr, true, [&](const json& t, const std::string& p) { return r.complex(t, p); });
  return Eigen::Map<cx_vec>(v.data(), static_cast<Index>(v.size()));
}

EnvSpec parse_env(const Reader& r, const json& j, const std::string& ptr) {
  r.object(j, ptr, {"kind", "packet", "amplitudes", "displacement"});
  EnvSpec e;
  const std::string kind = r.text(r.require(j, ptr, "kind"), ptr + "/kind");
  if (kind == "vacuum") {
    e.kind = BathStateKind::Vacuum;
  } else if (kind == "single_photon") {
    e.kind = BathStateKind::SinglePhoton;
    if (j.contains("packet") == j.contains("amplitudes"))
      r.fail(ptr, "single_photon needs exactly one of 'packet' or 'amplitudes'");
    if (j.contains("packet")) {
      const json& p = j["packet"];
      const std::string pp = ptr + "/packet";
      r.object(p, pp, {"center", "width", "delay"});
      Wavepacket w;
      w.center = r.number(r.require(p, pp, "center"), pp + "/center");
      w.width = r.positive(r.require(p, pp, "width"), pp + "/width");
      if (p.contains("delay")) w.delay = r.number(p["delay"], pp + "/delay");
      e.packet = w;
    } else {
      e.amplitudes = parse_amplitudes(r, j["amplitudes"], ptr + "/amplitudes");
    }
  } else if (kind == "coherent") {
    e.kind = BathStateKind::Coherent;
    e.amplitudes = parse_amplitudes(r, r.require(j, ptr, "displacement"), ptr + "/displacement");
  } else {
    r.fail(ptr + "/kind", "expected vacuum, single_photon or coherent");
  }
  return e;
}

ChainCoefficients chain_from_json_checked(const Reader& r, const json& j, const std::string& ptr) {
  r.object(j, ptr, {"onsite", "hopping", "v_norm", "omega_c", "panels"});
  ChainCoefficients c;
  auto onsite = r.list(r.require(j, ptr, "onsite"), ptr + "/onsite", true,
                       [&](const json& t, const std::string& p) { return r.number(t, p); });
  auto hopping = r.list(r.require(j, ptr, "hopping"), ptr + "/hopping", false,
                        [&](const json& t, const std::string& p) { return r.number(t, p); });
  if (hopping.size() + 1 != onsite.size()) r.fail(ptr + "/hopping", "needs exactly one entry fewer than 'onsite'");
  c.onsite = Eigen::Map<rvec>(onsite.data(), Index(onsite.size()));
  c.hopping = Eigen::Map<rvec>(hopping.data(), Index(hopping.size()));
  c.v_norm = r.number(r.require(j, ptr, "v_norm"), ptr + "/v_norm");
  c.omega_c = r.positive(r.require(j, ptr, "omega_c"), ptr + "/omega_c");
  if (j.contains("panels")) c.panels = r.integer(j["panels"], ptr + "/panels", 0);
  return c;
}

std::vector<ChainCoefficients> parse_chains(const Reader& r, const json& j, const std::string& ptr,
                                            const fs::path& base_dir) {
  if (j.is_string()) {
    const fs::path path = base_dir / j.get<std::string>();
    std::ifstream in(path);
    if (!in) r.fail(ptr, "cannot open chain file " + path.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      r.fail(ptr, "chain file " + path.string() + " is not valid JSON: " + e.what());
    }
    const json& list = doc.is_object() && doc.contains("chains") ? doc["chains"] : doc;
    if (!list.is_array() || list.empty()) r.fail(ptr, "chain file holds no chain list");
    std::vector<ChainCoefficients> out;
    for (const auto& c : list) {
      try {
        out.push_back(chain_from_json(c));
      } catch (const std::exception& e) {
        r.fail(ptr, "chain file " + path.string() + ": " + e.what());
      }
    }
    return out;
  }
  return r.list(j, ptr, true, [&](const json& t, const std::string& p) { return chain_from_json_checked(r, t, p); });
}

Mode parse_mode(const Reader& r, const json& j, const std::string& ptr) {
  const std::string m = r.text(j, ptr);
  for (Mode mode : {Mode::ChainMap, Mode::Simulate, Mode::Certify, Mode::CompareOracle, Mode::Sweep})
    if (m == to_string(mode)) return mode;
  r.fail(ptr, "expected chain-map, simulate, certify, compare-oracle or sweep");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ConfigError("", line, "line " + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  const LineIndex lines(text);
  const Reader r(lines);
  r.object(doc, "",
           {"$schema", "mode", "system", "kernels", "environment", "mollifier", "grid", "omega_c", "n_modes",
            "particle_cap", "t_final", "output_step", "tolerance", "oracle", "sweep", "seed", "chains"});

  ExperimentConfig cfg;
  cfg.mode = parse_mode(r, r.require(doc, "", "mode"), "/mode");
  parse_system(r, r.require(doc, "", "system"), "/system", cfg);
  cfg.kernels = r.list(r.require(doc, "", "kernels"), "/kernels", true,
                       [&](const json& j, const std::string& p) { return parse_kernel(r, j, p); });
  const int baths = static_cast<int>(cfg.kernels.size());
  for (std::size_t i = 0; i < cfg.system.jumps.size(); ++i)
    if (cfg.system.jumps[i].bath >= baths)
      r.fail("/system/jumps/" + std::to_string(i) + "/bath",
             "bath " + std::to_string(cfg.system.jumps[i].bath) + " does not exist (" + std::to_string(baths) +
                 " kernel(s) given)");
  try {
    cfg.system.validate();
  } catch (const Error& e) {
    r.fail("/system", e.what());
  }

  if (doc.contains("environment")) {
    cfg.environment = r.list(doc["environment"], "/environment", true,
                             [&](const json& j, const std::string& p) { return parse_env(r, j, p); });
    if (static_cast<int>(cfg.environment.size()) != baths) r.fail("/environment", "needs one entry per kernel");
  } else {
    cfg.environment.assign(baths, EnvSpec{});
  }

  if (doc.contains("mollifier")) {
    const json& m = doc["mollifier"];
    r.object(m, "/mollifier", {"family", "epsilon"});
    if (m.contains("family")) {
      const std::string f = r.text(m["family"], "/mollifier/family");
      if (f == "standard_bump") cfg.family = MollifierFamily::StandardBump;
      else if (f == "scaled_bump_variant") cfg.family = MollifierFamily::ScaledBumpVariant;
      else r.fail("/mollifier/family", "expected standard_bump or scaled_bump_variant");
    }
    if (m.contains("epsilon")) cfg.epsilon = r.positive(m["epsilon"], "/mollifier/epsilon");
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    r.object(g, "/grid", {"omega_max", "points"});
    cfg.grid = FrequencyGrid{r.positive(r.require(g, "/grid", "omega_max"), "/grid/omega_max"),
                             r.integer(r.require(g, "/grid", "points"), "/grid/points", 3)};
  }

  if (doc.contains("chains")) {
    cfg.chains = parse_chains(r, doc["chains"], "/chains", base_dir);
    if (static_cast<int>(cfg.chains.size()) != baths) r.fail("/chains", "needs one chain per kernel");
    for (const auto& c : cfg.chains)
      if (c.modes() != cfg.chains.front().modes() || c.omega_c != cfg.chains.front().omega_c)
        r.fail("/chains", "all chains must share n_modes and omega_c");
    cfg.n_modes = cfg.chains.front().modes();
    cfg.omega_c = cfg.chains.front().omega_c;
    if (doc.contains("n_modes") && r.integer(doc["n_modes"], "/n_modes", 1) != cfg.n_modes)
      r.fail("/n_modes", "disagrees with the supplied chains");
    if (doc.contains("omega_c") && r.positive(doc["omega_c"], "/omega_c") != cfg.omega_c)
      r.fail("/omega_c", "disagrees with the supplied chains");
  } else {
    cfg.omega_c = r.positive(r.require(doc, "", "omega_c"), "/omega_c");
    cfg.n_modes = r.integer(r.require(doc, "", "n_modes"), "/n_modes", 1);
  }
  if (doc.contains("particle_cap")) cfg.particle_cap = r.integer(doc["particle_cap"], "/particle_cap", 0);
  if (doc.contains("t_final")) cfg.t_final = r.positive(doc["t_final"], "/t_final");
  if (doc.contains("output_step")) cfg.output_step = r.positive(doc["output_step"], "/output_step");
  if (doc.contains("tolerance")) cfg.tolerance = r.positive(doc["tolerance"], "/tolerance");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) r.fail("/seed", "expected a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  if (doc.contains("oracle")) {
    const json& o = doc["oracle"];
    r.object(o, "/oracle", {"kind", "star_modes", "rates"});
    if (o.contains("kind")) {
      const std::string k = r.text(o["kind"], "/oracle/kind");
      if (k == "star") cfg.oracle.kind = OracleSpec::Kind::Star;
      else if (k == "lindblad") cfg.oracle.kind = OracleSpec::Kind::Lindblad;
      else r.fail("/oracle/kind", "expected star or lindblad");
    }
    if (o.contains("star_modes")) cfg.oracle.star_modes = r.integer(o["star_modes"], "/oracle/star_modes", 2);
    if (o.contains("rates")) {
      cfg.oracle.rates = r.list(o["rates"], "/oracle/rates", true, [&](const json& t, const std::string& p) {
        const double g = r.number(t, p);
        if (g < 0.0) r.fail(p, "rates must be >= 0");
        return g;
      });
      if (static_cast<int>(cfg.oracle.rates.size()) != baths) r.fail("/oracle/rates", "needs one rate per kernel");
    }
  }

  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    r.object(s, "/sweep", {"epsilon", "omega_c", "n_modes", "particle_cap"});
    auto reals = [&](const char* key) {
      const std::string p = std::string("/sweep/") + key;
      return s.contains(key) ? r.list(s[key], p, true, [&](const json& t, const std::string& q) { return r.positive(t, q); })
                             : std::vector<double>{};
    };
    auto ints = [&](const char* key, int min) {
      const std::string p = std::string("/sweep/") + key;
      return s.contains(key)
                 ? r.list(s[key], p, true, [&](const json& t, const std::string& q) { return r.integer(t, q, min); })
                 : std::vector<int>{};
    };
    cfg.sweep.epsilon = reals("epsilon");
    cfg.sweep.omega_c = reals("omega_c");
    cfg.sweep.n_modes = ints("n_modes", 1);
    cfg.sweep.particle_cap = ints("particle_cap", 0);
    if (!cfg.chains.empty() && (!cfg.sweep.omega_c.empty() || !cfg.sweep.n_modes.empty()))
      r.fail("/sweep", "omega_c and n_modes cannot be swept when explicit chains are given");
  }
  if (cfg.mode == Mode::Sweep && cfg.sweep.empty())
    r.fail(doc.contains("sweep") ? "/sweep" : "/mode", "sweep mode needs at least one non-empty sweep axis");
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

json chain_to_json(const ChainCoefficients& c) {
  return {{"onsite", std::vector<double>(c.onsite.data(), c.onsite.data() + c.onsite.size())},
          {"hopping", std::vector<double>(c.hopping.data(), c.hopping.data() + c.hopping.size())},
          {"v_norm", c.v_norm},
          {"omega_c", c.omega_c}};
}

ChainCoefficients chain_from_json(const json& j) {
  const LineIndex none("");
  return chain_from_json_checked(Reader(none), j, "");
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

PointParams base_point(const ExperimentConfig& cfg) {
  return {cfg.epsilon, cfg.omega_c, cfg.n_modes, cfg.particle_cap};
}

std::vector<PointParams> sweep_points(const ExperimentConfig& cfg) {
  const PointParams b = base_point(cfg);
  auto or_base = [](const auto& axis, auto base) {
    return axis.empty() ? std::vector<decltype(base)>{base} : std::vector<decltype(base)>(axis.begin(), axis.end());
  };
  std::vector<PointParams> out;
  for (double eps : or_base(cfg.sweep.epsilon, b.epsilon))
    for (double wc : or_base(cfg.sweep.omega_c, b.omega_c))
      for (int nm : or_base(cfg.sweep.n_modes, b.n_modes))
        for (int p : or_base(cfg.sweep.particle_cap, b.p)) out.push_back({eps, wc, nm, p});
  return out;
}

std::vector<RegularizedCoupling> make_couplings(const ExperimentConfig& cfg, double epsilon) {
  std::vector<RegularizedCoupling> out;
  for (const auto& k : cfg.kernels) {
    const Mollifier m(epsilon, cfg.family);
    out.push_back(regularize(k, m, cfg.grid ? *cfg.grid : suggest_grid(k, m)));
  }
  return out;
}

std::vector<ChainCoefficients> make_chains(const ExperimentConfig& cfg,
                                           const std::vector<RegularizedCoupling>& couplings, double omega_c,
                                           int n_modes) {
  if (!cfg.chains.empty() && n_modes == cfg.n_modes && omega_c == cfg.omega_c) return cfg.chains;
  std::vector<ChainCoefficients> out;
  for (const auto& c : couplings) out.push_back(star_to_chain(c, omega_c, n_modes));
  return out;
}

InitialEnvState chain_environment(const ExperimentConfig& cfg, const std::vector<RegularizedCoupling>& couplings,
                                  const std::vector<ChainCoefficients>& chains) {
  InitialEnvState env;
  for (std::size_t a = 0; a < cfg.environment.size(); ++a) {
    const EnvSpec& e = cfg.environment[a];
    switch (e.kind) {
      case BathStateKind::Vacuum:
        env.baths.push_back(BathInitialState::vacuum());
        break;
      case BathStateKind::SinglePhoton:
        if (e.packet) {
          env.baths.push_back(project_wavepacket(chains[a], couplings[a], *e.packet));
          break;
        }
        [[fallthrough]];
      case BathStateKind::Coherent:
        if (e.amplitudes.size() != chains[a].modes())
          throw Error(ErrorKind::ShapeMismatch, "environment amplitudes need one entry per chain mode", long(a));
        env.baths.push_back(e.kind == BathStateKind::Coherent ? BathInitialState::coherent(e.amplitudes)
                                                                : BathInitialState::single_photon(e.amplitudes));
        break;
    }
  }
  return env;
}

InitialEnvState star_environment(const ExperimentConfig& cfg, const std::vector<StarDiscretization>& stars) {
  InitialEnvState env;
  for (std::size_t a = 0; a < cfg.environment.size(); ++a) {
    const EnvSpec& e = cfg.environment[a];
    if (e.kind == BathStateKind::Vacuum) {
      env.baths.push_back(BathInitialState::vacuum());
    } else if (e.kind == BathStateKind::SinglePhoton && e.packet) {
      env.baths.push_back(star_wavepacket(stars[a], *e.packet));
    } else {
      throw Error(ErrorKind::UnsupportedInitialState,
                  "the star oracle needs a vacuum or a wavepacket photon (chain-mode amplitudes have no star form)",
                  long(a));
    }
  }
  return env;
}

StepControl step_control(const ExperimentConfig& cfg) {
  StepControl c;
  c.output_step = cfg.output_step;
  c.tolerance = cfg.tolerance;
  return c;
}

namespace {

int bath_count(const ExperimentConfig& cfg) { return static_cast<int>(cfg.kernels.size()); }

struct ChainRun {
  std::vector<ChainCoefficients> chains;
  InitialEnvState env;
  TruncatedSpace space;
  Trajectory trajectory;
};

ChainRun run_chain(const ExperimentConfig& cfg, const std::vector<RegularizedCoupling>& couplings, double omega_c,
                   int n_modes, int p) {
  auto chains = make_chains(cfg, couplings, omega_c, n_modes);
  auto env = chain_environment(cfg, couplings, chains);
  TruncatedSpace space(cfg.system.n, cfg.system.d, bath_count(cfg), n_modes, p);
  const cx_vec psi0 = make_initial_state(space, cfg.initial_state, env);
  Trajectory tr = evolve(cfg.system, chains, space, psi0, cfg.t_final, step_control(cfg));
  return {std::move(chains), std::move(env), std::move(space), std::move(tr)};
}

struct StarRun {
  std::vector<StarDiscretization> stars;
  TruncatedSpace space;
  Trajectory trajectory;
};

StarRun run_star(const ExperimentConfig& cfg, const std::vector<RegularizedCoupling>& couplings, double omega_c,
                 int k, int p) {
  std::vector<StarDiscretization> stars;
  for (const auto& c : couplings) stars.push_back(make_star(c, omega_c, k));
  TruncatedSpace space = star_space(cfg.system, stars, p);
  const cx_vec psi0 = make_initial_state(space, cfg.initial_state, star_environment(cfg, stars));
  Trajectory tr = star_evolve(cfg.system, stars, space, psi0, cfg.t_final, step_control(cfg));
  return {std::move(stars), std::move(space), std::move(tr)};
}

double embedded_gap(const TruncatedSpace& from, const cx_vec& a, const TruncatedSpace& to, const cx_vec& b,
                    const std::vector<std::vector<int>>& mode_map = {}) {
  return (embed_state(from, to, a, mode_map) - b).norm();
}

RefinementGaps refinement_gaps(const ExperimentConfig& cfg, const PointParams& pt,
                               const std::vector<RegularizedCoupling>& couplings, const ChainRun& base) {
  RefinementGaps g;
  const ChainRun finer_p = run_chain(cfg, couplings, pt.omega_c, pt.n_modes, pt.p + 2);
  g.truncation = embedded_gap(base.space, base.trajectory.final_state, finer_p.space, finer_p.trajectory.final_state);
  spdlog::debug("gap truncation (p {} vs {}): {:.3e}", pt.p, pt.p + 2, g.truncation);

  if (cfg.chains.empty()) {
    const ChainRun longer = run_chain(cfg, couplings, pt.omega_c, pt.n_modes + 8, pt.p);
    g.chain = embedded_gap(base.space, base.trajectory.final_state, longer.space, longer.trajectory.final_state);
    spdlog::debug("gap chain (N_m {} vs {}): {:.3e}", pt.n_modes, pt.n_modes + 8, g.chain);
  }

  // Same midpoint spacing on [-w_c, w_c] and [-2 w_c, 2 w_c]: mode k of the
  // narrow star is mode k + K/2 of the wide one.
  const int k = cfg.oracle.star_modes + cfg.oracle.star_modes % 2;
  const StarRun narrow = run_star(cfg, couplings, pt.omega_c, k, pt.p);
  const StarRun wide = run_star(cfg, couplings, 2.0 * pt.omega_c, 2 * k, pt.p);
  std::vector<int> shift(k);
  for (int i = 0; i < k; ++i) shift[i] = i + k / 2;
  g.cutoff = embedded_gap(narrow.space, narrow.trajectory.final_state, wide.space, wide.trajectory.final_state,
                          std::vector<std::vector<int>>(bath_count(cfg), shift));
  spdlog::debug("gap cutoff (w_c {} vs {}): {:.3e}", pt.omega_c, 2.0 * pt.omega_c, g.cutoff);
  return g;
}

}  // namespace

PointResult run_point(const ExperimentConfig& cfg, const PointParams& params, bool certify) {
  spdlog::info("point eps={} w_c={} N_m={} p={}", params.epsilon, params.omega_c, params.n_modes, params.p);
  const auto couplings = make_couplings(cfg, params.epsilon);
  ChainRun run = run_chain(cfg, couplings, params.omega_c, params.n_modes, params.p);
  PointResult out{params, run.chains, run.trajectory, std::nullopt, std::nullopt};
  if (certify) {
    BudgetRequest req;
    req.model = &cfg.system;
    req.couplings = &couplings;
    req.chains = &run.chains;
    req.env = &run.env;
    req.p = params.p;
    req.t = cfg.t_final;
    out.budget = compute_budget(req);
    out.gaps = refinement_gaps(cfg, params, couplings, run);
  }
  return out;
}

OracleComparison compare_with_oracle(const ExperimentConfig& cfg) {
  const PointParams pt = base_point(cfg);
  const auto couplings = make_couplings(cfg, pt.epsilon);
  OracleComparison out;
  out.chain = run_chain(cfg, couplings, pt.omega_c, pt.n_modes, pt.p).trajectory;
  const auto& times = out.chain.times;
  if (cfg.oracle.kind == OracleSpec::Kind::Star) {
    out.star = run_star(cfg, couplings, pt.omega_c, cfg.oracle.star_modes, pt.p).trajectory;
    if (out.star.times.size() != times.size())
      throw Error(ErrorKind::ShapeMismatch, "oracle and chain output grids differ");
    for (std::size_t i = 0; i < times.size(); ++i)
      out.trace_distance.push_back(trace_distance(out.chain.rho[i], out.star.rho[i]));
  } else {
    for (const auto& e : cfg.environment)
      if (e.kind != BathStateKind::Vacuum)
        throw Error(ErrorKind::UnsupportedInitialState, "the Lindblad oracle needs a vacuum environment");
    std::vector<double> rates = cfg.oracle.rates;
    if (rates.empty())
      for (const auto& k : cfg.kernels) rates.push_back(eval_spectral_density(k, 0.0));
    const cx_mat rho0 = cfg.initial_state * cfg.initial_state.adjoint();
    out.lindblad = lindblad_evolve(cfg.system, rates, rho0, times);
    for (std::size_t i = 0; i < times.size(); ++i)
      out.trace_distance.push_back(trace_distance(out.chain.rho[i], out.lindblad[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void write_header(std::ostream& os, Index dim, int baths) {
  os << "t,oracle";
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) os << ",rho_" << i << '_' << j << "_re,rho_" << i << '_' << j << "_im";
  for (int b = 0; b < baths; ++b) os << ",mu1_" << b << ",mu2_" << b;
  os << ",norm\n";
}

void write_row(std::ostream& os, double t, const std::string& oracle, const cx_mat& rho, const double* mu1,
               const double* mu2, int baths, const double* norm) {
  os << format_double(t) << ',' << oracle;
  for (Index i = 0; i < rho.rows(); ++i)
    for (Index j = 0; j < rho.cols(); ++j)
      os << ',' << format_double(rho(i, j).real()) << ',' << format_double(rho(i, j).imag());
  for (int b = 0; b < baths; ++b) {
    os << ',';
    if (mu1) os << format_double(mu1[b]);
    os << ',';
    if (mu2) os << format_double(mu2[b]);
  }
  os << ',';
  if (norm) os << format_double(*norm);
  os << '\n';
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json term_json(const BudgetTerm& t) {
  return {{"value", t.value}, {"epsilon", t.epsilon}, {"omega_c", t.omega_c}, {"n_modes", t.n_modes}, {"p", t.p}};
}

json chains_document(const PointParams& pt, const std::vector<ChainCoefficients>& chains) {
  json list = json::array();
  for (const auto& c : chains) list.push_back(chain_to_json(c));
  return {{"epsilon", pt.epsilon}, {"omega_c", pt.omega_c}, {"n_modes", pt.n_modes}, {"chains", list}};
}

const char* kSweepHeader =
    "index,epsilon,omega_c,n_modes,p,t,regularization,cutoff,chain,truncation,initialization,total,"
    "gap_truncation,gap_chain,gap_cutoff,gap_max,total_covers_gap,max_norm_drift,max_trace_drift\n";

std::string sweep_row(std::size_t index, const PointResult& r) {
  const ErrorBudget& b = *r.budget;
  const RefinementGaps& g = *r.gaps;
  std::ostringstream os;
  os << index << ',' << format_double(r.params.epsilon) << ',' << format_double(r.params.omega_c) << ','
     << r.params.n_modes << ',' << r.params.p << ',' << format_double(b.t);
  for (double x : {b.regularization.value, b.cutoff.value, b.chain.value, b.truncation.value, b.initialization.value,
                   b.total, g.truncation, g.chain, g.cutoff, g.max()})
    os << ',' << format_double(x);
  os << ',' << (b.total >= g.max() ? "true" : "false") << ',' << format_double(r.trajectory.max_norm_drift()) << ','
     << format_double(r.trajectory.max_trace_drift()) << '\n';
  return os.str();
}

void run_sweep(const ExperimentConfig& cfg, const fs::path& out_dir, int jobs) {
  const auto points = sweep_points(cfg);
  const fs::path part_dir = out_dir / "points";
  fs::create_directories(part_dir);
  auto part = [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "point_%05zu.csv", i);
    return part_dir / name;
  };

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(points.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        write_atomic(part(i), sweep_row(i, run_point(cfg, points[i], true)));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(points.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Merge in point order, whatever order the workers finished in.
  std::ostringstream merged;
  merged << kSweepHeader;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::ifstream in(part(i), std::ios::binary);
    merged << in.rdbuf();
  }
  write_atomic(out_dir / "sweep.csv", merged.str());
  fs::remove_all(part_dir);
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const std::string& oracle, bool header) {
  const Index dim = tr.rho.empty() ? 0 : tr.rho.front().rows();
  const int baths = tr.mu1.empty() ? 0 : static_cast<int>(tr.mu1.front().size());
  if (header) write_header(os, dim, baths);
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    write_row(os, tr.times[i], oracle, tr.rho[i], tr.mu1[i].data(), tr.mu2[i].data(), baths, &tr.norm[i]);
}

json budget_to_json(const ErrorBudget& b, const std::optional<RefinementGaps>& gaps) {
  json j = {{"t", b.t},
            {"terms",
             {{"regularization", term_json(b.regularization)},
              {"cutoff", term_json(b.cutoff)},
              {"chain", term_json(b.chain)},
              {"truncation", term_json(b.truncation)},
              {"initialization", term_json(b.initialization)}}},
            {"total", b.total}};
  if (gaps) {
    j["measured_gaps"] = {{"truncation", gaps->truncation}, {"chain", gaps->chain}, {"cutoff", gaps->cutoff}};
    j["total_covers_gaps"] = b.total >= gaps->max();
  }
  return j;
}

void run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, int jobs) {
  fs::create_directories(out_dir);
  const PointParams pt = base_point(cfg);
  switch (cfg.mode) {
    case Mode::ChainMap: {
      const auto chains = make_chains(cfg, make_couplings(cfg, pt.epsilon), pt.omega_c, pt.n_modes);
      write_atomic(out_dir / "chains.json", chains_document(pt, chains).dump(2) + "\n");
      break;
    }
    case Mode::Simulate:
    case Mode::Certify: {
      const PointResult r = run_point(cfg, pt, cfg.mode == Mode::Certify);
      write_atomic(out_dir / "chains.json", chains_document(pt, r.chains).dump(2) + "\n");
      std::ostringstream csv;
      write_trajectory_csv(csv, r.trajectory, "none");
      write_atomic(out_dir / "trajectory.csv", csv.str());
      if (r.budget) {
        write_atomic(out_dir / "budget.json", budget_to_json(*r.budget, r.gaps).dump(2) + "\n");
        spdlog::info("certified total {:.3e}, largest measured gap {:.3e}", r.budget->total, r.gaps->max());
      }
      break;
    }
    case Mode::CompareOracle: {
      const OracleComparison c = compare_with_oracle(cfg);
      std::ostringstream csv;
      write_trajectory_csv(csv, c.chain, "none");
      if (!c.star.times.empty()) write_trajectory_csv(csv, c.star, "star", false);
      const int baths = bath_count(cfg);
      for (std::size_t i = 0; i < c.lindblad.size(); ++i)
        write_row(csv, c.chain.times[i], "lindblad", c.lindblad[i], nullptr, nullptr, baths, nullptr);
      write_atomic(out_dir / "trajectory.csv", csv.str());
      std::ostringstream cmp;
      cmp << "t,trace_distance\n";
      double worst = 0.0;
      for (std::size_t i = 0; i < c.trace_distance.size(); ++i) {
        cmp << format_double(c.chain.times[i]) << ',' << format_double(c.trace_distance[i]) << '\n';
        worst = std::max(worst, c.trace_distance[i]);
      }
      write_atomic(out_dir / "comparison.csv", cmp.str());
      spdlog::info("max trace distance to the oracle {:.3e}", worst);
      break;
    }
    case Mode::Sweep:
      run_sweep(cfg, out_dir, jobs);
      break;
  }
}

}  // namespace nmk
