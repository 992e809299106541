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

#include "nmk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nmk/error.hpp"

namespace nmk {

const PointRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, PointRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "gauss_legendre needs n >= 1");

  rvec diag = rvec::Zero(n);
  rvec sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<rmat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);

  PointRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  // Polish with a few Newton steps on P_n; eigenvalues alone sit near 1e-15.
  for (int i = 0; i < n; ++i) {
    double x = rule.nodes(i);
    double dp = 1.0;
    for (int iter = 0; iter < 3; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = n == 1 ? x : p1;
      double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      x -= pn / dp;
    }
    rule.nodes(i) = x;
    rule.weights(i) = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

PointRule composite_gauss_legendre(const std::vector<double>& edges, int per_panel) {
  const PointRule& base = gauss_legendre(per_panel);
  const Index panels = static_cast<Index>(edges.size()) - 1;
  PointRule out;
  out.nodes.resize(panels * per_panel);
  out.weights.resize(panels * per_panel);
  for (Index p = 0; p < panels; ++p) {
    const double half = 0.5 * (edges[p + 1] - edges[p]);
    const double mid = 0.5 * (edges[p + 1] + edges[p]);
    for (int k = 0; k < per_panel; ++k) {
      out.nodes(p * per_panel + k) = mid + half * base.nodes(k);
      out.weights(p * per_panel + k) = half * base.weights(k);
    }
  }
  return out;
}

std::vector<double> chebyshev_edges(double w, int panels, const std::vector<double>& breakpoints) {
  std::vector<double> edges;
  edges.reserve(panels + 1 + breakpoints.size());
  for (int i = 0; i <= panels; ++i) edges.push_back(-w * std::cos(kPi * i / panels));
  edges.front() = -w;
  edges.back() = w;
  for (double b : breakpoints)
    if (b > -w && b < w) edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  const double merge = 1e-12 * std::max(1.0, w);
  std::vector<double> unique;
  for (double e : edges)
    if (unique.empty() || e - unique.back() > merge) unique.push_back(e);
  unique.back() = w;
  return unique;
}

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double tol, unsigned max_depth) {
  if (b <= a) return {0.0, 0.0};
  double err = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth,
                                                                               tol, &err);
  if (!std::isfinite(value) || err > 100.0 * tol * std::max(1.0, std::abs(value)))
    throw Error(ErrorKind::QuadratureNotConverged,
                "adaptive quadrature on [" + std::to_string(a) + ", " + std::to_string(b) +
                    "] stalled at error " + std::to_string(err));
  return {value, err};
}

}  // namespace nmk
