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

#include <functional>
#include <vector>

#include "nmk/types.hpp"

namespace nmk {

// Nodes and weights of a (possibly composite) rule on a real interval.
struct PointRule {
  rvec nodes;
  rvec weights;
};

// n-point Gauss-Legendre on [-1, 1] (Golub-Welsch). Results are cached per n.
const PointRule& gauss_legendre(int n);

// Composite Gauss-Legendre with `per_panel` nodes on each [edges[i], edges[i+1]].
PointRule composite_gauss_legendre(const std::vector<double>& edges, int per_panel);

// Panel edges on [-w, w] clustered towards the ends (Chebyshev-Lobatto points),
// merged with any interior breakpoints.
std::vector<double> chebyshev_edges(double w, int panels, const std::vector<double>& breakpoints = {});

struct AdaptiveResult {
  double value;
  double error_estimate;
};

// Adaptive Gauss-Kronrod (Boost.Math). Throws QuadratureNotConverged when the
// estimate stays above tol * max(1, |value|).
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double tol = 1e-11, unsigned max_depth = 18);

}  // namespace nmk
