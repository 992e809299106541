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

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "nmk/types.hpp"

namespace nmk {

template <typename Derived>
typename Derived::RealScalar hermiticity_defect(const Eigen::MatrixBase<Derived>& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double tol = 1e-12) {
  return a.rows() == a.cols() && hermiticity_defect(a) <= tol;
}

// Largest singular value.
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0.0;
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(a.eval());
  return svd.singularValues()(0);
}

// Half the trace norm of the (Hermitian) difference.
template <typename DerivedA, typename DerivedB>
double trace_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  cx_mat diff = (a - b).template cast<cplx>();
  diff = 0.5 * (diff + diff.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<cx_mat> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& rho) {
  cx_mat h = rho.template cast<cplx>();
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<cx_mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Scalar>
Mat<Scalar> commutator(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  return a * b - b * a;
}

}  // namespace nmk
