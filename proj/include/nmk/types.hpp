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

#include <complex>
#include <cstdint>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace nmk {

using cplx = std::complex<double>;
using Index = std::int64_t;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using rvec = Vec<double>;
using cx_vec = Vec<cplx>;
using rmat = Mat<double>;
using cx_mat = Mat<cplx>;

// Row-major keeps the mat-vec in the propagator a straight CSR sweep.
using cx_sp_mat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr cplx kI{0.0, 1.0};

}  // namespace nmk
