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

#include <stdexcept>
#include <string>

namespace nmk {

enum class ErrorKind {
  NonPositiveDensity,
  QuadratureNotConverged,
  EpsilonTooLarge,
  GridTooCoarse,
  TailNotNegligible,
  DegenerateWeight,
  RecursionBreakdown,
  DimensionOverflow,
  ShapeMismatch,
  StepControlFailure,
  UnsupportedInitialState,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

// Single exception type; callers switch on kind() rather than catch a zoo.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, long index = -1)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        index_(index) {}

  ErrorKind kind() const { return kind_; }
  // Offending index where one exists (recursion step, bath, basis state).
  long index() const { return index_; }

 private:
  ErrorKind kind_;
  long index_;
};

}  // namespace nmk
