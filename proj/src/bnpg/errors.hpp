// Copyright 2026 The BNPG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BNPG_ERRORS_HPP_
#define BNPG_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace bnpg {

// Shapes of tables, indices or configuration values do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Joint action space too large to enumerate under the configured limit.
class EnumerationLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Non-finite values, singular systems, residual checks that failed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric that has no value for the given input (e.g. POA with V* = 0).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid experiment or training configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bnpg

#endif  // BNPG_ERRORS_HPP_
