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

#ifndef BNPG_RECORDS_HPP_
#define BNPG_RECORDS_HPP_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace bnpg {

// One logged row. NaN marks a field the run does not produce; it is written
// as an empty CSV cell.
struct ExperimentRecord {
  static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

  std::uint64_t seed = 0;
  long iteration = 0;
  double value = kMissing;
  double poa = kMissing;
  double nash_gap = kMissing;
  double dag_density = kMissing;
  double eta = kMissing;
  double alpha = kMissing;
  double grad_norm = kMissing;
  double wall_time = kMissing;
};

inline constexpr const char* kRecordHeader =
    "seed,iteration,value,poa,nash_gap,dag_density,eta,alpha,grad_norm,"
    "wall_time";

// Shortest text that parses back to the same double ("" for NaN).
std::string format_double(double v);

void write_records_csv(std::ostream& out,
                       const std::vector<ExperimentRecord>& rows);
// Throws std::runtime_error on a bad header or malformed row.
std::vector<ExperimentRecord> read_records_csv(std::istream& in);

}  // namespace bnpg

#endif  // BNPG_RECORDS_HPP_
