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

#include "bnpg/records.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bnpg {

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_records_csv(std::ostream& out,
                       const std::vector<ExperimentRecord>& rows) {
  out << kRecordHeader << '\n';
  for (const auto& r : rows) {
    out << r.seed << ',' << r.iteration << ',' << format_double(r.value) << ','
        << format_double(r.poa) << ',' << format_double(r.nash_gap) << ','
        << format_double(r.dag_density) << ',' << format_double(r.eta) << ','
        << format_double(r.alpha) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.wall_time) << '\n';
  }
}

namespace {

double parse_cell(const std::string& cell, int line) {
  if (cell.empty()) return ExperimentRecord::kMissing;
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw std::runtime_error("bad number '" + cell + "' on line " +
                             std::to_string(line));
  }
  return v;
}

}  // namespace

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader) {
    throw std::runtime_error("missing or unexpected CSV header");
  }
  std::vector<ExperimentRecord> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) {
      throw std::runtime_error("expected 10 columns on line " +
                               std::to_string(line_no));
    }
    ExperimentRecord r;
    try {
      r.seed = std::stoull(cells[0]);
      r.iteration = std::stol(cells[1]);
    } catch (const std::exception&) {
      throw std::runtime_error("bad seed or iteration on line " +
                               std::to_string(line_no));
    }
    double* fields[] = {&r.value, &r.poa,   &r.nash_gap,  &r.dag_density,
                        &r.eta,   &r.alpha, &r.grad_norm, &r.wall_time};
    for (int k = 0; k < 8; ++k) *fields[k] = parse_cell(cells[2 + k], line_no);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace bnpg
