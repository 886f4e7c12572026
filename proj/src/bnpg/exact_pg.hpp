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

#ifndef BNPG_EXACT_PG_HPP_
#define BNPG_EXACT_PG_HPP_

#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "bnpg/bn_policy.hpp"
#include "bnpg/markov_game.hpp"

namespace bnpg {

// dV(mu)/dtheta^i, same layout as TabularBnPolicy::theta(i).
struct BnGradient {
  std::vector<std::vector<double>> tables;

  double sup_norm() const;
  double l2_norm() const;
  bool all_finite() const;
};

// Everything an exact gradient step needs from one policy evaluation.
struct ExactEvaluation {
  JointDistributionTable joint;
  ValueTables values;
  VisitationTable visitation;
  double value = 0.0;  // V(mu)
};

ExactEvaluation evaluate_exact(
    const CooperativeMarkovGame& game, const TabularBnPolicy& policy,
    std::size_t enumeration_limit = std::size_t{1} << 20);

// Entry (i, s, a^P, a^i) = d(s, a^P) pi^i(a^i | s, a^P) A^i(s, a^P, a^i),
// with d the unnormalized visitation (sums to 1/(1-gamma)) and the
// conditional Q's taken exactly over the materialized joint table.
BnGradient bn_policy_gradient(
    const CooperativeMarkovGame& game, const TabularBnPolicy& policy,
    std::size_t enumeration_limit = std::size_t{1} << 20);
BnGradient bn_policy_gradient(const CooperativeMarkovGame& game,
                              const TabularBnPolicy& policy,
                              const ExactEvaluation& eval);

// 1 / L with L = 8 N (r_max - r_min) / (1 - gamma)^3; +inf for constant r.
double smoothness_step_bound(const CooperativeMarkovGame& game);

struct AscentConfig {
  // <= 0 selects smoothness_step_bound(game).
  double step_size = 0.0;
  // Steps above the smoothness bound are rejected unless this is set.
  bool allow_step_above_bound = false;
  long max_iters = 10000;
  double grad_tolerance = 1e-8;
  double monotonicity_tolerance = 1e-10;
};

struct AscentRecord {
  long iter = 0;
  double value = 0.0;      // V_t(mu) before the update of iteration t
  double grad_norm = 0.0;  // sup norm at theta_t
  bool monotone = true;    // V_t >= V_{t-1} - tolerance
};

struct AscentResult {
  std::vector<AscentRecord> trajectory;
  double step_size = 0.0;
  bool converged = false;
  bool monotone = true;
  long monotonicity_violations = 0;
};

// Return false to stop early.
using AscentCallback =
    std::function<bool(const AscentRecord&, const TabularBnPolicy&)>;

// theta_{t+1} = theta_t + eta * grad V(theta_t), in place on `policy`.
AscentResult ascend(const CooperativeMarkovGame& game, TabularBnPolicy& policy,
                    const AscentConfig& config,
                    const AscentCallback& callback = {});

struct TrajectoryRow {
  long iter = 0;
  double value = 0.0;
  double nash_gap = std::numeric_limits<double>::quiet_NaN();
  double poa = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
  unsigned long long seed = 0;
  std::string topology;
};

// Columns: iter,value,nash_gap,poa,grad_norm,seed,topology.
void write_trajectory_csv(std::ostream& out,
                          const std::vector<TrajectoryRow>& rows);

}  // namespace bnpg

#endif  // BNPG_EXACT_PG_HPP_
