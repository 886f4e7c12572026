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

#ifndef BNPG_SOLVERS_METRICS_HPP_
#define BNPG_SOLVERS_METRICS_HPP_

#include <cstddef>
#include <vector>

#include "bnpg/bn_policy.hpp"
#include "bnpg/markov_game.hpp"

namespace bnpg {

// Finite discounted MDP with dense tables: transition [s][a][s'], reward
// [s][a]. Used for the joint-action MDP and for best-response problems.
struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<double> initial;
  double gamma = 0.0;

  double p(int s, int a, int t) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }
};

struct MdpSolution {
  std::vector<double> v;
  std::vector<int> greedy;  // argmax action per state
  double residual = 0.0;    // sup-norm Bellman optimality residual
  int sweeps = 0;
};

// Howard policy iteration followed by value-iteration sweeps until the
// Bellman optimality residual is below 1e-10 (1 - gamma) / gamma.
MdpSolution solve_mdp(const FiniteMdp& mdp);

// Agent i's best-response problem: augmented states (s, a^{P^i}) laid out
// as s * n_parent_configs + config, actions a^i; all other local policies
// are fixed at the policy's values.
struct AugmentedMdp {
  int agent = 0;
  int n_parent_configs = 1;
  FiniteMdp mdp;
};

AugmentedMdp build_augmented_mdp(const CooperativeMarkovGame& game,
                                 const TabularBnPolicy& policy, int agent,
                                 const JointDistributionTable& joint);

// max over joint policies of V(mu).
double optimal_value(const CooperativeMarkovGame& game,
                     std::size_t enumeration_limit = std::size_t{1} << 20);
// The joint-action MDP of the game.
FiniteMdp joint_action_mdp(const CooperativeMarkovGame& game,
                           std::size_t enumeration_limit = std::size_t{1} << 20);

// max over maps (s, a^{P^i}) -> Delta(A^i) of V with the others fixed.
double best_response_value(const CooperativeMarkovGame& game,
                           const TabularBnPolicy& policy, int agent);
double best_response_value(const CooperativeMarkovGame& game,
                           const TabularBnPolicy& policy, int agent,
                           const JointDistributionTable& joint);

// max_i (best_response_value_i - V(mu)); values in (-1e-8, 0) are clipped.
double nash_gap(const CooperativeMarkovGame& game,
                const TabularBnPolicy& policy);
double nash_gap(const CooperativeMarkovGame& game,
                const TabularBnPolicy& policy,
                const JointDistributionTable& joint, double value);

// V(mu) / V*(mu). Throws UndefinedMetricError when V* == 0.
double poa(const CooperativeMarkovGame& game, const TabularBnPolicy& policy);
double poa_from_values(double value, double optimal);

}  // namespace bnpg

#endif  // BNPG_SOLVERS_METRICS_HPP_
