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

#include "bnpg/solvers_metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "bnpg/errors.hpp"

namespace bnpg {
namespace {

constexpr double kValueTolerance = 1e-10;
constexpr double kNashClip = 1e-8;

double q_value(const FiniteMdp& mdp, const std::vector<double>& v, int s,
               int a) {
  const double* row =
      mdp.transition.data() +
      (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states;
  double next = 0.0;
  for (int t = 0; t < mdp.n_states; ++t) next += row[t] * v[t];
  return mdp.reward[static_cast<std::size_t>(s) * mdp.n_actions + a] +
         mdp.gamma * next;
}

std::vector<double> evaluate_deterministic(const FiniteMdp& mdp,
                                           const std::vector<int>& policy) {
  const int n = mdp.n_states;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (int s = 0; s < n; ++s) {
    const int a = policy[s];
    rhs(s) = mdp.reward[static_cast<std::size_t>(s) * mdp.n_actions + a];
    for (int t = 0; t < n; ++t) lhs(s, t) -= mdp.gamma * mdp.p(s, a, t);
  }
  Eigen::VectorXd v = lhs.partialPivLu().solve(rhs);
  return {v.data(), v.data() + n};
}

std::atomic<bool> g_warned_negative_poa{false};

}  // namespace

MdpSolution solve_mdp(const FiniteMdp& mdp) {
  const int n = mdp.n_states;
  const int m = mdp.n_actions;
  if (n <= 0 || m <= 0) throw DimensionError("empty MDP");
  MdpSolution sol;
  sol.greedy.assign(n, 0);
  for (int s = 0; s < n; ++s) {
    const double* r = mdp.reward.data() + static_cast<std::size_t>(s) * m;
    sol.greedy[s] = static_cast<int>(std::max_element(r, r + m) - r);
  }
  // Policy iteration on small problems; it terminates in a few rounds.
  if (n <= 2048) {
    for (int round = 0; round < 1000; ++round) {
      sol.v = evaluate_deterministic(mdp, sol.greedy);
      bool stable = true;
      for (int s = 0; s < n; ++s) {
        int best = sol.greedy[s];
        double best_q = q_value(mdp, sol.v, s, best);
        for (int a = 0; a < m; ++a) {
          const double q = q_value(mdp, sol.v, s, a);
          if (q > best_q + 1e-13 * std::max(1.0, std::abs(best_q))) {
            best_q = q;
            best = a;
          }
        }
        if (best != sol.greedy[s]) {
          sol.greedy[s] = best;
          stable = false;
        }
      }
      if (stable) break;
    }
  } else {
    sol.v.assign(n, 0.0);
  }

  const double threshold =
      mdp.gamma > 0.0 ? kValueTolerance * (1.0 - mdp.gamma) / mdp.gamma
                      : std::numeric_limits<double>::infinity();
  std::vector<double> next(n);
  for (int sweep = 0; sweep < 1000000; ++sweep) {
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < m; ++a) {
        const double q = q_value(mdp, sol.v, s, a);
        if (q > best) {
          best = q;
          sol.greedy[s] = a;
        }
      }
      next[s] = best;
      residual = std::max(residual, std::abs(best - sol.v[s]));
    }
    sol.v.swap(next);
    sol.residual = residual;
    sol.sweeps = sweep + 1;
    if (residual < threshold) break;
  }
  return sol;
}

FiniteMdp joint_action_mdp(const CooperativeMarkovGame& game,
                           std::size_t enumeration_limit) {
  const std::size_t na = game.n_joint_actions();
  if (na > enumeration_limit) {
    throw EnumerationLimitError("joint action space of size " +
                                std::to_string(na) +
                                " exceeds the enumeration limit");
  }
  FiniteMdp mdp;
  mdp.n_states = game.n_states();
  mdp.n_actions = static_cast<int>(na);
  mdp.transition = game.transition_table();
  mdp.reward = game.reward_table();
  mdp.initial = game.mu();
  mdp.gamma = game.gamma();
  return mdp;
}

double optimal_value(const CooperativeMarkovGame& game,
                     std::size_t enumeration_limit) {
  const FiniteMdp mdp = joint_action_mdp(game, enumeration_limit);
  const MdpSolution sol = solve_mdp(mdp);
  double total = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) total += mdp.initial[s] * sol.v[s];
  return total;
}

AugmentedMdp build_augmented_mdp(const CooperativeMarkovGame& game,
                                 const TabularBnPolicy& policy, int agent,
                                 const JointDistributionTable& joint) {
  if (agent < 0 || agent >= policy.n_agents()) {
    throw DimensionError("agent index out of range");
  }
  const int ns = game.n_states();
  const std::size_t na = game.n_joint_actions();
  const auto& space = policy.joint_space();
  const int n = policy.n_agents();
  const int nc = policy.n_parent_configs(agent);
  const int k = space.count(agent);

  AugmentedMdp out;
  out.agent = agent;
  out.n_parent_configs = nc;
  FiniteMdp& mdp = out.mdp;
  mdp.n_states = ns * nc;
  mdp.n_actions = k;
  mdp.gamma = game.gamma();
  mdp.transition.assign(
      static_cast<std::size_t>(mdp.n_states) * k * mdp.n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(mdp.n_states) * k, 0.0);
  mdp.initial.assign(mdp.n_states, 0.0);

  // Parent marginals do not depend on agent's own local policy.
  std::vector<double> marginal(static_cast<std::size_t>(ns) * nc);
  for (int s = 0; s < ns; ++s) {
    auto m = parent_marginal(policy, joint, agent, s);
    std::copy(m.begin(), m.end(), marginal.begin() + static_cast<std::size_t>(s) * nc);
    for (int c = 0; c < nc; ++c) {
      mdp.initial[s * nc + c] = game.mu()[s] * m[c];
    }
  }

  std::vector<double> others(na);
  std::vector<double> mass(static_cast<std::size_t>(nc) * k);
  std::vector<int> matches(static_cast<std::size_t>(nc) * k);
  std::vector<double> local;
  for (int s = 0; s < ns; ++s) {
    // Product of every other agent's local conditional.
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(matches.begin(), matches.end(), 0);
    for (std::size_t a = 0; a < na; ++a) {
      double w = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j == agent) continue;
        local.resize(space.count(j));
        policy.local_policy_into(j, s, policy.parent_config(j, a), local);
        w *= local[space.digit(a, j)];
      }
      others[a] = w;
      const std::size_t key =
          static_cast<std::size_t>(policy.parent_config(agent, a)) * k +
          space.digit(a, agent);
      mass[key] += w;
      ++matches[key];
    }
    for (std::size_t a = 0; a < na; ++a) {
      const int c = policy.parent_config(agent, a);
      const int ai = space.digit(a, agent);
      const std::size_t key = static_cast<std::size_t>(c) * k + ai;
      const double cond = mass[key] > 0.0 ? others[a] / mass[key]
                                          : 1.0 / matches[key];
      if (cond == 0.0) continue;
      const int aug = s * nc + c;
      mdp.reward[static_cast<std::size_t>(aug) * k + ai] +=
          cond * game.reward(s, a);
      double* row = mdp.transition.data() +
                    (static_cast<std::size_t>(aug) * k + ai) * mdp.n_states;
      auto p = game.transition_row(s, a);
      for (int t = 0; t < ns; ++t) {
        if (p[t] == 0.0) continue;
        const double* mt = marginal.data() + static_cast<std::size_t>(t) * nc;
        for (int c2 = 0; c2 < nc; ++c2) {
          row[t * nc + c2] += cond * p[t] * mt[c2];
        }
      }
    }
  }
  return out;
}

double best_response_value(const CooperativeMarkovGame& game,
                           const TabularBnPolicy& policy, int agent,
                           const JointDistributionTable& joint) {
  const AugmentedMdp aug = build_augmented_mdp(game, policy, agent, joint);
  const MdpSolution sol = solve_mdp(aug.mdp);
  double total = 0.0;
  for (int s = 0; s < aug.mdp.n_states; ++s) {
    total += aug.mdp.initial[s] * sol.v[s];
  }
  return total;
}

double best_response_value(const CooperativeMarkovGame& game,
                           const TabularBnPolicy& policy, int agent) {
  return best_response_value(game, policy, agent, policy.to_joint_table());
}

double nash_gap(const CooperativeMarkovGame& game,
                const TabularBnPolicy& policy,
                const JointDistributionTable& joint, double value) {
  double gap = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < policy.n_agents(); ++i) {
    gap = std::max(gap, best_response_value(game, policy, i, joint) - value);
  }
  if (gap < -kNashClip) {
    throw NumericalError("best response below the policy value by " +
                         std::to_string(-gap));
  }
  return std::max(gap, 0.0);
}

double nash_gap(const CooperativeMarkovGame& game,
                const TabularBnPolicy& policy) {
  const auto joint = policy.to_joint_table();
  return nash_gap(game, policy, joint, value_from_start(game, joint));
}

double poa_from_values(double value, double optimal) {
  if (optimal == 0.0) {
    throw UndefinedMetricError("price of anarchy undefined: V*(mu) = 0");
  }
  if ((value < 0.0 || optimal < 0.0) &&
      !g_warned_negative_poa.exchange(true)) {
    std::cerr << "warning: negative values, POA is not bounded in [0, 1]\n";
  }
  return value / optimal;
}

double poa(const CooperativeMarkovGame& game, const TabularBnPolicy& policy) {
  const auto joint = policy.to_joint_table();
  return poa_from_values(value_from_start(game, joint), optimal_value(game));
}

}  // namespace bnpg
