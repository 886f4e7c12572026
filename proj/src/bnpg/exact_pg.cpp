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

#include "bnpg/exact_pg.hpp"

#include <cmath>
#include <cstdio>

#include "bnpg/errors.hpp"

namespace bnpg {

double BnGradient::sup_norm() const {
  double m = 0.0;
  for (const auto& t : tables) {
    for (double g : t) m = std::max(m, std::abs(g));
  }
  return m;
}

double BnGradient::l2_norm() const {
  double total = 0.0;
  for (const auto& t : tables) {
    for (double g : t) total += g * g;
  }
  return std::sqrt(total);
}

bool BnGradient::all_finite() const {
  for (const auto& t : tables) {
    for (double g : t) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

ExactEvaluation evaluate_exact(const CooperativeMarkovGame& game,
                               const TabularBnPolicy& policy,
                               std::size_t enumeration_limit) {
  if (policy.n_states() != game.n_states() ||
      policy.action_counts() != game.action_counts()) {
    throw DimensionError("policy shape does not match the game");
  }
  ExactEvaluation eval{policy.to_joint_table(enumeration_limit), {}, {}, 0.0};
  eval.values = evaluate_policy(game, eval.joint);
  eval.visitation = visitation(game, eval.joint);
  eval.value = value_from_start(game, eval.values);
  return eval;
}

BnGradient bn_policy_gradient(const CooperativeMarkovGame& game,
                              const TabularBnPolicy& policy,
                              std::size_t enumeration_limit) {
  return bn_policy_gradient(game, policy,
                            evaluate_exact(game, policy, enumeration_limit));
}

BnGradient bn_policy_gradient(const CooperativeMarkovGame& game,
                              const TabularBnPolicy& policy,
                              const ExactEvaluation& eval) {
  const int n = policy.n_agents();
  const int ns = game.n_states();
  const std::size_t na = game.n_joint_actions();
  const auto& space = policy.joint_space();

  BnGradient grad;
  grad.tables.resize(n);
  std::vector<double> parent_mass, parent_q, plus_mass, plus_q, local;
  for (int i = 0; i < n; ++i) {
    const int nc = policy.n_parent_configs(i);
    const int k = space.count(i);
    grad.tables[i].assign(policy.theta(i).size(), 0.0);
    for (int s = 0; s < ns; ++s) {
      // Accumulate pi(a^P | s), pi(a^P, a^i | s) and their Q-weighted sums.
      parent_mass.assign(nc, 0.0);
      parent_q.assign(nc, 0.0);
      plus_mass.assign(static_cast<std::size_t>(nc) * k, 0.0);
      plus_q.assign(static_cast<std::size_t>(nc) * k, 0.0);
      auto row = eval.joint.row(s);
      for (std::size_t a = 0; a < na; ++a) {
        const double w = row[a];
        const double wq = w * eval.values.q_at(s, a);
        const int c = policy.parent_config(i, a);
        const std::size_t ck = static_cast<std::size_t>(c) * k + space.digit(a, i);
        parent_mass[c] += w;
        parent_q[c] += wq;
        plus_mass[ck] += w;
        plus_q[ck] += wq;
      }
      const double d_s = eval.visitation.d[s];
      local.resize(k);
      for (int c = 0; c < nc; ++c) {
        if (parent_mass[c] <= 0.0) continue;
        const double q_parent = parent_q[c] / parent_mass[c];
        const double d_aug = d_s * parent_mass[c];
        policy.local_policy_into(i, s, c, local);
        const std::size_t base = policy.theta_offset(i, s, c);
        for (int ai = 0; ai < k; ++ai) {
          const std::size_t ck = static_cast<std::size_t>(c) * k + ai;
          if (plus_mass[ck] <= 0.0) continue;
          const double advantage = plus_q[ck] / plus_mass[ck] - q_parent;
          grad.tables[i][base + ai] = d_aug * local[ai] * advantage;
        }
      }
    }
  }
  return grad;
}

double smoothness_step_bound(const CooperativeMarkovGame& game) {
  const double range = game.r_max() - game.r_min();
  if (range <= 0.0) return std::numeric_limits<double>::infinity();
  const double h = 1.0 - game.gamma();
  return h * h * h / (8.0 * game.n_agents() * range);
}

AscentResult ascend(const CooperativeMarkovGame& game, TabularBnPolicy& policy,
                    const AscentConfig& config,
                    const AscentCallback& callback) {
  const double bound = smoothness_step_bound(game);
  AscentResult result;
  if (config.step_size > 0.0) {
    if (config.step_size > bound && !config.allow_step_above_bound) {
      throw ConfigError("step size " + std::to_string(config.step_size) +
                        " exceeds the smoothness bound " +
                        std::to_string(bound) +
                        " (set allow_step_above_bound to override)");
    }
    result.step_size = config.step_size;
  } else {
    if (!std::isfinite(bound)) {
      // Constant reward: the gradient vanishes, any step is inert.
      result.step_size = 1.0;
    } else {
      result.step_size = bound;
    }
  }
  if (config.max_iters < 0) throw ConfigError("max_iters must be >= 0");

  double previous = -std::numeric_limits<double>::infinity();
  for (long t = 0;; ++t) {
    const ExactEvaluation eval = evaluate_exact(game, policy);
    const BnGradient grad = bn_policy_gradient(game, policy, eval);
    if (!grad.all_finite() || !std::isfinite(eval.value)) {
      throw NumericalError("non-finite gradient at iteration " +
                           std::to_string(t));
    }
    AscentRecord record;
    record.iter = t;
    record.value = eval.value;
    record.grad_norm = grad.sup_norm();
    record.monotone = eval.value >= previous - config.monotonicity_tolerance;
    if (!record.monotone) {
      result.monotone = false;
      ++result.monotonicity_violations;
    }
    previous = eval.value;
    result.trajectory.push_back(record);
    const bool keep_going = !callback || callback(record, policy);
    if (record.grad_norm < config.grad_tolerance) {
      result.converged = true;
      break;
    }
    if (!keep_going || t >= config.max_iters) break;
    policy.add_scaled(grad.tables, result.step_size);
  }
  return result;
}

namespace {
std::string fmt_double(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
}  // namespace

void write_trajectory_csv(std::ostream& out,
                          const std::vector<TrajectoryRow>& rows) {
  out << "iter,value,nash_gap,poa,grad_norm,seed,topology\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << fmt_double(r.value) << ','
        << fmt_double(r.nash_gap) << ',' << fmt_double(r.poa) << ','
        << fmt_double(r.grad_norm) << ',' << r.seed << ',' << r.topology
        << '\n';
  }
}

}  // namespace bnpg
