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

#ifndef BNPG_TESTS_ORACLES_HPP_
#define BNPG_TESTS_ORACLES_HPP_

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the library's solvers; they rely on enumeration,
// simulation and plain power series instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "bnpg/bn_policy.hpp"
#include "bnpg/markov_game.hpp"

namespace bnpg::testing {

inline CooperativeMarkovGame random_game(std::uint64_t seed, int n_states,
                                         std::vector<int> counts,
                                         double gamma = 0.9) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const JointActionSpace joint(counts);
  const std::size_t na = joint.size();
  std::vector<double> p(n_states * na * n_states), r(n_states * na), mu(n_states);
  for (std::size_t row = 0; row < n_states * na; ++row) {
    double total = 0.0;
    for (int t = 0; t < n_states; ++t) {
      const double x = -std::log(1.0 - unif(rng));  // Dirichlet(1)
      p[row * n_states + t] = x;
      total += x;
    }
    for (int t = 0; t < n_states; ++t) p[row * n_states + t] /= total;
    r[row] = unif(rng);
  }
  double total = 0.0;
  for (auto& m : mu) total += (m = 0.1 + unif(rng));
  for (auto& m : mu) m /= total;
  return CooperativeMarkovGame(std::move(counts), n_states, std::move(p),
                               std::move(r), gamma, std::move(mu), 0.0, 1.0);
}

inline std::vector<int> random_counts(std::mt19937_64& rng, int n_agents,
                                      int max_count) {
  std::uniform_int_distribution<int> pick(2, max_count);
  std::vector<int> out(n_agents);
  for (auto& c : out) c = pick(rng);
  return out;
}

// V(mu) of a deterministic joint decision rule: iterate V <- r + gamma P V to
// machine precision.
inline double deterministic_value(const CooperativeMarkovGame& g,
                                  const std::vector<std::size_t>& action_of) {
  const int ns = g.n_states();
  std::vector<double> v(ns, 0.0), next(ns);
  const int iters = static_cast<int>(std::ceil(std::log(1e-16) / std::log(std::max(g.gamma(), 1e-3)))) + 10;
  for (int k = 0; k < iters; ++k) {
    for (int s = 0; s < ns; ++s) {
      const auto row = g.transition_row(s, action_of[s]);
      double acc = g.reward(s, action_of[s]);
      for (int t = 0; t < ns; ++t) acc += g.gamma() * row[t] * v[t];
      next[s] = acc;
    }
    v.swap(next);
  }
  double out = 0.0;
  for (int s = 0; s < ns; ++s) out += g.mu()[s] * v[s];
  return out;
}

// max over all |A|^|S| deterministic joint policies.
inline double enumerate_optimal_value(const CooperativeMarkovGame& g) {
  const int ns = g.n_states();
  const std::size_t na = g.n_joint_actions();
  std::vector<std::size_t> rule(ns, 0);
  double best = -INFINITY;
  while (true) {
    best = std::max(best, deterministic_value(g, rule));
    int k = 0;
    while (k < ns && ++rule[k] == na) rule[k++] = 0;
    if (k == ns) break;
  }
  return best;
}

// Joint table with agent i's local policy replaced by the deterministic map
// choice[s * n_configs + config].
inline JointDistributionTable replace_local(const TabularBnPolicy& policy, int agent,
                                            const std::vector<int>& choice) {
  const auto& space = policy.joint_space();
  const int ns = policy.n_states();
  JointDistributionTable out(ns, space.size());
  std::vector<double> local(16);
  for (int s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < space.size(); ++a) {
      double p = 1.0;
      for (int j = 0; j < policy.n_agents(); ++j) {
        const int cfg = policy.parent_config(j, a);
        const int aj = space.digit(a, j);
        if (j == agent) {
          p *= (choice[s * policy.n_parent_configs(j) + cfg] == aj) ? 1.0 : 0.0;
        } else {
          local.resize(space.count(j));
          policy.local_policy_into(j, s, cfg, local);
          p *= local[aj];
        }
      }
      out.at(s, a) = p;
    }
  }
  return out;
}

// V(mu) of a general joint table via fixed-point iteration on Q.
inline double iterate_value(const CooperativeMarkovGame& g,
                            const JointDistributionTable& joint) {
  const int ns = g.n_states();
  const std::size_t na = g.n_joint_actions();
  std::vector<double> v(ns, 0.0), next(ns);
  const int iters = static_cast<int>(std::ceil(std::log(1e-16) / std::log(std::max(g.gamma(), 1e-3)))) + 10;
  for (int k = 0; k < iters; ++k) {
    for (int s = 0; s < ns; ++s) {
      double acc = 0.0;
      for (std::size_t a = 0; a < na; ++a) {
        const double pa = joint.at(s, a);
        if (pa == 0.0) continue;
        const auto row = g.transition_row(s, a);
        double q = g.reward(s, a);
        for (int t = 0; t < ns; ++t) q += g.gamma() * row[t] * v[t];
        acc += pa * q;
      }
      next[s] = acc;
    }
    v.swap(next);
  }
  double out = 0.0;
  for (int s = 0; s < ns; ++s) out += g.mu()[s] * v[s];
  return out;
}

// Best response of agent i by enumerating every deterministic map
// (s, a^{P^i}) -> a^i.
inline double enumerate_best_response(const CooperativeMarkovGame& g,
                                      const TabularBnPolicy& policy, int agent) {
  const int cells = policy.n_states() * policy.n_parent_configs(agent);
  const int k = policy.action_counts()[agent];
  std::vector<int> choice(cells, 0);
  double best = -INFINITY;
  while (true) {
    best = std::max(best, iterate_value(g, replace_local(policy, agent, choice)));
    int c = 0;
    while (c < cells && ++choice[c] == k) choice[c++] = 0;
    if (c == cells) break;
  }
  return best;
}

// Nash gap from the enumerated best responses and the iterated value.
inline double enumerate_nash_gap(const CooperativeMarkovGame& g, const TabularBnPolicy& policy) {
  const double v = iterate_value(g, policy.to_joint_table());
  double gap = 0.0;
  for (int i = 0; i < policy.n_agents(); ++i) {
    gap = std::max(gap, enumerate_best_response(g, policy, i) - v);
  }
  return gap;
}

// Truncated series sum_{t<=T} gamma^t Pr(s_t = s).
inline std::vector<double> truncated_visitation(const CooperativeMarkovGame& g,
                                                const JointDistributionTable& joint) {
  const int ns = g.n_states();
  const std::size_t na = g.n_joint_actions();
  std::vector<double> dist = g.mu(), d(ns, 0.0), next(ns);
  double w = 1.0;
  while (w > 1e-13) {
    for (int s = 0; s < ns; ++s) d[s] += w * dist[s];
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        const double pa = dist[s] * joint.at(s, a);
        if (pa == 0.0) continue;
        const auto row = g.transition_row(s, a);
        for (int t = 0; t < ns; ++t) next[t] += pa * row[t];
      }
    }
    dist.swap(next);
    w *= g.gamma();
    if (g.gamma() == 0.0) break;
  }
  return d;
}

struct MonteCarloEstimate {
  double mean;
  double stderr_;
};

// Discounted return from s0 ~ mu, truncated once gamma^t < 1e-10.
inline MonteCarloEstimate monte_carlo_value(const CooperativeMarkovGame& g,
                                            const JointDistributionTable& joint,
                                            int episodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&](std::span<const double> probs) {
    const double u = unif(rng);
    double cum = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      cum += probs[k];
      if (u < cum) return k;
    }
    return probs.size() - 1;
  };
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    std::size_t s = draw(g.mu());
    double ret = 0.0, w = 1.0;
    while (w > 1e-10) {
      const std::size_t a = draw(joint.row(static_cast<int>(s)));
      ret += w * g.reward(static_cast<int>(s), a);
      s = draw(g.transition_row(static_cast<int>(s), a));
      w *= g.gamma();
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double mean = sum / episodes;
  const double var = sum_sq / episodes - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / episodes)};
}

// Central difference of f around x[k].
inline double central_difference(const std::function<double()>& f, double& x,
                                  double h) {
  const double x0 = x;
  x = x0 + h;
  const double up = f();
  x = x0 - h;
  const double down = f();
  x = x0;
  return (up - down) / (2.0 * h);
}

}  // namespace bnpg::testing

#endif  // BNPG_TESTS_ORACLES_HPP_
