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

#include "bnpg/envs.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "bnpg/errors.hpp"

namespace bnpg::envs {

int coordination_reward(std::span<const int> local_states) {
  const int n = static_cast<int>(local_states.size());
  const int bound = (n == 2 || n == 3) ? 1 : 2;
  const int zeros = static_cast<int>(
      std::count(local_states.begin(), local_states.end(), 0));
  const int ones = n - zeros;
  if (std::abs(zeros - ones) <= bound) return zeros < ones ? 1 : 0;
  if (zeros > ones) return 3;
  return 2;
}

CooperativeMarkovGame coordination_game(const CoordinationGameSpec& spec) {
  const int n = spec.n_agents;
  if (n < 2 || n > 16) throw ConfigError("coordination game needs 2..16 agents");
  if (!(spec.epsilon >= 0.0 && spec.epsilon <= 1.0)) {
    throw ConfigError("epsilon must lie in [0, 1]");
  }
  const JointActionSpace bits(std::vector<int>(n, 2));
  const int ns = static_cast<int>(bits.size());
  const std::size_t na = bits.size();
  // The dense table holds 8^N entries; N = 8 is 128 MiB.
  if (n > 8) {
    throw EnumerationLimitError("tabular coordination game with " + std::to_string(n) +
                                " agents needs 8^N transition entries; limit is N = 8");
  }
  std::vector<double> transition(static_cast<std::size_t>(ns) * na * ns);
  std::vector<double> reward(static_cast<std::size_t>(ns) * na);
  std::vector<int> local(n);
  for (int s = 0; s < ns; ++s) {
    bits.decode_into(s, local);
    const double r = coordination_reward(local);
    for (std::size_t a = 0; a < na; ++a) {
      reward[s * na + a] = r;
      double* row = transition.data() + (s * na + a) * ns;
      for (int t = 0; t < ns; ++t) {
        double p = 1.0;
        for (int i = 0; i < n; ++i) {
          // P(s'^i = 0 | a^i = 0) = 1 - eps, P(s'^i = 0 | a^i = 1) = eps.
          const double p_zero =
              bits.digit(a, i) == 0 ? 1.0 - spec.epsilon : spec.epsilon;
          p *= bits.digit(t, i) == 0 ? p_zero : 1.0 - p_zero;
        }
        row[t] = p;
      }
    }
  }
  std::vector<double> mu(ns, 1.0 / ns);
  return {std::vector<int>(n, 2), ns, std::move(transition), std::move(reward),
          spec.gamma, std::move(mu), 0.0, 3.0};
}

std::vector<int> aloha_neighbors(const AlohaSpec& spec, int agent) {
  const int r = agent / spec.cols;
  const int c = agent % spec.cols;
  std::vector<int> out;
  if (r > 0) out.push_back(agent - spec.cols);
  if (c > 0) out.push_back(agent - 1);
  if (c + 1 < spec.cols) out.push_back(agent + 1);
  if (r + 1 < spec.rows) out.push_back(agent + spec.cols);
  return out;
}

AlohaTransition aloha_step(const AlohaSpec& spec,
                           std::span<const int> backlogs,
                           std::span<const int> actions,
                           std::mt19937_64& rng) {
  const int n = spec.n_agents();
  if (static_cast<int>(actions.size()) != n ||
      static_cast<int>(backlogs.size()) != n) {
    throw DimensionError("aloha step expects " + std::to_string(n) +
                         " actions and backlogs");
  }
  std::vector<std::uint8_t> sending(n, 0);
  for (int i = 0; i < n; ++i) {
    if (actions[i] != 0 && actions[i] != 1) {
      throw DimensionError("aloha actions must be 0 (wait) or 1 (send)");
    }
    if (backlogs[i] < 0 || backlogs[i] > spec.max_backlog) {
      throw DimensionError("backlog out of range");
    }
    sending[i] = actions[i] == 1 && backlogs[i] > 0;
  }
  AlohaTransition out;
  out.backlogs.assign(backlogs.begin(), backlogs.end());
  for (int i = 0; i < n; ++i) {
    if (!sending[i]) continue;
    bool collided = false;
    for (int j : aloha_neighbors(spec, i)) collided = collided || sending[j];
    if (collided) {
      ++out.info.collisions;
      if (spec.drop_on_collision) --out.backlogs[i];
    } else {
      ++out.info.messages_sent;
      --out.backlogs[i];
    }
  }
  out.reward = spec.reward_success * out.info.messages_sent;
  if (out.info.collisions > 0) {
    out.reward += spec.reward_collision *
                  (spec.penalty_per_message ? out.info.collisions : 1);
  }
  std::bernoulli_distribution arrival(spec.new_message_prob);
  for (int i = 0; i < n; ++i) {
    if (arrival(rng)) {
      out.backlogs[i] = std::min(out.backlogs[i] + 1, spec.max_backlog);
    }
  }
  return out;
}

CoordinationEnv::CoordinationEnv(CoordinationGameSpec spec)
    : spec_(spec), state_(spec.n_agents, 0) {
  if (spec_.n_agents < 2) throw ConfigError("coordination game needs >= 2 agents");
  if (spec_.episode_length <= 0) throw ConfigError("episode_length must be > 0");
}

std::vector<int> CoordinationEnv::action_counts() const {
  return std::vector<int>(spec_.n_agents, 2);
}

JointObservation CoordinationEnv::observe() const {
  std::vector<double> code(2 * state_.size(), 0.0);
  for (std::size_t i = 0; i < state_.size(); ++i) code[2 * i + state_[i]] = 1.0;
  return JointObservation(spec_.n_agents, code);
}

JointObservation CoordinationEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::bernoulli_distribution coin(0.5);
  for (auto& s : state_) s = coin(rng_) ? 1 : 0;
  t_ = 0;
  return observe();
}

StepResult CoordinationEnv::step(std::span<const int> joint_action) {
  if (static_cast<int>(joint_action.size()) != spec_.n_agents) {
    throw DimensionError("wrong number of actions");
  }
  StepResult out;
  out.reward = coordination_reward(state_);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < spec_.n_agents; ++i) {
    const int a = joint_action[i];
    if (a != 0 && a != 1) throw DimensionError("actions must be 0 or 1");
    const double p_zero = a == 0 ? 1.0 - spec_.epsilon : spec_.epsilon;
    state_[i] = unif(rng_) < p_zero ? 0 : 1;
  }
  ++t_;
  out.done = t_ >= spec_.episode_length;
  out.observation = observe();
  return out;
}

std::unique_ptr<Environment> CoordinationEnv::clone() const {
  return std::make_unique<CoordinationEnv>(*this);
}

AlohaEnv::AlohaEnv(AlohaSpec spec) : spec_(spec) {
  if (spec_.rows <= 0 || spec_.cols <= 0) throw ConfigError("empty aloha grid");
  if (spec_.max_backlog <= 0) throw ConfigError("max_backlog must be positive");
  if (spec_.episode_length <= 0) throw ConfigError("episode_length must be > 0");
  backlogs_.assign(spec_.n_agents(), 0);
}

std::vector<int> AlohaEnv::action_counts() const {
  return std::vector<int>(spec_.n_agents(), 2);
}

JointObservation AlohaEnv::observe() const {
  JointObservation obs(spec_.n_agents(),
                       std::vector<double>(spec_.max_backlog + 1, 0.0));
  for (int i = 0; i < spec_.n_agents(); ++i) obs[i][backlogs_[i]] = 1.0;
  return obs;
}

JointObservation AlohaEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::bernoulli_distribution arrival(spec_.new_message_prob);
  for (auto& b : backlogs_) b = arrival(rng_) ? 1 : 0;
  t_ = 0;
  return observe();
}

StepResult AlohaEnv::step(std::span<const int> joint_action) {
  AlohaTransition tr = aloha_step(spec_, backlogs_, joint_action, rng_);
  backlogs_ = std::move(tr.backlogs);
  ++t_;
  StepResult out;
  out.reward = tr.reward;
  out.info = tr.info;
  out.done = t_ >= spec_.episode_length;
  out.observation = observe();
  return out;
}

std::unique_ptr<Environment> AlohaEnv::clone() const {
  return std::make_unique<AlohaEnv>(*this);
}

}  // namespace bnpg::envs
