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

#ifndef BNPG_ENVS_HPP_
#define BNPG_ENVS_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "bnpg/markov_game.hpp"

namespace bnpg::envs {

// Team reward of the coordination game for local states in {0, 1}.
int coordination_reward(std::span<const int> local_states);

struct CoordinationGameSpec {
  int n_agents = 2;
  double epsilon = 0.1;
  double gamma = 0.95;
  int episode_length = 20;
};

// Exact tabular game. States and joint actions are mixed-radix bit vectors
// with agent 0 most significant; mu is uniform.
CooperativeMarkovGame coordination_game(const CoordinationGameSpec& spec);

struct AlohaSpec {
  int rows = 2;
  int cols = 5;
  int max_backlog = 5;
  double new_message_prob = 0.6;
  double reward_success = 0.1;
  double reward_collision = -10.0;
  int episode_length = 25;
  // Penalty charged once per colliding message; otherwise once per step
  // in which any collision happened.
  bool penalty_per_message = true;
  // Colliding messages stay in the backlog unless this is set.
  bool drop_on_collision = false;

  int n_agents() const { return rows * cols; }
};

struct StepInfo {
  int collisions = 0;     // colliding messages
  int messages_sent = 0;  // successful deliveries
};

using JointObservation = std::vector<std::vector<double>>;

struct StepResult {
  JointObservation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Agents on the 4-neighbourhood of `agent` in the rows x cols grid.
std::vector<int> aloha_neighbors(const AlohaSpec& spec, int agent);

struct AlohaTransition {
  std::vector<int> backlogs;  // after deliveries and arrivals
  double reward = 0.0;
  StepInfo info;
};

// Actions: 0 = wait, 1 = send. Sending with an empty backlog is a no-op.
AlohaTransition aloha_step(const AlohaSpec& spec,
                           std::span<const int> backlogs,
                           std::span<const int> actions, std::mt19937_64& rng);

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int n_agents() const = 0;
  virtual std::vector<int> action_counts() const = 0;
  // Width of each agent's local observation vector.
  virtual int obs_dim() const = 0;
  virtual int episode_length() const = 0;
  virtual JointObservation reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const int> joint_action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

// Fully observed coordination game: every agent sees all local states, each
// one-hot encoded, so observations have width 2N.
class CoordinationEnv final : public Environment {
 public:
  explicit CoordinationEnv(CoordinationGameSpec spec);

  int n_agents() const override { return spec_.n_agents; }
  std::vector<int> action_counts() const override;
  int obs_dim() const override { return 2 * spec_.n_agents; }
  int episode_length() const override { return spec_.episode_length; }
  JointObservation reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> joint_action) override;
  std::unique_ptr<Environment> clone() const override;

  const std::vector<int>& local_states() const { return state_; }

 private:
  JointObservation observe() const;

  CoordinationGameSpec spec_;
  std::mt19937_64 rng_;
  std::vector<int> state_;
  int t_ = 0;
};

// Each agent observes a one-hot encoding of its own backlog.
class AlohaEnv final : public Environment {
 public:
  explicit AlohaEnv(AlohaSpec spec);

  int n_agents() const override { return spec_.n_agents(); }
  std::vector<int> action_counts() const override;
  int obs_dim() const override { return spec_.max_backlog + 1; }
  int episode_length() const override { return spec_.episode_length; }
  JointObservation reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> joint_action) override;
  std::unique_ptr<Environment> clone() const override;

  const std::vector<int>& backlogs() const { return backlogs_; }
  const AlohaSpec& spec() const { return spec_; }

 private:
  JointObservation observe() const;

  AlohaSpec spec_;
  std::mt19937_64 rng_;
  std::vector<int> backlogs_;
  int t_ = 0;
};

}  // namespace bnpg::envs

#endif  // BNPG_ENVS_HPP_
