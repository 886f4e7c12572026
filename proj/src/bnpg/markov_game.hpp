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

#ifndef BNPG_MARKOV_GAME_HPP_
#define BNPG_MARKOV_GAME_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace bnpg {

// Mixed-radix codec for joint actions. Agent 0 is the most significant digit,
// so for counts (2, 3) the joint action (a0, a1) has index a0 * 3 + a1.
class JointActionSpace {
 public:
  JointActionSpace() = default;
  explicit JointActionSpace(std::vector<int> counts);

  int n_agents() const { return static_cast<int>(counts_.size()); }
  std::size_t size() const { return size_; }
  const std::vector<int>& counts() const { return counts_; }
  int count(int agent) const { return counts_[agent]; }

  std::size_t encode(std::span<const int> actions) const;
  std::vector<int> decode(std::size_t index) const;
  void decode_into(std::size_t index, std::span<int> out) const;
  // Digit of `agent` inside a joint index without a full decode.
  int digit(std::size_t index, int agent) const {
    return static_cast<int>((index / strides_[agent]) % counts_[agent]);
  }
  std::size_t stride(int agent) const { return strides_[agent]; }

 private:
  std::vector<int> counts_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

// Finite cooperative Markov game with a shared reward r(s, a).
// Tables are dense: transition is [s][a][s'] row-major, reward is [s][a].
class CooperativeMarkovGame {
 public:
  CooperativeMarkovGame(std::vector<int> action_counts, int n_states,
                        std::vector<double> transition,
                        std::vector<double> reward, double gamma,
                        std::vector<double> mu);
  // Declared reward bounds; must contain every reward entry.
  CooperativeMarkovGame(std::vector<int> action_counts, int n_states,
                        std::vector<double> transition,
                        std::vector<double> reward, double gamma,
                        std::vector<double> mu, double r_min, double r_max);

  int n_agents() const { return actions_.n_agents(); }
  int n_states() const { return n_states_; }
  std::size_t n_joint_actions() const { return actions_.size(); }
  const JointActionSpace& actions() const { return actions_; }
  const std::vector<int>& action_counts() const { return actions_.counts(); }
  double gamma() const { return gamma_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  const std::vector<double>& mu() const { return mu_; }

  double reward(int s, std::size_t a) const {
    return reward_[static_cast<std::size_t>(s) * actions_.size() + a];
  }
  // Row P(. | s, a) of length n_states().
  std::span<const double> transition_row(int s, std::size_t a) const {
    return {transition_.data() +
                (static_cast<std::size_t>(s) * actions_.size() + a) * n_states_,
            static_cast<std::size_t>(n_states_)};
  }
  double transition(int s, std::size_t a, int next) const {
    return transition_row(s, a)[next];
  }
  const std::vector<double>& transition_table() const { return transition_; }
  const std::vector<double>& reward_table() const { return reward_; }

 private:
  void validate() const;

  JointActionSpace actions_;
  int n_states_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  double gamma_;
  std::vector<double> mu_;
  double r_min_;
  double r_max_;
};

// pi(a | s) for every state, rows of length n_joint.
class JointDistributionTable {
 public:
  JointDistributionTable(int n_states, std::size_t n_joint);
  JointDistributionTable(int n_states, std::size_t n_joint,
                         std::vector<double> data);

  static JointDistributionTable uniform(int n_states, std::size_t n_joint);

  int n_states() const { return n_states_; }
  std::size_t n_joint() const { return n_joint_; }
  double at(int s, std::size_t a) const { return data_[s * n_joint_ + a]; }
  double& at(int s, std::size_t a) { return data_[s * n_joint_ + a]; }
  std::span<const double> row(int s) const {
    return {data_.data() + s * n_joint_, n_joint_};
  }
  std::span<double> row(int s) { return {data_.data() + s * n_joint_, n_joint_}; }
  const std::vector<double>& data() const { return data_; }

  // Throws NumericalError unless every row is a distribution within `tol`.
  void check_normalized(double tol = 1e-10) const;

 private:
  int n_states_;
  std::size_t n_joint_;
  std::vector<double> data_;
};

struct ValueTables {
  std::vector<double> v;  // V(s)
  std::vector<double> q;  // Q(s, a), row-major [s][a]
  std::size_t n_joint = 0;

  double q_at(int s, std::size_t a) const { return q[s * n_joint + a]; }
};

// Unnormalized discounted visitation: sums to 1 / (1 - gamma).
struct VisitationTable {
  std::vector<double> d;
};

ValueTables evaluate_policy(const CooperativeMarkovGame& game,
                            const JointDistributionTable& joint);
VisitationTable visitation(const CooperativeMarkovGame& game,
                           const JointDistributionTable& joint);
double value_from_start(const CooperativeMarkovGame& game,
                        const JointDistributionTable& joint);
// Sum of mu(s) V(s) for an already evaluated policy.
double value_from_start(const CooperativeMarkovGame& game,
                        const ValueTables& values);

// Max-norm residual of Q = r + gamma P V and V = sum_a pi Q.
double bellman_residual(const CooperativeMarkovGame& game,
                        const JointDistributionTable& joint,
                        const ValueTables& values);

nlohmann::json game_to_json(const CooperativeMarkovGame& game);
CooperativeMarkovGame game_from_json(const nlohmann::json& doc);

}  // namespace bnpg

#endif  // BNPG_MARKOV_GAME_HPP_
