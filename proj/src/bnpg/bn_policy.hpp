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

#ifndef BNPG_BN_POLICY_HPP_
#define BNPG_BN_POLICY_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bnpg/markov_game.hpp"
#include "json.hpp"

namespace bnpg {

enum class Topology { kUncorrelated, kLineCorrelated, kFullyCorrelated };

std::string topology_name(Topology t);
// Accepts "uncorrelated", "line", "fully" (and the *_correlated spellings).
Topology parse_topology(const std::string& name);

// DAG over agents. adjacency[j * n + i] == 1 iff j is a parent of i.
class Dag {
 public:
  Dag() = default;
  explicit Dag(int n_agents);  // empty graph

  static Dag from_adjacency(int n_agents, std::vector<std::uint8_t> adjacency);
  // order[k] is the agent at topological position k; upper is an n x n
  // strictly upper triangular 0/1 matrix over positions.
  static Dag from_order_and_upper(std::span<const int> order,
                                  std::span<const std::uint8_t> upper);
  static Dag fixed(Topology kind, int n_agents);

  int n_agents() const { return n_; }
  bool has_edge(int from, int to) const { return adjacency_[from * n_ + to] != 0; }
  const std::vector<std::uint8_t>& adjacency() const { return adjacency_; }
  // Parents sorted by agent index.
  const std::vector<int>& parents(int agent) const { return parents_[agent]; }
  // Kahn's order, smallest ready agent first.
  const std::vector<int>& topo_order() const { return topo_order_; }
  int edge_count() const { return edge_count_; }

  // Upper-triangular edge matrix over topo_order() positions.
  std::vector<std::uint8_t> upper_in_topo_order() const;

  bool operator==(const Dag& other) const {
    return n_ == other.n_ && adjacency_ == other.adjacency_;
  }

 private:
  void index();

  int n_ = 0;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::vector<int>> parents_;
  std::vector<int> topo_order_;
  int edge_count_ = 0;
};

// Tabular softmax BN policy: agent i keeps logits theta^i[s][a^{P^i}][a^i].
// The parent configuration is mixed-radix over P^i sorted by agent index,
// first parent most significant.
class TabularBnPolicy {
 public:
  TabularBnPolicy(Dag dag, std::vector<int> action_counts, int n_states);

  static TabularBnPolicy gaussian(Dag dag, std::vector<int> action_counts,
                                  int n_states, std::uint64_t seed,
                                  double sigma);

  const Dag& dag() const { return dag_; }
  int n_agents() const { return dag_.n_agents(); }
  int n_states() const { return n_states_; }
  const std::vector<int>& action_counts() const { return joint_.counts(); }
  const JointActionSpace& joint_space() const { return joint_; }

  int n_parent_configs(int agent) const { return n_configs_[agent]; }
  // Configuration index of agent's parents inside a joint action index.
  int parent_config(int agent, std::size_t joint_index) const;
  // Configuration index from parent actions ordered like dag().parents().
  int parent_config_of(int agent, std::span<const int> parent_actions) const;
  std::vector<int> parent_actions_of(int agent, int config) const;

  std::vector<double>& theta(int agent) { return theta_[agent]; }
  const std::vector<double>& theta(int agent) const { return theta_[agent]; }
  const std::vector<std::vector<double>>& theta() const { return theta_; }
  std::size_t theta_offset(int agent, int s, int config) const {
    return (static_cast<std::size_t>(s) * n_configs_[agent] + config) *
           joint_.count(agent);
  }

  void local_policy_into(int agent, int s, int config,
                         std::span<double> out) const;
  // Softmax over a^i; validates indices.
  std::vector<double> local_policy(int agent, int s,
                                   std::span<const int> parent_actions) const;

  double joint_probability(int s, std::size_t joint_index) const;
  double joint_probability(int s, std::span<const int> joint_action) const;

  JointDistributionTable to_joint_table(
      std::size_t enumeration_limit = std::size_t{1} << 20) const;

  std::vector<int> sample_joint(int s, std::uint64_t seed) const;
  std::vector<int> sample_joint(int s, std::mt19937_64& rng) const;

  // theta += step * direction, direction shaped like theta().
  void add_scaled(const std::vector<std::vector<double>>& direction,
                  double step);

 private:
  void check_state(int s) const;

  Dag dag_;
  JointActionSpace joint_;
  int n_states_;
  std::vector<int> n_configs_;
  // parent_strides_[i][k]: weight of the k-th parent's action in the config.
  std::vector<std::vector<int>> parent_strides_;
  std::vector<std::vector<double>> theta_;
};

// sum_{a^{-P^i}} pi(a^{-P^i}, a^{P^i} | s) for every parent configuration.
std::vector<double> parent_marginal(const TabularBnPolicy& policy,
                                    const JointDistributionTable& joint,
                                    int agent, int s);

nlohmann::json policy_to_json(const TabularBnPolicy& policy);
TabularBnPolicy policy_from_json(const nlohmann::json& doc);

}  // namespace bnpg

#endif  // BNPG_BN_POLICY_HPP_
