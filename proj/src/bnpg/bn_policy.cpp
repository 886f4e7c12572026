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

#include "bnpg/bn_policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "bnpg/errors.hpp"

namespace bnpg {

std::string topology_name(Topology t) {
  switch (t) {
    case Topology::kUncorrelated:
      return "uncorrelated";
    case Topology::kLineCorrelated:
      return "line";
    case Topology::kFullyCorrelated:
      return "fully";
  }
  return "unknown";
}

Topology parse_topology(const std::string& name) {
  if (name == "uncorrelated") return Topology::kUncorrelated;
  if (name == "line" || name == "line_correlated") {
    return Topology::kLineCorrelated;
  }
  if (name == "fully" || name == "fully_correlated") {
    return Topology::kFullyCorrelated;
  }
  throw ConfigError("unknown topology '" + name + "'");
}

Dag::Dag(int n_agents)
    : n_(n_agents),
      adjacency_(static_cast<std::size_t>(n_agents) * n_agents, 0) {
  if (n_agents <= 0) throw DimensionError("a DAG needs at least one agent");
  index();
}

Dag Dag::from_adjacency(int n_agents, std::vector<std::uint8_t> adjacency) {
  if (n_agents <= 0) throw DimensionError("a DAG needs at least one agent");
  if (adjacency.size() != static_cast<std::size_t>(n_agents) * n_agents) {
    throw DimensionError("adjacency must be n x n");
  }
  for (auto& e : adjacency) {
    if (e > 1) throw std::invalid_argument("adjacency entries must be 0/1");
  }
  Dag dag;
  dag.n_ = n_agents;
  dag.adjacency_ = std::move(adjacency);
  dag.index();
  return dag;
}

Dag Dag::from_order_and_upper(std::span<const int> order,
                              std::span<const std::uint8_t> upper) {
  const int n = static_cast<int>(order.size());
  if (n == 0) throw DimensionError("empty ordering");
  if (upper.size() != static_cast<std::size_t>(n) * n) {
    throw DimensionError("upper matrix must be n x n");
  }
  std::vector<int> seen(n, 0);
  for (int a : order) {
    if (a < 0 || a >= n || seen[a]++) {
      throw std::invalid_argument("ordering is not a permutation");
    }
  }
  std::vector<std::uint8_t> adjacency(static_cast<std::size_t>(n) * n, 0);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      const auto e = upper[k * n + l];
      if (e == 0) continue;
      if (l <= k || e != 1) {
        throw std::invalid_argument(
            "edge matrix must be strictly upper triangular 0/1");
      }
      adjacency[order[k] * n + order[l]] = 1;
    }
  }
  return from_adjacency(n, std::move(adjacency));
}

Dag Dag::fixed(Topology kind, int n_agents) {
  std::vector<std::uint8_t> adjacency(
      static_cast<std::size_t>(n_agents) * n_agents, 0);
  for (int j = 0; j < n_agents; ++j) {
    for (int i = j + 1; i < n_agents; ++i) {
      const bool edge = kind == Topology::kFullyCorrelated ||
                        (kind == Topology::kLineCorrelated && i == j + 1);
      if (edge) adjacency[j * n_agents + i] = 1;
    }
  }
  return from_adjacency(n_agents, std::move(adjacency));
}

void Dag::index() {
  parents_.assign(n_, {});
  edge_count_ = 0;
  std::vector<int> indegree(n_, 0);
  for (int j = 0; j < n_; ++j) {
    if (adjacency_[j * n_ + j]) throw std::invalid_argument("self loop");
    for (int i = 0; i < n_; ++i) {
      if (adjacency_[j * n_ + i]) {
        parents_[i].push_back(j);
        ++indegree[i];
        ++edge_count_;
      }
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n_; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  topo_order_.clear();
  while (!ready.empty()) {
    const int j = ready.top();
    ready.pop();
    topo_order_.push_back(j);
    for (int i = 0; i < n_; ++i) {
      if (adjacency_[j * n_ + i] && --indegree[i] == 0) ready.push(i);
    }
  }
  if (static_cast<int>(topo_order_.size()) != n_) {
    throw std::invalid_argument("adjacency contains a cycle");
  }
}

std::vector<std::uint8_t> Dag::upper_in_topo_order() const {
  std::vector<std::uint8_t> upper(static_cast<std::size_t>(n_) * n_, 0);
  for (int k = 0; k < n_; ++k) {
    for (int l = k + 1; l < n_; ++l) {
      upper[k * n_ + l] = adjacency_[topo_order_[k] * n_ + topo_order_[l]];
    }
  }
  return upper;
}

TabularBnPolicy::TabularBnPolicy(Dag dag, std::vector<int> action_counts,
                                 int n_states)
    : dag_(std::move(dag)), joint_(std::move(action_counts)), n_states_(n_states) {
  if (joint_.n_agents() != dag_.n_agents()) {
    throw DimensionError("DAG and action counts disagree on the agent count");
  }
  if (n_states <= 0) throw DimensionError("n_states must be positive");
  const int n = n_agents();
  n_configs_.resize(n);
  parent_strides_.resize(n);
  theta_.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& parents = dag_.parents(i);
    std::vector<int> strides(parents.size());
    int configs = 1;
    for (int k = static_cast<int>(parents.size()) - 1; k >= 0; --k) {
      strides[k] = configs;
      configs *= joint_.count(parents[k]);
    }
    n_configs_[i] = configs;
    parent_strides_[i] = std::move(strides);
    theta_[i].assign(static_cast<std::size_t>(n_states) * configs *
                         joint_.count(i),
                     0.0);
  }
}

TabularBnPolicy TabularBnPolicy::gaussian(Dag dag,
                                          std::vector<int> action_counts,
                                          int n_states, std::uint64_t seed,
                                          double sigma) {
  TabularBnPolicy policy(std::move(dag), std::move(action_counts), n_states);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& table : policy.theta_) {
    for (auto& x : table) x = normal(rng);
  }
  return policy;
}

int TabularBnPolicy::parent_config(int agent, std::size_t joint_index) const {
  const auto& parents = dag_.parents(agent);
  const auto& strides = parent_strides_[agent];
  int config = 0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    config += joint_.digit(joint_index, parents[k]) * strides[k];
  }
  return config;
}

int TabularBnPolicy::parent_config_of(
    int agent, std::span<const int> parent_actions) const {
  const auto& parents = dag_.parents(agent);
  if (parent_actions.size() != parents.size()) {
    throw DimensionError("agent " + std::to_string(agent) + " has " +
                         std::to_string(parents.size()) + " parents, got " +
                         std::to_string(parent_actions.size()) + " actions");
  }
  int config = 0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const int a = parent_actions[k];
    if (a < 0 || a >= joint_.count(parents[k])) {
      throw DimensionError("parent action out of range");
    }
    config += a * parent_strides_[agent][k];
  }
  return config;
}

std::vector<int> TabularBnPolicy::parent_actions_of(int agent,
                                                    int config) const {
  const auto& parents = dag_.parents(agent);
  std::vector<int> out(parents.size());
  for (std::size_t k = 0; k < parents.size(); ++k) {
    out[k] = (config / parent_strides_[agent][k]) % joint_.count(parents[k]);
  }
  return out;
}

void TabularBnPolicy::local_policy_into(int agent, int s, int config,
                                        std::span<double> out) const {
  const int na = joint_.count(agent);
  const double* logits = theta_[agent].data() + theta_offset(agent, s, config);
  double top = logits[0];
  for (int a = 1; a < na; ++a) top = std::max(top, logits[a]);
  double total = 0.0;
  for (int a = 0; a < na; ++a) {
    out[a] = std::exp(logits[a] - top);
    total += out[a];
  }
  for (int a = 0; a < na; ++a) out[a] /= total;
}

void TabularBnPolicy::check_state(int s) const {
  if (s < 0 || s >= n_states_) {
    throw DimensionError("state " + std::to_string(s) + " out of range");
  }
}

std::vector<double> TabularBnPolicy::local_policy(
    int agent, int s, std::span<const int> parent_actions) const {
  if (agent < 0 || agent >= n_agents()) throw DimensionError("bad agent index");
  check_state(s);
  const int config = parent_config_of(agent, parent_actions);
  std::vector<double> out(joint_.count(agent));
  local_policy_into(agent, s, config, out);
  return out;
}

double TabularBnPolicy::joint_probability(int s,
                                          std::size_t joint_index) const {
  check_state(s);
  if (joint_index >= joint_.size()) {
    throw DimensionError("joint action index out of range");
  }
  double p = 1.0;
  std::vector<double> local;
  for (int i : dag_.topo_order()) {
    local.resize(joint_.count(i));
    local_policy_into(i, s, parent_config(i, joint_index), local);
    p *= local[joint_.digit(joint_index, i)];
  }
  return p;
}

double TabularBnPolicy::joint_probability(
    int s, std::span<const int> joint_action) const {
  return joint_probability(s, joint_.encode(joint_action));
}

JointDistributionTable TabularBnPolicy::to_joint_table(
    std::size_t enumeration_limit) const {
  const std::size_t na = joint_.size();
  if (na > enumeration_limit) {
    throw EnumerationLimitError(
        "joint action space of size " + std::to_string(na) +
        " exceeds the enumeration limit " + std::to_string(enumeration_limit));
  }
  JointDistributionTable table(n_states_, na);
  const int n = n_agents();
  // Local distributions for every (agent, config) of the current state.
  std::vector<std::vector<double>> local(n);
  for (int s = 0; s < n_states_; ++s) {
    for (int i = 0; i < n; ++i) {
      const int k = joint_.count(i);
      local[i].resize(static_cast<std::size_t>(n_configs_[i]) * k);
      for (int c = 0; c < n_configs_[i]; ++c) {
        local_policy_into(i, s, c, std::span<double>(local[i]).subspan(c * k, k));
      }
    }
    auto row = table.row(s);
    for (std::size_t a = 0; a < na; ++a) {
      double p = 1.0;
      for (int i = 0; i < n; ++i) {
        p *= local[i][static_cast<std::size_t>(parent_config(i, a)) *
                          joint_.count(i) +
                      joint_.digit(a, i)];
      }
      row[a] = p;
    }
  }
  return table;
}

std::vector<int> TabularBnPolicy::sample_joint(int s,
                                               std::mt19937_64& rng) const {
  check_state(s);
  const int n = n_agents();
  std::vector<int> actions(n, 0);
  std::vector<double> local;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i : dag_.topo_order()) {
    const auto& parents = dag_.parents(i);
    int config = 0;
    for (std::size_t k = 0; k < parents.size(); ++k) {
      config += actions[parents[k]] * parent_strides_[i][k];
    }
    local.resize(joint_.count(i));
    local_policy_into(i, s, config, local);
    double u = unif(rng);
    int pick = static_cast<int>(local.size()) - 1;
    for (int a = 0; a < static_cast<int>(local.size()); ++a) {
      u -= local[a];
      if (u < 0.0) {
        pick = a;
        break;
      }
    }
    actions[i] = pick;
  }
  return actions;
}

std::vector<int> TabularBnPolicy::sample_joint(int s,
                                               std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  return sample_joint(s, rng);
}

void TabularBnPolicy::add_scaled(
    const std::vector<std::vector<double>>& direction, double step) {
  if (direction.size() != theta_.size()) {
    throw DimensionError("direction has wrong number of agents");
  }
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    if (direction[i].size() != theta_[i].size()) {
      throw DimensionError("direction table has wrong shape");
    }
    for (std::size_t k = 0; k < theta_[i].size(); ++k) {
      theta_[i][k] += step * direction[i][k];
    }
  }
}

std::vector<double> parent_marginal(const TabularBnPolicy& policy,
                                    const JointDistributionTable& joint,
                                    int agent, int s) {
  if (joint.n_joint() != policy.joint_space().size() ||
      joint.n_states() != policy.n_states()) {
    throw DimensionError("joint table does not match the policy");
  }
  std::vector<double> marginal(policy.n_parent_configs(agent), 0.0);
  auto row = joint.row(s);
  for (std::size_t a = 0; a < row.size(); ++a) {
    marginal[policy.parent_config(agent, a)] += row[a];
  }
  return marginal;
}

nlohmann::json policy_to_json(const TabularBnPolicy& policy) {
  nlohmann::json doc;
  const int n = policy.n_agents();
  doc["n_agents"] = n;
  doc["n_states"] = policy.n_states();
  doc["action_counts"] = policy.action_counts();
  doc["adjacency"] = policy.dag().adjacency();
  nlohmann::json layout = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    std::vector<int> radix;
    for (int p : policy.dag().parents(i)) {
      radix.push_back(policy.action_counts()[p]);
    }
    layout.push_back({{"agent", i},
                      {"parents", policy.dag().parents(i)},
                      {"parent_radix", radix},
                      {"shape",
                       {policy.n_states(), policy.n_parent_configs(i),
                        policy.action_counts()[i]}}});
  }
  doc["layout"] = std::move(layout);
  doc["layout_order"] = "state, parent configuration (first parent most "
                        "significant), own action";
  doc["theta"] = policy.theta();
  return doc;
}

TabularBnPolicy policy_from_json(const nlohmann::json& doc) {
  try {
    const int n = doc.at("n_agents").get<int>();
    auto adjacency = doc.at("adjacency").get<std::vector<std::uint8_t>>();
    auto counts = doc.at("action_counts").get<std::vector<int>>();
    const int n_states = doc.at("n_states").get<int>();
    TabularBnPolicy policy(Dag::from_adjacency(n, std::move(adjacency)),
                           std::move(counts), n_states);
    auto theta = doc.at("theta").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(theta.size()) != n) {
      throw DimensionError("theta has wrong number of agents");
    }
    for (int i = 0; i < n; ++i) {
      if (theta[i].size() != policy.theta(i).size()) {
        throw DimensionError("theta table for agent " + std::to_string(i) +
                             " has wrong size");
      }
      policy.theta(i) = std::move(theta[i]);
    }
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed policy document: ") +
                                e.what());
  }
}

}  // namespace bnpg
