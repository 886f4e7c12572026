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

#include "bnpg/markov_game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "bnpg/errors.hpp"

namespace bnpg {
namespace {

constexpr double kStochasticTol = 1e-12;
constexpr int kDirectSolveMaxStates = 4096;

std::string where(int s, std::size_t a) {
  return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

// Row-stochastic P_pi and expected reward r_pi under a joint policy.
void induced_chain(const CooperativeMarkovGame& game,
                   const JointDistributionTable& joint, Eigen::MatrixXd& p_pi,
                   Eigen::VectorXd& r_pi) {
  const int ns = game.n_states();
  const std::size_t na = game.n_joint_actions();
  p_pi = Eigen::MatrixXd::Zero(ns, ns);
  r_pi = Eigen::VectorXd::Zero(ns);
  for (int s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const double w = joint.at(s, a);
      if (w == 0.0) continue;
      r_pi(s) += w * game.reward(s, a);
      auto row = game.transition_row(s, a);
      for (int t = 0; t < ns; ++t) p_pi(s, t) += w * row[t];
    }
  }
}

void check_dims(const CooperativeMarkovGame& game,
                const JointDistributionTable& joint) {
  if (joint.n_states() != game.n_states() ||
      joint.n_joint() != game.n_joint_actions()) {
    throw DimensionError("joint table is " + std::to_string(joint.n_states()) +
                         "x" + std::to_string(joint.n_joint()) +
                         " but game needs " + std::to_string(game.n_states()) +
                         "x" + std::to_string(game.n_joint_actions()));
  }
}

// Solves x = b + gamma * M x, i.e. (I - gamma M) x = b.
Eigen::VectorXd solve_discounted(const Eigen::MatrixXd& m,
                                 const Eigen::VectorXd& b, double gamma) {
  const auto n = b.size();
  if (n <= kDirectSolveMaxStates) {
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - gamma * m;
    return lhs.partialPivLu().solve(b);
  }
  // Fixed-point iteration; contraction factor gamma.
  Eigen::VectorXd x = b;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd next = b + gamma * (m * x);
    const double diff = (next - x).cwiseAbs().maxCoeff();
    x.swap(next);
    if (diff < 1e-13 * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
  }
  return x;
}

}  // namespace

JointActionSpace::JointActionSpace(std::vector<int> counts)
    : counts_(std::move(counts)), strides_(counts_.size()) {
  if (counts_.empty()) throw DimensionError("at least one agent is required");
  for (int c : counts_) {
    if (c <= 0) throw DimensionError("action counts must be positive");
  }
  size_ = 1;
  for (int i = n_agents() - 1; i >= 0; --i) {
    strides_[i] = size_;
    size_ *= static_cast<std::size_t>(counts_[i]);
  }
}

std::size_t JointActionSpace::encode(std::span<const int> actions) const {
  if (actions.size() != counts_.size()) {
    throw DimensionError("joint action has wrong number of agents");
  }
  std::size_t index = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= counts_[i]) {
      throw DimensionError("action " + std::to_string(actions[i]) +
                           " out of range for agent " + std::to_string(i));
    }
    index += static_cast<std::size_t>(actions[i]) * strides_[i];
  }
  return index;
}

void JointActionSpace::decode_into(std::size_t index,
                                   std::span<int> out) const {
  for (int i = 0; i < n_agents(); ++i) out[i] = digit(index, i);
}

std::vector<int> JointActionSpace::decode(std::size_t index) const {
  if (index >= size_) throw DimensionError("joint action index out of range");
  std::vector<int> out(counts_.size());
  decode_into(index, out);
  return out;
}

CooperativeMarkovGame::CooperativeMarkovGame(std::vector<int> action_counts,
                                             int n_states,
                                             std::vector<double> transition,
                                             std::vector<double> reward,
                                             double gamma,
                                             std::vector<double> mu)
    : actions_(std::move(action_counts)),
      n_states_(n_states),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      mu_(std::move(mu)) {
  if (reward_.empty()) throw DimensionError("reward table is empty");
  auto [lo, hi] = std::minmax_element(reward_.begin(), reward_.end());
  r_min_ = *lo;
  r_max_ = *hi;
  validate();
}

CooperativeMarkovGame::CooperativeMarkovGame(
    std::vector<int> action_counts, int n_states,
    std::vector<double> transition, std::vector<double> reward, double gamma,
    std::vector<double> mu, double r_min, double r_max)
    : actions_(std::move(action_counts)),
      n_states_(n_states),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      mu_(std::move(mu)),
      r_min_(r_min),
      r_max_(r_max) {
  validate();
}

void CooperativeMarkovGame::validate() const {
  if (n_states_ <= 0) throw DimensionError("n_states must be positive");
  const std::size_t na = actions_.size();
  const std::size_t ns = static_cast<std::size_t>(n_states_);
  if (transition_.size() != ns * na * ns) {
    throw DimensionError("transition table must have S*A*S = " +
                         std::to_string(ns * na * ns) + " entries, got " +
                         std::to_string(transition_.size()));
  }
  if (reward_.size() != ns * na) {
    throw DimensionError("reward table must have S*A entries");
  }
  if (mu_.size() != ns) throw DimensionError("mu must have S entries");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
    throw std::invalid_argument("discount must lie in [0, 1)");
  }
  if (!(r_min_ <= r_max_)) throw std::invalid_argument("r_min > r_max");
  for (int s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const double r = reward(s, a);
      if (!std::isfinite(r) || r < r_min_ || r > r_max_) {
        throw std::invalid_argument("reward " + where(s, a) +
                                    " outside declared [r_min, r_max]");
      }
      double total = 0.0;
      for (double p : transition_row(s, a)) {
        if (!(p >= 0.0)) {
          throw std::invalid_argument("negative transition entry " +
                                      where(s, a));
        }
        total += p;
      }
      if (std::abs(total - 1.0) > kStochasticTol) {
        throw std::invalid_argument("transition row " + where(s, a) +
                                    " does not sum to 1");
      }
    }
  }
  double total = 0.0;
  for (double m : mu_) {
    if (!(m >= 0.0)) throw std::invalid_argument("negative entry in mu");
    total += m;
  }
  if (std::abs(total - 1.0) > kStochasticTol) {
    throw std::invalid_argument("mu does not sum to 1");
  }
}

JointDistributionTable::JointDistributionTable(int n_states,
                                               std::size_t n_joint)
    : n_states_(n_states),
      n_joint_(n_joint),
      data_(static_cast<std::size_t>(n_states) * n_joint, 0.0) {}

JointDistributionTable::JointDistributionTable(int n_states,
                                               std::size_t n_joint,
                                               std::vector<double> data)
    : n_states_(n_states), n_joint_(n_joint), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(n_states) * n_joint) {
    throw DimensionError("joint table data has wrong size");
  }
}

JointDistributionTable JointDistributionTable::uniform(int n_states,
                                                       std::size_t n_joint) {
  return {n_states, n_joint,
          std::vector<double>(static_cast<std::size_t>(n_states) * n_joint,
                              1.0 / static_cast<double>(n_joint))};
}

void JointDistributionTable::check_normalized(double tol) const {
  for (int s = 0; s < n_states_; ++s) {
    double total = 0.0;
    for (double p : row(s)) {
      if (!(p >= 0.0)) {
        throw NumericalError("joint table has a negative or NaN entry");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > tol) {
      throw NumericalError("joint table row " + std::to_string(s) +
                           " sums to " + std::to_string(total));
    }
  }
}

ValueTables evaluate_policy(const CooperativeMarkovGame& game,
                            const JointDistributionTable& joint) {
  check_dims(game, joint);
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd r_pi;
  induced_chain(game, joint, p_pi, r_pi);
  const Eigen::VectorXd v = solve_discounted(p_pi, r_pi, game.gamma());

  ValueTables out;
  const int ns = game.n_states();
  const std::size_t na = game.n_joint_actions();
  out.n_joint = na;
  out.v.assign(v.data(), v.data() + ns);
  out.q.resize(static_cast<std::size_t>(ns) * na);
  for (int s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double next = 0.0;
      auto row = game.transition_row(s, a);
      for (int t = 0; t < ns; ++t) next += row[t] * out.v[t];
      out.q[s * na + a] = game.reward(s, a) + game.gamma() * next;
    }
  }
  return out;
}

VisitationTable visitation(const CooperativeMarkovGame& game,
                           const JointDistributionTable& joint) {
  check_dims(game, joint);
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd r_pi;
  induced_chain(game, joint, p_pi, r_pi);
  const int ns = game.n_states();
  Eigen::VectorXd mu(ns);
  for (int s = 0; s < ns; ++s) mu(s) = game.mu()[s];
  Eigen::MatrixXd p_t = p_pi.transpose();
  Eigen::VectorXd d = solve_discounted(p_t, mu, game.gamma());

  const double residual =
      (d - mu - game.gamma() * (p_t * d)).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-6)) {
    throw NumericalError("visitation solve residual " +
                         std::to_string(residual));
  }
  VisitationTable out;
  out.d.assign(d.data(), d.data() + ns);
  return out;
}

double value_from_start(const CooperativeMarkovGame& game,
                        const ValueTables& values) {
  double total = 0.0;
  for (int s = 0; s < game.n_states(); ++s) total += game.mu()[s] * values.v[s];
  return total;
}

double value_from_start(const CooperativeMarkovGame& game,
                        const JointDistributionTable& joint) {
  return value_from_start(game, evaluate_policy(game, joint));
}

double bellman_residual(const CooperativeMarkovGame& game,
                        const JointDistributionTable& joint,
                        const ValueTables& values) {
  const int ns = game.n_states();
  const std::size_t na = game.n_joint_actions();
  double worst = 0.0;
  for (int s = 0; s < ns; ++s) {
    double v = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      double next = 0.0;
      auto row = game.transition_row(s, a);
      for (int t = 0; t < ns; ++t) next += row[t] * values.v[t];
      const double q = game.reward(s, a) + game.gamma() * next;
      worst = std::max(worst, std::abs(q - values.q_at(s, a)));
      v += joint.at(s, a) * values.q_at(s, a);
    }
    worst = std::max(worst, std::abs(v - values.v[s]));
  }
  return worst;
}

nlohmann::json game_to_json(const CooperativeMarkovGame& game) {
  nlohmann::json doc;
  doc["n_agents"] = game.n_agents();
  doc["action_counts"] = game.action_counts();
  doc["states"] = game.n_states();
  doc["transition"] = game.transition_table();
  doc["reward"] = game.reward_table();
  doc["gamma"] = game.gamma();
  doc["mu"] = game.mu();
  doc["r_min"] = game.r_min();
  doc["r_max"] = game.r_max();
  return doc;
}

CooperativeMarkovGame game_from_json(const nlohmann::json& doc) {
  try {
    auto counts = doc.at("action_counts").get<std::vector<int>>();
    if (doc.contains("n_agents") &&
        doc.at("n_agents").get<int>() != static_cast<int>(counts.size())) {
      throw DimensionError("n_agents disagrees with action_counts");
    }
    const int n_states = doc.at("states").get<int>();
    auto transition = doc.at("transition").get<std::vector<double>>();
    auto reward = doc.at("reward").get<std::vector<double>>();
    const double gamma = doc.at("gamma").get<double>();
    auto mu = doc.at("mu").get<std::vector<double>>();
    if (doc.contains("r_min") && doc.contains("r_max")) {
      return {std::move(counts), n_states, std::move(transition),
              std::move(reward), gamma, std::move(mu),
              doc.at("r_min").get<double>(), doc.at("r_max").get<double>()};
    }
    return {std::move(counts), n_states, std::move(transition),
            std::move(reward), gamma, std::move(mu)};
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed game document: ") +
                                e.what());
  }
}

}  // namespace bnpg
