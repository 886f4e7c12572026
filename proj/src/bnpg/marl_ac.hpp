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

#ifndef BNPG_MARL_AC_HPP_
#define BNPG_MARL_AC_HPP_

// Multi-agent PPO whose actors condition on the actions of their parents in
// a sampled DAG. Agent i's input is concat(o^i, slot_j for j != i in agent
// index order) where slot_j = G[j,i] * (onehot(a^j) [, o^j]). Non-parent slots
// are therefore zero. With a learned sampler, G is straight-through so the
// actor loss also trains the Edge and Permutation Nets.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bnpg/dag_sampler.hpp"
#include "bnpg/envs.hpp"
#include "bnpg/records.hpp"
#include "bnpg/tensor.hpp"
#include "json.hpp"

namespace bnpg {

enum class AcTopology { kUncorrelated, kLine, kFully, kContextAware };

const char* ac_topology_name(AcTopology t);
// Accepts the fixed topology names plus "context_aware".
AcTopology parse_ac_topology(const std::string& name);

enum class EnvKind { kCoordination, kAloha };

struct EnvConfig {
  EnvKind kind = EnvKind::kCoordination;
  envs::CoordinationGameSpec coordination;
  envs::AlohaSpec aloha;

  std::unique_ptr<envs::Environment> make() const;
  int episode_length() const;
};

enum class AdvantageSource { kV, kQ };

struct AcConfig {
  EnvConfig env;
  AcTopology topology = AcTopology::kContextAware;
  long total_steps = 200000;  // environment steps summed over threads
  int n_rollout_threads = 32;
  int hidden = 64;
  int ppo_epochs = 5;
  double clip_ratio = 0.2;  // +inf gives the unclipped surrogate
  double lr_actor = 7e-4;
  double lr_critic = 7e-4;
  double gamma = 0.95;
  double gae_lambda = 0.0;
  double entropy_coef = 0.01;
  double max_grad_norm = 10.0;
  bool normalize_advantages = true;
  AdvantageSource advantage = AdvantageSource::kV;
  // Children also see their parents' observations.
  bool share_observations = false;
  // Draw one DAG per episode instead of one per step.
  bool resample_per_episode = false;
  double temperature = 1.0;
  double sinkhorn_temperature = 1.0;
  int sinkhorn_iters = 20;
  bool fixed_identity = false;
  bool use_hungarian = false;
  // Forces the learned sampler to the empty graph.
  bool force_empty = false;
  bool anneal = false;
  DensitySchedule schedule;
  // Used when anneal is false.
  double eta = 0.0;
  double alpha = 0.0;
  int eval_episodes = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// Rollout of T steps over B parallel environments. Index k = t*B + b.
struct RolloutBatch {
  int steps = 0;
  int envs = 0;
  int n_agents = 0;
  int obs_dim = 0;
  int max_actions = 0;
  std::vector<double> obs;       // [K, N*obs_dim]
  std::vector<double> next_obs;  // [K, N*obs_dim]
  DagRecord dags;                // K draws
  std::vector<int> actions;      // [K, N]
  std::vector<int> next_actions; // [K, N], for the Q-critic target
  std::vector<double> log_probs; // [K, N] at act time
  std::vector<double> rewards;   // [K]
  std::vector<std::uint8_t> episode_end;  // [K], time-limit truncation
  std::vector<double> advantages;  // [K]
  std::vector<double> returns;     // [K], V-critic targets
  std::vector<double> q_targets;   // [K]

  int size() const { return steps * envs; }
};

struct ActResult {
  std::vector<int> actions;       // [B, N]
  std::vector<double> log_probs;  // [B, N]
  DagRecord dags;
};

class MultiAgentActorCritic {
 public:
  MultiAgentActorCritic(const AcConfig& config, int n_agents,
                        std::vector<int> action_counts, int obs_dim);

  const AcConfig& config() const { return config_; }
  int n_agents() const { return n_; }
  int obs_dim() const { return obs_dim_; }
  int max_actions() const { return max_actions_; }
  const std::vector<int>& action_counts() const { return counts_; }
  int actor_input_dim() const;

  // Samples a DAG per environment, then actions in topological rounds.
  // obs: [B, N*obs_dim]. reuse, when given, replays recorded DAG draws.
  ActResult act(std::span<const double> obs, int batch, std::mt19937_64& action_rng,
                std::mt19937_64& dag_rng, const DagRecord* reuse = nullptr);

  // Logits of agent i. obs [M, N*obs_dim], onehot [M, N*maxA], g [M, N*N].
  ad::Tensor actor_logits(ad::Tape& tape, int agent, const ad::Tensor& obs,
                          const ad::Tensor& onehot, const ad::Tensor& g);

  // Joint log-probability of recorded actions under recorded DAGs -> [K, N].
  std::vector<double> recompute_log_probs(const RolloutBatch& batch);

  ad::Tensor value(ad::Tape& tape, const ad::Tensor& obs);
  ad::Tensor q_value(ad::Tape& tape, const ad::Tensor& obs,
                     const ad::Tensor& onehot);

  // One-hot encoding of joint actions, [K, N*maxA].
  std::vector<double> one_hot(std::span<const int> actions, int rows) const;

  DagSampler& sampler() { return sampler_; }
  std::vector<ad::Mlp>& actors() { return actors_; }
  ad::Mlp& v_critic() { return v_critic_; }
  ad::Mlp& q_critic() { return q_critic_; }

  std::vector<ad::Parameter*> policy_parameters();
  std::vector<ad::Parameter*> critic_parameters();

  nlohmann::json checkpoint() const;
  void load_checkpoint(const nlohmann::json& j);

 private:
  DagRecord fixed_record(int batch) const;

  AcConfig config_;
  int n_;
  std::vector<int> counts_;
  int obs_dim_;
  int max_actions_;
  std::vector<ad::Mlp> actors_;
  DagSampler sampler_;
  ad::Mlp v_critic_;
  ad::Mlp q_critic_;
  Dag fixed_dag_;
};

// Mean squared TD error of the V- or Q-critic against the batch's constant
// targets -> [1].
ad::Tensor critic_loss(ad::Tape& tape, MultiAgentActorCritic& model,
                       const RolloutBatch& batch, AdvantageSource which);

struct ActorLossParts {
  ad::Tensor total;    // surrogate + entropy bonus + density penalty
  ad::Tensor entropy;  // mean per-agent entropy
  ad::Tensor soft_density;
};

// PPO-clipped surrogate per agent, summed over agents, plus
// -entropy_coef * entropy + density_penalty(soft density, eta, alpha).
ActorLossParts actor_loss(ad::Tape& tape, MultiAgentActorCritic& model,
                          const RolloutBatch& batch, double clip_ratio,
                          double entropy_coef, double eta, double alpha);

// GAE with time-limit truncation: next_values are always bootstrapped, the
// recursion is cut at episode ends. lambda = 0 gives the one-step advantage.
std::vector<double> compute_gae(std::span<const double> rewards,
                                std::span<const double> values,
                                std::span<const double> next_values,
                                std::span<const std::uint8_t> episode_end,
                                int steps, int envs, double gamma, double lambda);

struct EvalResult {
  double mean_return = 0.0;
  double stderr_return = 0.0;
  double mean_density = 0.0;  // of the DAGs used while acting
};

// Undiscounted episode returns of the current stochastic policy.
EvalResult evaluate_return(MultiAgentActorCritic& model, int episodes,
                           std::uint64_t seed);

// Monte-Carlo return of uniformly random joint actions.
double uniform_random_return(const EnvConfig& env, int episodes,
                             std::uint64_t seed);

// Iteration callback; returning false stops training early.
using TrainCallback = std::function<bool(const ExperimentRecord&)>;

struct TrainResult {
  std::vector<ExperimentRecord> records;  // last row is the evaluation
  double final_return = 0.0;
  std::unique_ptr<MultiAgentActorCritic> model;
};

// Throws NumericalError if a loss turns non-finite.
TrainResult train(const AcConfig& config, const TrainCallback& callback = {});

}  // namespace bnpg

#endif  // BNPG_MARL_AC_HPP_
