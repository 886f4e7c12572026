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

#include "bnpg/marl_ac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bnpg/errors.hpp"

namespace bnpg {

namespace {

// Independent stream per purpose so that, e.g., DAG noise never shifts the
// action draws.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

enum StreamTag : std::uint64_t {
  kSamplerInit = 1,
  kVInit = 2,
  kQInit = 3,
  kActions = 4,
  kDagNoise = 5,
  kEnvSeeds = 6,
  kEval = 7,
  kActorInit = 100,
};

constexpr double kPolicyLastGain = 0.01;

std::vector<double> rows_of(std::span<const double> data, int width,
                            std::span<const int> rows) {
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (int r : rows) {
    out.insert(out.end(), data.begin() + static_cast<std::size_t>(r) * width,
               data.begin() + static_cast<std::size_t>(r + 1) * width);
  }
  return out;
}

std::vector<double> adjacency_rows(const std::vector<Dag>& dags) {
  std::vector<double> out;
  for (const Dag& d : dags) {
    for (auto v : d.adjacency()) out.push_back(v ? 1.0 : 0.0);
  }
  return out;
}

void append_record(DagRecord& into, const DagRecord& from) {
  into.batch += from.batch;
  into.edge_noise.insert(into.edge_noise.end(), from.edge_noise.begin(),
                         from.edge_noise.end());
  into.perm_noise.insert(into.perm_noise.end(), from.perm_noise.begin(),
                         from.perm_noise.end());
  into.hard_upper.insert(into.hard_upper.end(), from.hard_upper.begin(),
                         from.hard_upper.end());
  into.hard_perm.insert(into.hard_perm.end(), from.hard_perm.begin(),
                        from.hard_perm.end());
  into.dags.insert(into.dags.end(), from.dags.begin(), from.dags.end());
}

double mean_density(const std::vector<Dag>& dags) {
  if (dags.empty() || dags.front().n_agents() < 2) return 0.0;
  double total = 0.0;
  for (const Dag& d : dags) total += dag_density(d);
  return total / static_cast<double>(dags.size());
}

nlohmann::json dump_params(const std::vector<ad::Parameter*>& params) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

void load_params(const nlohmann::json& j, const std::vector<ad::Parameter*>& params) {
  if (!j.is_array() || j.size() != params.size()) {
    throw ConfigError("checkpoint parameter count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto v = j[k].get<std::vector<double>>();
    if (v.size() != params[k]->value.size()) {
      throw ConfigError("checkpoint parameter shape mismatch");
    }
    params[k]->value = std::move(v);
  }
}

void zero_grads(const std::vector<ad::Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace

const char* ac_topology_name(AcTopology t) {
  switch (t) {
    case AcTopology::kUncorrelated: return "uncorrelated";
    case AcTopology::kLine: return "line";
    case AcTopology::kFully: return "fully";
    case AcTopology::kContextAware: return "context_aware";
  }
  return "?";
}

AcTopology parse_ac_topology(const std::string& name) {
  if (name == "context_aware" || name == "context-aware") {
    return AcTopology::kContextAware;
  }
  switch (parse_topology(name)) {
    case Topology::kUncorrelated: return AcTopology::kUncorrelated;
    case Topology::kLineCorrelated: return AcTopology::kLine;
    case Topology::kFullyCorrelated: return AcTopology::kFully;
  }
  throw ConfigError("unknown topology '" + name + "'");
}

std::unique_ptr<envs::Environment> EnvConfig::make() const {
  if (kind == EnvKind::kCoordination) {
    return std::make_unique<envs::CoordinationEnv>(coordination);
  }
  return std::make_unique<envs::AlohaEnv>(aloha);
}

int EnvConfig::episode_length() const {
  return kind == EnvKind::kCoordination ? coordination.episode_length
                                        : aloha.episode_length;
}

void AcConfig::validate() const {
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (n_rollout_threads <= 0) throw ConfigError("n_rollout_threads must be positive");
  if (hidden <= 0 || ppo_epochs <= 0) throw ConfigError("hidden and ppo_epochs must be positive");
  if (!(clip_ratio > 0.0)) throw ConfigError("clip_ratio must be positive");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
  if (!(entropy_coef >= 0.0) || !(max_grad_norm > 0.0)) {
    throw ConfigError("entropy_coef must be >= 0 and max_grad_norm > 0");
  }
  if (!(eta >= 0.0 && eta <= 1.0) || !(alpha >= 0.0)) {
    throw ConfigError("need eta in [0, 1] and alpha >= 0");
  }
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (env.episode_length() <= 0) throw ConfigError("episode_length must be positive");
  schedule.validate();
}

MultiAgentActorCritic::MultiAgentActorCritic(const AcConfig& config, int n_agents,
                                             std::vector<int> action_counts,
                                             int obs_dim)
    : config_(config),
      n_(n_agents),
      counts_(std::move(action_counts)),
      obs_dim_(obs_dim) {
  if (n_ < 1 || static_cast<int>(counts_.size()) != n_ || obs_dim_ < 1) {
    throw DimensionError("actor-critic needs N >= 1 agents with action counts");
  }
  max_actions_ = *std::max_element(counts_.begin(), counts_.end());
  const int h = config.hidden;
  for (int i = 0; i < n_; ++i) {
    auto rng = stream(config.seed, kActorInit + i);
    actors_.emplace_back(std::vector<int>{actor_input_dim(), h, h, counts_[i]}, rng,
                         kPolicyLastGain);
  }
  DagSamplerConfig sc;
  sc.n_agents = n_;
  sc.input_dim = n_ * obs_dim_;
  sc.hidden = h;
  sc.temperature = config.temperature;
  sc.sinkhorn_temperature = config.sinkhorn_temperature;
  sc.sinkhorn_iters = config.sinkhorn_iters;
  sc.fixed_identity = config.fixed_identity;
  sc.force_empty = config.force_empty;
  sc.use_hungarian = config.use_hungarian;
  auto srng = stream(config.seed, kSamplerInit);
  sampler_ = DagSampler(sc, srng);
  auto vrng = stream(config.seed, kVInit);
  v_critic_ = ad::Mlp({n_ * obs_dim_, h, h, 1}, vrng);
  auto qrng = stream(config.seed, kQInit);
  q_critic_ = ad::Mlp({n_ * obs_dim_ + n_ * max_actions_, h, h, 1}, qrng);
  switch (config.topology) {
    case AcTopology::kUncorrelated: fixed_dag_ = Dag::fixed(Topology::kUncorrelated, n_); break;
    case AcTopology::kLine: fixed_dag_ = Dag::fixed(Topology::kLineCorrelated, n_); break;
    case AcTopology::kFully: fixed_dag_ = Dag::fixed(Topology::kFullyCorrelated, n_); break;
    case AcTopology::kContextAware: fixed_dag_ = Dag(n_); break;
  }
}

int MultiAgentActorCritic::actor_input_dim() const {
  const int slot = max_actions_ + (config_.share_observations ? obs_dim_ : 0);
  return obs_dim_ + (n_ - 1) * slot;
}

DagRecord MultiAgentActorCritic::fixed_record(int batch) const {
  const std::size_t nn = static_cast<std::size_t>(n_) * n_;
  DagRecord rec;
  rec.batch = batch;
  const auto& order = fixed_dag_.topo_order();
  const auto upper = fixed_dag_.upper_in_topo_order();
  std::vector<double> perm(nn, 0.0), up(nn, 0.0);
  for (int a = 0; a < n_; ++a) perm[a * n_ + order[a]] = 1.0;
  for (std::size_t k = 0; k < nn; ++k) up[k] = upper[k] ? 1.0 : 0.0;
  for (int b = 0; b < batch; ++b) {
    rec.hard_perm.insert(rec.hard_perm.end(), perm.begin(), perm.end());
    rec.hard_upper.insert(rec.hard_upper.end(), up.begin(), up.end());
  }
  rec.dags.assign(batch, fixed_dag_);
  return rec;
}

std::vector<double> MultiAgentActorCritic::one_hot(std::span<const int> actions,
                                                   int rows) const {
  std::vector<double> out(static_cast<std::size_t>(rows) * n_ * max_actions_, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < n_; ++i) {
      const int a = actions[r * n_ + i];
      if (a >= 0) out[(static_cast<std::size_t>(r) * n_ + i) * max_actions_ + a] = 1.0;
    }
  }
  return out;
}

ad::Tensor MultiAgentActorCritic::actor_logits(ad::Tape& tape, int agent,
                                               const ad::Tensor& obs,
                                               const ad::Tensor& onehot,
                                               const ad::Tensor& g) {
  const int od = obs_dim_;
  const int A = max_actions_;
  const int width = A + (config_.share_observations ? od : 0);
  std::vector<ad::Tensor> parts{ad::slice(obs, agent * od, (agent + 1) * od)};
  ad::Tensor ones = tape.constant({1, width}, std::vector<double>(width, 1.0));
  for (int j = 0; j < n_; ++j) {
    if (j == agent) continue;
    ad::Tensor gate = ad::matmul(ad::slice(g, j * n_ + agent, j * n_ + agent + 1), ones);
    ad::Tensor feat = ad::slice(onehot, j * A, (j + 1) * A);
    if (config_.share_observations) {
      const ad::Tensor pair[] = {feat, ad::slice(obs, j * od, (j + 1) * od)};
      feat = ad::concat(pair);
    }
    parts.push_back(ad::mul(gate, feat));
  }
  return actors_[agent].forward(tape, ad::concat(parts));
}

ActResult MultiAgentActorCritic::act(std::span<const double> obs, int batch,
                                     std::mt19937_64& action_rng,
                                     std::mt19937_64& dag_rng,
                                     const DagRecord* reuse) {
  const int width = n_ * obs_dim_;
  if (obs.size() != static_cast<std::size_t>(batch) * width) {
    throw DimensionError("obs must be [B, N*obs_dim]");
  }
  ActResult out;
  if (reuse != nullptr) {
    out.dags = *reuse;
  } else if (config_.topology == AcTopology::kContextAware) {
    out.dags = sampler_.draw(obs, batch, dag_rng);
  } else {
    out.dags = fixed_record(batch);
  }
  const auto g_all = adjacency_rows(out.dags.dags);
  out.actions.assign(static_cast<std::size_t>(batch) * n_, -1);
  out.log_probs.assign(static_cast<std::size_t>(batch) * n_, 0.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int round = 0; round < n_; ++round) {
    for (int i = 0; i < n_; ++i) {
      std::vector<int> rows;
      for (int b = 0; b < batch; ++b) {
        if (out.dags.dags[b].topo_order()[round] == i) rows.push_back(b);
      }
      if (rows.empty()) continue;
      const int m = static_cast<int>(rows.size());
      std::vector<int> acts;
      for (int b : rows) {
        acts.insert(acts.end(), out.actions.begin() + b * n_,
                    out.actions.begin() + (b + 1) * n_);
      }
      ad::Tape tape;
      ad::Tensor o = tape.constant({m, width}, rows_of(obs, width, rows));
      ad::Tensor oh = tape.constant({m, n_ * max_actions_}, one_hot(acts, m));
      ad::Tensor g = tape.constant({m, n_ * n_}, rows_of(g_all, n_ * n_, rows));
      const auto& lp = ad::log_softmax(actor_logits(tape, i, o, oh, g)).value();
      const int k = counts_[i];
      for (int r = 0; r < m; ++r) {
        const double u = unif(action_rng);
        double cum = 0.0;
        int pick = k - 1;
        for (int a = 0; a < k; ++a) {
          cum += std::exp(lp[r * k + a]);
          if (u < cum) {
            pick = a;
            break;
          }
        }
        out.actions[rows[r] * n_ + i] = pick;
        out.log_probs[rows[r] * n_ + i] = lp[r * k + pick];
      }
    }
  }
  return out;
}

std::vector<double> MultiAgentActorCritic::recompute_log_probs(const RolloutBatch& batch) {
  const int K = batch.size();
  ad::Tape tape;
  ad::Tensor o = tape.constant({K, n_ * obs_dim_}, batch.obs);
  ad::Tensor oh = tape.constant({K, n_ * max_actions_}, one_hot(batch.actions, K));
  ad::Tensor g = tape.constant({K, n_ * n_}, adjacency_rows(batch.dags.dags));
  std::vector<double> out(static_cast<std::size_t>(K) * n_);
  for (int i = 0; i < n_; ++i) {
    std::vector<int> idx(K);
    for (int k = 0; k < K; ++k) idx[k] = batch.actions[k * n_ + i];
    const auto& lp = ad::gather(ad::log_softmax(actor_logits(tape, i, o, oh, g)), idx).value();
    for (int k = 0; k < K; ++k) out[k * n_ + i] = lp[k];
  }
  return out;
}

ad::Tensor MultiAgentActorCritic::value(ad::Tape& tape, const ad::Tensor& obs) {
  const ad::Tensor v = v_critic_.forward(tape, obs);
  return ad::reshape(v, {static_cast<int>(v.size())});
}

ad::Tensor MultiAgentActorCritic::q_value(ad::Tape& tape, const ad::Tensor& obs,
                                          const ad::Tensor& onehot) {
  const ad::Tensor parts[] = {obs, onehot};
  const ad::Tensor q = q_critic_.forward(tape, ad::concat(parts));
  return ad::reshape(q, {static_cast<int>(q.size())});
}

std::vector<ad::Parameter*> MultiAgentActorCritic::policy_parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& a : actors_) {
    for (auto* p : a.parameters()) out.push_back(p);
  }
  if (config_.topology == AcTopology::kContextAware) {
    for (auto* p : sampler_.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<ad::Parameter*> MultiAgentActorCritic::critic_parameters() {
  auto out = v_critic_.parameters();
  for (auto* p : q_critic_.parameters()) out.push_back(p);
  return out;
}

nlohmann::json MultiAgentActorCritic::checkpoint() const {
  auto* self = const_cast<MultiAgentActorCritic*>(this);
  nlohmann::json j;
  j["n_agents"] = n_;
  j["obs_dim"] = obs_dim_;
  j["action_counts"] = counts_;
  j["topology"] = ac_topology_name(config_.topology);
  j["actors"] = nlohmann::json::array();
  for (auto& a : self->actors_) j["actors"].push_back(dump_params(a.parameters()));
  j["edge_net"] = dump_params(self->sampler_.edge_net().parameters());
  j["perm_net"] = dump_params(self->sampler_.perm_net().parameters());
  j["v_critic"] = dump_params(self->v_critic_.parameters());
  j["q_critic"] = dump_params(self->q_critic_.parameters());
  return j;
}

void MultiAgentActorCritic::load_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("n_agents").get<int>() != n_ || j.at("obs_dim").get<int>() != obs_dim_ ||
        j.at("action_counts").get<std::vector<int>>() != counts_) {
      throw ConfigError("checkpoint does not match this model");
    }
    const auto& actors = j.at("actors");
    if (!actors.is_array() || static_cast<int>(actors.size()) != n_) {
      throw ConfigError("checkpoint actor count mismatch");
    }
    for (int i = 0; i < n_; ++i) load_params(actors[i], actors_[i].parameters());
    load_params(j.at("edge_net"), sampler_.edge_net().parameters());
    load_params(j.at("perm_net"), sampler_.perm_net().parameters());
    load_params(j.at("v_critic"), v_critic_.parameters());
    load_params(j.at("q_critic"), q_critic_.parameters());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad checkpoint: ") + e.what());
  }
}

ad::Tensor critic_loss(ad::Tape& tape, MultiAgentActorCritic& model,
                       const RolloutBatch& batch, AdvantageSource which) {
  const int K = batch.size();
  if (K == 0) throw std::invalid_argument("critic_loss on an empty batch");
  const int n = model.n_agents();
  ad::Tensor o = tape.constant({K, n * model.obs_dim()}, batch.obs);
  ad::Tensor pred, target;
  if (which == AdvantageSource::kV) {
    pred = model.value(tape, o);
    target = tape.constant({K}, batch.returns);
  } else {
    ad::Tensor oh = tape.constant({K, n * model.max_actions()},
                                  model.one_hot(batch.actions, K));
    pred = model.q_value(tape, o, oh);
    target = tape.constant({K}, batch.q_targets);
  }
  return ad::mean(ad::square(ad::sub(pred, target)));
}

ActorLossParts actor_loss(ad::Tape& tape, MultiAgentActorCritic& model,
                          const RolloutBatch& batch, double clip_ratio,
                          double entropy_coef, double eta, double alpha) {
  const int K = batch.size();
  if (K == 0) throw std::invalid_argument("actor_loss on an empty batch");
  const int n = model.n_agents();
  ad::Tensor o = tape.constant({K, n * model.obs_dim()}, batch.obs);
  ad::Tensor oh = tape.constant({K, n * model.max_actions()},
                                model.one_hot(batch.actions, K));
  ActorLossParts out;
  ad::Tensor g;
  const bool learned = model.config().topology == AcTopology::kContextAware;
  if (learned) {
    DagForward f = model.sampler().forward(tape, o, batch.dags);
    g = ad::reshape(f.g, {K, n * n});
    out.soft_density = f.soft_density;
  } else {
    g = tape.constant({K, n * n}, adjacency_rows(batch.dags.dags));
  }
  ad::Tensor adv = tape.constant({K}, batch.advantages);
  ad::Tensor total = tape.scalar(0.0);
  ad::Tensor entropy = tape.scalar(0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<int> idx(K);
    std::vector<double> old(K);
    for (int k = 0; k < K; ++k) {
      idx[k] = batch.actions[k * n + i];
      old[k] = batch.log_probs[k * n + i];
    }
    ad::Tensor lsm = ad::log_softmax(model.actor_logits(tape, i, o, oh, g));
    ad::Tensor ratio = ad::exp(ad::sub(ad::gather(lsm, idx), tape.constant({K}, old)));
    ad::Tensor surr = ad::mul(ratio, adv);
    if (std::isfinite(clip_ratio)) {
      surr = ad::minimum(surr, ad::mul(ad::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio), adv));
    }
    total = ad::sub(total, ad::mean(surr));
    ad::Tensor h = ad::neg(ad::sum_last(ad::mul(ad::exp(lsm), lsm)));
    entropy = ad::add(entropy, ad::mean(h));
  }
  out.entropy = ad::scale(entropy, 1.0 / n);
  total = ad::sub(total, ad::scale(out.entropy, entropy_coef));
  if (learned && n >= 2 && alpha > 0.0) {
    total = ad::add(total, density_penalty(out.soft_density, eta, alpha));
  }
  out.total = total;
  return out;
}

std::vector<double> compute_gae(std::span<const double> rewards,
                                std::span<const double> values,
                                std::span<const double> next_values,
                                std::span<const std::uint8_t> episode_end,
                                int steps, int envs, double gamma, double lambda) {
  const std::size_t K = static_cast<std::size_t>(steps) * envs;
  if (rewards.size() != K || values.size() != K || next_values.size() != K ||
      episode_end.size() != K) {
    throw DimensionError("compute_gae inputs must all have steps*envs entries");
  }
  std::vector<double> adv(K, 0.0);
  for (int b = 0; b < envs; ++b) {
    double running = 0.0;
    for (int t = steps - 1; t >= 0; --t) {
      const std::size_t k = static_cast<std::size_t>(t) * envs + b;
      const double delta = rewards[k] + gamma * next_values[k] - values[k];
      const bool cut = episode_end[k] != 0 || t == steps - 1;
      running = delta + (cut ? 0.0 : gamma * lambda * running);
      adv[k] = running;
    }
  }
  return adv;
}

namespace {

std::vector<double> flatten(const envs::JointObservation& o) {
  std::vector<double> out;
  for (const auto& v : o) out.insert(out.end(), v.begin(), v.end());
  return out;
}

struct Rollout {
  RolloutBatch batch;
  std::vector<double> episode_returns;
};

Rollout collect(MultiAgentActorCritic& model, const EnvConfig& env_config,
                int n_envs, std::mt19937_64& env_seeds, std::mt19937_64& action_rng,
                std::mt19937_64& dag_rng) {
  const int n = model.n_agents();
  const int T = env_config.episode_length();
  std::vector<std::unique_ptr<envs::Environment>> envs;
  std::vector<double> obs;
  for (int b = 0; b < n_envs; ++b) {
    envs.push_back(env_config.make());
    const auto o = flatten(envs.back()->reset(env_seeds()));
    obs.insert(obs.end(), o.begin(), o.end());
  }
  Rollout out;
  RolloutBatch& rb = out.batch;
  rb.steps = T;
  rb.envs = n_envs;
  rb.n_agents = n;
  rb.obs_dim = model.obs_dim();
  rb.max_actions = model.max_actions();
  out.episode_returns.assign(n_envs, 0.0);
  std::unique_ptr<DagRecord> episode_dag;
  for (int t = 0; t < T; ++t) {
    ActResult act = model.act(obs, n_envs, action_rng, dag_rng, episode_dag.get());
    if (model.config().resample_per_episode && !episode_dag) {
      episode_dag = std::make_unique<DagRecord>(act.dags);
    }
    std::vector<double> next;
    next.reserve(obs.size());
    for (int b = 0; b < n_envs; ++b) {
      std::span<const int> a(act.actions.data() + b * n, n);
      const envs::StepResult sr = envs[b]->step(a);
      const auto o = flatten(sr.observation);
      next.insert(next.end(), o.begin(), o.end());
      rb.rewards.push_back(sr.reward);
      rb.episode_end.push_back(t == T - 1 ? 1 : 0);
      out.episode_returns[b] += sr.reward;
    }
    rb.obs.insert(rb.obs.end(), obs.begin(), obs.end());
    rb.next_obs.insert(rb.next_obs.end(), next.begin(), next.end());
    rb.actions.insert(rb.actions.end(), act.actions.begin(), act.actions.end());
    rb.log_probs.insert(rb.log_probs.end(), act.log_probs.begin(), act.log_probs.end());
    append_record(rb.dags, act.dags);
    obs = std::move(next);
  }
  // SARSA targets need a'; after the time limit it is drawn at o_T.
  rb.next_actions.assign(rb.actions.begin() + static_cast<std::ptrdiff_t>(n_envs) * n,
                         rb.actions.end());
  ActResult extra = model.act(obs, n_envs, action_rng, dag_rng, episode_dag.get());
  rb.next_actions.insert(rb.next_actions.end(), extra.actions.begin(), extra.actions.end());
  return out;
}

void compute_targets(MultiAgentActorCritic& model, RolloutBatch& rb) {
  const AcConfig& cfg = model.config();
  const int K = rb.size();
  const int n = model.n_agents();
  ad::Tape tape;
  ad::Tensor o = tape.constant({K, n * model.obs_dim()}, rb.obs);
  ad::Tensor o2 = tape.constant({K, n * model.obs_dim()}, rb.next_obs);
  const auto values = model.value(tape, o).value();
  const auto next_values = model.value(tape, o2).value();
  ad::Tensor oh = tape.constant({K, n * model.max_actions()}, model.one_hot(rb.actions, K));
  ad::Tensor oh2 = tape.constant({K, n * model.max_actions()}, model.one_hot(rb.next_actions, K));
  const auto q = model.q_value(tape, o, oh).value();
  const auto q_next = model.q_value(tape, o2, oh2).value();
  auto adv = compute_gae(rb.rewards, values, next_values, rb.episode_end, rb.steps,
                         rb.envs, cfg.gamma, cfg.gae_lambda);
  rb.returns.resize(K);
  rb.q_targets.resize(K);
  for (int k = 0; k < K; ++k) {
    rb.returns[k] = adv[k] + values[k];
    rb.q_targets[k] = rb.rewards[k] + cfg.gamma * q_next[k];
  }
  if (cfg.advantage == AdvantageSource::kQ) {
    for (int k = 0; k < K; ++k) adv[k] = q[k] - values[k];
  }
  if (cfg.normalize_advantages && K > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / K;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / K);
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }
  rb.advantages = std::move(adv);
}

}  // namespace

EvalResult evaluate_return(MultiAgentActorCritic& model, int episodes,
                           std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("need >= 1 evaluation episode");
  auto env_seeds = stream(seed, kEnvSeeds);
  auto action_rng = stream(seed, kActions);
  auto dag_rng = stream(seed, kDagNoise);
  std::vector<double> returns;
  double density = 0.0;
  long draws = 0;
  const int chunk = 32;
  for (int done = 0; done < episodes; done += chunk) {
    const int b = std::min(chunk, episodes - done);
    Rollout r = collect(model, model.config().env, b, env_seeds, action_rng, dag_rng);
    returns.insert(returns.end(), r.episode_returns.begin(), r.episode_returns.end());
    density += mean_density(r.batch.dags.dags) * r.batch.dags.batch;
    draws += r.batch.dags.batch;
  }
  EvalResult out;
  const double n = static_cast<double>(returns.size());
  out.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  double var = 0.0;
  for (double v : returns) var += (v - out.mean_return) * (v - out.mean_return);
  out.stderr_return = std::sqrt(var / n) / std::sqrt(n);
  out.mean_density = draws > 0 ? density / draws : 0.0;
  return out;
}

double uniform_random_return(const EnvConfig& env_config, int episodes,
                             std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("need >= 1 episode");
  auto env_seeds = stream(seed, kEnvSeeds);
  auto rng = stream(seed, kActions);
  auto env = env_config.make();
  const auto counts = env->action_counts();
  std::vector<int> a(counts.size());
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env->reset(env_seeds());
    for (int t = 0; t < env->episode_length(); ++t) {
      for (std::size_t i = 0; i < counts.size(); ++i) {
        a[i] = std::uniform_int_distribution<int>(0, counts[i] - 1)(rng);
      }
      total += env->step(a).reward;
    }
  }
  return total / episodes;
}

TrainResult train(const AcConfig& config, const TrainCallback& callback) {
  config.validate();
  auto probe = config.env.make();
  TrainResult result;
  result.model = std::make_unique<MultiAgentActorCritic>(
      config, probe->n_agents(), probe->action_counts(), probe->obs_dim());
  MultiAgentActorCritic& model = *result.model;
  const int B = config.n_rollout_threads;
  const long per_iter = static_cast<long>(B) * config.env.episode_length();
  const long iters = std::max(1L, (config.total_steps + per_iter - 1) / per_iter);
  auto env_seeds = stream(config.seed, kEnvSeeds);
  auto action_rng = stream(config.seed, kActions);
  auto dag_rng = stream(config.seed, kDagNoise);
  ad::AdamConfig actor_adam{config.lr_actor};
  ad::AdamConfig critic_adam{config.lr_critic};
  ad::AdamState actor_state, critic_state;
  auto policy_params = model.policy_parameters();
  auto critic_params = model.critic_parameters();
  const bool learned = config.topology == AcTopology::kContextAware;

  for (long it = 0; it < iters; ++it) {
    ScheduleValue sv{config.eta, config.alpha};
    if (config.anneal) sv = schedule_at(config.schedule, it * per_iter, iters * per_iter);
    Rollout r = collect(model, config.env, B, env_seeds, action_rng, dag_rng);
    compute_targets(model, r.batch);
    double grad_norm = 0.0;
    for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
      {
        zero_grads(policy_params);
        ad::Tape tape;
        ActorLossParts loss = actor_loss(tape, model, r.batch, config.clip_ratio,
                                         config.entropy_coef, sv.eta, sv.alpha);
        if (!std::isfinite(loss.total.item())) {
          throw NumericalError("actor loss became non-finite at iteration " +
                               std::to_string(it));
        }
        tape.backward(loss.total);
        grad_norm = ad::clip_grad_norm(policy_params, config.max_grad_norm);
        if (!ad::adam_step(policy_params, actor_adam, actor_state)) {
          throw NumericalError("non-finite actor gradient at iteration " +
                               std::to_string(it));
        }
      }
      {
        zero_grads(critic_params);
        ad::Tape tape;
        ad::Tensor loss = ad::add(critic_loss(tape, model, r.batch, AdvantageSource::kV),
                                  critic_loss(tape, model, r.batch, AdvantageSource::kQ));
        if (!std::isfinite(loss.item())) {
          throw NumericalError("critic loss became non-finite at iteration " +
                               std::to_string(it));
        }
        tape.backward(loss);
        ad::clip_grad_norm(critic_params, config.max_grad_norm);
        if (!ad::adam_step(critic_params, critic_adam, critic_state)) {
          throw NumericalError("non-finite critic gradient at iteration " +
                               std::to_string(it));
        }
      }
    }
    ExperimentRecord rec;
    rec.seed = config.seed;
    rec.iteration = it;
    rec.value = std::accumulate(r.episode_returns.begin(), r.episode_returns.end(), 0.0) /
                static_cast<double>(r.episode_returns.size());
    rec.dag_density = model.n_agents() >= 2 ? mean_density(r.batch.dags.dags)
                                            : ExperimentRecord::kMissing;
    if (learned) {
      rec.eta = sv.eta;
      rec.alpha = sv.alpha;
    }
    rec.grad_norm = grad_norm;
    result.records.push_back(rec);
    if (callback && !callback(rec)) break;
  }
  const EvalResult ev = evaluate_return(model, config.eval_episodes,
                                        stream(config.seed, kEval)());
  ExperimentRecord last;
  last.seed = config.seed;
  last.iteration = static_cast<long>(result.records.size());
  last.value = ev.mean_return;
  last.dag_density = model.n_agents() >= 2 ? ev.mean_density : ExperimentRecord::kMissing;
  if (learned && !result.records.empty()) {
    last.eta = result.records.back().eta;
    last.alpha = result.records.back().alpha;
  }
  result.records.push_back(last);
  result.final_return = ev.mean_return;
  return result;
}

}  // namespace bnpg
