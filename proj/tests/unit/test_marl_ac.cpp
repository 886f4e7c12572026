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

#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "bnpg/errors.hpp"
#include "bnpg/marl_ac.hpp"

using namespace bnpg;

namespace {

AcConfig small_config(AcTopology topology) {
  AcConfig cfg;
  cfg.topology = topology;
  cfg.hidden = 16;
  cfg.n_rollout_threads = 4;
  cfg.total_steps = 4 * 20 * 3;
  cfg.ppo_epochs = 2;
  cfg.eval_episodes = 8;
  cfg.seed = 11;
  return cfg;
}

// Random one-hot coordination observations for N=2 agents: [K, 2 * 4].
std::vector<double> random_obs(std::mt19937_64& rng, int rows) {
  std::bernoulli_distribution coin(0.5);
  std::vector<double> out;
  for (int r = 0; r < rows; ++r) {
    std::vector<double> code(4, 0.0);
    const int s0 = coin(rng), s1 = coin(rng);
    code[s0] = 1.0;
    code[2 + s1] = 1.0;
    for (int a = 0; a < 2; ++a) out.insert(out.end(), code.begin(), code.end());
  }
  return out;
}

RolloutBatch make_batch(MultiAgentActorCritic& model, int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed), act_rng(seed + 1), dag_rng(seed + 2);
  RolloutBatch b;
  b.steps = 1;
  b.envs = rows;
  b.n_agents = model.n_agents();
  b.obs_dim = model.obs_dim();
  b.max_actions = model.max_actions();
  b.obs = random_obs(rng, rows);
  auto act = model.act(b.obs, rows, act_rng, dag_rng);
  b.actions = act.actions;
  b.log_probs = act.log_probs;
  b.dags = act.dags;
  b.next_obs = random_obs(rng, rows);
  b.next_actions = b.actions;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < rows; ++k) {
    b.rewards.push_back(normal(rng));
    b.returns.push_back(normal(rng));
    b.q_targets.push_back(normal(rng));
    b.advantages.push_back(normal(rng));
    b.episode_end.push_back(0);
  }
  return b;
}

MultiAgentActorCritic make_model(const AcConfig& cfg) {
  return MultiAgentActorCritic(cfg, 2, {2, 2}, 4);
}

std::vector<double> agent1_logits(MultiAgentActorCritic& m, const std::vector<double>& obs,
                                  int a0, const std::vector<double>& g) {
  ad::Tape tape;
  std::vector<double> oh(4, 0.0);
  oh[a0] = 1.0;
  oh[2] = 1.0;
  return m.actor_logits(tape, 1, tape.constant({1, 8}, obs), tape.constant({1, 4}, oh),
                        tape.constant({1, 4}, g)).value();
}

bool same(double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); }

double param_abs_sum(const std::vector<ad::Parameter*>& ps) {
  double s = 0.0;
  for (auto* p : ps)
    for (double g : p->grad) s += std::abs(g);
  return s;
}

}  // namespace

TEST_CASE("topology names") {
  CHECK(parse_ac_topology("context_aware") == AcTopology::kContextAware);
  CHECK(parse_ac_topology("fully_correlated") == AcTopology::kFully);
  CHECK(std::string(ac_topology_name(AcTopology::kLine)) == "line");
  CHECK_THROWS_AS(parse_ac_topology("star"), ConfigError);
}

TEST_CASE("config validation") {
  AcConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = AcConfig{};
  cfg.n_rollout_threads = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("actor input width") {
  auto cfg = small_config(AcTopology::kFully);
  CHECK(make_model(cfg).actor_input_dim() == 4 + 2);
  cfg.share_observations = true;
  CHECK(make_model(cfg).actor_input_dim() == 4 + 2 + 4);
}

TEST_CASE("recomputed log-probs match the ones recorded while acting") {
  for (AcTopology t : {AcTopology::kUncorrelated, AcTopology::kFully, AcTopology::kContextAware}) {
    auto model = make_model(small_config(t));
    const auto batch = make_batch(model, 64, 5);
    const auto lp = model.recompute_log_probs(batch);
    REQUIRE(lp.size() == batch.log_probs.size());
    for (std::size_t k = 0; k < lp.size(); ++k) CHECK(std::abs(lp[k] - batch.log_probs[k]) <= 1e-10);
  }
}

TEST_CASE("child actions depend on the parent only through an edge") {
  auto model = make_model(small_config(AcTopology::kFully));
  std::mt19937_64 rng(2);
  const auto obs = random_obs(rng, 1);
  const std::vector<double> edge{0, 1, 0, 0}, none(4, 0.0);
  const auto with0 = agent1_logits(model, obs, 0, edge);
  const auto with1 = agent1_logits(model, obs, 1, edge);
  CHECK((with0[0] != with1[0] || with0[1] != with1[1]));
  CHECK(agent1_logits(model, obs, 0, none) == agent1_logits(model, obs, 1, none));
}

TEST_CASE("deterministic logits give a deterministic joint action") {
  auto model = make_model(small_config(AcTopology::kFully));
  for (auto& actor : model.actors()) {
    auto ps = actor.parameters();
    auto* bias = ps.back();
    bias->value = {60.0, -60.0};
  }
  std::mt19937_64 rng(3), a(4), d(5);
  const auto obs = random_obs(rng, 32);
  const auto res = model.act(obs, 32, a, d);
  for (int x : res.actions) CHECK(x == 0);
}

TEST_CASE("critic loss equals the hand-computed mean square") {
  auto model = make_model(small_config(AcTopology::kLine));
  const auto batch = make_batch(model, 16, 8);
  ad::Tape tape;
  const auto v = model.value(tape, tape.constant({16, 8}, batch.obs)).value();
  const auto q = model.q_value(tape, tape.constant({16, 8}, batch.obs),
                               tape.constant({16, 4}, model.one_hot(batch.actions, 16))).value();
  double lv = 0.0, lq = 0.0;
  for (int k = 0; k < 16; ++k) {
    lv += (v[k] - batch.returns[k]) * (v[k] - batch.returns[k]) / 16;
    lq += (q[k] - batch.q_targets[k]) * (q[k] - batch.q_targets[k]) / 16;
  }
  CHECK(critic_loss(tape, model, batch, AdvantageSource::kV).item() == doctest::Approx(lv).epsilon(1e-13));
  CHECK(critic_loss(tape, model, batch, AdvantageSource::kQ).item() == doctest::Approx(lq).epsilon(1e-13));
}

TEST_CASE("GAE") {
  SUBCASE("perfect critic on a one-step task") {
    const std::vector<double> r{1.0, 2.0}, v{1.0, 2.0}, nv{0.0, 0.0};
    const std::vector<std::uint8_t> end{1, 1};
    for (double a : compute_gae(r, v, nv, end, 1, 2, 0.9, 0.95)) CHECK(a == 0.0);
  }
  SUBCASE("constant reward with the exact value") {
    const double c = 0.7, gamma = 0.95, value = c / (1 - gamma);
    const std::vector<double> r(12, c), v(12, value);
    std::vector<std::uint8_t> end(12, 0);
    for (double a : compute_gae(r, v, v, end, 4, 3, gamma, 0.9)) CHECK(std::abs(a) <= 1e-12);
  }
  SUBCASE("matches the naive discounted sum of TD errors") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int T = 6, B = 2;
    std::vector<double> r(T * B), v(T * B), nv(T * B);
    for (auto* vec : {&r, &v, &nv})
      for (auto& x : *vec) x = normal(rng);
    std::vector<std::uint8_t> end(T * B, 0);
    end[2 * B + 1] = 1;  // env 1 ends after t = 2
    const double g = 0.9, l = 0.8;
    const auto adv = compute_gae(r, v, nv, end, T, B, g, l);
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t) {
        double expect = 0.0, w = 1.0;
        for (int u = t; u < T; ++u) {
          const int k = u * B + b;
          expect += w * (r[k] + g * nv[k] - v[k]);
          if (end[k]) break;
          w *= g * l;
        }
        CHECK(adv[t * B + b] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("actor loss gradients") {
  SUBCASE("zero advantages give a zero gradient") {
    auto model = make_model(small_config(AcTopology::kFully));
    auto batch = make_batch(model, 8, 2);
    std::fill(batch.advantages.begin(), batch.advantages.end(), 0.0);
    auto params = model.policy_parameters();
    for (auto* p : params) p->zero_grad();
    ad::Tape tape;
    tape.backward(actor_loss(tape, model, batch, 0.2, 0.0, 0.0, 0.0).total);
    CHECK(param_abs_sum(params) == 0.0);
  }
  SUBCASE("unclipped surrogate gradient is minus grad log pi times A") {
    auto model = make_model(small_config(AcTopology::kFully));
    auto batch = make_batch(model, 1, 3);
    batch.advantages = {1.7};
    auto params = model.policy_parameters();
    for (auto* p : params) p->zero_grad();
    {
      ad::Tape tape;
      tape.backward(actor_loss(tape, model, batch, std::numeric_limits<double>::infinity(),
                               0.0, 0.0, 0.0).total);
    }
    auto logp_times_adv = [&] {
      double s = 0.0;
      for (double lp : model.recompute_log_probs(batch)) s += lp;
      return s * 1.7;
    };
    for (auto* p : params) {
      for (std::size_t k = 0; k < p->value.size(); k += 3) {
        const double x0 = p->value[k];
        p->value[k] = x0 + 1e-6;
        const double up = logp_times_adv();
        p->value[k] = x0 - 1e-6;
        const double down = logp_times_adv();
        p->value[k] = x0;
        const double fd = (up - down) / 2e-6;
        CHECK(std::abs(-fd - p->grad[k]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
  SUBCASE("positive advantages raise the log-prob of the taken actions") {
    auto model = make_model(small_config(AcTopology::kLine));
    auto batch = make_batch(model, 32, 4);
    std::fill(batch.advantages.begin(), batch.advantages.end(), 1.0);
    const auto before = model.recompute_log_probs(batch);
    auto params = model.policy_parameters();
    for (auto* p : params) p->zero_grad();
    ad::Tape tape;
    tape.backward(actor_loss(tape, model, batch, 0.2, 0.0, 0.0, 0.0).total);
    for (auto* p : params)
      for (std::size_t k = 0; k < p->value.size(); ++k) p->value[k] -= 1e-3 * p->grad[k];
    const auto after = model.recompute_log_probs(batch);
    double sb = 0.0, sa = 0.0;
    for (std::size_t k = 0; k < before.size(); ++k) {
      sb += before[k];
      sa += after[k];
    }
    CHECK(sa > sb);
  }
  SUBCASE("context-aware loss reaches the edge logits") {
    auto model = make_model(small_config(AcTopology::kContextAware));
    auto batch = make_batch(model, 32, 6);
    auto edge = model.sampler().edge_net().parameters();
    for (auto* p : model.policy_parameters()) p->zero_grad();
    ad::Tape tape;
    tape.backward(actor_loss(tape, model, batch, 0.2, 0.01, 0.0, 0.0).total);
    CHECK(param_abs_sum(edge) > 0.0);
  }
  SUBCASE("density penalty only applies to the learned sampler") {
    auto model = make_model(small_config(AcTopology::kContextAware));
    auto batch = make_batch(model, 16, 7);
    ad::Tape tape;
    const auto plain = actor_loss(tape, model, batch, 0.2, 0.0, 0.0, 0.0);
    const auto pen = actor_loss(tape, model, batch, 0.2, 0.0, 0.25, 2.0);
    double rho = 0.0;
    for (double x : plain.soft_density.value()) rho += std::abs(x - 0.25) / 16;
    CHECK(pen.total.item() - plain.total.item() == doctest::Approx(2.0 * rho).epsilon(1e-12));
  }
}

TEST_CASE("forcing the sampler empty reproduces independent actors exactly") {
  auto empty = small_config(AcTopology::kContextAware);
  empty.force_empty = true;
  const auto indep = small_config(AcTopology::kUncorrelated);
  const auto a = train(empty);
  const auto b = train(indep);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].value == b.records[k].value);
    CHECK(same(a.records[k].grad_norm, b.records[k].grad_norm));
    CHECK(a.records[k].dag_density == 0.0);
  }
}

TEST_CASE("training is deterministic and ends with an evaluation row") {
  const auto cfg = small_config(AcTopology::kContextAware);
  const auto a = train(cfg);
  const auto b = train(cfg);
  REQUIRE(a.records.size() == 4);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].value == b.records[k].value);
    CHECK(a.records[k].dag_density == b.records[k].dag_density);
  }
  CHECK(a.final_return == a.records.back().value);
  int calls = 0;
  const auto c = train(cfg, [&](const ExperimentRecord&) { return ++calls < 2; });
  CHECK(c.records.size() == 3);
}

TEST_CASE("annealed run logs the schedule") {
  auto cfg = small_config(AcTopology::kContextAware);
  cfg.anneal = true;
  cfg.total_steps = 4 * 20 * 10;
  const auto r = train(cfg);
  CHECK(r.records.front().eta == 1.0);
  CHECK(r.records.front().alpha == doctest::Approx(0.1));
  CHECK(r.records[r.records.size() - 2].eta == 0.0);
  CHECK(r.records[r.records.size() - 2].alpha == doctest::Approx(1.0));
}

TEST_CASE("checkpoint round trip") {
  auto cfg = small_config(AcTopology::kContextAware);
  auto trained = train(cfg).model;
  auto fresh = make_model(cfg);
  fresh.load_checkpoint(nlohmann::json::parse(trained->checkpoint().dump()));
  const auto batch = make_batch(*trained, 16, 9);
  CHECK(fresh.recompute_log_probs(batch) == trained->recompute_log_probs(batch));
  CHECK(fresh.checkpoint() == trained->checkpoint());
  auto other = MultiAgentActorCritic(cfg, 3, {2, 2, 2}, 6);
  CHECK_THROWS_AS(other.load_checkpoint(trained->checkpoint()), ConfigError);
}

TEST_CASE("Aloha rollouts run with shared observations") {
  AcConfig cfg = small_config(AcTopology::kContextAware);
  cfg.env.kind = EnvKind::kAloha;
  cfg.env.aloha = envs::AlohaSpec{.rows = 2, .cols = 2};
  cfg.share_observations = true;
  cfg.fixed_identity = true;
  cfg.total_steps = 4 * 25 * 2;
  const auto r = train(cfg);
  CHECK(r.records.size() == 3);
  for (const auto& rec : r.records) CHECK(std::isfinite(rec.value));
}

TEST_CASE("uniform baseline on the coordination game") {
  EnvConfig env;
  const double base = uniform_random_return(env, 4000, 1);
  // Uniform actions give each local state 0 with probability 1/2 after the
  // first step; reward 3, 0, 0, 2 on (0,0), (0,1), (1,0), (1,1).
  CHECK(std::abs(base - 20 * 1.25) < 0.3);
}
