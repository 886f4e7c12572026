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
#include <cstdlib>
#include <random>

#include "doctest.h"
#include "bnpg/envs.hpp"
#include "bnpg/errors.hpp"
#include "bnpg/markov_game.hpp"

using namespace bnpg;
using namespace bnpg::envs;

namespace {

// Reward by number of agents in local state 0, written out by hand.
int reward_by_zeros(int n, int zeros) {
  static const int n2[] = {2, 0, 3};
  static const int n3[] = {2, 1, 0, 3};
  static const int n5[] = {2, 2, 1, 0, 3, 3};
  switch (n) {
    case 2: return n2[zeros];
    case 3: return n3[zeros];
    case 5: return n5[zeros];
  }
  return -1;
}

bool adjacent(int rows, int cols, int i, int j) {
  (void)rows;
  const int ri = i / cols, ci = i % cols, rj = j / cols, cj = j % cols;
  return std::abs(ri - rj) + std::abs(ci - cj) == 1;
}

}  // namespace

TEST_CASE("coordination reward on every state") {
  CHECK(coordination_reward(std::vector<int>{0, 0}) == 3);
  CHECK(coordination_reward(std::vector<int>{0, 1}) == 0);
  CHECK(coordination_reward(std::vector<int>{1, 1}) == 2);
  CHECK(coordination_reward(std::vector<int>{0, 1, 1}) == 1);
  for (int n : {2, 3, 5}) {
    for (int bits = 0; bits < (1 << n); ++bits) {
      std::vector<int> s(n);
      int zeros = 0;
      for (int i = 0; i < n; ++i) {
        s[i] = (bits >> i) & 1;
        zeros += s[i] == 0;
      }
      CHECK(coordination_reward(s) == reward_by_zeros(n, zeros));
    }
  }
}

TEST_CASE("coordination game tables") {
  const auto g = coordination_game({.n_agents = 2, .epsilon = 0.1});
  // State (0,0) = index 0; joint action (0,1) = index 1.
  CHECK(g.transition(0, 0, 0) == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(g.transition(3, 1, 0) == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(g.transition(2, 3, 3) == doctest::Approx(0.81).epsilon(1e-15));
  for (int n : {2, 3, 5}) {
    const auto gn = coordination_game({.n_agents = n, .epsilon = 0.1});
    const JointActionSpace states(std::vector<int>(n, 2));
    for (int s = 0; s < gn.n_states(); ++s) {
      const auto local = states.decode(s);
      for (std::size_t a = 0; a < gn.n_joint_actions(); ++a) {
        CHECK(gn.reward(s, a) == coordination_reward(local));
        double total = 0.0;
        for (double p : gn.transition_row(s, a)) total += p;
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
    // Marginal of one agent: P(s^i = 0 | a^i = 0) = 0.9.
    const std::size_t a0 = 0;
    double p_zero = 0.0;
    for (int t = 0; t < gn.n_states(); ++t) {
      if (states.digit(t, 0) == 0) p_zero += gn.transition(1, a0, t);
    }
    CHECK(p_zero == doctest::Approx(0.9).epsilon(1e-12));
  }
}

TEST_CASE("tabular coordination game refuses dense tables past eight agents") {
  CHECK_NOTHROW(envs::coordination_game({.n_agents = 5}));
  CHECK_THROWS_AS(envs::coordination_game({.n_agents = 9}), EnumerationLimitError);
  CHECK_THROWS_AS(envs::coordination_game({.n_agents = 1}), ConfigError);
}

TEST_CASE("coordination env follows the tabular game") {
  CoordinationEnv env({.n_agents = 2, .epsilon = 0.1, .episode_length = 5});
  auto obs = env.reset(3);
  CHECK(obs.size() == 2);
  CHECK(obs[0].size() == 4);
  int steps = 0;
  bool done = false;
  while (!done) {
    const auto before = env.local_states();
    const auto r = env.step(std::vector<int>{0, 1});
    CHECK(r.reward == coordination_reward(before));
    for (int i = 0; i < 2; ++i) {
      CHECK(r.observation[1][2 * i + env.local_states()[i]] == 1.0);
      CHECK(r.observation[1][2 * i + 1 - env.local_states()[i]] == 0.0);
    }
    done = r.done;
    ++steps;
  }
  CHECK(steps == 5);
}

TEST_CASE("aloha grid neighbours") {
  const AlohaSpec spec{.rows = 2, .cols = 5};
  CHECK(aloha_neighbors(spec, 0) == std::vector<int>{1, 5});
  const auto mid = aloha_neighbors(spec, 7);
  CHECK(mid.size() == 3);
}

TEST_CASE("aloha step examples") {
  const AlohaSpec spec{.rows = 2, .cols = 2, .new_message_prob = 0.0};
  std::mt19937_64 rng(0);
  const std::vector<int> backlog{1, 2, 0, 3};
  auto quiet = aloha_step(spec, backlog, std::vector<int>{0, 0, 0, 0}, rng);
  CHECK(quiet.reward == 0.0);
  CHECK(quiet.backlogs == backlog);

  auto one = aloha_step(spec, backlog, std::vector<int>{0, 1, 0, 0}, rng);
  CHECK(one.reward == doctest::Approx(0.1));
  CHECK(one.backlogs == std::vector<int>{1, 1, 0, 3});

  auto clash = aloha_step(spec, backlog, std::vector<int>{1, 1, 0, 0}, rng);
  CHECK(clash.reward == doctest::Approx(-20.0));
  CHECK(clash.backlogs == backlog);

  // Agent 2 has an empty backlog, so its send is a no-op.
  auto idle = aloha_step(spec, backlog, std::vector<int>{1, 0, 1, 0}, rng);
  CHECK(idle.reward == doctest::Approx(0.1));

  // Diagonal agents do not interfere.
  auto diag = aloha_step(spec, backlog, std::vector<int>{1, 0, 0, 1}, rng);
  CHECK(diag.reward == doctest::Approx(0.2));

  CHECK_THROWS_AS(aloha_step(spec, backlog, std::vector<int>{2, 0, 0, 0}, rng), DimensionError);
  CHECK_THROWS_AS(aloha_step(spec, backlog, std::vector<int>{0, 0}, rng), DimensionError);
}

TEST_CASE("aloha invariants over ten thousand seeded steps") {
  for (int layout = 0; layout < 2; ++layout) {
    const AlohaSpec spec = layout == 0 ? AlohaSpec{.rows = 2, .cols = 5}
                                       : AlohaSpec{.rows = 2, .cols = 2};
    const int n = spec.n_agents();
    AlohaEnv env(spec);
    AlohaEnv twin(spec);
    std::mt19937_64 rng(99);
    std::bernoulli_distribution coin(0.5);
    env.reset(1);
    twin.reset(1);
    for (int step = 0; step < 10000; ++step) {
      const bool all_wait = step % 4 == 0;
      std::vector<int> act(n);
      for (auto& a : act) a = all_wait ? 0 : coin(rng);
      const auto before = env.backlogs();
      const auto r = env.step(act);
      const auto r2 = twin.step(act);
      CHECK(r.reward == r2.reward);
      CHECK(env.backlogs() == twin.backlogs());

      int ok = 0, clash = 0;
      for (int i = 0; i < n; ++i) {
        if (act[i] != 1 || before[i] == 0) continue;
        bool hit = false;
        for (int j = 0; j < n; ++j) {
          hit = hit || (j != i && act[j] == 1 && before[j] > 0 &&
                        adjacent(spec.rows, spec.cols, i, j));
        }
        hit ? ++clash : ++ok;
        const int delta = env.backlogs()[i] - before[i];
        if (hit) {
          CHECK((delta == 0 || (delta == 1 && before[i] < spec.max_backlog) ||
                 before[i] == spec.max_backlog));
        } else {
          CHECK((delta == -1 || delta == 0));
        }
      }
      CHECK(r.reward == doctest::Approx(0.1 * ok - 10.0 * clash).epsilon(1e-12));
      if (all_wait) CHECK(r.reward == 0.0);
      for (int b : env.backlogs()) {
        CHECK(b >= 0);
        CHECK(b <= spec.max_backlog);
      }
      if (r.done) {
        env.reset(step);
        twin.reset(step);
      }
    }
  }
}
