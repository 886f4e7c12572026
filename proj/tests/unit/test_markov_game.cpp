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
#include <numeric>
#include <random>

#include "doctest.h"
#include "bnpg/bn_policy.hpp"
#include "bnpg/envs.hpp"
#include "bnpg/errors.hpp"
#include "bnpg/markov_game.hpp"
#include "support/oracles.hpp"

using namespace bnpg;

namespace {

JointDistributionTable random_joint(std::uint64_t seed, int ns, std::size_t na) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  JointDistributionTable t(ns, na);
  for (int s = 0; s < ns; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < na; ++a) total += (t.at(s, a) = unif(rng));
    for (std::size_t a = 0; a < na; ++a) t.at(s, a) /= total;
  }
  return t;
}

CooperativeMarkovGame constant_game(double c, double gamma) {
  const int ns = 3;
  const std::size_t na = 4;
  std::vector<double> p(ns * na * ns, 1.0 / ns), r(ns * na, c), mu(ns, 1.0 / ns);
  return CooperativeMarkovGame({2, 2}, ns, p, r, gamma, mu);
}

}  // namespace

TEST_CASE("joint action space is mixed radix with agent 0 most significant") {
  JointActionSpace space({2, 3, 2});
  CHECK(space.size() == 12);
  CHECK(space.encode(std::vector<int>{1, 2, 1}) == 1 * 6 + 2 * 2 + 1);
  const auto d = space.decode(7);
  CHECK(d == std::vector<int>{1, 0, 1});
  for (std::size_t a = 0; a < space.size(); ++a) {
    CHECK(space.encode(space.decode(a)) == a);
  }
}

TEST_CASE("game validation rejects malformed tables") {
  std::vector<double> p(2 * 2 * 2, 0.5), r(2 * 2, 0.0), mu{0.5, 0.5};
  CHECK_NOTHROW(CooperativeMarkovGame({2}, 2, p, r, 0.9, mu));
  auto bad = p;
  bad[0] = 0.6;
  CHECK_THROWS(CooperativeMarkovGame({2}, 2, bad, r, 0.9, mu));
  CHECK_THROWS(CooperativeMarkovGame({2}, 2, p, r, 0.9, {0.7, 0.7}));
  CHECK_THROWS(CooperativeMarkovGame({2}, 2, p, r, 1.0, mu));
  CHECK_THROWS(CooperativeMarkovGame({2}, 2, p, {0, 0, 0, 5}, 0.9, mu, 0.0, 1.0));
  CHECK_THROWS_AS(CooperativeMarkovGame({2}, 2, p, {0, 0}, 0.9, mu), DimensionError);
}

TEST_CASE("evaluate_policy with zero discount is the expected one-step reward") {
  const auto g = testing::random_game(3, 4, {2, 3}, 0.0);
  const auto joint = random_joint(4, 4, 6);
  const auto vt = evaluate_policy(g, joint);
  for (int s = 0; s < 4; ++s) {
    double expect = 0.0;
    for (std::size_t a = 0; a < 6; ++a) expect += joint.at(s, a) * g.reward(s, a);
    CHECK(vt.v[s] == doctest::Approx(expect).epsilon(1e-14));
  }
  double mean = 0.0;
  for (int s = 0; s < 4; ++s) mean += g.mu()[s] * vt.v[s];
  CHECK(value_from_start(g, joint) == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("constant reward gives c / (1 - gamma)") {
  const auto g = constant_game(2.5, 0.9);
  const auto joint = random_joint(1, 3, 4);
  const auto vt = evaluate_policy(g, joint);
  for (double v : vt.v) CHECK(v == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(value_from_start(g, joint) == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("value tables satisfy both Bellman equations and the reward bounds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = testing::random_game(seed, 6, {2, 3}, 0.93);
    const auto joint = random_joint(seed + 100, 6, 6);
    const auto vt = evaluate_policy(g, joint);
    CHECK(bellman_residual(g, joint, vt) <= 1e-8);
    for (int s = 0; s < 6; ++s) {
      double avg = 0.0;
      for (std::size_t a = 0; a < 6; ++a) avg += joint.at(s, a) * vt.q_at(s, a);
      CHECK(std::abs(avg - vt.v[s]) <= 1e-8);
      CHECK(vt.v[s] >= g.r_min() / (1 - g.gamma()) - 1e-9);
      CHECK(vt.v[s] <= g.r_max() / (1 - g.gamma()) + 1e-9);
    }
  }
}

TEST_CASE("coordination game uniform value agrees with Monte-Carlo rollouts") {
  const auto g = envs::coordination_game({});
  const auto joint = JointDistributionTable::uniform(4, 4);
  const double exact = value_from_start(g, joint);
  const auto mc = testing::monte_carlo_value(g, joint, 100000, 2024);
  CHECK(std::abs(exact - mc.mean) <= 3.0 * mc.stderr_);
}

TEST_CASE("visitation") {
  SUBCASE("zero discount returns mu") {
    const auto g = testing::random_game(8, 5, {2}, 0.0);
    const auto d = visitation(g, random_joint(2, 5, 2)).d;
    for (int s = 0; s < 5; ++s) CHECK(d[s] == doctest::Approx(g.mu()[s]).epsilon(1e-14));
  }
  SUBCASE("absorbing state") {
    std::vector<double> p{1.0, 1.0}, r{0.0, 1.0}, mu{1.0};
    CooperativeMarkovGame g({2}, 1, p, r, 0.8, mu);
    const auto d = visitation(g, JointDistributionTable::uniform(1, 2)).d;
    CHECK(d[0] == doctest::Approx(5.0).epsilon(1e-14));
  }
  SUBCASE("coordination game matches the truncated series") {
    const auto g = envs::coordination_game({});
    const auto joint = JointDistributionTable::uniform(4, 4);
    const auto d = visitation(g, joint).d;
    const auto ref = testing::truncated_visitation(g, joint);
    double total = 0.0;
    for (int s = 0; s < 4; ++s) {
      CHECK(std::abs(d[s] - ref[s]) <= 1e-8);
      total += d[s];
    }
    CHECK(std::abs(total - 20.0) <= 1e-8);
  }
  SUBCASE("random games up to 32 states and 64 joint actions") {
    std::mt19937_64 rng(77);
    for (int k = 0; k < 8; ++k) {
      const int ns = std::uniform_int_distribution<int>(2, 32)(rng);
      const std::vector<int> counts = k % 2 ? std::vector<int>{4, 4, 4} : std::vector<int>{3, 5};
      const auto g = testing::random_game(k, ns, counts, 0.9);
      const auto joint = random_joint(k + 9, ns, g.n_joint_actions());
      const auto d = visitation(g, joint).d;
      const auto ref = testing::truncated_visitation(g, joint);
      double total = 0.0;
      for (int s = 0; s < ns; ++s) {
        CHECK(std::abs(d[s] - ref[s]) <= 1e-8);
        CHECK(d[s] >= 0.0);
        total += d[s];
      }
      CHECK(std::abs(total - 10.0) <= 1e-8);
    }
  }
}

TEST_CASE("value is invariant under relabeling of states") {
  const int ns = 5;
  const auto g = testing::random_game(11, ns, {2, 2}, 0.9);
  const auto joint = random_joint(12, ns, 4);
  const std::vector<int> perm{3, 0, 4, 1, 2};  // old s -> new perm[s]
  std::vector<double> p(ns * 4 * ns), r(ns * 4), mu(ns);
  JointDistributionTable j2(ns, 4);
  for (int s = 0; s < ns; ++s) {
    mu[perm[s]] = g.mu()[s];
    for (std::size_t a = 0; a < 4; ++a) {
      r[perm[s] * 4 + a] = g.reward(s, a);
      j2.at(perm[s], a) = joint.at(s, a);
      for (int t = 0; t < ns; ++t) p[(perm[s] * 4 + a) * ns + perm[t]] = g.transition_row(s, a)[t];
    }
  }
  CooperativeMarkovGame g2({2, 2}, ns, p, r, 0.9, mu, 0.0, 1.0);
  CHECK(value_from_start(g2, j2) == doctest::Approx(value_from_start(g, joint)).epsilon(1e-12));
}

TEST_CASE("joint table shape mismatch is a dimension error") {
  const auto g = testing::random_game(1, 3, {2, 2});
  CHECK_THROWS_AS(evaluate_policy(g, JointDistributionTable::uniform(3, 3)), DimensionError);
  CHECK_THROWS_AS(visitation(g, JointDistributionTable::uniform(2, 4)), DimensionError);
}

TEST_CASE("game JSON round trip") {
  const auto g = testing::random_game(5, 4, {2, 3}, 0.87);
  const auto back = game_from_json(nlohmann::json::parse(game_to_json(g).dump()));
  CHECK(back.n_states() == g.n_states());
  CHECK(back.action_counts() == g.action_counts());
  CHECK(back.gamma() == g.gamma());
  for (std::size_t k = 0; k < g.transition_table().size(); ++k) {
    CHECK(std::abs(back.transition_table()[k] - g.transition_table()[k]) <= 1e-15);
  }
  for (std::size_t k = 0; k < g.reward_table().size(); ++k) {
    CHECK(std::abs(back.reward_table()[k] - g.reward_table()[k]) <= 1e-15);
  }
  CHECK_THROWS(game_from_json(nlohmann::json::parse(R"({"n_agents": 2})")));
}
