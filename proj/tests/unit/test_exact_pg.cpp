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
#include <sstream>

#include "doctest.h"
#include "bnpg/bn_policy.hpp"
#include "bnpg/envs.hpp"
#include "bnpg/exact_pg.hpp"
#include "support/oracles.hpp"

using namespace bnpg;

namespace {

void check_against_differences(const CooperativeMarkovGame& g, TabularBnPolicy& pol) {
  const auto grad = bn_policy_gradient(g, pol);
  REQUIRE(grad.all_finite());
  auto value = [&] { return evaluate_exact(g, pol).value; };
  for (int i = 0; i < pol.n_agents(); ++i) {
    for (std::size_t k = 0; k < pol.theta(i).size(); ++k) {
      const double fd = testing::central_difference(value, pol.theta(i)[k], 1e-5);
      const double an = grad.tables[i][k];
      CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("gradient matches central differences on random games") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 6; ++k) {
    const int n_agents = 1 + k % 3;
    const auto counts = testing::random_counts(rng, n_agents, 3);
    const int ns = 2 + k % 4;
    const auto g = testing::random_game(100 + k, ns, counts, 0.85);
    for (Topology t : {Topology::kUncorrelated, Topology::kLineCorrelated,
                       Topology::kFullyCorrelated}) {
      auto pol = TabularBnPolicy::gaussian(Dag::fixed(t, n_agents), counts, ns, k, 0.7);
      check_against_differences(g, pol);
    }
  }
}

TEST_CASE("gradient rows sum to zero") {
  const auto g = testing::random_game(4, 3, {3, 2}, 0.9);
  const auto pol = TabularBnPolicy::gaussian(Dag::fixed(Topology::kFullyCorrelated, 2),
                                             {3, 2}, 3, 1, 1.0);
  const auto grad = bn_policy_gradient(g, pol);
  for (int i = 0; i < 2; ++i) {
    const int k = pol.action_counts()[i];
    for (int s = 0; s < 3; ++s) {
      for (int c = 0; c < pol.n_parent_configs(i); ++c) {
        double sum = 0.0;
        for (int a = 0; a < k; ++a) sum += grad.tables[i][pol.theta_offset(i, s, c) + a];
        CHECK(std::abs(sum) <= 1e-12);
      }
    }
  }
}

TEST_CASE("gradient vanishes at a deterministic optimum") {
  const auto g = envs::coordination_game({});
  TabularBnPolicy pol(Dag::fixed(Topology::kUncorrelated, 2), {2, 2}, 4);
  // Everybody goes to local state 0 from every state.
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < 4; ++s) pol.theta(i)[pol.theta_offset(i, s, 0)] = 60.0;
  CHECK(bn_policy_gradient(g, pol).sup_norm() <= 1e-12);
}

TEST_CASE("smoothness step bound") {
  const auto g = envs::coordination_game({.n_agents = 2, .gamma = 0.95});
  const double expect = std::pow(0.05, 3) / (8.0 * 2.0 * 3.0);
  CHECK(smoothness_step_bound(g) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(smoothness_step_bound(g) == doctest::Approx(2.604e-6).epsilon(1e-3));

  CooperativeMarkovGame one({2}, 1, {1.0, 1.0}, {0.0, 1.0}, 0.0, {1.0}, 0.0, 1.0);
  CHECK(smoothness_step_bound(one) == doctest::Approx(0.125));

  CooperativeMarkovGame flat({2}, 1, {1.0, 1.0}, {0.4, 0.4}, 0.5, {1.0});
  CHECK(smoothness_step_bound(flat) == std::numeric_limits<double>::infinity());
}

TEST_CASE("ascent with the bound step is monotone") {
  const auto g = testing::random_game(2, 3, {2, 2}, 0.5);
  auto pol = TabularBnPolicy::gaussian(Dag::fixed(Topology::kLineCorrelated, 2), {2, 2}, 3, 2, 1.0);
  AscentConfig cfg;
  cfg.max_iters = 200;
  const auto res = ascend(g, pol, cfg);
  CHECK(res.step_size == doctest::Approx(smoothness_step_bound(g)));
  CHECK(res.monotone);
  CHECK(res.trajectory.size() >= 2);
}

TEST_CASE("ascent improves value and refuses oversize steps unless allowed") {
  const auto g = envs::coordination_game({});
  auto pol = TabularBnPolicy::gaussian(Dag::fixed(Topology::kFullyCorrelated, 2), {2, 2}, 4, 6, 0.1);
  AscentConfig cfg;
  cfg.step_size = 1.0;
  cfg.max_iters = 50;
  CHECK_THROWS(ascend(g, pol, cfg));
  cfg.allow_step_above_bound = true;
  const double before = evaluate_exact(g, pol).value;
  const auto res = ascend(g, pol, cfg);
  CHECK(res.monotone);
  CHECK(evaluate_exact(g, pol).value > before);
}

TEST_CASE("callback can stop ascent early") {
  const auto g = envs::coordination_game({});
  auto pol = TabularBnPolicy::gaussian(Dag::fixed(Topology::kUncorrelated, 2), {2, 2}, 4, 6, 0.1);
  AscentConfig cfg;
  cfg.step_size = 1.0;
  cfg.allow_step_above_bound = true;
  cfg.max_iters = 100;
  int calls = 0;
  const auto res = ascend(g, pol, cfg, [&](const AscentRecord&, const TabularBnPolicy&) {
    return ++calls < 5;
  });
  CHECK(calls == 5);
  CHECK(res.trajectory.size() == 5);
}

TEST_CASE("trajectory CSV") {
  std::ostringstream out;
  write_trajectory_csv(out, {{0, 1.5, 0.25, 0.5, 0.1, 3, "fully_correlated"}});
  CHECK(out.str().find("fully_correlated") != std::string::npos);
  CHECK(out.str().find("1.5") != std::string::npos);
}
