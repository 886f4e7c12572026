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

#include "bnpg/bnpg.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "bnpg/bn_policy.hpp"
#include "bnpg/envs.hpp"
#include "bnpg/errors.hpp"
#include "bnpg/exact_pg.hpp"
#include "bnpg/experiment.hpp"
#include "bnpg/markov_game.hpp"
#include "bnpg/solvers_metrics.hpp"

struct bnpg_game {
  bnpg::CooperativeMarkovGame game;
};

struct bnpg_policy {
  bnpg::TabularBnPolicy policy;
};

namespace {

thread_local std::string g_last_error;

bnpg_status fail(bnpg_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs f and maps library exceptions onto status codes.
template <class F>
bnpg_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return BNPG_OK;
  } catch (const bnpg::ConfigError& e) {
    return fail(BNPG_ERR_CONFIG, e.what());
  } catch (const bnpg::DimensionError& e) {
    return fail(BNPG_ERR_DIMENSION, e.what());
  } catch (const bnpg::EnumerationLimitError& e) {
    return fail(BNPG_ERR_ENUMERATION_LIMIT, e.what());
  } catch (const bnpg::NumericalError& e) {
    return fail(BNPG_ERR_NUMERICAL, e.what());
  } catch (const bnpg::UndefinedMetricError& e) {
    return fail(BNPG_ERR_UNDEFINED_METRIC, e.what());
  } catch (const bnpg::SeedFailure& e) {
    return fail(BNPG_ERR_RUNTIME, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(BNPG_ERR_IO, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(BNPG_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(BNPG_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::runtime_error& e) {
    return fail(BNPG_ERR_RUNTIME, e.what());
  } catch (const std::exception& e) {
    return fail(BNPG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BNPG_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw std::invalid_argument(std::string(what) + " is NULL");
}

void check_pair(const bnpg_game* game, const bnpg_policy* policy) {
  need(game, "game");
  need(policy, "policy");
  if (game->game.n_states() != policy->policy.n_states() ||
      game->game.action_counts() != policy->policy.action_counts()) {
    throw bnpg::DimensionError("policy does not fit this game");
  }
}

}  // namespace

extern "C" {

const char* bnpg_version(void) { return "0.1.0"; }

const char* bnpg_last_error(void) { return g_last_error.c_str(); }

const char* bnpg_status_name(bnpg_status status) {
  switch (status) {
    case BNPG_OK: return "ok";
    case BNPG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BNPG_ERR_DIMENSION: return "dimension mismatch";
    case BNPG_ERR_ENUMERATION_LIMIT: return "enumeration limit exceeded";
    case BNPG_ERR_NUMERICAL: return "numerical failure";
    case BNPG_ERR_UNDEFINED_METRIC: return "undefined metric";
    case BNPG_ERR_IO: return "i/o error";
    case BNPG_ERR_CONFIG: return "invalid configuration";
    case BNPG_ERR_RUNTIME: return "runtime failure";
    case BNPG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void bnpg_string_free(char* s) { std::free(s); }

bnpg_status bnpg_game_coordination(int n_agents, double epsilon, double gamma,
                                   bnpg_game** out) {
  return guarded([&] {
    need(out, "out");
    bnpg::envs::CoordinationGameSpec spec;
    spec.n_agents = n_agents;
    spec.epsilon = epsilon;
    spec.gamma = gamma;
    *out = new bnpg_game{bnpg::envs::coordination_game(spec)};
  });
}

bnpg_status bnpg_game_from_json(const char* json, bnpg_game** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new bnpg_game{bnpg::game_from_json(nlohmann::json::parse(json))};
  });
}

bnpg_status bnpg_game_to_json(const bnpg_game* game, char** out) {
  return guarded([&] {
    need(game, "game");
    need(out, "out");
    *out = copy_string(bnpg::game_to_json(game->game).dump());
  });
}

bnpg_status bnpg_game_info(const bnpg_game* game, int* n_agents, int* n_states,
                           double* gamma) {
  return guarded([&] {
    need(game, "game");
    if (n_agents) *n_agents = game->game.n_agents();
    if (n_states) *n_states = game->game.n_states();
    if (gamma) *gamma = game->game.gamma();
  });
}

void bnpg_game_free(bnpg_game* game) { delete game; }

bnpg_status bnpg_policy_create(const bnpg_game* game, const char* topology,
                               bnpg_policy** out) {
  return guarded([&] {
    need(game, "game");
    need(topology, "topology");
    need(out, "out");
    const auto dag = bnpg::Dag::fixed(bnpg::parse_topology(topology), game->game.n_agents());
    *out = new bnpg_policy{
        bnpg::TabularBnPolicy(dag, game->game.action_counts(), game->game.n_states())};
  });
}

bnpg_status bnpg_policy_create_adjacency(const bnpg_game* game, const uint8_t* adjacency,
                                         bnpg_policy** out) {
  return guarded([&] {
    need(game, "game");
    need(adjacency, "adjacency");
    need(out, "out");
    const int n = game->game.n_agents();
    std::vector<std::uint8_t> adj(adjacency, adjacency + static_cast<std::size_t>(n) * n);
    const auto dag = bnpg::Dag::from_adjacency(n, std::move(adj));
    *out = new bnpg_policy{
        bnpg::TabularBnPolicy(dag, game->game.action_counts(), game->game.n_states())};
  });
}

bnpg_status bnpg_policy_randomize(bnpg_policy* policy, uint64_t seed, double sigma) {
  return guarded([&] {
    need(policy, "policy");
    const auto& p = policy->policy;
    policy->policy = bnpg::TabularBnPolicy::gaussian(p.dag(), p.action_counts(),
                                                     p.n_states(), seed, sigma);
  });
}

bnpg_status bnpg_policy_to_json(const bnpg_policy* policy, char** out) {
  return guarded([&] {
    need(policy, "policy");
    need(out, "out");
    *out = copy_string(bnpg::policy_to_json(policy->policy).dump());
  });
}

void bnpg_policy_free(bnpg_policy* policy) { delete policy; }

bnpg_status bnpg_value(const bnpg_game* game, const bnpg_policy* policy, double* out) {
  return guarded([&] {
    check_pair(game, policy);
    need(out, "out");
    *out = bnpg::evaluate_exact(game->game, policy->policy).value;
  });
}

bnpg_status bnpg_optimal_value(const bnpg_game* game, double* out) {
  return guarded([&] {
    need(game, "game");
    need(out, "out");
    *out = bnpg::optimal_value(game->game);
  });
}

bnpg_status bnpg_best_response_value(const bnpg_game* game, const bnpg_policy* policy,
                                     int agent, double* out) {
  return guarded([&] {
    check_pair(game, policy);
    need(out, "out");
    if (agent < 0 || agent >= game->game.n_agents()) {
      throw std::invalid_argument("agent index out of range");
    }
    *out = bnpg::best_response_value(game->game, policy->policy, agent);
  });
}

bnpg_status bnpg_nash_gap(const bnpg_game* game, const bnpg_policy* policy, double* out) {
  return guarded([&] {
    check_pair(game, policy);
    need(out, "out");
    *out = bnpg::nash_gap(game->game, policy->policy);
  });
}

bnpg_status bnpg_poa(const bnpg_game* game, const bnpg_policy* policy, double* out) {
  return guarded([&] {
    check_pair(game, policy);
    need(out, "out");
    *out = bnpg::poa(game->game, policy->policy);
  });
}

bnpg_status bnpg_smoothness_bound(const bnpg_game* game, double* out) {
  return guarded([&] {
    need(game, "game");
    need(out, "out");
    *out = bnpg::smoothness_step_bound(game->game);
  });
}

bnpg_status bnpg_gradient_step(const bnpg_game* game, bnpg_policy* policy,
                               double step_size, int allow_above_bound,
                               double* value_before, double* grad_norm) {
  return guarded([&] {
    check_pair(game, policy);
    const double bound = bnpg::smoothness_step_bound(game->game);
    double step = step_size;
    if (step <= 0.0) step = std::isfinite(bound) ? bound : 1.0;
    if (step > bound && !allow_above_bound) {
      throw bnpg::ConfigError("step size exceeds the smoothness bound " +
                              std::to_string(bound));
    }
    const auto eval = bnpg::evaluate_exact(game->game, policy->policy);
    const auto grad = bnpg::bn_policy_gradient(game->game, policy->policy, eval);
    if (!grad.all_finite()) throw bnpg::NumericalError("non-finite gradient");
    policy->policy.add_scaled(grad.tables, step);
    if (value_before) *value_before = eval.value;
    if (grad_norm) *grad_norm = grad.sup_norm();
  });
}

bnpg_status bnpg_experiment_run(const char* config_path, const char* out_dir,
                                const uint64_t* seeds, size_t n_seeds,
                                const char* topology) {
  return guarded([&] {
    need(config_path, "config_path");
    need(out_dir, "out_dir");
    bnpg::ExperimentConfig config = bnpg::load_experiment_config(config_path);
    if (seeds != nullptr && n_seeds > 0) config.seeds.assign(seeds, seeds + n_seeds);
    if (topology != nullptr) config.topologies = {bnpg::parse_ac_topology(topology)};
    config.validate();
    bnpg::run_experiment(config, out_dir);
  });
}

bnpg_status bnpg_experiment_summarize(const char* dir, char** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = copy_string(bnpg::format_final_table(bnpg::summarize_directory(dir)));
  });
}

}  // extern "C"
