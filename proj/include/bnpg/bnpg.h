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

#ifndef BNPG_BNPG_H_
#define BNPG_BNPG_H_

/* C interface to the BN policy gradient library.
 *
 * Objects are opaque handles released with the matching *_free call. Every
 * fallible function returns a bnpg_status; on failure bnpg_last_error()
 * describes the problem. The message is thread-local and valid until the
 * next call on the same thread. Strings returned through char** outputs
 * belong to the caller and are released with bnpg_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BNPG_API __declspec(dllexport)
#else
#define BNPG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  BNPG_OK = 0,
  BNPG_ERR_INVALID_ARGUMENT = 1,
  BNPG_ERR_DIMENSION = 2,
  BNPG_ERR_ENUMERATION_LIMIT = 3,
  BNPG_ERR_NUMERICAL = 4,
  BNPG_ERR_UNDEFINED_METRIC = 5,
  BNPG_ERR_IO = 6,
  BNPG_ERR_CONFIG = 7,
  BNPG_ERR_RUNTIME = 8,
  BNPG_ERR_INTERNAL = 9
} bnpg_status;

typedef struct bnpg_game bnpg_game;
typedef struct bnpg_policy bnpg_policy;

BNPG_API const char* bnpg_version(void);
BNPG_API const char* bnpg_last_error(void);
BNPG_API const char* bnpg_status_name(bnpg_status status);
BNPG_API void bnpg_string_free(char* s);

/* Games. */
BNPG_API bnpg_status bnpg_game_coordination(int n_agents, double epsilon,
                                            double gamma, bnpg_game** out);
BNPG_API bnpg_status bnpg_game_from_json(const char* json, bnpg_game** out);
BNPG_API bnpg_status bnpg_game_to_json(const bnpg_game* game, char** out);
BNPG_API bnpg_status bnpg_game_info(const bnpg_game* game, int* n_agents,
                                    int* n_states, double* gamma);
BNPG_API void bnpg_game_free(bnpg_game* game);

/* Tabular BN policies. topology is "uncorrelated", "line" or "fully".
 * adjacency is row-major n x n with adjacency[j*n+i] = 1 for an edge j->i.
 * New policies are uniform (all logits zero). */
BNPG_API bnpg_status bnpg_policy_create(const bnpg_game* game,
                                        const char* topology,
                                        bnpg_policy** out);
BNPG_API bnpg_status bnpg_policy_create_adjacency(const bnpg_game* game,
                                                  const uint8_t* adjacency,
                                                  bnpg_policy** out);
/* Redraws every logit from N(0, sigma^2). */
BNPG_API bnpg_status bnpg_policy_randomize(bnpg_policy* policy, uint64_t seed,
                                           double sigma);
BNPG_API bnpg_status bnpg_policy_to_json(const bnpg_policy* policy, char** out);
BNPG_API void bnpg_policy_free(bnpg_policy* policy);

/* Exact metrics. */
BNPG_API bnpg_status bnpg_value(const bnpg_game* game, const bnpg_policy* policy,
                                double* out);
BNPG_API bnpg_status bnpg_optimal_value(const bnpg_game* game, double* out);
BNPG_API bnpg_status bnpg_best_response_value(const bnpg_game* game,
                                              const bnpg_policy* policy,
                                              int agent, double* out);
BNPG_API bnpg_status bnpg_nash_gap(const bnpg_game* game,
                                   const bnpg_policy* policy, double* out);
BNPG_API bnpg_status bnpg_poa(const bnpg_game* game, const bnpg_policy* policy,
                              double* out);

/* Exact policy gradient ascent. step_size <= 0 uses the smoothness bound;
 * larger steps than the bound need allow_above_bound != 0. value_before and
 * grad_norm (sup norm) may be NULL. */
BNPG_API bnpg_status bnpg_smoothness_bound(const bnpg_game* game, double* out);
BNPG_API bnpg_status bnpg_gradient_step(const bnpg_game* game,
                                        bnpg_policy* policy, double step_size,
                                        int allow_above_bound,
                                        double* value_before,
                                        double* grad_norm);

/* Experiments. seeds and topology override the config when given
 * (seeds == NULL or n_seeds == 0 and topology == NULL keep the file's
 * values). A failing seed yields BNPG_ERR_RUNTIME and is named in the error
 * message. */
BNPG_API bnpg_status bnpg_experiment_run(const char* config_path,
                                         const char* out_dir,
                                         const uint64_t* seeds, size_t n_seeds,
                                         const char* topology);
/* CSV table of final values per topology (mean and standard error). */
BNPG_API bnpg_status bnpg_experiment_summarize(const char* dir, char** out);

#ifdef __cplusplus
}
#endif

#endif /* BNPG_BNPG_H_ */
