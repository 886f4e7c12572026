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

#ifndef BNPG_DAG_SAMPLER_HPP_
#define BNPG_DAG_SAMPLER_HPP_

// Differentiable context-dependent DAGs over agents.
//
// An Edge Net scores every strictly upper triangular slot of an N x N matrix
// with an (edge, no-edge) logit pair and a Permutation Net scores an N x N
// assignment. Edges are drawn with straight-through Gumbel-Softmax and the
// ordering with Gumbel-Sinkhorn, then G = P^T U P. Batched tensors use the
// layout [B, N, N]; G[b][j][i] = 1 means agent j is a parent of agent i.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bnpg/bn_policy.hpp"
#include "bnpg/tensor.hpp"

namespace bnpg {

// Standard Gumbel(0,1) draws.
std::vector<double> gumbel_noise(std::size_t count, std::mt19937_64& rng);

// Straight-through edge relaxation. logits: [B, N*N*2] with slot (r, c) at
// offset (r*N + c)*2, component 0 = edge. noise has the same size as logits.
// Returns [B, N, N], zero outside r < c. With hard = true the forward value is
// the exact 0/1 argmax and the gradient flows through the soft probabilities.
ad::Tensor sample_edges(const ad::Tensor& logits, int n, double temperature,
                        std::span<const double> noise, bool hard);

// Log-space Sinkhorn on [B, N, N] scores: rows then columns, iters times.
// Returns log of the doubly stochastic matrix.
ad::Tensor sinkhorn_log(const ad::Tensor& log_scores, int iters);

// Hard decoding of one N x N soft permutation (row-major).
std::vector<double> greedy_assignment(std::span<const double> soft, int n);
std::vector<double> hungarian_assignment(std::span<const double> soft, int n);

// Gumbel-Sinkhorn permutation. logits and noise: [B, N*N]. Returns [B, N, N].
// Hard mode decodes each soft matrix to an exact permutation and passes the
// gradient straight through.
ad::Tensor sample_permutation(const ad::Tensor& logits, int n, int sinkhorn_iters,
                              double temperature, std::span<const double> noise,
                              bool hard, bool use_hungarian = false);

// Plain-value wrappers that draw their own noise.
struct EdgeDraw {
  std::vector<double> soft;  // N x N
  std::vector<std::uint8_t> hard;
};
EdgeDraw sample_edges(std::span<const double> logits, int n, double temperature,
                      std::mt19937_64& rng);

struct PermutationDraw {
  std::vector<double> soft;  // N x N, doubly stochastic up to Sinkhorn error
  std::vector<std::uint8_t> hard;
};
PermutationDraw sample_permutation(std::span<const double> logits, int n,
                                   int sinkhorn_iters, double temperature,
                                   std::mt19937_64& rng,
                                   bool use_hungarian = false);

// G = P^T U P. Checks that perm is a permutation and upper is strictly upper
// triangular 0/1. Row a of perm has its 1 at the agent placed at position a.
Dag assemble_dag(std::span<const std::uint8_t> perm,
                 std::span<const std::uint8_t> upper, int n);
// Batched tensor form: [B,N,N] x [B,N,N] -> [B,N,N].
ad::Tensor assemble_dag(const ad::Tensor& perm, const ad::Tensor& upper);

double dag_density(const Dag& dag);
// Per-sample density of [B, N, N] adjacency tensors -> [B].
ad::Tensor dag_density(const ad::Tensor& g, int n);

double density_penalty(double density, double eta, double alpha);
// alpha * mean_b |rho_b - eta| on the soft densities -> [1].
ad::Tensor density_penalty(const ad::Tensor& density, double eta, double alpha);

struct DensitySchedule {
  double a = 20.0;  // percent of total steps
  double b = 60.0;
  double c = 90.0;
  int l_eta = 5;
  int l_alpha = 5;
  double alpha_lo = 0.1;
  double alpha_hi = 1.0;

  void validate() const;
};

struct ScheduleValue {
  double eta;
  double alpha;
};

// Staircase: eta = 1 before a%, steps down l_eta times to 0 at b%; alpha stays
// at alpha_lo before b% and steps up l_alpha times to alpha_hi at c%.
ScheduleValue schedule_at(const DensitySchedule& schedule, long step,
                          long total_steps);

struct DagSamplerConfig {
  int n_agents = 2;
  int input_dim = 1;
  int hidden = 64;
  double temperature = 1.0;
  double sinkhorn_temperature = 1.0;
  int sinkhorn_iters = 20;
  bool fixed_identity = false;   // P = I, no Permutation Net
  bool force_empty = false;      // U = 0, reproduces independent actors
  bool use_hungarian = false;
};

// Noise and hard decisions recorded at act time for a batch of B contexts.
struct DagRecord {
  int batch = 0;
  std::vector<double> edge_noise;  // B x 2N^2
  std::vector<double> perm_noise;  // B x N^2
  std::vector<double> hard_upper;  // B x N^2
  std::vector<double> hard_perm;   // B x N^2
  std::vector<Dag> dags;
};

struct DagForward {
  ad::Tensor g;             // [B,N,N], forward = recorded hard G
  ad::Tensor soft_density;  // [B]
};

class DagSampler {
 public:
  DagSampler() = default;
  DagSampler(const DagSamplerConfig& config, std::mt19937_64& rng);

  const DagSamplerConfig& config() const { return config_; }
  int n_agents() const { return config_.n_agents; }

  // Draws one DAG per row of contexts ([B, input_dim] row-major).
  DagRecord draw(std::span<const double> contexts, int batch,
                 std::mt19937_64& rng);

  // Rebuilds the straight-through G for recorded draws on a training tape.
  DagForward forward(ad::Tape& tape, const ad::Tensor& contexts,
                     const DagRecord& record);

  std::vector<ad::Parameter*> parameters();
  ad::Mlp& edge_net() { return edge_net_; }
  ad::Mlp& perm_net() { return perm_net_; }

 private:
  DagSamplerConfig config_;
  ad::Mlp edge_net_;
  ad::Mlp perm_net_;
};

}  // namespace bnpg

#endif  // BNPG_DAG_SAMPLER_HPP_
