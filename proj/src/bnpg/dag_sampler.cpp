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

#include "bnpg/dag_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bnpg/errors.hpp"

namespace bnpg {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + " are not finite");
  }
}

ad::Tensor perturb(const ad::Tensor& logits, std::span<const double> noise,
                   double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (noise.size() != logits.size()) {
    throw DimensionError("noise size does not match logits");
  }
  require_finite(logits.value(), "logits");
  ad::Tape& tape = *logits.tape();
  ad::Tensor g = tape.constant(logits.shape(),
                               std::vector<double>(noise.begin(), noise.end()));
  return ad::scale(ad::add(logits, g), 1.0 / temperature);
}

}  // namespace

std::vector<double> gumbel_noise(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(count);
  for (auto& g : out) {
    double u = unif(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    g = -std::log(-std::log(u));
  }
  return out;
}

ad::Tensor sample_edges(const ad::Tensor& logits, int n, double temperature,
                        std::span<const double> noise, bool hard) {
  const std::size_t per = static_cast<std::size_t>(2) * n * n;
  if (n < 1 || logits.size() % per != 0) {
    throw DimensionError("edge logits must be [B, 2N^2]");
  }
  const int batch = static_cast<int>(logits.size() / per);
  ad::Tape& tape = *logits.tape();
  ad::Tensor y = ad::reshape(perturb(logits, noise, temperature), {batch, n * n, 2});
  ad::Tensor prob = ad::reshape(ad::slice(ad::softmax(y), 0, 1), {batch, n, n});
  std::vector<double> mask(static_cast<std::size_t>(n) * n, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) mask[r * n + c] = 1.0;
  }
  ad::Tensor soft = ad::mul(prob, tape.constant({n, n}, mask));
  if (!hard) return soft;
  const auto& yv = y.value();
  std::vector<double> bits(soft.size());
  for (std::size_t k = 0; k < bits.size(); ++k) {
    bits[k] = (yv[2 * k] > yv[2 * k + 1] ? 1.0 : 0.0) * mask[k % mask.size()];
  }
  return ad::straight_through(soft, std::move(bits));
}

ad::Tensor sinkhorn_log(const ad::Tensor& log_scores, int iters) {
  if (iters < 1) throw std::invalid_argument("sinkhorn needs >= 1 iteration");
  ad::Tensor x = log_scores;
  for (int k = 0; k < iters; ++k) {
    x = ad::log_softmax(x);
    x = ad::transpose(ad::log_softmax(ad::transpose(x)));
  }
  return x;
}

std::vector<double> greedy_assignment(std::span<const double> soft, int n) {
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<bool> used(n, false);
  for (int r = 0; r < n; ++r) {
    int best = -1;
    for (int c = 0; c < n; ++c) {
      if (!used[c] && (best < 0 || soft[r * n + c] > soft[r * n + best])) best = c;
    }
    used[best] = true;
    out[r * n + best] = 1.0;
  }
  return out;
}

// Min-cost assignment on -log(soft), O(n^3) potentials method.
std::vector<double> hungarian_assignment(std::span<const double> soft, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](int r, int c) {
    return -std::log(std::max(soft[r * n + c], 1e-300));
  };
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> done(n + 1, false);
    do {
      done[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (done[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (done[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int j = 1; j <= n; ++j) out[(p[j] - 1) * n + (j - 1)] = 1.0;
  return out;
}

ad::Tensor sample_permutation(const ad::Tensor& logits, int n, int sinkhorn_iters,
                              double temperature, std::span<const double> noise,
                              bool hard, bool use_hungarian) {
  const std::size_t per = static_cast<std::size_t>(n) * n;
  if (n < 1 || logits.size() % per != 0) {
    throw DimensionError("permutation logits must be [B, N^2]");
  }
  const int batch = static_cast<int>(logits.size() / per);
  ad::Tensor x = ad::reshape(perturb(logits, noise, temperature), {batch, n, n});
  ad::Tensor soft = ad::exp(sinkhorn_log(x, sinkhorn_iters));
  if (!hard) return soft;
  const auto& sv = soft.value();
  std::vector<double> bits(sv.size());
  for (int b = 0; b < batch; ++b) {
    std::span<const double> m(sv.data() + b * per, per);
    auto decoded = use_hungarian ? hungarian_assignment(m, n) : greedy_assignment(m, n);
    std::copy(decoded.begin(), decoded.end(), bits.begin() + b * per);
  }
  return ad::straight_through(soft, std::move(bits));
}

EdgeDraw sample_edges(std::span<const double> logits, int n, double temperature,
                      std::mt19937_64& rng) {
  ad::Tape tape;
  ad::Tensor l = tape.constant({1, static_cast<int>(logits.size())},
                               std::vector<double>(logits.begin(), logits.end()));
  const auto noise = gumbel_noise(logits.size(), rng);
  ad::Tensor soft = sample_edges(l, n, temperature, noise, false);
  ad::Tensor hard = sample_edges(l, n, temperature, noise, true);
  EdgeDraw out;
  out.soft = soft.value();
  for (double v : hard.value()) out.hard.push_back(v > 0.5 ? 1 : 0);
  return out;
}

PermutationDraw sample_permutation(std::span<const double> logits, int n,
                                   int sinkhorn_iters, double temperature,
                                   std::mt19937_64& rng, bool use_hungarian) {
  ad::Tape tape;
  ad::Tensor l = tape.constant({1, static_cast<int>(logits.size())},
                               std::vector<double>(logits.begin(), logits.end()));
  const auto noise = gumbel_noise(logits.size(), rng);
  ad::Tensor soft =
      sample_permutation(l, n, sinkhorn_iters, temperature, noise, false);
  PermutationDraw out;
  out.soft = soft.value();
  const auto hard = use_hungarian ? hungarian_assignment(out.soft, n)
                                  : greedy_assignment(out.soft, n);
  for (double v : hard) out.hard.push_back(v > 0.5 ? 1 : 0);
  return out;
}

Dag assemble_dag(std::span<const std::uint8_t> perm,
                 std::span<const std::uint8_t> upper, int n) {
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  if (n < 1 || perm.size() != nn || upper.size() != nn) {
    throw DimensionError("assemble_dag expects two N x N matrices");
  }
  std::vector<int> order(n, -1);
  std::vector<int> col_count(n, 0);
  for (int a = 0; a < n; ++a) {
    int ones = 0;
    for (int j = 0; j < n; ++j) {
      const auto v = perm[a * n + j];
      if (v > 1) throw std::invalid_argument("permutation entries must be 0/1");
      if (v) {
        ++ones;
        ++col_count[j];
        order[a] = j;
      }
    }
    if (ones != 1) throw std::invalid_argument("not a permutation matrix");
  }
  for (int c : col_count) {
    if (c != 1) throw std::invalid_argument("not a permutation matrix");
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const auto v = upper[r * n + c];
      if (v > 1 || (c <= r && v != 0)) {
        throw std::invalid_argument("upper must be strictly upper triangular 0/1");
      }
    }
  }
  return Dag::from_order_and_upper(order, upper);
}

ad::Tensor assemble_dag(const ad::Tensor& perm, const ad::Tensor& upper) {
  return ad::matmul(ad::matmul(ad::transpose(perm), upper), perm);
}

double dag_density(const Dag& dag) {
  const int n = dag.n_agents();
  if (n < 2) throw std::invalid_argument("DAG density needs N >= 2");
  return 2.0 * dag.edge_count() / (static_cast<double>(n) * (n - 1));
}

ad::Tensor dag_density(const ad::Tensor& g, int n) {
  if (n < 2) throw std::invalid_argument("DAG density needs N >= 2");
  const int batch = static_cast<int>(g.size() / (static_cast<std::size_t>(n) * n));
  return ad::scale(ad::sum_last(ad::reshape(g, {batch, n * n})),
                   2.0 / (static_cast<double>(n) * (n - 1)));
}

double density_penalty(double density, double eta, double alpha) {
  return alpha * std::abs(density - eta);
}

ad::Tensor density_penalty(const ad::Tensor& density, double eta, double alpha) {
  return ad::scale(ad::mean(ad::abs(ad::add_scalar(density, -eta))), alpha);
}

void DensitySchedule::validate() const {
  if (!(0.0 <= a && a <= b && b <= c && c <= 100.0)) {
    throw ConfigError("schedule needs 0 <= a <= b <= c <= 100");
  }
  if (l_eta < 1 || l_alpha < 1) throw ConfigError("schedule step counts must be >= 1");
  if (!(alpha_lo >= 0.0 && alpha_hi >= 0.0)) throw ConfigError("alpha must be >= 0");
}

ScheduleValue schedule_at(const DensitySchedule& s, long step, long total_steps) {
  s.validate();
  if (step < 0 || total_steps < 0 || step > total_steps) {
    throw std::invalid_argument("schedule step out of range");
  }
  const double p = total_steps == 0
                       ? 100.0
                       : 100.0 * static_cast<double>(step) / static_cast<double>(total_steps);
  ScheduleValue out{};
  if (p < s.a) {
    out.eta = 1.0;
  } else if (p >= s.b) {
    out.eta = 0.0;
  } else {
    out.eta = 1.0 - std::floor((p - s.a) / (s.b - s.a) * s.l_eta) / s.l_eta;
  }
  if (p < s.b) {
    out.alpha = s.alpha_lo;
  } else if (p >= s.c) {
    out.alpha = s.alpha_hi;
  } else {
    const double frac = std::floor((p - s.b) / (s.c - s.b) * s.l_alpha) / s.l_alpha;
    out.alpha = s.alpha_lo + (s.alpha_hi - s.alpha_lo) * frac;
  }
  return out;
}

DagSampler::DagSampler(const DagSamplerConfig& config, std::mt19937_64& rng)
    : config_(config) {
  const int n = config.n_agents;
  if (n < 1 || config.input_dim < 1 || config.hidden < 1) {
    throw ConfigError("DAG sampler needs positive sizes");
  }
  if (!(config.temperature > 0.0) || !(config.sinkhorn_temperature > 0.0) ||
      config.sinkhorn_iters < 1) {
    throw ConfigError("DAG sampler temperatures and iterations must be positive");
  }
  edge_net_ = ad::Mlp({config.input_dim, config.hidden, config.hidden, 2 * n * n}, rng);
  perm_net_ = ad::Mlp({config.input_dim, config.hidden, config.hidden, n * n}, rng);
}

std::vector<ad::Parameter*> DagSampler::parameters() {
  std::vector<ad::Parameter*> out;
  if (!config_.force_empty) out = edge_net_.parameters();
  if (!config_.fixed_identity) {
    for (auto* p : perm_net_.parameters()) out.push_back(p);
  }
  return out;
}

DagRecord DagSampler::draw(std::span<const double> contexts, int batch,
                           std::mt19937_64& rng) {
  const int n = config_.n_agents;
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  if (contexts.size() != static_cast<std::size_t>(batch) * config_.input_dim) {
    throw DimensionError("contexts must be [B, input_dim]");
  }
  DagRecord rec;
  rec.batch = batch;
  rec.hard_upper.assign(batch * nn, 0.0);
  rec.hard_perm.assign(batch * nn, 0.0);
  ad::Tape tape;
  ad::Tensor x = tape.constant({batch, config_.input_dim},
                               std::vector<double>(contexts.begin(), contexts.end()));
  if (!config_.force_empty) {
    rec.edge_noise = gumbel_noise(batch * 2 * nn, rng);
    ad::Tensor u = sample_edges(edge_net_.forward(tape, x), n, config_.temperature,
                                rec.edge_noise, true);
    rec.hard_upper = u.value();
  }
  if (config_.fixed_identity) {
    for (int b = 0; b < batch; ++b) {
      for (int k = 0; k < n; ++k) rec.hard_perm[b * nn + k * n + k] = 1.0;
    }
  } else {
    rec.perm_noise = gumbel_noise(batch * nn, rng);
    ad::Tensor p = sample_permutation(perm_net_.forward(tape, x), n,
                                      config_.sinkhorn_iters,
                                      config_.sinkhorn_temperature, rec.perm_noise,
                                      true, config_.use_hungarian);
    rec.hard_perm = p.value();
  }
  rec.dags.reserve(batch);
  std::vector<std::uint8_t> pm(nn), um(nn);
  for (int b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < nn; ++k) {
      pm[k] = rec.hard_perm[b * nn + k] > 0.5 ? 1 : 0;
      um[k] = rec.hard_upper[b * nn + k] > 0.5 ? 1 : 0;
    }
    rec.dags.push_back(assemble_dag(pm, um, n));
  }
  return rec;
}

DagForward DagSampler::forward(ad::Tape& tape, const ad::Tensor& contexts,
                               const DagRecord& record) {
  const int n = config_.n_agents;
  const int batch = record.batch;
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  ad::Tensor u_soft, u;
  if (config_.force_empty) {
    u_soft = u = tape.constant({batch, n, n}, std::vector<double>(batch * nn, 0.0));
  } else {
    u_soft = sample_edges(edge_net_.forward(tape, contexts), n, config_.temperature,
                          record.edge_noise, false);
    u = ad::straight_through(u_soft, record.hard_upper);
  }
  ad::Tensor p_soft, p;
  if (config_.fixed_identity) {
    p_soft = p = tape.constant({batch, n, n}, record.hard_perm);
  } else {
    p_soft = sample_permutation(perm_net_.forward(tape, contexts), n,
                                config_.sinkhorn_iters, config_.sinkhorn_temperature,
                                record.perm_noise, false);
    p = ad::straight_through(p_soft, record.hard_perm);
  }
  DagForward out;
  out.g = assemble_dag(p, u);
  out.soft_density = n >= 2 ? dag_density(assemble_dag(p_soft, u_soft), n)
                            : tape.constant({batch}, std::vector<double>(batch, 0.0));
  return out;
}

}  // namespace bnpg
