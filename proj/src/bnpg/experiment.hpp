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

#ifndef BNPG_EXPERIMENT_HPP_
#define BNPG_EXPERIMENT_HPP_

// Seeded experiment sweeps: tabular exact policy gradient on fixed DAGs or
// sample-based actor-critic, written out as one CSV per (topology, seed).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnpg/marl_ac.hpp"
#include "bnpg/records.hpp"
#include "json.hpp"

namespace bnpg {

enum class ExperimentMode { kTabularExact, kActorCritic };

struct TabularSettings {
  long iterations = 5000;
  double step_size = 1.0;
  bool allow_step_above_bound = true;
  double init_sigma = 0.1;
  long log_every = 1;
  double grad_tolerance = 1e-8;
};

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::kTabularExact;
  EnvConfig env;
  double gamma = 0.95;  // discount for the actor-critic env
  std::vector<AcTopology> topologies{AcTopology::kUncorrelated, AcTopology::kLine,
                                     AcTopology::kFully};
  std::vector<std::uint64_t> seeds;
  int workers = 0;  // 0 = hardware concurrency
  bool record_wall_time = false;
  TabularSettings tabular;
  AcConfig actor_critic;

  void validate() const;
};

// Names accepted by the "defaults" key.
std::vector<std::string> preset_names();
nlohmann::json preset(const std::string& name);

// Applies the named preset (if any), then the file's own keys on top.
// Throws ConfigError on unknown keys or bad values.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Raised when one seed fails; carries the seed for the exit diagnostic.
class SeedFailure : public std::runtime_error {
 public:
  SeedFailure(AcTopology topology, std::uint64_t seed, const std::string& what)
      : std::runtime_error(std::string(ac_topology_name(topology)) + " seed " +
                           std::to_string(seed) + ": " + what),
        topology_(topology),
        seed_(seed) {}
  AcTopology topology() const { return topology_; }
  std::uint64_t seed() const { return seed_; }

 private:
  AcTopology topology_;
  std::uint64_t seed_;
};

// One seed of one topology.
std::vector<ExperimentRecord> run_single(const ExperimentConfig& config,
                                         AcTopology topology,
                                         std::uint64_t seed);

struct SummaryRow {
  long iteration = 0;
  int n = 0;
  double mean[5];    // value, poa, nash_gap, dag_density, grad_norm
  double stderr_[5];
};

inline constexpr const char* kSummaryHeader =
    "iteration,n,value_mean,value_stderr,poa_mean,poa_stderr,nash_gap_mean,"
    "nash_gap_stderr,dag_density_mean,dag_density_stderr,grad_norm_mean,"
    "grad_norm_stderr";

// Mean and stderr = population std / sqrt(n) over the non-missing entries.
void mean_stderr(const std::vector<double>& xs, double& mean, double& se);

// Per-iteration aggregate over seeds.
std::vector<SummaryRow> summarize_runs(
    const std::vector<std::vector<ExperimentRecord>>& runs);

struct RunOutput {
  std::vector<std::filesystem::path> files;
};

// Writes <out>/<topology>/seed_<k>.csv and <out>/summary_<topology>.csv.
RunOutput run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& out_dir);

struct TopologyFinal {
  std::string topology;
  int n_seeds = 0;
  double mean[4];  // value, poa, nash_gap, dag_density (final rows)
  double stderr_[4];
};

inline constexpr const char* kFinalHeader =
    "topology,n_seeds,value_mean,value_stderr,poa_mean,poa_stderr,"
    "nash_gap_mean,nash_gap_stderr,dag_density_mean,dag_density_stderr";

// Reads <dir>/<topology>/seed_*.csv and aggregates the final row of each.
std::vector<TopologyFinal> summarize_directory(const std::filesystem::path& dir);
std::string format_final_table(const std::vector<TopologyFinal>& rows);

}  // namespace bnpg

#endif  // BNPG_EXPERIMENT_HPP_
