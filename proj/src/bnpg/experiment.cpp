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

#include "bnpg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bnpg/errors.hpp"
#include "bnpg/exact_pg.hpp"
#include "bnpg/solvers_metrics.hpp"

namespace bnpg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& section) {
  if (!obj.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + section);
  }
}

template <class T>
void read(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

const json kCoordinationPreset = {
    {"mode", "tabular_exact"},
    {"env", {{"name", "coordination_game"},
             {"n_agents", 2},
             {"epsilon", 0.1},
             {"gamma", 0.95},
             {"episode_length", 20}}},
    {"topologies", {"uncorrelated", "line", "fully"}},
    {"seeds", {{"start", 0}, {"count", 50}}},
    {"tabular", {{"iterations", 5000},
                 {"step_size", 1.0},
                 {"allow_step_above_bound", true},
                 {"init_sigma", 0.1},
                 {"log_every", 1}}},
    {"actor_critic", {{"total_steps", 200000},
                      {"n_rollout_threads", 32},
                      {"hidden", 64},
                      {"ppo_epochs", 5},
                      {"clip_ratio", 0.2},
                      {"lr_actor", 7e-4},
                      {"lr_critic", 7e-4},
                      {"eval_episodes", 100}}}};

const json kAlohaPreset = {
    {"mode", "actor_critic"},
    {"env", {{"name", "aloha"},
             {"rows", 2},
             {"cols", 5},
             {"max_backlog", 5},
             {"new_message_prob", 0.6},
             {"reward_success", 0.1},
             {"reward_collision", -10.0},
             {"gamma", 0.99},
             {"episode_length", 25}}},
    {"topologies", {"context_aware"}},
    {"seeds", {{"start", 0}, {"count", 5}}},
    {"actor_critic", {{"total_steps", 1000000},
                      {"n_rollout_threads", 32},
                      {"hidden", 64},
                      {"ppo_epochs", 5},
                      {"clip_ratio", 0.2},
                      {"lr_actor", 7e-4},
                      {"lr_critic", 7e-4},
                      {"share_observations", true},
                      {"eval_episodes", 100}}}};

void parse_env(const json& j, ExperimentConfig& c) {
  std::string name = "coordination_game";
  read(j, "name", name);
  if (name == "coordination_game") {
    check_keys(j, {"name", "n_agents", "epsilon", "gamma", "episode_length"}, "env");
    auto& s = c.env.coordination;
    c.env.kind = EnvKind::kCoordination;
    read(j, "n_agents", s.n_agents);
    read(j, "epsilon", s.epsilon);
    read(j, "gamma", s.gamma);
    read(j, "episode_length", s.episode_length);
    c.gamma = s.gamma;
  } else if (name == "aloha") {
    check_keys(j, {"name", "rows", "cols", "max_backlog", "new_message_prob",
                   "reward_success", "reward_collision", "gamma", "episode_length",
                   "penalty_per_message", "drop_on_collision"},
               "env");
    auto& s = c.env.aloha;
    c.env.kind = EnvKind::kAloha;
    read(j, "rows", s.rows);
    read(j, "cols", s.cols);
    read(j, "max_backlog", s.max_backlog);
    read(j, "new_message_prob", s.new_message_prob);
    read(j, "reward_success", s.reward_success);
    read(j, "reward_collision", s.reward_collision);
    read(j, "episode_length", s.episode_length);
    read(j, "penalty_per_message", s.penalty_per_message);
    read(j, "drop_on_collision", s.drop_on_collision);
    read(j, "gamma", c.gamma);
  } else {
    throw ConfigError("unknown env '" + name + "'");
  }
}

void parse_actor_critic(const json& j, AcConfig& a) {
  check_keys(j, {"total_steps", "n_rollout_threads", "hidden", "ppo_epochs",
                 "clip_ratio", "lr_actor", "lr_critic", "gae_lambda", "entropy_coef",
                 "max_grad_norm", "normalize_advantages", "advantage",
                 "share_observations", "resample_per_episode", "temperature",
                 "sinkhorn_temperature", "sinkhorn_iters", "fixed_identity",
                 "use_hungarian", "force_empty", "anneal", "eta", "alpha",
                 "eval_episodes", "schedule"},
             "actor_critic");
  read(j, "total_steps", a.total_steps);
  read(j, "n_rollout_threads", a.n_rollout_threads);
  read(j, "hidden", a.hidden);
  read(j, "ppo_epochs", a.ppo_epochs);
  if (j.contains("clip_ratio") && j.at("clip_ratio").is_null()) {
    a.clip_ratio = std::numeric_limits<double>::infinity();
  } else {
    read(j, "clip_ratio", a.clip_ratio);
  }
  read(j, "lr_actor", a.lr_actor);
  read(j, "lr_critic", a.lr_critic);
  read(j, "gae_lambda", a.gae_lambda);
  read(j, "entropy_coef", a.entropy_coef);
  read(j, "max_grad_norm", a.max_grad_norm);
  read(j, "normalize_advantages", a.normalize_advantages);
  if (j.contains("advantage")) {
    std::string adv;
    read(j, "advantage", adv);
    if (adv == "v") a.advantage = AdvantageSource::kV;
    else if (adv == "q") a.advantage = AdvantageSource::kQ;
    else throw ConfigError("advantage must be \"v\" or \"q\"");
  }
  read(j, "share_observations", a.share_observations);
  read(j, "resample_per_episode", a.resample_per_episode);
  read(j, "temperature", a.temperature);
  read(j, "sinkhorn_temperature", a.sinkhorn_temperature);
  read(j, "sinkhorn_iters", a.sinkhorn_iters);
  read(j, "fixed_identity", a.fixed_identity);
  read(j, "use_hungarian", a.use_hungarian);
  read(j, "force_empty", a.force_empty);
  read(j, "anneal", a.anneal);
  read(j, "eta", a.eta);
  read(j, "alpha", a.alpha);
  read(j, "eval_episodes", a.eval_episodes);
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_keys(s, {"a", "b", "c", "l_eta", "l_alpha", "alpha_lo", "alpha_hi"}, "schedule");
    read(s, "a", a.schedule.a);
    read(s, "b", a.schedule.b);
    read(s, "c", a.schedule.c);
    read(s, "l_eta", a.schedule.l_eta);
    read(s, "l_alpha", a.schedule.l_alpha);
    read(s, "alpha_lo", a.schedule.alpha_lo);
    read(s, "alpha_hi", a.schedule.alpha_hi);
  }
}

std::string topology_dir(AcTopology t) { return ac_topology_name(t); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
  if (topologies.empty()) throw ConfigError("no topologies given");
  if (seeds.empty()) throw ConfigError("no seeds given");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (mode == ExperimentMode::kTabularExact) {
    if (env.kind != EnvKind::kCoordination) {
      throw ConfigError("tabular_exact supports the coordination game only");
    }
    for (AcTopology t : topologies) {
      if (t == AcTopology::kContextAware) {
        throw ConfigError("topology context_aware requires mode actor_critic");
      }
    }
    if (tabular.iterations < 0 || tabular.log_every < 1 || !(tabular.init_sigma >= 0.0)) {
      throw ConfigError("bad tabular settings");
    }
    envs::coordination_game(env.coordination);  // validates the game
  } else {
    AcConfig probe = actor_critic;
    probe.env = env;
    probe.gamma = gamma;
    probe.validate();
    env.make();
  }
}

std::vector<std::string> preset_names() { return {"coordination_game", "aloha"}; }

json preset(const std::string& name) {
  if (name == "coordination_game") return kCoordinationPreset;
  if (name == "aloha") return kAlohaPreset;
  throw ConfigError("unknown preset '" + name + "'");
}

ExperimentConfig parse_experiment_config(const json& file) {
  check_keys(file, {"defaults", "mode", "env", "topologies", "topology", "seeds",
                    "workers", "record_wall_time", "tabular", "actor_critic"},
             "config");
  std::string preset_name = "coordination_game";
  read(file, "defaults", preset_name);
  json j = preset(preset_name);
  // Replace whole env blocks when the env name changes so stale keys from
  // the preset do not leak across environments.
  if (file.contains("env") && file["env"].contains("name") &&
      file["env"]["name"] != j["env"]["name"]) {
    j.erase("env");
  }
  j.merge_patch(file);
  // merge_patch treats null as deletion; an explicit null clip ratio means
  // "unclipped", so carry it over by hand.
  if (file.contains("actor_critic") && file["actor_critic"].is_object() &&
      file["actor_critic"].contains("clip_ratio") &&
      file["actor_critic"]["clip_ratio"].is_null()) {
    j["actor_critic"]["clip_ratio"] = nullptr;
  }

  ExperimentConfig c;
  std::string mode;
  read(j, "mode", mode);
  if (mode == "tabular_exact") c.mode = ExperimentMode::kTabularExact;
  else if (mode == "actor_critic") c.mode = ExperimentMode::kActorCritic;
  else throw ConfigError("mode must be tabular_exact or actor_critic");

  if (j.contains("env")) parse_env(j.at("env"), c);

  std::vector<std::string> topo_names;
  if (j.contains("topology")) {
    std::string t;
    read(j, "topology", t);
    topo_names = {t};
  } else {
    read(j, "topologies", topo_names);
  }
  c.topologies.clear();
  for (const auto& t : topo_names) c.topologies.push_back(parse_ac_topology(t));

  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (s.is_array()) {
      read(j, "seeds", c.seeds);
    } else {
      check_keys(s, {"start", "count"}, "seeds");
      std::uint64_t start = 0;
      long count = 0;
      read(s, "start", start);
      read(s, "count", count);
      if (count < 1) throw ConfigError("seeds.count must be >= 1");
      for (long k = 0; k < count; ++k) c.seeds.push_back(start + k);
    }
  }
  read(j, "workers", c.workers);
  read(j, "record_wall_time", c.record_wall_time);
  if (j.contains("tabular")) {
    const json& t = j.at("tabular");
    check_keys(t, {"iterations", "step_size", "allow_step_above_bound", "init_sigma",
                   "log_every", "grad_tolerance"},
               "tabular");
    read(t, "iterations", c.tabular.iterations);
    read(t, "step_size", c.tabular.step_size);
    read(t, "allow_step_above_bound", c.tabular.allow_step_above_bound);
    read(t, "init_sigma", c.tabular.init_sigma);
    read(t, "log_every", c.tabular.log_every);
    read(t, "grad_tolerance", c.tabular.grad_tolerance);
  }
  if (j.contains("actor_critic")) parse_actor_critic(j.at("actor_critic"), c.actor_critic);
  c.actor_critic.env = c.env;
  c.actor_critic.gamma = c.gamma;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_experiment_config(j);
}

std::vector<ExperimentRecord> run_single(const ExperimentConfig& config,
                                         AcTopology topology, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return config.record_wall_time
               ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
               : ExperimentRecord::kMissing;
  };
  std::vector<ExperimentRecord> rows;
  if (config.mode == ExperimentMode::kTabularExact) {
    if (topology == AcTopology::kContextAware) {
      throw ConfigError("topology context_aware requires mode actor_critic");
    }
    const CooperativeMarkovGame game = envs::coordination_game(config.env.coordination);
    const Topology kind = topology == AcTopology::kUncorrelated ? Topology::kUncorrelated
                          : topology == AcTopology::kLine       ? Topology::kLineCorrelated
                                                                : Topology::kFullyCorrelated;
    const int n = config.env.coordination.n_agents;
    const Dag dag = Dag::fixed(kind, n);
    TabularBnPolicy policy = TabularBnPolicy::gaussian(
        dag, std::vector<int>(n, 2), game.n_states(), seed, config.tabular.init_sigma);
    const double v_star = optimal_value(game);
    const double density = dag_density(dag);
    AscentConfig ac;
    ac.step_size = config.tabular.step_size;
    ac.allow_step_above_bound = config.tabular.allow_step_above_bound;
    ac.max_iters = config.tabular.iterations;
    ac.grad_tolerance = config.tabular.grad_tolerance;
    ascend(game, policy, ac, [&](const AscentRecord& r, const TabularBnPolicy& p) {
      const bool last = r.iter >= ac.max_iters || r.grad_norm < ac.grad_tolerance;
      if (r.iter % config.tabular.log_every == 0 || last) {
        ExperimentRecord rec;
        rec.seed = seed;
        rec.iteration = r.iter;
        rec.value = r.value;
        rec.poa = poa_from_values(r.value, v_star);
        rec.nash_gap = nash_gap(game, p);
        rec.dag_density = density;
        rec.grad_norm = r.grad_norm;
        rec.wall_time = elapsed();
        rows.push_back(rec);
      }
      return true;
    });
  } else {
    AcConfig ac = config.actor_critic;
    ac.env = config.env;
    ac.gamma = config.gamma;
    ac.topology = topology;
    ac.seed = seed;
    TrainResult res = train(ac, [&](const ExperimentRecord&) { return true; });
    rows = std::move(res.records);
    const double t = elapsed();
    for (auto& r : rows) r.wall_time = t;
  }
  return rows;
}

void mean_stderr(const std::vector<double>& xs, double& mean, double& se) {
  std::vector<double> v;
  for (double x : xs) {
    if (!std::isnan(x)) v.push_back(x);
  }
  if (v.empty()) {
    mean = se = ExperimentRecord::kMissing;
    return;
  }
  const double n = static_cast<double>(v.size());
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  se = std::sqrt(var / n) / std::sqrt(n);
}

std::vector<SummaryRow> summarize_runs(
    const std::vector<std::vector<ExperimentRecord>>& runs) {
  std::map<long, std::vector<const ExperimentRecord*>> by_iter;
  for (const auto& run : runs) {
    for (const auto& r : run) by_iter[r.iteration].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& [iter, recs] : by_iter) {
    SummaryRow row;
    row.iteration = iter;
    row.n = static_cast<int>(recs.size());
    double ExperimentRecord::*fields[] = {&ExperimentRecord::value, &ExperimentRecord::poa,
                                          &ExperimentRecord::nash_gap,
                                          &ExperimentRecord::dag_density,
                                          &ExperimentRecord::grad_norm};
    for (int f = 0; f < 5; ++f) {
      std::vector<double> xs;
      for (const auto* r : recs) xs.push_back(r->*fields[f]);
      mean_stderr(xs, row.mean[f], row.stderr_[f]);
    }
    out.push_back(row);
  }
  return out;
}

RunOutput run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  struct Job {
    AcTopology topology;
    std::uint64_t seed;
    std::vector<ExperimentRecord> rows;
    std::string error;
  };
  std::vector<Job> jobs;
  for (AcTopology t : config.topologies) {
    for (std::uint64_t s : config.seeds) jobs.push_back({t, s, {}, {}});
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        jobs[k].rows = run_single(config, jobs[k].topology, jobs[k].seed);
      } catch (const std::exception& e) {
        jobs[k].error = e.what();
        if (jobs[k].error.empty()) jobs[k].error = "unknown failure";
      }
    }
  };
  int n_workers = config.workers > 0
                      ? config.workers
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_workers = std::min<int>(n_workers, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  RunOutput out;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string());
  const Job* failed = nullptr;
  for (AcTopology t : config.topologies) {
    const fs::path dir = out_dir / topology_dir(t);
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string());
    std::vector<std::vector<ExperimentRecord>> runs;
    for (const Job& job : jobs) {
      if (job.topology != t) continue;
      if (!job.error.empty()) {
        if (!failed) failed = &job;
        continue;
      }
      std::ostringstream csv;
      write_records_csv(csv, job.rows);
      const fs::path path = dir / ("seed_" + std::to_string(job.seed) + ".csv");
      write_file(path, csv.str());
      out.files.push_back(path);
      runs.push_back(job.rows);
    }
    std::ostringstream sum;
    sum << kSummaryHeader << '\n';
    for (const SummaryRow& r : summarize_runs(runs)) {
      sum << r.iteration << ',' << r.n;
      for (int f = 0; f < 5; ++f) {
        sum << ',' << format_double(r.mean[f]) << ',' << format_double(r.stderr_[f]);
      }
      sum << '\n';
    }
    const fs::path spath = out_dir / ("summary_" + topology_dir(t) + ".csv");
    write_file(spath, sum.str());
    out.files.push_back(spath);
  }
  if (failed) throw SeedFailure(failed->topology, failed->seed, failed->error);
  return out;
}

std::vector<TopologyFinal> summarize_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
  std::set<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subdirs.insert(e.path());
  }
  std::vector<TopologyFinal> out;
  for (const fs::path& sub : subdirs) {
    std::vector<std::pair<std::uint64_t, fs::path>> files;
    for (const auto& e : fs::directory_iterator(sub)) {
      const std::string name = e.path().filename().string();
      if (!e.is_regular_file() || name.rfind("seed_", 0) != 0 ||
          e.path().extension() != ".csv") {
        continue;
      }
      try {
        files.emplace_back(std::stoull(name.substr(5)), e.path());
      } catch (const std::exception&) {
        continue;
      }
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    std::vector<double> cols[4];
    for (const auto& [seed, path] : files) {
      std::ifstream in(path);
      const auto rows = read_records_csv(in);
      if (rows.empty()) throw std::runtime_error(path.string() + " has no rows");
      const ExperimentRecord& last = rows.back();
      cols[0].push_back(last.value);
      cols[1].push_back(last.poa);
      cols[2].push_back(last.nash_gap);
      cols[3].push_back(last.dag_density);
    }
    TopologyFinal t;
    t.topology = sub.filename().string();
    t.n_seeds = static_cast<int>(files.size());
    for (int f = 0; f < 4; ++f) mean_stderr(cols[f], t.mean[f], t.stderr_[f]);
    out.push_back(t);
  }
  if (out.empty()) throw std::runtime_error("no seed CSVs found under " + dir.string());
  return out;
}

std::string format_final_table(const std::vector<TopologyFinal>& rows) {
  std::ostringstream out;
  out << kFinalHeader << '\n';
  for (const auto& r : rows) {
    out << r.topology << ',' << r.n_seeds;
    for (int f = 0; f < 4; ++f) {
      out << ',' << format_double(r.mean[f]) << ',' << format_double(r.stderr_[f]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace bnpg
