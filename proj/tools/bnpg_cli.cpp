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

// Command-line front end. Talks to the library only through the C API.
//
//   bnpg run <config.json> [--seeds 0,1,5..9] [--topology fully] [--out dir]
//   bnpg summarize <dir>
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid config or usage.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bnpg/bnpg.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// "3", "0..49" and comma-separated mixtures of both.
std::optional<std::vector<std::uint64_t>> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const auto dots = item.find("..");
      if (dots == std::string::npos) {
        out.push_back(std::stoull(item, &used));
        if (used != item.size()) return std::nullopt;
      } else {
        const std::string lo_s = item.substr(0, dots);
        const std::string hi_s = item.substr(dots + 2);
        const std::uint64_t lo = std::stoull(lo_s, &used);
        if (used != lo_s.size()) return std::nullopt;
        const std::uint64_t hi = std::stoull(hi_s, &used);
        if (used != hi_s.size() || hi < lo) return std::nullopt;
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::exception&) {
      return std::nullopt;
    }
    pos = comma + 1;
  }
  if (out.empty()) return std::nullopt;
  return out;
}

int report(bnpg_status status) {
  std::cerr << "bnpg: " << bnpg_status_name(status) << ": " << bnpg_last_error() << "\n";
  switch (status) {
    case BNPG_ERR_CONFIG:
    case BNPG_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BN policy gradient experiments"};
  app.set_version_flag("--version", std::string(bnpg_version()));
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", seeds_text, topology;
  auto* run = app.add_subcommand("run", "Run every (topology, seed) of a config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seeds", seeds_text, "Seeds, e.g. 0,3,10..19");
  run->add_option("--topology", topology,
                  "uncorrelated | line | fully | context_aware");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();

  std::string summary_dir;
  auto* summarize = app.add_subcommand("summarize", "Final values per topology");
  summarize->add_option("dir", summary_dir, "Directory written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (run->parsed()) {
    std::vector<std::uint64_t> seeds;
    if (!seeds_text.empty()) {
      auto parsed = parse_seeds(seeds_text);
      if (!parsed) {
        std::cerr << "bnpg: bad --seeds value '" << seeds_text << "'\n";
        return kExitUsage;
      }
      seeds = std::move(*parsed);
    }
    const bnpg_status st = bnpg_experiment_run(
        config_path.c_str(), out_dir.c_str(), seeds.empty() ? nullptr : seeds.data(),
        seeds.size(), topology.empty() ? nullptr : topology.c_str());
    if (st != BNPG_OK) return report(st);
    std::cout << "wrote results to " << out_dir << "\n";
    return 0;
  }

  char* table = nullptr;
  const bnpg_status st = bnpg_experiment_summarize(summary_dir.c_str(), &table);
  if (st != BNPG_OK) return report(st);
  std::cout << table;
  bnpg_string_free(table);
  return 0;
}
