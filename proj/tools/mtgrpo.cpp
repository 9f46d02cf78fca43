// Copyright 2026 The mtgrpo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mtgrpo/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-task GRPO with utility-driven scheduling on synthetic verifiable-reward tasks"};
  app.require_subcommand(1);

  mtgrpo::CliOptions opts;
  std::string config, out, ablation, trace;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Run configuration (JSON)")->required();
    cmd->add_option("--seed", seed, "Override the run seed");
    cmd->add_option("--out", out, "Override the output directory");
    cmd->add_flag("--verbose-prompts", opts.verbose_prompts, "Also write the per-prompt trace");
  };

  auto* train = app.add_subcommand("train", "Train and write traces plus a final checkpoint");
  add_common(train);
  train->add_option("--ablation", ablation, "uniform-quotas | random-prompts | fixed-beta | uniform-beta");

  auto* ablate = app.add_subcommand("ablate", "Train one ablated variant");
  add_common(ablate);
  ablate->add_option("--ablation", ablation, "uniform-quotas | random-prompts | fixed-beta | uniform-beta")->required();

  auto* bench = app.add_subcommand("bench-compression", "Report gradient compression ratio and overhead");
  add_common(bench);

  auto* replay = app.add_subcommand("replay", "Validate the traces of a run directory");
  replay->add_option("trace", trace, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : mtgrpo::kExitUsage;
  }

  opts.config_path = config;
  if (app.get_subcommands().front() != replay) {
    for (auto* cmd : {train, ablate, bench}) {
      if (cmd->parsed() && cmd->count("--seed")) opts.seed = seed;
    }
    if (!out.empty()) opts.out_dir = out;
  }
  if (train->parsed()) {
    if (!ablation.empty()) opts.ablation = ablation;
    return mtgrpo::cmd_train(opts, std::cout, std::cerr);
  }
  if (ablate->parsed()) return mtgrpo::cmd_ablate(opts, ablation, std::cout, std::cerr);
  if (bench->parsed()) return mtgrpo::cmd_bench_compression(opts, std::cout, std::cerr);
  return mtgrpo::cmd_replay(trace, std::cout, std::cerr);
}
