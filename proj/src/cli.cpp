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

#include "mtgrpo/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "mtgrpo/checkpoint.hpp"
#include "mtgrpo/rng.hpp"
#include "mtgrpo/trace.hpp"

namespace mtgrpo {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig resolve_config(const CliOptions& options) {
  if (options.config_path.empty()) throw std::invalid_argument("--config is required");
  RunConfig c = load_run_config(options.config_path);
  if (options.seed) c.seed = *options.seed;
  if (options.out_dir) c.out_dir = *options.out_dir;
  if (options.ablation) c.ablation = parse_ablation(*options.ablation);
  if (options.verbose_prompts) c.verbose_prompts = true;
  c.validate();
  return c;
}

RunOutcome run_to_directory(const RunConfig& config) {
  config.validate();
  const Suite suite = make_suite(config.effective_suite());
  fs::create_directories(config.out_dir);
  save_run_config(config, config.out_dir / "config.json");
  TraceWriter writer(config.out_dir, config.verbose_prompts);
  RunOutcome outcome;
  outcome.dir = config.out_dir;
  outcome.result = train(config, suite, [&](const StepRecord& rec, const TrainState&) { writer.write_step(rec, suite); });
  writer.flush();
  save_checkpoint(outcome.result.final_state, config.out_dir / "checkpoint.json");

  json summary;
  summary["steps"] = config.steps;
  summary["ablation"] = to_string(config.ablation);
  summary["seed"] = config.seed;
  json tasks = json::array();
  for (std::size_t k = 0; k < suite.tasks.size(); ++k) {
    tasks.push_back({{"task_id", suite.tasks[k].task_id},
                     {"initial_sampled", outcome.result.initial_eval.sampled[k]},
                     {"final_sampled", outcome.result.final_eval.sampled[k]},
                     {"final_greedy", outcome.result.final_eval.greedy[k]}});
  }
  summary["tasks"] = std::move(tasks);
  summary["final_sampled_mean"] = outcome.result.final_eval.sampled_mean();
  summary["final_greedy_mean"] = outcome.result.final_eval.greedy_mean();
  std::ofstream(config.out_dir / "summary.json") << summary.dump(2) << '\n';
  return outcome;
}

namespace {

void print_eval(std::ostream& out, const Suite& suite, const TrainResult& r) {
  out << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < suite.tasks.size(); ++k) {
    out << "  " << std::left << std::setw(10) << suite.tasks[k].task_id << std::right << " initial "
        << r.initial_eval.sampled[k] << "  final " << r.final_eval.sampled[k] << "  greedy " << r.final_eval.greedy[k]
        << '\n';
  }
  out << "  mean final reward " << r.final_eval.sampled_mean() << '\n';
  out.unsetf(std::ios::floatfield);
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int cmd_train(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    const auto outcome = run_to_directory(config);
    out << "trained " << config.steps << " steps (ablation: " << to_string(config.ablation) << ") -> "
        << outcome.dir.string() << '\n';
    print_eval(out, make_suite(config.effective_suite()), outcome.result);
    return static_cast<int>(kExitOk);
  });
}

int cmd_ablate(const CliOptions& options, const std::string& ablation, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Ablation a = parse_ablation(ablation);
    if (a == Ablation::kNone) throw std::invalid_argument("ablate needs an ablation other than 'none'");
    CliOptions o = options;
    o.ablation = ablation;
    RunConfig config = resolve_config(o);
    if (!options.out_dir) config.out_dir = config.out_dir / ablation;
    const auto outcome = run_to_directory(config);
    out << "ablation " << ablation << ": " << config.steps << " steps -> " << outcome.dir.string() << '\n';
    print_eval(out, make_suite(config.effective_suite()), outcome.result);
    return static_cast<int>(kExitOk);
  });
}

CompressionBench bench_compression(const RunConfig& config, std::size_t repeats) {
  using clock = std::chrono::steady_clock;
  const Suite suite = make_suite(config.effective_suite());
  const PolicyParams params = make_random_params(suite.policy, derive_seed(config.seed, {7}), 0.1);
  const std::size_t K = suite.tasks.size();

  // One scheduled batch worth of rollouts, spread evenly over the tasks.
  std::vector<std::vector<RolloutGroup>> groups(K);
  std::vector<TaskBatch> batches(K);
  for (std::size_t n = 0; n < config.budget; ++n) {
    const std::size_t k = n % K;
    const auto& task = suite.tasks[k];
    const auto& prompt = task.prompt_pool[(n / K) % task.prompt_pool.size()];
    auto g = sample_rollouts(params, prompt, config.group_size, derive_seed(config.seed, {8, n}));
    score_rollouts(suite, task, g);
    groups[k].push_back(std::move(g));
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (const auto& g : groups[k]) {
      batches[k].prompts.push_back(&suite.tasks[k].prompt_pool[suite.tasks[k].prompt_index(g.prompt_id)]);
      batches[k].groups.push_back(&g);
    }
  }

  CompressionBench b;
  b.full_params = params.tensors.numel();
  b.compressed_dim = compressed_dim(params.tensors);
  b.reduction_ratio = static_cast<double>(b.full_params) / static_cast<double>(b.compressed_dim);

  double fb = 0.0, ovh = 0.0;
  double sink = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<TensorSet> grads;
    const auto t0 = clock::now();
    for (std::size_t k = 0; k < K; ++k) {
      if (batches[k].groups.empty()) continue;
      grads.push_back(task_objective(batches[k], params, params, 1e-2, 0.2).gradient);
    }
    const auto t1 = clock::now();
    std::vector<CompressedGradient> comp;
    for (const auto& g : grads) comp.push_back(compress_gradient(g));
    for (std::size_t i = 0; i < comp.size(); ++i)
      for (std::size_t j = 0; j < comp.size(); ++j)
        if (i != j) sink += cosine_similarity(comp[i], comp[j]);
    const auto t2 = clock::now();
    fb += std::chrono::duration<double>(t1 - t0).count();
    ovh += std::chrono::duration<double>(t2 - t1).count();
  }
  (void)sink;
  b.forward_backward_seconds = fb / static_cast<double>(repeats);
  b.overhead_seconds = ovh / static_cast<double>(repeats);
  b.overhead_percent = 100.0 * b.overhead_seconds / (b.forward_backward_seconds + b.overhead_seconds);
  return b;
}

int cmd_bench_compression(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    const auto b = bench_compression(config);
    const auto& s = config.suite.policy;
    out << "policy shape: weight (" << s.seq_len << ", " << s.vocab_size << ", " << s.feature_dim << "), bias ("
        << s.vocab_size << ")\n";
    out << "full parameters: " << b.full_params << '\n';
    out << "compressed dimension D_r: " << b.compressed_dim << '\n';
    out << "reduction ratio: " << b.full_params << "/" << b.compressed_dim << " = " << std::setprecision(10)
        << b.reduction_ratio << "x\n";
    out << std::setprecision(6) << "forward/backward per step: " << b.forward_backward_seconds * 1e3 << " ms\n";
    out << "compression + similarity per step: " << b.overhead_seconds * 1e3 << " ms\n";
    out << std::fixed << std::setprecision(4) << "overhead share: " << b.overhead_percent << "%\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_replay(const fs::path& trace_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto rep = replay_run(trace_dir);
    for (const auto& line : rep.summary) out << line << '\n';
    for (const auto& v : rep.violations) err << "violation: " << v << '\n';
    out << (rep.ok() ? "trace OK" : "trace INVALID") << " (" << rep.violations.size() << " violations)\n";
    return static_cast<int>(rep.ok() ? kExitOk : kExitViolations);
  });
}

}  // namespace mtgrpo
