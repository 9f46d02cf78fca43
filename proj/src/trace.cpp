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

#include "mtgrpo/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mtgrpo/checkpoint.hpp"

namespace mtgrpo {

namespace fs = std::filesystem;

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

std::ofstream open_csv(const fs::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << header << '\n';
  return out;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("missing column '" + name + "'");
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path.string() + "' is empty");
  csv.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    csv.rows.push_back(split(line));
  }
  return csv;
}

double num(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

long long integer(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

}  // namespace

TraceWriter::TraceWriter(const fs::path& dir, bool verbose_prompts) : verbose_(verbose_prompts) {
  fs::create_directories(dir);
  allocation_ = open_csv(dir / "allocation.csv", kAllocationHeader);
  utility_ = open_csv(dir / "utility.csv", kUtilityHeader);
  similarity_ = open_csv(dir / "similarity.csv", kSimilarityHeader);
  loss_ = open_csv(dir / "loss.csv", kLossHeader);
  if (verbose_) prompts_ = open_csv(dir / "prompts.csv", kPromptHeader);
}

void TraceWriter::write_step(const StepRecord& r, const Suite& suite) {
  for (std::size_t k = 0; k < r.tasks.size(); ++k) {
    const auto& t = r.tasks[k];
    allocation_ << r.step << ',' << t.task_id << ',' << format_real(t.pot_ema) << ',' << format_real(t.syn_ema) << ','
                << format_real(t.utility.combined) << ',' << format_real(t.quota_fractional) << ','
                << t.quota_integer << '\n';
    utility_ << r.step << ',' << t.task_id << ',' << t.stats_step << ',' << format_real(t.utility.pot_normalized)
             << ',' << format_real(t.utility.syn_normalized) << ',' << format_real(t.beta) << ',' << t.rollouts << ','
             << format_real(t.pot_instant) << ',' << format_real(t.syn_instant) << '\n';
    if (t.trained) {
      loss_ << r.step << ',' << t.task_id << ',' << format_real(t.loss.surrogate) << ','
            << format_real(t.loss.kl_term) << ',' << format_real(t.loss.beta_used) << ','
            << format_real(t.loss.objective) << ',' << format_real(t.mean_reward) << ','
            << format_real(t.reward_variance) << '\n';
    }
  }
  for (const auto& s : r.similarities) {
    similarity_ << r.step << ',' << r.tasks[s.i].task_id << ',' << r.tasks[s.j].task_id << ','
                << format_real(s.cosine) << '\n';
  }
  if (verbose_) {
    for (std::size_t k = 0; k < r.tasks.size(); ++k) {
      const std::set<std::int64_t> chosen(r.schedule.selected_prompts[k].begin(), r.schedule.selected_prompts[k].end());
      const auto& pool = suite.tasks[k].prompt_pool;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        prompts_ << r.step << ',' << r.tasks[k].task_id << ',' << pool[i].prompt_id << ','
                 << format_real(r.schedule.prompt_weights[k][i]) << ',' << (chosen.count(pool[i].prompt_id) ? 1 : 0)
                 << '\n';
      }
    }
  }
}

void TraceWriter::flush() {
  allocation_.flush();
  utility_.flush();
  similarity_.flush();
  loss_.flush();
  if (verbose_) prompts_.flush();
}

ReplayReport replay_run(const fs::path& dir) {
  ReplayReport rep;
  auto violate = [&rep](const std::string& msg) {
    if (rep.violations.size() < 200) rep.violations.push_back(msg);
  };

  const RunConfig config = load_run_config(dir / "config.json");
  std::vector<std::string> task_ids;
  for (const auto& t : config.suite.tasks) task_ids.push_back(t.task_id);
  const std::size_t K = task_ids.size();
  const auto B = static_cast<long long>(config.budget);
  const auto G = static_cast<long long>(config.group_size);

  // Allocation trace.
  const Csv alloc = read_csv(dir / "allocation.csv");
  if (alloc.header != split(kAllocationHeader)) violate("allocation.csv: unexpected header");
  std::map<long long, std::map<std::string, long long>> quotas;
  std::map<long long, double> frac_sum;
  {
    const auto c_step = alloc.col("step"), c_task = alloc.col("task_id"), c_frac = alloc.col("quota_fractional"),
               c_int = alloc.col("quota_integer");
    long long prev_step = 0;
    std::size_t idx = 0;
    for (const auto& row : alloc.rows) {
      ++rep.rows_checked;
      if (row.size() != alloc.header.size()) {
        violate("allocation.csv: malformed row");
        continue;
      }
      const long long step = integer(row[c_step]);
      const std::string& task = row[c_task];
      if (task != task_ids[idx % K]) violate("allocation.csv: task order broken at step " + std::to_string(step));
      if (idx % K == 0) {
        if (step != prev_step + 1) violate("allocation.csv: step " + std::to_string(step) + " does not follow " + std::to_string(prev_step));
        prev_step = step;
      } else if (step != prev_step) {
        violate("allocation.csv: step changed inside a block at step " + std::to_string(step));
      }
      const long long q = integer(row[c_int]);
      if (q < 0) violate("allocation.csv: negative quota at step " + std::to_string(step));
      quotas[step][task] = q;
      frac_sum[step] += num(row[c_frac]);
      ++idx;
    }
    if (idx % K != 0) violate("allocation.csv: incomplete final step");
  }
  rep.steps = quotas.size();
  if (rep.steps != config.steps) {
    violate("allocation.csv: " + std::to_string(rep.steps) + " steps, config says " + std::to_string(config.steps));
  }
  for (const auto& [step, per_task] : quotas) {
    long long sum = 0;
    for (const auto& [task, q] : per_task) {
      sum += q;
      const auto& tc = config.suite.tasks[static_cast<std::size_t>(
          std::find(task_ids.begin(), task_ids.end(), task) - task_ids.begin())];
      if (q > static_cast<long long>(tc.pool_size)) violate("allocation.csv: quota above pool size at step " + std::to_string(step));
    }
    if (sum != B) violate("allocation.csv: quotas sum to " + std::to_string(sum) + " at step " + std::to_string(step));
    if (std::abs(frac_sum[step] - static_cast<double>(B)) > 1e-6) {
      violate("allocation.csv: fractional quotas do not sum to B at step " + std::to_string(step));
    }
  }

  // Utility trace.
  const Csv util = read_csv(dir / "utility.csv");
  if (util.header != split(kUtilityHeader)) violate("utility.csv: unexpected header");
  {
    const auto c_step = util.col("step"), c_task = util.col("task_id"), c_src = util.col("stats_step"),
               c_roll = util.col("rollouts"), c_pot = util.col("pot_normalized"), c_syn = util.col("syn_normalized"),
               c_beta = util.col("beta");
    std::map<long long, long long> rollouts;
    for (const auto& row : util.rows) {
      ++rep.rows_checked;
      if (row.size() != util.header.size()) {
        violate("utility.csv: malformed row");
        continue;
      }
      const long long step = integer(row[c_step]);
      const long long src = integer(row[c_src]);
      if (src >= step) violate("utility.csv: step " + std::to_string(step) + " uses statistics from step " + std::to_string(src));
      const long long r = integer(row[c_roll]);
      rollouts[step] += r;
      auto qs = quotas.find(step);
      if (qs == quotas.end() || !qs->second.count(row[c_task])) {
        violate("utility.csv: row without allocation at step " + std::to_string(step));
      } else if (r != qs->second[row[c_task]] * G) {
        violate("utility.csv: rollouts != quota * G at step " + std::to_string(step));
      }
      const double pot = num(row[c_pot]), syn = num(row[c_syn]), beta = num(row[c_beta]);
      if (pot < -1e-12 || pot > 1.0 + 1e-12) violate("utility.csv: pot_normalized outside [0,1]");
      if (syn < -1.0 - 1e-12 || syn > 1.0 + 1e-12) violate("utility.csv: syn_normalized outside [-1,1]");
      if (beta < 0.0) violate("utility.csv: negative beta");
    }
    for (const auto& [step, n] : rollouts) {
      if (n != B * G) violate("utility.csv: " + std::to_string(n) + " rollouts at step " + std::to_string(step));
    }
    if (rollouts.size() != quotas.size()) violate("utility.csv: step count differs from allocation.csv");
  }

  // Loss trace.
  const Csv loss = read_csv(dir / "loss.csv");
  if (loss.header != split(kLossHeader)) violate("loss.csv: unexpected header");
  {
    const auto c_step = loss.col("step"), c_task = loss.col("task_id"), c_sur = loss.col("surrogate"),
               c_kl = loss.col("kl_term"), c_beta = loss.col("beta_used"), c_obj = loss.col("objective"),
               c_var = loss.col("reward_variance");
    std::map<long long, std::set<std::string>> seen;
    for (const auto& row : loss.rows) {
      ++rep.rows_checked;
      if (row.size() != loss.header.size()) {
        violate("loss.csv: malformed row");
        continue;
      }
      const long long step = integer(row[c_step]);
      seen[step].insert(row[c_task]);
      const double sur = num(row[c_sur]), kl = num(row[c_kl]), beta = num(row[c_beta]), obj = num(row[c_obj]);
      if (std::abs(obj - (sur - beta * kl)) > 1e-9 * std::max(1.0, std::abs(obj))) {
        violate("loss.csv: objective != surrogate - beta * kl at step " + std::to_string(step));
      }
      if (kl < 0.0) violate("loss.csv: negative KL at step " + std::to_string(step));
      if (num(row[c_var]) < 0.0) violate("loss.csv: negative reward variance at step " + std::to_string(step));
    }
    for (const auto& [step, per_task] : quotas) {
      for (const auto& [task, q] : per_task) {
        const bool has = seen[step].count(task) > 0;
        if (has != (q > 0)) violate("loss.csv: row presence disagrees with quota for " + task + " at step " + std::to_string(step));
      }
    }
  }

  // Similarity trace.
  const Csv sim = read_csv(dir / "similarity.csv");
  if (sim.header != split(kSimilarityHeader)) violate("similarity.csv: unexpected header");
  {
    std::map<long long, std::size_t> pairs;
    const auto c_step = sim.col("step"), c_i = sim.col("task_i"), c_j = sim.col("task_j"), c_cos = sim.col("cosine");
    for (const auto& row : sim.rows) {
      ++rep.rows_checked;
      if (row.size() != sim.header.size()) {
        violate("similarity.csv: malformed row");
        continue;
      }
      const long long step = integer(row[c_step]);
      ++pairs[step];
      const auto i = std::find(task_ids.begin(), task_ids.end(), row[c_i]) - task_ids.begin();
      const auto j = std::find(task_ids.begin(), task_ids.end(), row[c_j]) - task_ids.begin();
      if (!(i < j)) violate("similarity.csv: pair not ordered i < j at step " + std::to_string(step));
      const double c = num(row[c_cos]);
      if (!(c >= -1.0 && c <= 1.0)) violate("similarity.csv: cosine outside [-1,1] at step " + std::to_string(step));
    }
    const std::size_t expected = K * (K - 1) / 2;
    if (expected > 0 && pairs.size() != quotas.size()) violate("similarity.csv: step count differs from allocation.csv");
    for (const auto& [step, n] : pairs) {
      if (n != expected) violate("similarity.csv: " + std::to_string(n) + " pairs at step " + std::to_string(step));
    }
  }

  // Prompt trace (verbose runs).
  if (fs::exists(dir / "prompts.csv")) {
    const Csv pr = read_csv(dir / "prompts.csv");
    if (pr.header != split(kPromptHeader)) violate("prompts.csv: unexpected header");
    const auto c_step = pr.col("step"), c_task = pr.col("task_id"), c_w = pr.col("weight"), c_sel = pr.col("selected");
    std::map<std::pair<long long, std::string>, std::pair<double, long long>> agg;
    for (const auto& row : pr.rows) {
      ++rep.rows_checked;
      if (row.size() != pr.header.size()) {
        violate("prompts.csv: malformed row");
        continue;
      }
      auto& a = agg[{integer(row[c_step]), row[c_task]}];
      const double w = num(row[c_w]);
      if (!(w > 0.0)) violate("prompts.csv: non-positive weight");
      a.first += w;
      a.second += integer(row[c_sel]);
    }
    for (const auto& [key, a] : agg) {
      if (std::abs(a.first - 1.0) > 1e-9) violate("prompts.csv: weights do not sum to 1 at step " + std::to_string(key.first));
      if (a.second != quotas[key.first][key.second]) {
        violate("prompts.csv: selected count != quota for " + key.second + " at step " + std::to_string(key.first));
      }
    }
  }

  if (fs::exists(dir / "checkpoint.json")) {
    const auto state = load_checkpoint(dir / "checkpoint.json");
    if (state.step != static_cast<std::int64_t>(config.steps)) violate("checkpoint.json: step differs from config");
  } else {
    violate("checkpoint.json missing");
  }

  std::ostringstream s;
  s << "steps: " << rep.steps << ", tasks: " << K << ", rows checked: " << rep.rows_checked;
  rep.summary.push_back(s.str());
  for (std::size_t k = 0; k < K; ++k) {
    double total = 0.0;
    for (const auto& [step, per_task] : quotas) total += static_cast<double>(per_task.at(task_ids[k]));
    std::ostringstream line;
    line << "task " << task_ids[k] << ": mean quota "
         << (quotas.empty() ? 0.0 : total / static_cast<double>(quotas.size()));
    rep.summary.push_back(line.str());
  }
  return rep;
}

}  // namespace mtgrpo
