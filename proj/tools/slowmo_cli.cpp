// Copyright 2026 The SlowMo Simulator Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slowmo/config.hpp"
#include "slowmo/metrics_io.hpp"
#include "slowmo/simkernel.hpp"
#include "slowmo/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slowmo;

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 1;
constexpr int kNumericalAbort = 2;
constexpr int kCheckFailure = 3;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

json apply_flags(json raw, const RunFlags& flags) {
  if (flags.seed) set_path(raw, "seed", *flags.seed);
  if (flags.out) set_path(raw, "output.dir", *flags.out);
  if (flags.format) set_path(raw, "output.format", *flags.format);
  return raw;
}

json constants_json(const ExperimentConfig& config, const Problem& problem) {
  const ParameterVector x0 = initial_point(config, problem);
  const ProblemConstants c = problem_constants(problem, x0);
  const VEstimate v = estimate_V(problem, config.base, config.protocol, 2000, x0, config.seed);
  json j = to_json(c, v.value);
  j["V_std_error"] = v.std_error;
  j["f0"] = global_loss(problem, x0);
  return j;
}

// Runs one resolved config into its output directory. Returns the exit code.
int execute(const ExperimentConfig& config, json* summary = nullptr) {
  const std::string& dir = config.output.dir;
  write_resolved(config, dir);
  const Problem problem = make_problem(config.problem, config.workers);
  try {
    const MetricsTrace trace = run(config, problem);
    emit_metrics(trace, dir, config.output.format);
    write_json(fs::path(dir) / "constants.json", constants_json(config, problem));
    const std::string hash = trace_hash(trace);
    if (summary) {
      (*summary)["hash"] = hash;
      (*summary)["final_loss"] = trace.steps.empty() ? json(nullptr) : json(trace.steps.back().loss);
    } else {
      std::cout << "trace " << hash << " steps " << trace.steps.size();
      if (!trace.steps.empty()) std::cout << " final_loss " << trace.steps.back().loss;
      std::cout << " -> " << dir << '\n';
    }
    return kOk;
  } catch (const AbortedRun& e) {
    emit_metrics(e.partial(), dir, config.output.format);
    json diag = {{"error", e.what()}, {"recorded_steps", e.partial().steps.size()}};
    write_json(fs::path(dir) / "abort.json", diag);
    std::cerr << "numerical abort: " << e.what() << " (diagnostic in " << dir << "/abort.json)\n";
    if (summary) (*summary)["aborted"] = e.what();
    return kNumericalAbort;
  }
}

int cmd_run(const RunFlags& flags) {
  const ExperimentConfig config = parse_config(apply_flags(read_json(flags.config), flags));
  return execute(config);
}

int cmd_sweep(const RunFlags& flags, const std::string& grid_path, unsigned jobs) {
  json base = apply_flags(read_json(flags.config), flags);
  const std::string root = flags.out ? *flags.out : parse_config(base).output.dir;
  std::vector<SweepPoint> points = expand_grid(base, read_json(grid_path));
  // Validate every point before running any of them.
  std::vector<ExperimentConfig> configs;
  for (auto& p : points) {
    set_path(p.raw, "output.dir", (fs::path(root) / p.name).string());
    configs.push_back(parse_config(p.raw));
  }
  std::vector<json> summaries(points.size());
  std::vector<int> codes(points.size(), kOk);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      summaries[i] = {{"name", points[i].name}, {"values", points[i].values}};
      try {
        codes[i] = execute(configs[i], &summaries[i]);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        codes[i] = kConfigFailure;
        summaries[i]["error"] = e.what();
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
  }
  write_json(fs::path(root) / "sweep.json", summaries);
  int code = kOk;
  for (int c : codes) code = std::max(code, c);
  std::cout << "sweep: " << points.size() << " runs -> " << root << '\n';
  if (!first_error.empty()) std::cerr << "error: " << first_error << '\n';
  return code;
}

int cmd_check_bound(const std::vector<std::string>& traces, const std::string& constants_path, std::uint64_t min_seeds,
                    const std::string& out) {
  std::vector<MetricsTrace> loaded;
  for (const auto& t : traces) loaded.push_back(read_jsonl(t));
  const BoundConstants constants = bound_constants_from_json(read_json(constants_path));
  const BoundReport report = check_bound(loaded, constants, min_seeds);
  const json j = to_json(report);
  if (!out.empty()) write_json(out, j);
  std::cout << j.dump(2) << '\n';
  return report.status == "violated" ? kCheckFailure : kOk;
}

int cmd_check_equivalence(const std::string& a, const std::string& b, double tol) {
  const EquivalenceReport r = equivalence_check(read_jsonl(a), read_jsonl(b), tol);
  json j = {{"pass", r.pass}, {"max_diff", r.max_diff}, {"worst_step", r.worst_step}, {"steps", r.steps},
            {"tolerance", tol}, {"diagnostic", r.diagnostic}};
  std::cout << j.dump(2) << '\n';
  return r.pass ? kOk : kCheckFailure;
}

int cmd_estimate_v(const RunFlags& flags, std::uint64_t samples) {
  const ExperimentConfig config = parse_config(apply_flags(read_json(flags.config), flags));
  const Problem problem = make_problem(config.problem, config.workers);
  const ParameterVector x0 = initial_point(config, problem);
  const VEstimate v = estimate_V(problem, config.base, config.protocol, samples, x0, config.seed);
  const double s2 = config.problem.noise.sigma * config.problem.noise.sigma;
  json j = {{"V", v.value},
            {"std_error", v.std_error},
            {"samples", v.samples},
            {"sigma2_over_m", s2 / static_cast<double>(config.workers)}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for slow-momentum distributed optimisation"};
  app.require_subcommand(1);

  RunFlags flags;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "override the config seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--format", flags.format, "jsonl, csv or both")->check(CLI::IsMember({"jsonl", "csv", "both"}));
  };

  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  add_run_flags(run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "expand a grid over a base config and run every point");
  add_run_flags(sweep_cmd);
  std::string grid;
  unsigned jobs = 1;
  sweep_cmd->add_option("--grid", grid, "JSON object of dotted field -> list of values")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--jobs", jobs, "runs executed concurrently");

  auto* bound_cmd = app.add_subcommand("check-bound", "compare seed-averaged traces with the convergence bound");
  std::vector<std::string> traces;
  std::string constants;
  std::uint64_t min_seeds = 20;
  std::string report_path;
  bound_cmd->add_option("--traces", traces, "trace.jsonl files, one per seed")->required()->check(CLI::ExistingFile);
  bound_cmd->add_option("--constants", constants, "constants.json written by run")->required()->check(CLI::ExistingFile);
  bound_cmd->add_option("--min-seeds", min_seeds, "seeds required when noise is present");
  bound_cmd->add_option("--out", report_path, "write the report here as well");

  auto* eq_cmd = app.add_subcommand("check-equivalence", "max inf-norm difference of x_bar between two traces");
  std::string trace_a, trace_b;
  double tol = 1e-10;
  eq_cmd->add_option("a", trace_a, "first trace.jsonl")->required()->check(CLI::ExistingFile);
  eq_cmd->add_option("b", trace_b, "second trace.jsonl")->required()->check(CLI::ExistingFile);
  eq_cmd->add_option("--tol", tol, "tolerance");

  auto* v_cmd = app.add_subcommand("estimate-v", "Monte-Carlo estimate of the direction variance V");
  add_run_flags(v_cmd);
  std::uint64_t samples = 100000;
  v_cmd->add_option("--samples", samples, "Monte-Carlo samples (at least 100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*run_cmd) return cmd_run(flags);
    if (*sweep_cmd) return cmd_sweep(flags, grid, jobs);
    if (*bound_cmd) return cmd_check_bound(traces, constants, min_seeds, report_path);
    if (*eq_cmd) return cmd_check_equivalence(trace_a, trace_b, tol);
    if (*v_cmd) return cmd_estimate_v(flags, samples);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
  return kOk;
}
