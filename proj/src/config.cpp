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

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace slowmo {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError("unknown field '" + (where.empty() ? "" : where + ".") + item.key() + "'");
  }
}

std::string path_of(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

template <typename T>
T get(const json& obj, const std::string& where, const char* key, T fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + path_of(where, key) + "' has the wrong type");
  }
}

double number(const json& obj, const std::string& where, const char* key, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError("field '" + path_of(where, key) + "' must be a number");
  return v->get<double>();
}

std::uint64_t count(const json& obj, const std::string& where, const char* key, std::uint64_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0))
    throw ConfigError("field '" + path_of(where, key) + "' must be a non-negative integer");
  return v->get<std::uint64_t>();
}

const json& section(const json& obj, const char* key) {
  static const json empty = json::object();
  const json* v = find(obj, key);
  return v ? *v : empty;
}

Matrix matrix_from(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty()) throw ConfigError("'" + where + "' must be a non-empty list of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw ConfigError("'" + where + "' must be square");
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return a;
}

ParameterVector vector_from(const std::vector<double>& v) {
  ParameterVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::vector<double> to_std(const ParameterVector& v) { return {v.data(), v.data() + v.size()}; }

void parse_problem(const json& p, ExperimentConfig& c, bool& data_seed_given) {
  const std::string w = "problem";
  check_keys(p, w, {"kind", "dimension", "data_seed", "noise", "quadratic", "data"});
  ProblemSpec& s = c.problem;
  s.kind = parse_problem_kind(get<std::string>(p, w, "kind", to_string(s.kind)));
  s.dimension = count(p, w, "dimension", s.dimension);
  data_seed_given = find(p, "data_seed") != nullptr;
  s.data_seed = count(p, w, "data_seed", 0);

  const json& n = section(p, "noise");
  check_keys(n, "problem.noise", {"model", "sigma", "batch_size"});
  s.noise.model = parse_noise_model(get<std::string>(n, "problem.noise", "model", to_string(s.noise.model)));
  s.noise.sigma = number(n, "problem.noise", "sigma", s.noise.sigma);
  s.noise.batch_size = count(n, "problem.noise", "batch_size", s.noise.batch_size);

  const json& q = section(p, "quadratic");
  const std::string qw = "problem.quadratic";
  check_keys(q, qw,
             {"matrix", "eigenvalues", "eig_min", "eig_max", "shared_matrix", "target_scale", "target_spread", "matrices",
              "targets"});
  auto& qs = s.quadratic;
  qs.matrix = get<std::string>(q, qw, "matrix", qs.matrix);
  qs.eigenvalues = get<std::vector<double>>(q, qw, "eigenvalues", qs.eigenvalues);
  qs.eig_min = number(q, qw, "eig_min", qs.eig_min);
  qs.eig_max = number(q, qw, "eig_max", qs.eig_max);
  qs.shared_matrix = get<bool>(q, qw, "shared_matrix", qs.shared_matrix);
  qs.target_scale = number(q, qw, "target_scale", qs.target_scale);
  qs.target_spread = number(q, qw, "target_spread", qs.target_spread);
  if (const json* ms = find(q, "matrices")) {
    if (!ms->is_array()) throw ConfigError("'problem.quadratic.matrices' must be a list");
    std::vector<Matrix> mats;
    for (const auto& m : *ms) mats.push_back(matrix_from(m, "problem.quadratic.matrices"));
    qs.matrices = std::move(mats);
  }
  if (find(q, "targets")) {
    std::vector<ParameterVector> targets;
    for (const auto& t : get<std::vector<std::vector<double>>>(q, qw, "targets", {})) targets.push_back(vector_from(t));
    qs.targets = std::move(targets);
  }

  const json& d = section(p, "data");
  const std::string dw = "problem.data";
  check_keys(d, dw, {"samples_per_worker", "label_flip", "feature_scale", "l2", "shared_data", "hidden"});
  auto& ds = s.data;
  ds.samples_per_worker = count(d, dw, "samples_per_worker", ds.samples_per_worker);
  ds.label_flip = number(d, dw, "label_flip", ds.label_flip);
  ds.feature_scale = number(d, dw, "feature_scale", ds.feature_scale);
  ds.l2 = number(d, dw, "l2", ds.l2);
  ds.shared_data = get<bool>(d, dw, "shared_data", ds.shared_data);
  ds.hidden = count(d, dw, "hidden", ds.hidden);
}

void validate(const ExperimentConfig& c) {
  const auto& s = c.problem;
  if (s.dimension == 0) throw ConfigError("problem.dimension must be positive");
  if (!(s.noise.sigma >= 0.0)) throw ConfigError("problem.noise.sigma must be non-negative");
  if (s.noise.batch_size == 0) throw ConfigError("problem.noise.batch_size must be positive");
  if (s.kind == ProblemKind::kQuadratic && s.noise.model == NoiseModel::kMinibatch)
    throw ConfigError("quadratic problems support additive-gaussian noise only");
  const auto& qm = s.quadratic.matrix;
  if (qm != "identity" && qm != "diagonal" && qm != "random")
    throw ConfigError("problem.quadratic.matrix must be identity, diagonal or random");
  if (!(s.data.label_flip >= 0.0 && s.data.label_flip <= 0.5)) throw ConfigError("problem.data.label_flip must lie in [0, 0.5]");
  if (s.data.samples_per_worker == 0) throw ConfigError("problem.data.samples_per_worker must be positive");
  if (s.data.hidden == 0) throw ConfigError("problem.data.hidden must be positive");
  if (!(s.data.l2 >= 0.0)) throw ConfigError("problem.data.l2 must be non-negative");

  if (c.workers == 0) throw ConfigError("workers must be at least 1");
  c.base.validate();
  if (!(c.weight_decay >= 0.0)) throw ConfigError("base_optimizer.weight_decay must be non-negative");

  const auto& h = c.slowmo;
  if (h.tau == 0) throw ConfigError("slowmo.tau must be at least 1");
  if (!(h.alpha > 0.0)) throw ConfigError("slowmo.alpha must be positive");
  if (!(h.beta >= 0.0 && h.beta < 1.0)) throw ConfigError("slowmo.beta must lie in [0, 1)");
  if (!(h.gamma.value > 0.0) || !std::isfinite(h.gamma.value)) throw ConfigError("slowmo.gamma.value must be positive");
  if (!(h.gamma.decay > 0.0)) throw ConfigError("slowmo.gamma.decay must be positive");
  if (c.outer_iterations == 0) throw ConfigError("outer_iterations must be at least 1");
  if (c.cadence == 0) throw ConfigError("metrics.cadence must be at least 1");
  if (c.double_average_period == 0) throw ConfigError("double_average_period must be at least 1");

  if (c.protocol == ProtocolKind::kDoubleAverage && c.base.kind == BaseOptimizerKind::kAdam)
    throw ConfigError("protocol double-average requires a momentum base (plain-sgd or sgd-nesterov), not adam");
  if (c.protocol == ProtocolKind::kOsgp && c.workers < 2) throw ConfigError("protocol osgp needs at least two workers");
  if (h.noaverage && !is_push_sum(c.protocol) && c.protocol != ProtocolKind::kDpsgd)
    throw ConfigError("slowmo.noaverage needs a gossip protocol (dpsgd, sgp or osgp)");

  if (c.topology.kind == TopologyKind::kCustom && !c.topology.path) throw ConfigError("topology.kind custom needs topology.path");
  if (c.osgp.delay_model != "fixed" && c.osgp.delay_model != "geometric")
    throw ConfigError("osgp.delay_model must be fixed or geometric");
  if (!(c.osgp.geometric_p > 0.0 && c.osgp.geometric_p <= 1.0)) throw ConfigError("osgp.geometric_p must lie in (0, 1]");

  const auto& init = c.init.kind;
  if (init != "zeros" && init != "constant" && init != "gaussian" && init != "explicit")
    throw ConfigError("init.kind must be zeros, constant, gaussian or explicit");
  if (init == "explicit" && !c.init.x0) throw ConfigError("init.kind explicit needs init.x0");
  const auto& f = c.output.format;
  if (f != "jsonl" && f != "csv" && f != "both") throw ConfigError("output.format must be jsonl, csv or both");
}

}  // namespace

double theory_gamma(std::size_t workers, std::uint64_t total_steps, double alpha, double beta) {
  if (total_steps == 0) throw ConfigError("theory gamma needs a positive step count");
  return std::sqrt(static_cast<double>(workers) / static_cast<double>(total_steps)) * (1.0 - beta) / alpha;
}

ExperimentConfig parse_config(const json& raw) {
  check_keys(raw, "",
             {"problem", "workers", "protocol", "base_optimizer", "slowmo", "topology", "osgp", "double_average_period",
              "outer_iterations", "total_steps", "seed", "metrics", "init", "parallel", "threads", "output"});
  ExperimentConfig c;
  const std::string w;
  bool data_seed_given = false;
  parse_problem(section(raw, "problem"), c, data_seed_given);
  c.workers = count(raw, w, "workers", c.workers);
  c.protocol = parse_protocol_kind(get<std::string>(raw, w, "protocol", to_string(c.protocol)));

  const json& b = section(raw, "base_optimizer");
  const std::string bw = "base_optimizer";
  check_keys(b, bw, {"kind", "momentum", "beta1", "beta2", "eps", "buffer_strategy", "weight_decay"});
  c.base.kind = parse_base_optimizer_kind(get<std::string>(b, bw, "kind", to_string(c.base.kind)));
  c.base.momentum = number(b, bw, "momentum", c.base.momentum);
  c.base.beta1 = number(b, bw, "beta1", c.base.beta1);
  c.base.beta2 = number(b, bw, "beta2", c.base.beta2);
  c.base.eps = number(b, bw, "eps", c.base.eps);
  c.base.buffer_strategy =
      parse_buffer_strategy(get<std::string>(b, bw, "buffer_strategy", to_string(c.base.buffer_strategy)));
  c.weight_decay = number(b, bw, "weight_decay", c.weight_decay);

  const json& s = section(raw, "slowmo");
  const std::string sw = "slowmo";
  check_keys(s, sw, {"alpha", "beta", "tau", "noaverage", "gamma"});
  c.slowmo.alpha = number(s, sw, "alpha", c.slowmo.alpha);
  c.slowmo.beta = number(s, sw, "beta", c.slowmo.beta);
  c.slowmo.tau = count(s, sw, "tau", c.slowmo.tau);
  c.slowmo.noaverage = get<bool>(s, sw, "noaverage", c.slowmo.noaverage);
  const json& g = section(s, "gamma");
  const std::string gw = "slowmo.gamma";
  check_keys(g, gw, {"schedule", "value", "decay", "milestones", "warmup"});
  auto& gs = c.slowmo.gamma;
  gs.kind = parse_gamma_kind(get<std::string>(g, gw, "schedule", to_string(gs.kind)));
  gs.value = number(g, gw, "value", gs.value);
  gs.decay = number(g, gw, "decay", gs.decay);
  gs.milestones = get<std::vector<std::uint64_t>>(g, gw, "milestones", gs.milestones);
  gs.warmup = count(g, gw, "warmup", gs.warmup);

  const json& t = section(raw, "topology");
  check_keys(t, "topology", {"kind", "path"});
  c.topology.kind = parse_topology_kind(get<std::string>(t, "topology", "kind", to_string(c.topology.kind)));
  if (find(t, "path")) c.topology.path = get<std::string>(t, "topology", "path", "");

  const json& o = section(raw, "osgp");
  check_keys(o, "osgp", {"delay_model", "delay", "geometric_p", "staleness"});
  c.osgp.delay_model = get<std::string>(o, "osgp", "delay_model", c.osgp.delay_model);
  c.osgp.delay = count(o, "osgp", "delay", c.osgp.delay);
  c.osgp.geometric_p = number(o, "osgp", "geometric_p", c.osgp.geometric_p);
  c.osgp.staleness = count(o, "osgp", "staleness", c.osgp.staleness);

  c.double_average_period = count(raw, w, "double_average_period", c.slowmo.tau);

  // T and the step budget: either may be given; with both they must agree.
  const bool has_outer = find(raw, "outer_iterations") != nullptr;
  const bool has_total = find(raw, "total_steps") != nullptr;
  c.outer_iterations = count(raw, w, "outer_iterations", c.outer_iterations);
  if (has_total) {
    c.total_steps = count(raw, w, "total_steps", 0);
    if (c.total_steps == 0) throw ConfigError("total_steps must be positive");
    if (c.slowmo.tau == 0) throw ConfigError("slowmo.tau must be at least 1");
    const std::uint64_t needed = (c.total_steps + c.slowmo.tau - 1) / c.slowmo.tau;
    if (has_outer && needed != c.outer_iterations)
      throw ConfigError("total_steps and outer_iterations disagree (need " + std::to_string(needed) + " outer iterations)");
    c.outer_iterations = needed;
  } else {
    c.total_steps = c.outer_iterations * c.slowmo.tau;
  }

  c.seed = count(raw, w, "seed", c.seed);
  if (!data_seed_given) c.problem.data_seed = c.seed;

  const json& m = section(raw, "metrics");
  check_keys(m, "metrics", {"cadence"});
  c.cadence = count(m, "metrics", "cadence", c.cadence);

  const json& i = section(raw, "init");
  check_keys(i, "init", {"kind", "value", "scale", "x0"});
  c.init.kind = get<std::string>(i, "init", "kind", c.init.kind);
  c.init.value = number(i, "init", "value", c.init.value);
  c.init.scale = number(i, "init", "scale", c.init.scale);
  if (find(i, "x0")) c.init.x0 = get<std::vector<double>>(i, "init", "x0", {});

  c.parallel = get<bool>(raw, w, "parallel", c.parallel);
  c.threads = static_cast<unsigned>(count(raw, w, "threads", c.threads));

  const json& out = section(raw, "output");
  check_keys(out, "output", {"dir", "format"});
  c.output.dir = get<std::string>(out, "output", "dir", c.output.dir);
  c.output.format = get<std::string>(out, "output", "format", c.output.format);

  if (gs.kind == GammaSchedule::Kind::kTheory) {
    if (!(c.slowmo.alpha > 0.0)) throw ConfigError("slowmo.alpha must be positive");
    if (!(c.slowmo.beta >= 0.0 && c.slowmo.beta < 1.0)) throw ConfigError("slowmo.beta must lie in [0, 1)");
    gs.value = theory_gamma(c.workers, c.total_steps, c.slowmo.alpha, c.slowmo.beta);
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(raw);
}

json to_json(const ExperimentConfig& c) {
  const auto& s = c.problem;
  json matrices = nullptr;
  if (s.quadratic.matrices) {
    matrices = json::array();
    for (const auto& a : *s.quadratic.matrices) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < a.rows(); ++r) rows.push_back(to_std(a.row(r).transpose()));
      matrices.push_back(rows);
    }
  }
  json targets = nullptr;
  if (s.quadratic.targets) {
    targets = json::array();
    for (const auto& t : *s.quadratic.targets) targets.push_back(to_std(t));
  }
  json j;
  j["problem"] = {
      {"kind", to_string(s.kind)},
      {"dimension", s.dimension},
      {"data_seed", s.data_seed},
      {"noise", {{"model", to_string(s.noise.model)}, {"sigma", s.noise.sigma}, {"batch_size", s.noise.batch_size}}},
      {"quadratic",
       {{"matrix", s.quadratic.matrix},
        {"eigenvalues", s.quadratic.eigenvalues},
        {"eig_min", s.quadratic.eig_min},
        {"eig_max", s.quadratic.eig_max},
        {"shared_matrix", s.quadratic.shared_matrix},
        {"target_scale", s.quadratic.target_scale},
        {"target_spread", s.quadratic.target_spread},
        {"matrices", matrices},
        {"targets", targets}}},
      {"data",
       {{"samples_per_worker", s.data.samples_per_worker},
        {"label_flip", s.data.label_flip},
        {"feature_scale", s.data.feature_scale},
        {"l2", s.data.l2},
        {"shared_data", s.data.shared_data},
        {"hidden", s.data.hidden}}}};
  j["workers"] = c.workers;
  j["protocol"] = to_string(c.protocol);
  j["base_optimizer"] = {{"kind", to_string(c.base.kind)},
                         {"momentum", c.base.momentum},
                         {"beta1", c.base.beta1},
                         {"beta2", c.base.beta2},
                         {"eps", c.base.eps},
                         {"buffer_strategy", to_string(c.base.buffer_strategy)},
                         {"weight_decay", c.weight_decay}};
  const auto& g = c.slowmo.gamma;
  j["slowmo"] = {{"alpha", c.slowmo.alpha},
                 {"beta", c.slowmo.beta},
                 {"tau", c.slowmo.tau},
                 {"noaverage", c.slowmo.noaverage},
                 {"gamma",
                  {{"schedule", to_string(g.kind)},
                   {"value", g.value},
                   {"decay", g.decay},
                   {"milestones", g.milestones},
                   {"warmup", g.warmup}}}};
  j["topology"] = {{"kind", to_string(c.topology.kind)}, {"path", c.topology.path ? json(*c.topology.path) : json(nullptr)}};
  j["osgp"] = {{"delay_model", c.osgp.delay_model},
               {"delay", c.osgp.delay},
               {"geometric_p", c.osgp.geometric_p},
               {"staleness", c.osgp.staleness}};
  j["double_average_period"] = c.double_average_period;
  j["outer_iterations"] = c.outer_iterations;
  j["total_steps"] = c.total_steps;
  j["seed"] = c.seed;
  j["metrics"] = {{"cadence", c.cadence}};
  j["init"] = {{"kind", c.init.kind},
               {"value", c.init.value},
               {"scale", c.init.scale},
               {"x0", c.init.x0 ? json(*c.init.x0) : json(nullptr)}};
  j["parallel"] = c.parallel;
  j["threads"] = c.threads;
  j["output"] = {{"dir", c.output.dir}, {"format", c.output.format}};
  return j;
}

void write_resolved(const ExperimentConfig& config, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string path = (std::filesystem::path(dir) / "resolved.json").string();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << to_json(config).dump(2) << '\n';
  if (!out) throw ConfigError("cannot write '" + path + "'");
}

void set_path(json& raw, const std::string& dotted, const json& value) {
  json* node = &raw;
  std::stringstream parts(dotted);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw ConfigError("bad field path '" + dotted + "'");
    keys.push_back(part);
  }
  if (keys.empty()) throw ConfigError("empty field path");
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw ConfigError("field path '" + dotted + "' crosses a non-object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("field path '" + dotted + "' crosses a non-object");
  (*node)[keys.back()] = value;
}

std::vector<SweepPoint> expand_grid(const json& base, const json& grid) {
  if (!grid.is_object() || grid.empty()) throw ConfigError("sweep grid must be a non-empty object of lists");
  std::vector<std::pair<std::string, json>> axes;
  for (const auto& item : grid.items()) {
    if (!item.value().is_array() || item.value().empty())
      throw ConfigError("sweep grid field '" + item.key() + "' must be a non-empty list");
    axes.emplace_back(item.key(), item.value());
  }
  std::vector<SweepPoint> points;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    SweepPoint p;
    p.raw = base;
    p.values = json::object();
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const json& v = axes[a].second[index[a]];
      set_path(p.raw, axes[a].first, v);
      p.values[axes[a].first] = v;
    }
    char name[32];
    std::snprintf(name, sizeof name, "run-%03zu", points.size());
    p.name = name;
    points.push_back(std::move(p));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
      if (a == 0) return points;
    }
  }
}

TopologySchedule make_topology(const ExperimentConfig& config) {
  const std::size_t m = config.workers;
  switch (config.topology.kind) {
    case TopologyKind::kExponentialDirected: return TopologySchedule::exponential(m);
    case TopologyKind::kRingDirected: return TopologySchedule::ring(m);
    case TopologyKind::kComplete: return TopologySchedule::complete(m);
    case TopologyKind::kIdentity: return TopologySchedule::identity(m);
    case TopologyKind::kCustom: {
      TopologySchedule t = TopologySchedule::load_custom(*config.topology.path);
      if (t.workers() != m) throw ConfigError("custom topology size does not match workers");
      return t;
    }
  }
  throw InternalError("unreachable topology kind");
}

ProtocolConfig protocol_config(const ExperimentConfig& config) {
  ProtocolConfig p;
  p.kind = config.protocol;
  p.double_average_period = config.double_average_period;
  p.osgp.staleness = config.osgp.staleness;
  p.osgp.delay.kind = config.osgp.delay_model == "geometric" ? DelayModel::Kind::kGeometric : DelayModel::Kind::kFixed;
  p.osgp.delay.delay = config.osgp.delay;
  p.osgp.delay.success = config.osgp.geometric_p;
  p.osgp.delay.cap = config.osgp.staleness;
  return p;
}

ParameterVector initial_point(const ExperimentConfig& config, const Problem& problem) {
  const auto d = static_cast<Eigen::Index>(problem.dimension());
  const auto& init = config.init;
  if (init.kind == "zeros") return ParameterVector::Zero(d);
  if (init.kind == "constant") return ParameterVector::Constant(d, init.value);
  if (init.kind == "gaussian") {
    RngStream stream(config.problem.data_seed, StreamPurpose::kInit, 0);
    ParameterVector x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = init.scale * stream.normal();
    return x;
  }
  if (static_cast<Eigen::Index>(init.x0->size()) != d)
    throw ConfigError("init.x0 has length " + std::to_string(init.x0->size()) + ", expected " + std::to_string(d));
  return vector_from(*init.x0);
}

}  // namespace slowmo
