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

#include "slowmo/metrics_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace slowmo {

using ojson = nlohmann::ordered_json;

namespace {

ojson vec(const ParameterVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ParameterVector vec(const ojson& j) {
  const auto values = j.get<std::vector<double>>();
  ParameterVector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

// NaN and Inf have no JSON form; they are written as strings so the trace stays parseable.
ojson num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double num(const ojson& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("bad number '" + s + "' in trace");
  }
  return j.get<double>();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("cannot write '" + path + "'");
}

bool same(const ParameterVector& a, const ParameterVector& b) { return a.size() == b.size() && a == b; }

}  // namespace

std::string to_jsonl(const MetricsTrace& trace) {
  std::string out;
  const auto& m = trace.meta;
  ojson meta = {{"kind", "meta"},
                {"workers", m.workers},
                {"dimension", m.dimension},
                {"tau", m.tau},
                {"outer_iterations", m.outer_iterations},
                {"total_steps", m.total_steps},
                {"alpha", m.alpha},
                {"beta", m.beta},
                {"protocol", m.protocol},
                {"base", m.base},
                {"noaverage", m.noaverage},
                {"seed", m.seed},
                {"initial_loss", num(m.initial_loss)}};
  out += meta.dump() + '\n';
  for (const auto& r : trace.steps) {
    ojson j = {{"kind", "step"},
               {"t", r.t},
               {"k", r.k},
               {"round", r.round},
               {"gamma", r.gamma},
               {"loss", num(r.loss)},
               {"grad_norm_sq", num(r.grad_norm_sq)},
               {"consensus", num(r.consensus)},
               {"weight_mass", num(r.weight_mass)},
               {"bias_sq", num(r.bias_sq)},
               {"stalled", r.stalled},
               {"x_bar", vec(r.x_bar)},
               {"d_bar", vec(r.d_bar)}};
    out += j.dump() + '\n';
  }
  for (const auto& o : trace.outer) {
    ojson j = {{"kind", "outer"},      {"t", o.t},         {"inner_steps", o.inner_steps},
               {"partial", o.partial}, {"gamma", o.gamma}, {"x_outer", vec(o.x_outer)},
               {"u", vec(o.u)}};
    out += j.dump() + '\n';
  }
  const auto& c = trace.counters;
  ojson counters = {{"kind", "counters"},
                    {"exact_averages", c.exact_averages},
                    {"gradient_allreduces", c.gradient_allreduces},
                    {"gossip_messages", c.gossip_messages},
                    {"pushsum_messages", c.pushsum_messages},
                    {"double_averages", c.double_averages},
                    {"drain_barriers", c.drain_barriers},
                    {"undelivered", trace.undelivered}};
  out += counters.dump() + '\n';
  return out;
}

MetricsTrace from_jsonl(const std::string& text) {
  MetricsTrace trace;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "meta") {
        auto& m = trace.meta;
        m.workers = j.at("workers");
        m.dimension = j.at("dimension");
        m.tau = j.at("tau");
        m.outer_iterations = j.at("outer_iterations");
        m.total_steps = j.at("total_steps");
        m.alpha = j.at("alpha");
        m.beta = j.at("beta");
        m.protocol = j.at("protocol");
        m.base = j.at("base");
        m.noaverage = j.at("noaverage");
        m.seed = j.at("seed");
        m.initial_loss = num(j.at("initial_loss"));
      } else if (kind == "step") {
        StepRecord r;
        r.t = j.at("t");
        r.k = j.at("k");
        r.round = j.at("round");
        r.gamma = j.at("gamma");
        r.loss = num(j.at("loss"));
        r.grad_norm_sq = num(j.at("grad_norm_sq"));
        r.consensus = num(j.at("consensus"));
        r.weight_mass = num(j.at("weight_mass"));
        r.bias_sq = num(j.at("bias_sq"));
        r.stalled = j.at("stalled");
        r.x_bar = vec(j.at("x_bar"));
        r.d_bar = vec(j.at("d_bar"));
        trace.steps.push_back(std::move(r));
      } else if (kind == "outer") {
        OuterRecord o;
        o.t = j.at("t");
        o.inner_steps = j.at("inner_steps");
        o.partial = j.at("partial");
        o.gamma = j.at("gamma");
        o.x_outer = vec(j.at("x_outer"));
        o.u = vec(j.at("u"));
        trace.outer.push_back(std::move(o));
      } else if (kind == "counters") {
        auto& c = trace.counters;
        c.exact_averages = j.at("exact_averages");
        c.gradient_allreduces = j.at("gradient_allreduces");
        c.gossip_messages = j.at("gossip_messages");
        c.pushsum_messages = j.at("pushsum_messages");
        c.double_averages = j.at("double_averages");
        c.drain_barriers = j.at("drain_barriers");
        trace.undelivered = j.at("undelivered");
      } else {
        throw ConfigError("unknown record kind '" + kind + "'");
      }
    } catch (const ojson::exception& e) {
      throw ConfigError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

MetricsTrace read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read trace '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

std::string summary_csv(const MetricsTrace& trace) {
  std::string out = "final_loss,min_loss,final_grad_norm_sq,final_consensus\n";
  if (trace.steps.empty()) return out;
  double min_loss = trace.steps.front().loss;
  for (const auto& r : trace.steps) min_loss = std::min(min_loss, r.loss);
  const auto& last = trace.steps.back();
  char row[256];
  std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g,%.17g\n", last.loss, min_loss, last.grad_norm_sq, last.consensus);
  return out + row;
}

std::vector<std::string> emit_metrics(const MetricsTrace& trace, const std::string& dir, const std::string& format) {
  if (format != "jsonl" && format != "csv" && format != "both") throw ConfigError("unknown output format '" + format + "'");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  if (format != "csv") {
    const auto path = (std::filesystem::path(dir) / "trace.jsonl").string();
    write_file(path, to_jsonl(trace));
    written.push_back(path);
  }
  if (format != "jsonl") {
    const auto path = (std::filesystem::path(dir) / "summary.csv").string();
    write_file(path, summary_csv(trace));
    written.push_back(path);
  }
  return written;
}

std::string trace_hash(const MetricsTrace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_jsonl(trace)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

bool operator==(const StepRecord& a, const StepRecord& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.t == b.t && a.k == b.k && a.round == b.round && a.gamma == b.gamma && eq(a.loss, b.loss) &&
         eq(a.grad_norm_sq, b.grad_norm_sq) && eq(a.consensus, b.consensus) && eq(a.weight_mass, b.weight_mass) &&
         eq(a.bias_sq, b.bias_sq) && a.stalled == b.stalled && same(a.x_bar, b.x_bar) && same(a.d_bar, b.d_bar);
}

bool operator==(const OuterRecord& a, const OuterRecord& b) {
  return a.t == b.t && a.inner_steps == b.inner_steps && a.partial == b.partial && a.gamma == b.gamma &&
         same(a.x_outer, b.x_outer) && same(a.u, b.u);
}

bool operator==(const MetricsTrace& a, const MetricsTrace& b) {
  const auto& x = a.meta;
  const auto& y = b.meta;
  const bool meta = x.workers == y.workers && x.dimension == y.dimension && x.tau == y.tau &&
                    x.outer_iterations == y.outer_iterations && x.total_steps == y.total_steps &&
                    x.alpha == y.alpha && x.beta == y.beta && x.protocol == y.protocol && x.base == y.base &&
                    x.noaverage == y.noaverage && x.seed == y.seed && x.initial_loss == y.initial_loss;
  const auto& c = a.counters;
  const auto& d = b.counters;
  const bool counters = c.exact_averages == d.exact_averages && c.gradient_allreduces == d.gradient_allreduces &&
                        c.gossip_messages == d.gossip_messages && c.pushsum_messages == d.pushsum_messages &&
                        c.double_averages == d.double_averages && c.drain_barriers == d.drain_barriers;
  return meta && counters && a.undelivered == b.undelivered && a.steps == b.steps && a.outer == b.outer;
}

EquivalenceReport equivalence_check(const MetricsTrace& a, const MetricsTrace& b, double tol) {
  EquivalenceReport report;
  if (a.steps.size() != b.steps.size()) {
    report.diagnostic = "length mismatch: " + std::to_string(a.steps.size()) + " vs " + std::to_string(b.steps.size()) +
                        " step records";
    report.max_diff = std::numeric_limits<double>::infinity();
    return report;
  }
  report.steps = a.steps.size();
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    const auto& xa = a.steps[s].x_bar;
    const auto& xb = b.steps[s].x_bar;
    if (xa.size() != xb.size()) {
      report.diagnostic = "dimension mismatch at step " + std::to_string(s);
      report.max_diff = std::numeric_limits<double>::infinity();
      return report;
    }
    const double diff = xa.size() == 0 ? 0.0 : (xa - xb).lpNorm<Eigen::Infinity>();
    if (!(diff <= report.max_diff)) {
      report.max_diff = diff;
      report.worst_step = s;
    }
  }
  report.pass = report.max_diff <= tol;
  if (!report.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "max |x_a - x_b|_inf = %.3e at step %llu exceeds %.1e", report.max_diff,
                  static_cast<unsigned long long>(report.worst_step), tol);
    report.diagnostic = buf;
  }
  return report;
}

}  // namespace slowmo
