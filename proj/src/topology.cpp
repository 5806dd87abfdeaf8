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

#include "slowmo/topology.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace slowmo {

namespace {

bool reaches_all(const std::vector<std::vector<WorkerId>>& adjacency) {
  const std::size_t m = adjacency.size();
  std::vector<bool> seen(m, false);
  std::vector<WorkerId> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const WorkerId node = stack.back();
    stack.pop_back();
    for (WorkerId next : adjacency[node]) {
      if (!seen[next]) {
        seen[next] = true;
        ++count;
        stack.push_back(next);
      }
    }
  }
  return count == m;
}

// Perfect matching drawn from the directed hop edges i -> i + hop. The edges split
// into cycles of length m / gcd(m, hop); alternate edges of each cycle are paired,
// which needs every cycle to have even length.
std::vector<WorkerId> hop_matching(std::size_t m, std::size_t hop, std::size_t round) {
  std::vector<WorkerId> partner(m);
  std::iota(partner.begin(), partner.end(), WorkerId{0});
  if (m == 1 || hop % m == 0) return partner;
  const std::size_t cycle = m / std::gcd(m, hop % m);
  if (cycle % 2 != 0) {
    throw ConfigError("round " + std::to_string(round) + ": hop " + std::to_string(hop) +
                      " edges cannot be symmetrised into a perfect matching for m=" + std::to_string(m));
  }
  std::vector<bool> done(m, false);
  for (WorkerId start = 0; start < m; ++start) {
    if (done[start]) continue;
    WorkerId node = start;
    for (std::size_t step = 0; step < cycle; step += 2) {
      const WorkerId next = (node + hop) % m;
      partner[node] = next;
      partner[next] = node;
      done[node] = done[next] = true;
      node = (next + hop) % m;
    }
  }
  return partner;
}

std::size_t hop_at(const TopologySchedule& schedule, std::size_t round) {
  if (schedule.kind() == TopologyKind::kRingDirected) return 1;
  return std::size_t{1} << (round % schedule.period());
}

}  // namespace

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kExponentialDirected: return "exponential-directed";
    case TopologyKind::kRingDirected: return "ring-directed";
    case TopologyKind::kComplete: return "complete";
    case TopologyKind::kIdentity: return "identity";
    case TopologyKind::kCustom: return "custom";
  }
  return "?";
}

TopologyKind parse_topology_kind(const std::string& name) {
  if (name == "exponential-directed") return TopologyKind::kExponentialDirected;
  if (name == "ring-directed") return TopologyKind::kRingDirected;
  if (name == "complete") return TopologyKind::kComplete;
  if (name == "identity") return TopologyKind::kIdentity;
  if (name == "custom") return TopologyKind::kCustom;
  throw ConfigError("unknown topology kind '" + name + "'");
}

std::size_t exponential_period(std::size_t workers) {
  if (workers <= 2) return 1;
  std::size_t p = 0;
  for (std::size_t v = workers - 1; v > 0; v >>= 1) ++p;  // floor(log2(m - 1)) + 1
  return p;
}

TopologySchedule TopologySchedule::exponential(std::size_t workers) {
  if (workers == 0) throw ConfigError("topology needs at least one worker");
  return {TopologyKind::kExponentialDirected, workers, exponential_period(workers)};
}

TopologySchedule TopologySchedule::ring(std::size_t workers) {
  if (workers == 0) throw ConfigError("topology needs at least one worker");
  return {TopologyKind::kRingDirected, workers, 1};
}

TopologySchedule TopologySchedule::complete(std::size_t workers) {
  if (workers == 0) throw ConfigError("topology needs at least one worker");
  return {TopologyKind::kComplete, workers, 1};
}

TopologySchedule TopologySchedule::identity(std::size_t workers) {
  if (workers == 0) throw ConfigError("topology needs at least one worker");
  return {TopologyKind::kIdentity, workers, 1};
}

TopologySchedule TopologySchedule::custom(std::size_t workers, std::vector<std::vector<std::vector<WorkerId>>> rounds) {
  if (workers == 0) throw ConfigError("topology needs at least one worker");
  if (rounds.empty()) throw ConfigError("custom topology needs at least one round");
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    if (rounds[r].size() != workers)
      throw ConfigError("custom topology round " + std::to_string(r) + " must list every worker");
    for (WorkerId i = 0; i < workers; ++i) {
      auto& outs = rounds[r][i];
      for (WorkerId j : outs) {
        if (j >= workers) throw ConfigError("custom topology references unknown worker " + std::to_string(j));
      }
      std::sort(outs.begin(), outs.end());
      outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
      outs.erase(std::remove(outs.begin(), outs.end(), i), outs.end());
    }
  }
  TopologySchedule s(TopologyKind::kCustom, workers, rounds.size());
  s.custom_ = std::move(rounds);
  if (!strongly_connected_over_period(s))
    throw ConfigError("custom topology is not strongly connected over one period");
  return s;
}

TopologySchedule TopologySchedule::load_custom(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
    const auto workers = doc.at("workers").get<std::size_t>();
    auto rounds = doc.at("rounds").get<std::vector<std::vector<std::vector<WorkerId>>>>();
    return custom(workers, std::move(rounds));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed topology file '" + path + "': " + e.what());
  }
}

std::vector<WorkerId> TopologySchedule::out_neighbors(WorkerId worker, std::size_t round) const {
  if (worker >= workers_) throw ConfigError("unknown worker id " + std::to_string(worker));
  switch (kind_) {
    case TopologyKind::kExponentialDirected:
    case TopologyKind::kRingDirected: {
      const WorkerId peer = out_neighbor(*this, worker, round);
      if (peer == worker) return {};
      return {peer};
    }
    case TopologyKind::kComplete: {
      std::vector<WorkerId> outs;
      for (WorkerId j = 0; j < workers_; ++j)
        if (j != worker) outs.push_back(j);
      return outs;
    }
    case TopologyKind::kIdentity:
      return {};
    case TopologyKind::kCustom:
      return custom_[round % period_][worker];
  }
  throw InternalError("unreachable topology kind");
}

WorkerId out_neighbor(const TopologySchedule& schedule, WorkerId worker, std::size_t round) {
  const std::size_t m = schedule.workers();
  if (worker >= m) throw ConfigError("unknown worker id " + std::to_string(worker));
  if (schedule.kind() != TopologyKind::kExponentialDirected && schedule.kind() != TopologyKind::kRingDirected)
    throw ConfigError("out_neighbor is defined for single-peer schedules only");
  if (m == 1) return worker;
  return (worker + hop_at(schedule, round)) % m;
}

MixingMatrix mixing_matrix(const TopologySchedule& schedule, std::size_t round, Stochasticity stochasticity) {
  const std::size_t m = schedule.workers();
  const auto n = static_cast<Eigen::Index>(m);
  MixingMatrix mix{Matrix::Zero(n, n), stochasticity};

  if (schedule.kind() == TopologyKind::kComplete) {
    mix.weights.setConstant(1.0 / static_cast<double>(m));
    return mix;
  }

  if (stochasticity == Stochasticity::kColumn) {
    for (WorkerId j = 0; j < m; ++j) {
      const auto outs = schedule.out_neighbors(j, round);
      const double share = 1.0 / static_cast<double>(outs.size() + 1);
      mix.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = share;
      for (WorkerId i : outs) mix.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = share;
    }
    return mix;
  }

  std::vector<WorkerId> partner(m);
  std::iota(partner.begin(), partner.end(), WorkerId{0});
  switch (schedule.kind()) {
    case TopologyKind::kExponentialDirected:
    case TopologyKind::kRingDirected:
      partner = hop_matching(m, hop_at(schedule, round), round);
      break;
    case TopologyKind::kIdentity:
      break;
    case TopologyKind::kCustom: {
      // The symmetrised edge set must already be a matching.
      std::vector<std::vector<WorkerId>> undirected(m);
      for (WorkerId i = 0; i < m; ++i) {
        for (WorkerId j : schedule.out_neighbors(i, round)) {
          undirected[i].push_back(j);
          undirected[j].push_back(i);
        }
      }
      for (WorkerId i = 0; i < m; ++i) {
        auto& peers = undirected[i];
        std::sort(peers.begin(), peers.end());
        peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
        if (peers.size() > 1)
          throw ConfigError("round " + std::to_string(round) + ": worker " + std::to_string(i) +
                            " has several peers; doubly-stochastic mixing needs a one-peer matching");
        if (peers.size() == 1) partner[i] = peers.front();
      }
      break;
    }
    case TopologyKind::kComplete:
      break;
  }
  for (WorkerId i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (partner[i] == i) {
      mix.weights(r, r) = 1.0;
    } else {
      mix.weights(r, r) = 0.5;
      mix.weights(r, static_cast<Eigen::Index>(partner[i])) = 0.5;
    }
  }
  return mix;
}

bool is_column_stochastic(const Matrix& p, double tol) {
  if ((p.array() < 0.0).any()) return false;
  return ((p.colwise().sum().array() - 1.0).abs() <= tol).all();
}

bool is_doubly_stochastic(const Matrix& p, double tol) {
  return is_column_stochastic(p, tol) && ((p.rowwise().sum().array() - 1.0).abs() <= tol).all();
}

bool strongly_connected_over_period(const TopologySchedule& schedule) {
  const std::size_t m = schedule.workers();
  std::vector<std::vector<WorkerId>> forward(m), backward(m);
  for (std::size_t r = 0; r < schedule.period(); ++r) {
    for (WorkerId i = 0; i < m; ++i) {
      for (WorkerId j : schedule.out_neighbors(i, r)) {
        forward[i].push_back(j);
        backward[j].push_back(i);
      }
    }
  }
  return reaches_all(forward) && reaches_all(backward);
}

}  // namespace slowmo
