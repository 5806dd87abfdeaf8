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

#pragma once

#include "slowmo/simkernel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace slowmo {

/// One JSON object per line: meta, step records, outer records, counters.
std::string to_jsonl(const MetricsTrace& trace);
MetricsTrace from_jsonl(const std::string& text);
MetricsTrace read_jsonl(const std::string& path);

/// Header plus one row: final loss, min loss, final ||grad f||^2, final consensus.
/// An empty trace yields the header only.
std::string summary_csv(const MetricsTrace& trace);

/// Writes trace.jsonl and/or summary.csv into dir; returns the paths written.
std::vector<std::string> emit_metrics(const MetricsTrace& trace, const std::string& dir, const std::string& format);

/// FNV-1a over the JSONL serialisation, as 16 hex digits.
std::string trace_hash(const MetricsTrace& trace);

bool operator==(const StepRecord& a, const StepRecord& b);
bool operator==(const OuterRecord& a, const OuterRecord& b);
bool operator==(const MetricsTrace& a, const MetricsTrace& b);

struct EquivalenceReport {
  bool pass = false;
  double max_diff = 0.0;  // max over steps of ||x_bar_a - x_bar_b||_inf
  std::uint64_t worst_step = 0;
  std::uint64_t steps = 0;
  std::string diagnostic;
};

EquivalenceReport equivalence_check(const MetricsTrace& a, const MetricsTrace& b, double tol);

}  // namespace slowmo
