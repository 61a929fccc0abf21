// Copyright 2026 The pimkit Authors
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

// Acceptance criteria at full size. One line per criterion; exit status is
// nonzero when any criterion fails or exceeds its time budget.

#include <cinttypes>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pimkit/fuzz.hpp"
#include "pimkit/selftest.hpp"

namespace {

using pimkit::selftest::PropertyResult;

struct Criterion {
  int id;
  std::function<PropertyResult()> run;
  std::optional<double> budget_seconds;
};

}  // namespace

int main() {
  namespace st = pimkit::selftest;
  const std::uint64_t seed = pimkit::fuzz::seed_from_env(2026);
  const st::Counts n = st::full_counts();

  const std::vector<Criterion> criteria = {
      {1, [&] { return st::codec_roundtrip(seed, n.codec); }, 5.0},
      {2, [&] { return st::assembler_roundtrip(seed + 1, n.assembler); }, 10.0},
      {3, [&] { return st::opcode_differential(seed + 2, n.per_opcode); }, 60.0},
      {4, [&] { return st::mlp_end_to_end(seed + 3, n.mlp_inputs); }, 10.0},
      {5, [&] { return st::split_invariance(seed + 4, n.split_draws); }, 5.0},
      {6, [&] { return st::sync_semantics(n.sync_repeats); }, std::nullopt},
      {7, [&] { return st::determinism(seed + 5, n.determinism_bundles); }, std::nullopt},
      {8, [&] { return st::variable_bitwidth(seed + 6, n.bitwidth_cases); }, std::nullopt},
      {9, [&] { return st::saturation_wrap(seed + 7, n.edge_cases); }, std::nullopt},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const PropertyResult r = c.run();
    const bool in_time = !c.budget_seconds || r.seconds < *c.budget_seconds;
    const bool pass = r.passed && in_time;
    failures += pass ? 0 : 1;
    std::printf("criterion %d: %s  %-26s %8" PRIu64 " cases  %6.2f s", c.id,
                pass ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.seconds);
    if (c.budget_seconds) std::printf(" (limit %.0f s)", *c.budget_seconds);
    if (!r.detail.empty()) std::printf("  %s", r.detail.c_str());
    if (!in_time) std::printf("  over time budget");
    std::printf("\n");
  }
  std::printf("seed %" PRIu64 ": %d of %zu criteria failed\n", seed, failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
