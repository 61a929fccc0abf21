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

// Property suite shared by `pimkit selftest` and the acceptance binary.
// Every property is seeded and deterministic; the oracle module is the
// reference wherever the vm is checked.

#ifndef PIMKIT_SELFTEST_HPP_
#define PIMKIT_SELFTEST_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pimkit/fuzz.hpp"
#include "pimkit/lower.hpp"
#include "pimkit/vm.hpp"

namespace pimkit::selftest {

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::uint64_t cases = 0;
  double seconds = 0;
  std::string detail;  // first failure, or a short summary
};

struct Counts {
  std::size_t codec = 100'000;  // per encoding mode
  std::size_t assembler = 10'000;
  std::size_t per_opcode = 10'000;
  std::size_t mlp_inputs = 100;
  std::size_t split_draws = 50;
  std::size_t sync_repeats = 100;
  std::size_t determinism_bundles = 20;
  std::size_t bitwidth_cases = 500;
  std::size_t edge_cases = 1'000;
};

Counts full_counts();
Counts reduced_counts();

PropertyResult codec_roundtrip(std::uint64_t seed, std::size_t per_mode);
PropertyResult assembler_roundtrip(std::uint64_t seed, std::size_t programs);
PropertyResult opcode_differential(std::uint64_t seed, std::size_t per_opcode,
                                   vm::FaultInjection fault = vm::FaultInjection::kNone);
PropertyResult mlp_end_to_end(std::uint64_t seed, std::size_t inputs);
PropertyResult split_invariance(std::uint64_t seed, std::size_t draws);
PropertyResult sync_semantics(std::size_t repeats);
PropertyResult determinism(std::uint64_t seed, std::size_t bundles);
PropertyResult variable_bitwidth(std::uint64_t seed, std::size_t cases);
PropertyResult saturation_wrap(std::uint64_t seed, std::size_t cases);

struct SuiteOptions {
  std::uint64_t seed = 1;
  Counts counts = reduced_counts();
  vm::FaultInjection fault = vm::FaultInjection::kNone;
};

std::vector<PropertyResult> run_suite(const SuiteOptions& options);

// ref_fc_layer applied layer by layer.
std::vector<std::int64_t> reference_forward(const lower::MlpSpec& spec,
                                            std::span<const std::int64_t> x);

// Weights uniform over mbiw, biases over obiw; every layer on core 0.
lower::MlpSpec random_mlp(fuzz::Rng& rng, const std::vector<std::uint32_t>& dims,
                          std::uint32_t bits = 8);

// Runs `bundle` to completion and returns the decoded output; throws
// std::runtime_error when the run does not complete.
std::vector<std::int64_t> run_lowered(const lower::LoweredMlp& lowered,
                                      std::span<const std::int64_t> x);

// The fixed two-core scenarios: core 1 syncs event 0 of core 0 twice while
// core 0 waits for 2 then for 0; and a send that no core receives.
manifest::ProgramBundle sync_twice_bundle();
manifest::ProgramBundle unmatched_send_bundle();

// Trace lines, stats JSON and gmem digest of one full run.
struct RunRecord {
  std::vector<std::string> trace;
  std::string stats;
  std::uint64_t digest = 0;
  vm::RunResult result;
};
RunRecord record_run(const manifest::ProgramBundle& bundle, std::uint64_t max_steps = 1'000'000,
                     vm::MachineOptions options = {});

}  // namespace pimkit::selftest

#endif  // PIMKIT_SELFTEST_HPP_
