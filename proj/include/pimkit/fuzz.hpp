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

// Random generators for instructions, programs, bundles and single-opcode
// differential cases. Everything is a pure function of the Rng state.

#ifndef PIMKIT_FUZZ_HPP_
#define PIMKIT_FUZZ_HPP_

#include <cstdint>
#include <random>

#include "pimkit/asm.hpp"
#include "pimkit/isa.hpp"
#include "pimkit/manifest.hpp"
#include "pimkit/oracle.hpp"

namespace pimkit::fuzz {

using Rng = std::mt19937_64;

// PIMKIT_SEED when set and numeric, otherwise `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback);

// A valid instruction encodable in `mode`, with field values biased toward
// range edges.
isa::Instruction random_instruction(Rng& rng, isa::Opcode op, isa::EncodingMode mode);
isa::Instruction random_instruction(Rng& rng, isa::EncodingMode mode);

// 1-4 sections with distinct core ids, each 0-`max_len` instructions.
assembler::SourceProgram random_program(Rng& rng, std::size_t max_len = 40);

struct BundleShape {
  std::uint32_t cores = 1;
  std::size_t length = 200;  // body instructions per core, excluding setup
  std::uint32_t local_mem_bytes = 8192;
  std::uint64_t global_mem_bytes = 4096;
  isa::EncodingMode mode = isa::EncodingMode::kWord64;
  bool communication = true;  // send/recv and cross-core sync/wait
};

// Programs whose register setup keeps most accesses in range, so long runs
// exercise many opcodes before any trap. Cross-core traffic follows one
// global order, so the generated bundles complete unless an instruction
// traps.
manifest::ProgramBundle random_bundle(Rng& rng, const BundleShape& shape);

// One instruction of `op` on core 0 with randomized registers, local and
// global memory, bit-widths, event counters and array groups. Communication
// opcodes get a partner on core 1.
struct OpcodeCase {
  manifest::ProgramBundle bundle;
  oracle::DiffOptions options;
};
OpcodeCase random_opcode_case(Rng& rng, isa::Opcode op);

}  // namespace pimkit::fuzz

#endif  // PIMKIT_FUZZ_HPP_
