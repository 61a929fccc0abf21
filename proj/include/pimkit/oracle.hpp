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

// Reference semantics for every instruction, written against the ISA
// definition with unbounded integers and bit-level element access, and a
// differential driver that replays a vm run against it.
//
// All intermediates are exact; quantization (wrap or saturate) happens only
// when a result is stored.
//
// Trap precedence, shared with the vm: hardware capability, then length and
// stride checks, then source ranges in operand order, then value checks,
// then the destination range, then overlap. Accesses of zero bytes never
// trap.

#ifndef PIMKIT_ORACLE_HPP_
#define PIMKIT_ORACLE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pimkit/isa.hpp"
#include "pimkit/manifest.hpp"
#include "pimkit/vm.hpp"

namespace pimkit::oracle {

struct RefWidths {
  std::uint32_t ibiw = 8;
  std::uint32_t obiw = 8;
  bool operator==(const RefWidths&) const = default;
};

// Observable state of one core plus the global memory it sees.
struct RefEnv {
  std::uint32_t pc = 0;
  std::vector<std::uint8_t> lmem;
  std::array<std::uint32_t, isa::kNumRegisters> regs{};
  RefWidths bw;
  std::vector<std::uint32_t> events;
  std::vector<manifest::Matrix> groups;  // indexed by group id
  manifest::ActivationFormat qformat;
  bool variable_bw = true;
  bool strict_overlap = true;
  std::vector<std::uint8_t> gmem;
};

struct RefTrap {
  vm::TrapKind kind;
  std::string detail;
};

// Executes one non-communication instruction in place and advances pc.
// send, recv and wait need peers and are rejected with std::logic_error;
// sync is accepted only when it targets this core (`self`).
std::optional<RefTrap> ref_step(const isa::Instruction& instr, RefEnv& env,
                                std::uint32_t self = 0);

// Value-returning form of ref_step.
std::variant<RefEnv, RefTrap> ref_exec(const isa::Instruction& instr, RefEnv env,
                                       std::uint32_t self = 0);

// Completes a matched send/recv pair and advances both pcs.
std::optional<RefTrap> ref_transfer(RefEnv& sender, const isa::Send& send, RefEnv& receiver,
                                    const isa::Recv& recv);

// Checks the range a send reads, without transferring.
std::optional<RefTrap> ref_send_source_check(const RefEnv& sender, const isa::Send& send);

// Increments the target's event counter modulo 2^32.
void ref_sync(RefEnv& target, std::uint32_t ev);

// Returns true and resets the counter when it equals the expected value.
bool ref_wait(RefEnv& env, const isa::Wait& wait);

// Group matrix assembled directly from the tile list.
manifest::Matrix ref_group_matrix(const manifest::CoreConfig& core, std::uint32_t group_id);

// Fresh power-up state for every core of `bundle`. gmem is left empty in
// each env; the caller owns the single shared image.
std::vector<RefEnv> ref_power_up(const manifest::ProgramBundle& bundle, bool strict_overlap);
std::vector<std::uint8_t> ref_initial_gmem(const manifest::ProgramBundle& bundle);

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LayerActivation { kNone, kRelu, kSigmoid, kTanh };

// The composition a lowered fully connected layer must equal:
// saturate_obiw(W x), then wrap_obiw(+ bias), then the activation evaluated
// at obiw in and out with `qformat`.
std::vector<std::int64_t> ref_fc_layer(const manifest::Matrix& w,
                                       std::span<const std::int64_t> x,
                                       std::span<const std::int64_t> bias,
                                       LayerActivation activation, std::uint32_t obiw,
                                       const manifest::ActivationFormat& qformat = {});

// Per-core state supplied before the first step, applied to both sides.
struct CoreInit {
  std::optional<std::array<std::uint32_t, isa::kNumRegisters>> regs;
  std::optional<std::vector<std::uint8_t>> lmem;
  std::optional<vm::BitWidthState> bw;
  std::optional<std::vector<std::uint32_t>> events;
};

struct DiffOptions {
  std::uint64_t max_steps = 1'000'000;
  std::uint64_t seed = 0;  // echoed in reports
  vm::MachineOptions machine;
  std::vector<CoreInit> init;  // by core id; may be shorter than the core list
  std::optional<std::vector<std::uint8_t>> gmem;
};

struct Divergence {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint32_t core = 0;
  std::uint32_t pc = 0;
  std::string field;
  std::string expected;
  std::string actual;

  // {seed, step, core, pc, field, expected, actual}
  std::string to_json() const;
};

struct DiffReport {
  std::optional<Divergence> divergence;
  std::uint64_t steps = 0;
  vm::RunStatus status = vm::RunStatus::kCompleted;
  std::optional<vm::Trap> trap;

  bool ok() const { return !divergence.has_value(); }
  std::string summary() const;
};

// Runs the vm one step at a time and mirrors every step on shadow state,
// checking the scheduling choice, trap kind and all touched state.
DiffReport diff_run(const manifest::ProgramBundle& bundle, const DiffOptions& options = {});

}  // namespace pimkit::oracle

#endif  // PIMKIT_ORACLE_HPP_
