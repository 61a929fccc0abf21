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

// Deterministic functional simulator for multi-core PIM programs.
//
// Cores are visited round-robin in ascending id, starting after the core
// that executed last. One step executes one instruction on the first core
// that can make progress; a matched send/recv pair completes both sides in
// the same step. A full round with no progress while some core is blocked
// raises a Deadlock trap.
//
// Storage convention: matrix/vector elements are signed two's complement,
// little-endian in ceil(bits/8) bytes. Only the low `bits` carry data; writes
// clear the padding bits and reads sign-extend from bit `bits - 1`.
//
// Overflow: elementwise results wrap modulo 2^bits; mvmul and tanh/sigmoid
// saturate. Vector instructions read all of their inputs before writing
// (except vrsu/vrsl, which process elements in ascending order).

#ifndef PIMKIT_VM_HPP_
#define PIMKIT_VM_HPP_

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pimkit/isa.hpp"
#include "pimkit/manifest.hpp"

namespace pimkit::vm {

struct BitWidthState {
  std::uint32_t ibiw = 8;
  std::uint32_t obiw = 8;

  std::uint32_t ibyw() const { return (ibiw + 7) / 8; }
  std::uint32_t obyw() const { return (obiw + 7) / 8; }
  bool operator==(const BitWidthState&) const = default;
};

enum class CoreStatus { kReady, kBlockedSend, kBlockedRecv, kBlockedWait, kFinished };

std::string_view to_string(CoreStatus s);

struct CoreState {
  std::uint32_t pc = 0;
  std::array<std::uint32_t, isa::kNumRegisters> regs{};
  std::vector<std::uint8_t> lmem;
  std::vector<std::uint32_t> events;
  BitWidthState bw;
  CoreStatus status = CoreStatus::kReady;
};

enum class TrapKind {
  kOutOfBoundsLocal,
  kOutOfBoundsGlobal,
  kUnknownGroup,
  kLengthMismatch,
  kOverlapUndefined,
  kNegativeShift,
  kInvalidInstructionForHardware,
  kSizeMismatchSendRecv,
  kDeadlock,
};

std::string_view to_string(TrapKind kind);

struct Trap {
  TrapKind kind;
  std::uint32_t core = 0;
  std::uint32_t pc = 0;
  std::string detail;

  std::string to_json() const;
};

// Which register slot an offset_select bit refers to.
enum class Slot : unsigned { kRd = 0, kRs1 = 1, kRs2 = 2 };

// base + elem_bytes * offset.value when the slot's select bit is set.
std::uint64_t effective_address(std::uint32_t base, const isa::Offset& offset, Slot slot,
                                std::uint32_t elem_bytes);

// Low 32 bits in the even register, high 32 bits in the next one.
std::uint64_t global_address(const CoreState& core, isa::RegId even_reg);

// Element codec for the storage convention above.
std::int64_t load_element(std::span<const std::uint8_t> bytes, unsigned bits);
void store_element(std::span<std::uint8_t> bytes, std::int64_t value, unsigned bits);

enum class EffectKind { kRegister, kLocal, kGlobal, kEvent, kMessage, kBitWidth };

struct Effect {
  EffectKind kind;
  std::uint32_t core = 0;   // core whose state changed
  std::uint32_t index = 0;  // register / event index, or message destination
  std::uint64_t begin = 0;  // memory range start, or new register / event value
  std::uint64_t size = 0;   // memory range length in bytes

  std::string to_string() const;
};

struct TraceEvent {
  std::uint64_t step = 0;
  std::uint32_t core = 0;
  std::uint32_t pc = 0;
  std::string text;  // canonical disassembly
  std::vector<Effect> effects;

  // step \t core \t pc \t disassembly \t effects
  std::string to_line() const;
};

enum class OverlapMode { kStrict, kPermissive };

// Test-only faults used to check that differential testing catches bugs.
enum class FaultInjection { kNone, kVvaddOffByOne };

struct MachineOptions {
  OverlapMode overlap = OverlapMode::kStrict;
  FaultInjection fault = FaultInjection::kNone;
  // Accept setbw/vrsu/vrsl on fixed-width hardware at load and trap with
  // InvalidInstructionForHardware when one executes.
  bool defer_capability_checks = false;
};

enum class StepStatus { kProgressed, kAllBlockedOrFinished, kTrapped };

struct StepResult {
  StepStatus status = StepStatus::kProgressed;
  std::optional<Trap> trap;
};

enum class RunStatus { kCompleted, kTrapped, kStepLimitExceeded };

std::string_view to_string(RunStatus s);

struct RunResult {
  RunStatus status = RunStatus::kCompleted;
  std::uint64_t steps = 0;
  std::optional<Trap> trap;
  std::array<std::uint64_t, isa::kNumOpcodes> per_opcode{};
  std::vector<std::uint64_t> per_core;
  std::uint64_t bytes_sent = 0;

  // {steps, per_opcode, per_core, bytes_sent, traps}
  std::string stats_json() const;
};

struct Message {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::vector<std::uint8_t> bytes;
};

class Machine {
 public:
  // Validates the bundle (throws manifest::BundleError) and powers up every
  // core: pc 0, registers, events and local memory zeroed.
  static Machine load(const manifest::ProgramBundle& bundle, MachineOptions options = {});

  StepResult step();
  RunResult run(std::uint64_t max_steps);

  void set_trace_sink(std::function<void(const TraceEvent&)> sink) {
    trace_sink_ = std::move(sink);
  }

  std::size_t num_cores() const { return cores_.size(); }
  const CoreState& core(std::size_t i) const { return cores_.at(i); }
  CoreState& core(std::size_t i) { return cores_.at(i); }
  std::span<const std::uint8_t> gmem() const { return gmem_; }
  std::span<std::uint8_t> gmem() { return gmem_; }
  const std::vector<isa::Instruction>& code(std::size_t i) const { return code_.at(i); }
  const manifest::Matrix& group_matrix(std::size_t core, std::uint32_t group) const;
  const manifest::ActivationFormat& activation_format() const { return qformat_; }
  bool variable_bitwidth_supported() const { return variable_bw_; }
  const MachineOptions& options() const { return options_; }

  std::uint64_t step_count() const { return step_count_; }
  std::size_t pending_messages(std::uint32_t from, std::uint32_t to) const;
  bool all_finished() const;

  // 64-bit FNV-1a over global memory.
  std::uint64_t gmem_digest() const;

  // Statistics so far, with the given status and trap.
  RunResult snapshot(RunStatus status) const;

 private:
  struct TrapSignal {
    TrapKind kind;
    std::string detail;
  };
  enum class Visit { kExecuted, kBlocked, kFinished };

  Machine() = default;

  Visit visit(std::uint32_t core_id, std::vector<TraceEvent>& events);
  void retire(std::uint32_t core_id, TraceEvent& event);
  TraceEvent begin_event(std::uint32_t core_id) const;

  void execute(std::uint32_t core_id, const isa::Instruction& instr, TraceEvent& ev);

  std::span<std::uint8_t> local(std::uint32_t core_id, std::uint64_t addr,
                                std::uint64_t size);
  std::span<std::uint8_t> global(std::uint64_t addr, std::uint64_t size);
  std::vector<std::int64_t> read_vector(std::uint32_t core_id, std::uint64_t addr,
                                        std::uint64_t count, unsigned bits,
                                        std::uint64_t stride_elems = 1);
  void write_vector(std::uint32_t core_id, std::uint64_t addr,
                    std::span<const std::int64_t> values, unsigned bits, TraceEvent& ev);
  void set_reg(std::uint32_t core_id, isa::RegId rd, std::uint32_t value, TraceEvent& ev);

  bool at_matching_recv(std::uint32_t receiver, std::uint32_t sender) const;
  bool at_matching_send(std::uint32_t sender, std::uint32_t receiver) const;
  void complete_rendezvous(std::uint32_t sender, std::uint32_t receiver,
                           std::vector<TraceEvent>& events);

  std::vector<CoreState> cores_;
  std::vector<std::vector<isa::Instruction>> code_;
  std::vector<std::vector<manifest::Matrix>> groups_;
  std::vector<std::uint8_t> gmem_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::deque<Message>> mailboxes_;
  manifest::ActivationFormat qformat_;
  bool variable_bw_ = true;
  MachineOptions options_;

  std::function<void(const TraceEvent&)> trace_sink_;
  std::uint32_t last_started_ = 0;
  std::uint64_t step_count_ = 0;
  std::optional<Trap> trap_;
  std::array<std::uint64_t, isa::kNumOpcodes> per_opcode_{};
  std::vector<std::uint64_t> per_core_;
  std::uint64_t bytes_sent_ = 0;
};

}  // namespace pimkit::vm

#endif  // PIMKIT_VM_HPP_
