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

#include "pimkit/vm.hpp"

#include <gtest/gtest.h>

#include "pimkit/asm.hpp"
#include "pimkit/lower.hpp"

namespace pimkit::vm {
namespace {

using Lines = std::vector<std::string>;

manifest::ProgramBundle make_bundle(const std::vector<Lines>& cores, std::uint32_t lmem = 256) {
  manifest::ProgramBundle b;
  b.global_mem_bytes = 256;
  for (std::size_t i = 0; i < cores.size(); ++i) {
    manifest::CoreConfig c;
    c.core_id = static_cast<std::uint32_t>(i);
    c.local_mem_bytes = lmem;
    for (const std::string& line : cores[i]) c.code.push_back(assembler::parse_instruction(line));
    b.cores.push_back(std::move(c));
  }
  return b;
}

void put(Machine& m, std::uint32_t core, std::uint64_t addr, std::vector<std::int64_t> v,
         std::uint32_t bits = 8) {
  const auto bytes = lower::encode_elements(v, bits);
  std::copy(bytes.begin(), bytes.end(), m.core(core).lmem.begin() + static_cast<std::ptrdiff_t>(addr));
}

std::vector<std::int64_t> get(const Machine& m, std::uint32_t core, std::uint64_t addr,
                              std::size_t n, std::uint32_t bits = 8) {
  return lower::decode_elements(std::span(m.core(core).lmem).subspan(addr), n, bits);
}

// Runs core 0's program over `inputs` placed at 0, 16, ... and returns the
// `n` elements at 64.
std::vector<std::int64_t> run_vector(const Lines& code, const std::vector<std::vector<std::int64_t>>& inputs,
                                     std::size_t n, std::uint32_t out_bits = 8,
                                     std::uint32_t in_bits = 8) {
  Lines full = {"sldi $r1, 0", "sldi $r2, 16", "sldi $r3, 64"};
  full.insert(full.end(), code.begin(), code.end());
  Machine m = Machine::load(make_bundle({full}));
  for (std::size_t k = 0; k < inputs.size(); ++k) put(m, 0, 16 * k, inputs[k], in_bits);
  const RunResult r = m.run(100);
  EXPECT_EQ(r.status, RunStatus::kCompleted) << (r.trap ? r.trap->to_json() : "");
  return get(m, 0, 64, n, out_bits);
}

TrapKind trap_of(const manifest::ProgramBundle& b, MachineOptions options = {}) {
  Machine m = Machine::load(b, options);
  const RunResult r = m.run(1000);
  EXPECT_EQ(r.status, RunStatus::kTrapped);
  return r.trap ? r.trap->kind : TrapKind::kDeadlock;
}

TEST(VmLoadTest, PowerUpState) {
  manifest::ProgramBundle b = make_bundle({{"sldi $r1, 5"}, {}});
  b.global_mem_init.push_back(manifest::GlobalInit{0, {1, 2, 3, 4}});
  const Machine m = Machine::load(b);
  ASSERT_EQ(m.num_cores(), 2U);
  EXPECT_EQ(m.core(0).pc, 0U);
  EXPECT_EQ(m.core(0).events, std::vector<std::uint32_t>(16, 0));
  EXPECT_EQ(m.core(0).bw, (BitWidthState{8, 8}));
  EXPECT_EQ(m.gmem()[0], 1);
  EXPECT_EQ(m.gmem()[3], 4);
  EXPECT_EQ(m.gmem()[4], 0);
  EXPECT_EQ(m.pending_messages(0, 1), 0U);
  EXPECT_EQ(m.pending_messages(1, 0), 0U);
}

TEST(VmLoadTest, SendToSelfIsRejected) {
  EXPECT_THROW(Machine::load(make_bundle({{"send $r1, 0, 4"}})), manifest::BundleError);
}

TEST(VmTest, EffectiveAddress) {
  EXPECT_EQ(effective_address(100, isa::Offset{0b010, 4}, Slot::kRs1, 2), 108U);
  for (const Slot s : {Slot::kRd, Slot::kRs1, Slot::kRs2}) {
    EXPECT_EQ(effective_address(100, isa::Offset{0, 9}, s, 2), 100U);
  }
  EXPECT_EQ(effective_address(0, isa::Offset{0b001, 7}, Slot::kRd, 1), 7U);
  EXPECT_EQ(effective_address(0, isa::Offset{0b001, 7}, Slot::kRs2, 1), 0U);
}

TEST(VmTest, SingleInstruction) {
  Machine m = Machine::load(make_bundle({{"sldi $r1, 5"}}));
  EXPECT_EQ(m.step().status, StepStatus::kProgressed);
  EXPECT_EQ(m.core(0).regs[1], 5U);
  EXPECT_EQ(m.core(0).status, CoreStatus::kFinished);
  EXPECT_EQ(m.step().status, StepStatus::kAllBlockedOrFinished);
}

TEST(VmTest, RunCounts) {
  Machine empty = Machine::load(make_bundle({{}, {}}));
  const RunResult r0 = empty.run(10);
  EXPECT_EQ(r0.status, RunStatus::kCompleted);
  EXPECT_EQ(r0.steps, 0U);
  EXPECT_TRUE(empty.all_finished());

  Machine three = Machine::load(make_bundle({{"sldi $r1, 1", "sldi $r2, 2", "sadd $r3, $r1, $r2"}}));
  const RunResult r = three.run(10);
  EXPECT_EQ(r.per_core, std::vector<std::uint64_t>{3});
  EXPECT_EQ(r.per_opcode[static_cast<int>(isa::Opcode::kSldi) - 1], 2U);

  Machine limited = Machine::load(make_bundle({{"sldi $r1, 1", "sldi $r2, 2"}}));
  EXPECT_EQ(limited.run(1).status, RunStatus::kStepLimitExceeded);
}

TEST(VmTest, ScalarArithmetic) {
  Machine m = Machine::load(make_bundle({{"sldi $r1, 2", "sldi $r2, 3", "sadd $r3, $r1, $r2",
                                          "sldi $r4, 5", "saddi $r5, $r4, -3",
                                          "sldi $r6, 65536", "smul $r7, $r6, $r6",
                                          "ssub $r8, $r1, $r2"}}));
  m.run(100);
  EXPECT_EQ(m.core(0).regs[3], 5U);
  EXPECT_EQ(m.core(0).regs[5], 2U);
  EXPECT_EQ(m.core(0).regs[7], 0U);  // 2^32 wraps
  EXPECT_EQ(m.core(0).regs[8], 0xFFFFFFFFU);
}

TEST(VmTest, RegisterZeroIsAnOrdinaryRegister) {
  Machine m = Machine::load(make_bundle({{"sldi $r0, 9"}}));
  m.run(10);
  EXPECT_EQ(m.core(0).regs[0], 9U);
}

TEST(VmTest, Setbw) {
  Machine m = Machine::load(make_bundle({{"setbw 8, 16"}, {"setbw 10, 10"}}));
  m.run(10);
  EXPECT_EQ(m.core(0).bw.ibyw(), 1U);
  EXPECT_EQ(m.core(0).bw.obyw(), 2U);
  EXPECT_EQ(m.core(1).bw.ibyw(), 2U);

  manifest::ProgramBundle fixed = make_bundle({{"setbw 8, 16"}});
  fixed.variable_bitwidth_supported = false;
  EXPECT_THROW(Machine::load(fixed), manifest::BundleError);
  MachineOptions deferred;
  deferred.defer_capability_checks = true;
  EXPECT_EQ(trap_of(fixed, deferred), TrapKind::kInvalidInstructionForHardware);
}

manifest::ProgramBundle mvmul_bundle(const manifest::Matrix& w, const std::string& instr) {
  manifest::ProgramBundle b = make_bundle({{"sldi $r1, 0", "sldi $r2, 64", instr}});
  manifest::CoreConfig& c = b.cores[0];
  c.arrays.push_back(manifest::LogicalArray{0, w, std::nullopt});
  c.groups.push_back(manifest::ArrayGroup{
      0, {manifest::Tile{0, 0, 0}}, static_cast<std::uint32_t>(w.rows),
      static_cast<std::uint32_t>(w.cols)});
  return b;
}

TEST(VmTest, Mvmul) {
  manifest::Matrix identity(2, 2);
  identity.at(0, 0) = identity.at(1, 1) = 1;
  for (const auto& [relu, expected] : {std::pair{0, std::vector<std::int64_t>{3, -1}},
                                       std::pair{1, std::vector<std::int64_t>{3, 0}}}) {
    Machine m = Machine::load(
        mvmul_bundle(identity, "mvmul $r2, $r1, 8, " + std::to_string(relu) + ", 0"));
    put(m, 0, 0, {3, -1});
    ASSERT_EQ(m.run(10).status, RunStatus::kCompleted);
    EXPECT_EQ(get(m, 0, 64, 2), expected);
  }
  manifest::Matrix big(1, 2);
  big.data = {127, 127};
  Machine m = Machine::load(mvmul_bundle(big, "mvmul $r2, $r1, 8, 0, 0"));
  put(m, 0, 0, {127, 127});
  m.run(10);
  EXPECT_EQ(get(m, 0, 64, 1), std::vector<std::int64_t>{127});  // 32258 saturates
}

TEST(VmTest, Elementwise) {
  EXPECT_EQ(run_vector({"vvadd $r3, $r1, $r2, 3"}, {{1, 2, 3}, {4, 5, 6}}, 3),
            (std::vector<std::int64_t>{5, 7, 9}));
  EXPECT_EQ(run_vector({"vvsra $r3, $r1, $r2, 2"}, {{-8, 8}, {1, 2}}, 2),
            (std::vector<std::int64_t>{-4, 2}));
  EXPECT_EQ(run_vector({"vvadd $r3, $r1, $r2, 1"}, {{127}, {1}}, 1),
            (std::vector<std::int64_t>{-128}));
  EXPECT_EQ(run_vector({"vsub $r3, $r1, $r2, 2"}, {{-128, 5}, {1, 7}}, 2),
            (std::vector<std::int64_t>{127, -2}));
  EXPECT_EQ(run_vector({"vmax $r3, $r1, $r2, 2"}, {{-3, 9}, {2, -9}}, 2),
            (std::vector<std::int64_t>{2, 9}));
  EXPECT_EQ(run_vector({"vrelu $r3, $r1, 3"}, {{-3, 0, 4}}, 3),
            (std::vector<std::int64_t>{0, 0, 4}));
}

TEST(VmTest, NegativeShiftTraps) {
  Machine m = Machine::load(make_bundle({{"sldi $r1, 0", "sldi $r2, 16", "sldi $r3, 64",
                                          "vvsll $r3, $r1, $r2, 1"}}));
  put(m, 0, 16, {-1});
  const RunResult r = m.run(10);
  ASSERT_TRUE(r.trap.has_value());
  EXPECT_EQ(r.trap->kind, TrapKind::kNegativeShift);
  EXPECT_EQ(r.trap->pc, 3U);
}

TEST(VmTest, Activations) {
  EXPECT_EQ(run_vector({"vtanh $r3, $r1, 1"}, {{0}}, 1), std::vector<std::int64_t>{0});
  // Default Q-format at 8 bits is frac_in = frac_out = 6.
  EXPECT_EQ(run_vector({"vsigm $r3, $r1, 1"}, {{0}}, 1), std::vector<std::int64_t>{32});
  EXPECT_EQ(run_vector({"vtanh $r3, $r1, 1"}, {{127}}, 1), std::vector<std::int64_t>{62});
}

TEST(VmTest, Reductions) {
  EXPECT_EQ(run_vector({"vdmul $r3, $r1, $r2, 3"}, {{1, 2, 3}, {4, 5, 6}}, 1),
            std::vector<std::int64_t>{32});
  const Lines avg = {"sldi $r4, 1", "vavg $r3, $r1, $r4, 4"};
  EXPECT_EQ(run_vector(avg, {{1, 2, 3, 4}}, 1), std::vector<std::int64_t>{2});
  const Lines avg2 = {"sldi $r4, 1", "vavg $r3, $r1, $r4, 2"};
  EXPECT_EQ(run_vector(avg2, {{-1, -2}}, 1), std::vector<std::int64_t>{-1});
}

TEST(VmTest, MoveAndResize) {
  EXPECT_EQ(run_vector({"sldi $r4, 2", "vmv $r3, $r1, $r4, 3"}, {{9, 0, 8, 0, 7, 0}}, 3),
            (std::vector<std::int64_t>{9, 8, 7}));
  EXPECT_EQ(run_vector({"sldi $r4, 100", "setbw 16, 16", "vrsu $r3, $r1, $r4, 2"},
                       {{50, 150}}, 2, 16, 16),
            (std::vector<std::int64_t>{50, 100}));
  EXPECT_EQ(run_vector({"sldi $r4, 0", "vrsl $r3, $r1, $r4, 2"}, {{-5, 5}}, 2),
            (std::vector<std::int64_t>{0, 5}));
}

TEST(VmTest, TenBitElementsUseTwoBytes) {
  Machine m = Machine::load(make_bundle(
      {{"setbw 10, 10", "sldi $r1, 0", "sldi $r2, 16", "sldi $r3, 64", "vvadd $r3, $r1, $r2, 2"}}));
  put(m, 0, 0, {511, -512}, 10);
  put(m, 0, 16, {1, -1}, 10);
  ASSERT_EQ(m.run(10).status, RunStatus::kCompleted);
  // 511 + 1 wraps to -512, -512 - 1 wraps to 511; only 10 low bits are set.
  const auto& lmem = m.core(0).lmem;
  EXPECT_EQ(lmem[64], 0x00);
  EXPECT_EQ(lmem[65], 0x02);
  EXPECT_EQ(lmem[66], 0xFF);
  EXPECT_EQ(lmem[67], 0x01);
}

TEST(VmTest, Memory) {
  manifest::ProgramBundle b = make_bundle(
      {{"ldi $r0, 171, 4", "sldi $r2, 16", "sldi $r4, 32", "ld $r4, $r2, 8"}});
  b.global_mem_init.push_back(manifest::GlobalInit{16, {1, 2, 3, 4, 5, 6, 7, 8}});
  Machine m = Machine::load(b);
  ASSERT_EQ(m.run(10).status, RunStatus::kCompleted);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(m.core(0).lmem[i], 0xAB);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(m.core(0).lmem[32 + i], i + 1);

  EXPECT_EQ(trap_of(make_bundle({{"sldi $r1, 0", "sldi $r2, 4", "lmv $r2, $r1, 8"}})),
            TrapKind::kOverlapUndefined);
  MachineOptions permissive;
  permissive.overlap = OverlapMode::kPermissive;
  Machine p = Machine::load(make_bundle({{"sldi $r1, 0", "sldi $r2, 4", "lmv $r2, $r1, 8"}}),
                            permissive);
  EXPECT_EQ(p.run(10).status, RunStatus::kCompleted);
  EXPECT_EQ(trap_of(make_bundle({{"sldi $r1, 250", "ldi $r1, 1, 8"}})),
            TrapKind::kOutOfBoundsLocal);
}

TEST(VmTest, SendRecv) {
  Machine m = Machine::load(make_bundle({{"sldi $r1, 8", "send $r1, 1, 4"},
                                         {"sldi $r2, 100", "recv $r2, 0, 4"}}));
  put(m, 0, 8, {1, 2, 3, 4});
  const RunResult r = m.run(100);
  ASSERT_EQ(r.status, RunStatus::kCompleted);
  EXPECT_EQ(get(m, 1, 100, 4), (std::vector<std::int64_t>{1, 2, 3, 4}));
  EXPECT_EQ(r.bytes_sent, 4U);

  EXPECT_EQ(trap_of(make_bundle({{"send $r1, 1, 4"}, {"recv $r2, 0, 8"}})),
            TrapKind::kSizeMismatchSendRecv);
  EXPECT_EQ(trap_of(make_bundle({{"send $r1, 1, 4"}, {"sldi $r1, 1"}})), TrapKind::kDeadlock);
}

TEST(VmTest, WaitAndSync) {
  Machine m = Machine::load(make_bundle({{"wait 0, 2", "wait 0, 0", "sldi $r1, 7"},
                                         {"sync 0, 0", "sync 0, 0"}}));
  ASSERT_EQ(m.run(100).status, RunStatus::kCompleted);
  EXPECT_EQ(m.core(0).events[0], 0U);
  EXPECT_EQ(m.core(0).regs[1], 7U);

  Machine zero = Machine::load(make_bundle({{"wait 0, 0"}}));
  EXPECT_EQ(zero.run(10).status, RunStatus::kCompleted);
  EXPECT_EQ(zero.core(0).events[0], 0U);

  EXPECT_EQ(trap_of(make_bundle({{"wait 0, 1"}})), TrapKind::kDeadlock);
}

TEST(VmTest, TraceAndStatsFormat) {
  Machine m = Machine::load(make_bundle({{"sldi $r1, 5"}}));
  std::vector<std::string> lines;
  m.set_trace_sink([&](const TraceEvent& e) { lines.push_back(e.to_line()); });
  const RunResult r = m.run(10);
  ASSERT_EQ(lines.size(), 1U);
  EXPECT_EQ(lines[0], "0\t0\t0\tsldi $r1, 5\tc0.r1=0x00000005");
  EXPECT_NE(r.stats_json().find("\"sldi\":1"), std::string::npos) << r.stats_json();
}

TEST(VmTest, FaultInjectionChangesVvadd) {
  MachineOptions faulty;
  faulty.fault = FaultInjection::kVvaddOffByOne;
  Machine m = Machine::load(make_bundle({{"sldi $r1, 0", "sldi $r2, 16", "sldi $r3, 64",
                                          "vvadd $r3, $r1, $r2, 1"}}),
                            faulty);
  put(m, 0, 0, {1});
  put(m, 0, 16, {2});
  m.run(10);
  EXPECT_EQ(get(m, 0, 64, 1), std::vector<std::int64_t>{4});
}

}  // namespace
}  // namespace pimkit::vm
