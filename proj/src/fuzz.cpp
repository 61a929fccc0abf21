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

#include "pimkit/fuzz.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <string>
#include <type_traits>

namespace pimkit::fuzz {
namespace {

using isa::EncodingMode;
using isa::Opcode;
using isa::RegId;

std::uint64_t uniform(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

std::int64_t uniform_signed(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform(rng, 0, v.size() - 1)];
}

// Edge-biased value in [lo, hi].
std::uint64_t edgy(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  switch (uniform(rng, 0, 7)) {
    case 0:
      return lo;
    case 1:
      return hi;
    case 2:
      return std::min(hi, lo + 1);
    case 3:
      return hi > lo ? hi - 1 : hi;
    default:
      return uniform(rng, lo, hi);
  }
}

std::int64_t edgy_signed(Rng& rng, std::int64_t lo, std::int64_t hi) {
  switch (uniform(rng, 0, 7)) {
    case 0:
      return lo;
    case 1:
      return hi;
    case 2:
      return 0;
    case 3:
      return -1;
    default:
      return uniform_signed(rng, lo, hi);
  }
}

// Largest value a field can hold in 32-bit mode, when narrower than its
// architectural range.
std::uint32_t limit32(Opcode op, std::string_view field, std::uint32_t max) {
  if (field == "imm_len" || field == "imm_size") return std::min<std::uint32_t>(max, 2047);
  if (field == "imm_group") return std::min<std::uint32_t>(max, 511);
  if (field == "imm_core" && (op == Opcode::kSend || op == Opcode::kRecv)) {
    return std::min<std::uint32_t>(max, 31);
  }
  return max;
}

template <class T>
T random_fields(Rng& rng, EncodingMode mode) {
  T out{};
  const bool narrow = mode == EncodingMode::kWord32;
  T::operands(out, [&](const isa::OperandSpec& spec, auto& field) {
    using F = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<F, RegId>) {
      if (spec.kind == isa::OperandKind::kEvenReg) {
        field.index = static_cast<std::uint32_t>(2 * uniform(rng, 0, 15));
      } else {
        field.index = static_cast<std::uint32_t>(edgy(rng, 0, 31));
      }
    } else if constexpr (std::is_same_v<F, isa::Offset>) {
      if (!narrow && chance(rng, 0.7)) {
        field.select = static_cast<std::uint32_t>(uniform(rng, 0, 7));
        field.value = static_cast<std::uint32_t>(edgy(rng, 0, isa::kMax16));
      }
    } else if constexpr (std::is_same_v<F, std::int32_t>) {
      field = narrow ? static_cast<std::int32_t>(edgy_signed(rng, -32768, 32767))
                     : static_cast<std::int32_t>(edgy_signed(rng, INT32_MIN, INT32_MAX));
    } else {
      if (spec.kind == isa::OperandKind::kTrailing) {
        field = narrow ? 0U : static_cast<std::uint32_t>(edgy(rng, spec.min, spec.max));
      } else {
        const std::uint32_t hi = narrow ? limit32(T::kOpcode, spec.name, spec.max) : spec.max;
        field = static_cast<std::uint32_t>(edgy(rng, spec.min, hi));
      }
    }
  });
  return out;
}

template <std::size_t... I>
isa::Instruction random_by_index(Rng& rng, std::size_t index, EncodingMode mode,
                                 std::index_sequence<I...>) {
  using Fn = isa::Instruction (*)(Rng&, EncodingMode);
  static constexpr Fn kTable[] = {[](Rng& r, EncodingMode m) -> isa::Instruction {
    return random_fields<std::variant_alternative_t<I, isa::Instruction>>(r, m);
  }...};
  return kTable[index](rng, mode);
}

// ---------------------------------------------------------------------------
// Register conventions for generated bundles.

constexpr std::uint32_t kAddrRegFirst = 1, kAddrRegLast = 13;
constexpr std::uint32_t kShiftRegA = 14, kShiftRegB = 15;
constexpr std::uint32_t kStrideFirst = 16, kStrideLast = 19;
constexpr std::uint32_t kBoundA = 20, kBoundB = 21;
constexpr std::uint32_t kScratchFirst = 22, kScratchLast = 27;
constexpr std::uint32_t kGlobalA = 28, kGlobalB = 30;
constexpr std::uint32_t kSelfEvents = 4;  // events [0, 4) are for self sync

RegId addr_reg(Rng& rng) {
  return RegId{static_cast<std::uint32_t>(uniform(rng, kAddrRegFirst, kAddrRegLast))};
}
RegId scratch_reg(Rng& rng) {
  return RegId{static_cast<std::uint32_t>(uniform(rng, kScratchFirst, kScratchLast))};
}
// An address register other than `other`.
RegId other_addr_reg(Rng& rng, RegId other) {
  RegId r = addr_reg(rng);
  while (r == other) r = addr_reg(rng);
  return r;
}
RegId global_reg(Rng& rng) { return RegId{chance(rng, 0.5) ? kGlobalA : kGlobalB}; }

isa::Offset small_offset(Rng& rng, EncodingMode mode, std::uint32_t max_value) {
  if (mode == EncodingMode::kWord32 || chance(rng, 0.4)) return {};
  return isa::Offset{static_cast<std::uint32_t>(uniform(rng, 0, 7)),
                     static_cast<std::uint32_t>(uniform(rng, 0, max_value))};
}

struct CoreGen {
  std::uint32_t id = 0;
  std::uint32_t groups = 0;
  std::uint32_t ibiw = manifest::kDefaultBitWidth;  // tracked through setbw
  std::vector<std::uint32_t> self_events = std::vector<std::uint32_t>(kSelfEvents, 0);
  manifest::CoreConfig config;
};

void add_random_groups(Rng& rng, manifest::CoreConfig& core, std::uint32_t count,
                       std::uint32_t max_dim) {
  std::uint32_t next_array = 0;
  for (std::uint32_t g = 0; g < count; ++g) {
    const auto rows = static_cast<std::uint32_t>(uniform(rng, 1, max_dim));
    const auto cols = static_cast<std::uint32_t>(uniform(rng, 1, max_dim));
    manifest::ArrayGroup group;
    group.group_id = g;
    group.total_rows = rows;
    group.total_cols = cols;
    // Split the rows across one or two logical arrays.
    const std::uint32_t split = rows > 1 && chance(rng, 0.5)
                                    ? static_cast<std::uint32_t>(uniform(rng, 1, rows - 1))
                                    : rows;
    for (const auto [r0, r1] : {std::pair{0U, split}, std::pair{split, rows}}) {
      if (r1 <= r0) continue;
      manifest::LogicalArray a;
      a.array_id = next_array++;
      a.weights = manifest::Matrix(r1 - r0, cols);
      const int style = static_cast<int>(uniform(rng, 0, 5));
      for (std::size_t i = 0; i < a.weights.data.size(); ++i) {
        std::int32_t w = static_cast<std::int32_t>(uniform_signed(rng, -128, 127));
        if (style == 0) w = 127;
        if (style == 1) w = -128;
        if (style == 2) w = (i % 2) ? 127 : -128;
        a.weights.data[i] = w;
      }
      core.arrays.push_back(std::move(a));
      group.tiles.push_back(manifest::Tile{next_array - 1, r0, 0});
    }
    core.groups.push_back(std::move(group));
  }
}

void emit_setup(Rng& rng, CoreGen& g, const BundleShape& shape) {
  auto& code = g.config.code;
  const std::uint32_t lm = shape.local_mem_bytes;
  const auto gm = static_cast<std::uint32_t>(shape.global_mem_bytes);
  auto sldi = [&](std::uint32_t r, std::int64_t v) {
    code.push_back(isa::Sldi{RegId{r}, static_cast<std::int32_t>(v)});
  };
  // Address registers sit in disjoint slots at least 256 bytes apart, so
  // only same-register operands can overlap.
  const std::uint32_t slot = (lm - 256) / (kAddrRegLast - kAddrRegFirst + 1);
  for (std::uint32_t r = kAddrRegFirst; r <= kAddrRegLast; ++r) {
    sldi(r, static_cast<std::int64_t>((r - kAddrRegFirst) * slot + uniform(rng, 0, slot - 256)));
  }
  sldi(kShiftRegA, lm - 256);
  sldi(kShiftRegB, lm - 128);
  for (std::uint32_t r = kStrideFirst; r <= kStrideLast; ++r) {
    sldi(r, static_cast<std::int64_t>(uniform(rng, 1, 3)));
  }
  sldi(kBoundA, uniform_signed(rng, -200, 200));
  sldi(kBoundB, shape.mode == isa::EncodingMode::kWord32 ? edgy_signed(rng, -32768, 32767)
                                                        : edgy_signed(rng, INT32_MIN, INT32_MAX));
  sldi(kGlobalA, static_cast<std::int64_t>(uniform(rng, 0, gm - 256)));
  sldi(kGlobalB, static_cast<std::int64_t>(uniform(rng, 0, gm - 256)));
  // Shift counts: small non-negative values for most bit-widths.
  code.push_back(isa::Ldi{RegId{kShiftRegA}, 0x02, 128, 0});
  code.push_back(isa::Ldi{RegId{kShiftRegB}, 0x01, 128, 0});
}

template <class T>
T vector_binary(Rng& rng, EncodingMode mode) {
  T in;
  in.rd = addr_reg(rng);
  in.rs1 = addr_reg(rng);
  in.rs2 = addr_reg(rng);
  in.len = static_cast<std::uint32_t>(uniform(rng, 0, 16));
  in.offset = small_offset(rng, mode, 8);
  return in;
}

template <class T>
T vector_unary(Rng& rng, EncodingMode mode) {
  T in;
  in.rd = addr_reg(rng);
  in.rs1 = addr_reg(rng);
  in.len = static_cast<std::uint32_t>(uniform(rng, 0, 16));
  in.offset = small_offset(rng, mode, 8);
  return in;
}

// A compute or memory instruction that stays inside the regions set up by
// emit_setup. mvmul is skipped on cores without array groups.
void emit_body(Rng& rng, CoreGen& g, EncodingMode mode) {
  auto& code = g.config.code;
  static const std::vector<Opcode> kOps = [] {
    std::vector<Opcode> ops;
    for (const Opcode op : isa::all_opcodes()) {
      if (op != Opcode::kSend && op != Opcode::kRecv) ops.push_back(op);
    }
    return ops;
  }();
  const Opcode op = pick(rng, kOps);
  auto any_reg = [&] { return RegId{static_cast<std::uint32_t>(uniform(rng, 0, 31))}; };
  auto imm = [&]() -> std::int32_t {
    return mode == EncodingMode::kWord32
               ? static_cast<std::int32_t>(edgy_signed(rng, -32768, 32767))
               : static_cast<std::int32_t>(edgy_signed(rng, INT32_MIN, INT32_MAX));
  };
  auto trailing = [&](std::uint32_t max) {
    return mode == EncodingMode::kWord32 ? 0U : static_cast<std::uint32_t>(uniform(rng, 0, max));
  };
  switch (op) {
    case Opcode::kSldi:
      code.push_back(isa::Sldi{scratch_reg(rng), imm()});
      return;
    case Opcode::kSld:
      code.push_back(isa::Sld{scratch_reg(rng), global_reg(rng), trailing(64)});
      return;
    case Opcode::kSadd:
      code.push_back(isa::Sadd{scratch_reg(rng), any_reg(), any_reg()});
      return;
    case Opcode::kSsub:
      code.push_back(isa::Ssub{scratch_reg(rng), any_reg(), any_reg()});
      return;
    case Opcode::kSmul:
      code.push_back(isa::Smul{scratch_reg(rng), any_reg(), any_reg()});
      return;
    case Opcode::kSaddi:
      code.push_back(isa::Saddi{scratch_reg(rng), any_reg(), imm()});
      return;
    case Opcode::kSmuli:
      code.push_back(isa::Smuli{scratch_reg(rng), any_reg(), imm()});
      return;
    case Opcode::kSetbw: {
      static const std::vector<std::uint32_t> kWidths = {1, 4, 7, 8, 8, 8, 10, 12,
                                                         16, 16, 20, 24, 31, 32};
      const isa::Setbw in{pick(rng, kWidths), pick(rng, kWidths)};
      g.ibiw = in.ibiw;
      code.push_back(in);
      return;
    }
    case Opcode::kMvmul:
      if (g.groups == 0) return;
      code.push_back(isa::Mvmul{addr_reg(rng), addr_reg(rng),
                                static_cast<std::uint32_t>(uniform(rng, 8, 32)),
                                static_cast<std::uint32_t>(uniform(rng, 0, 1)),
                                static_cast<std::uint32_t>(uniform(rng, 0, g.groups - 1))});
      return;
    case Opcode::kVvadd:
      code.push_back(vector_binary<isa::Vvadd>(rng, mode));
      return;
    case Opcode::kVsub:
      code.push_back(vector_binary<isa::Vsub>(rng, mode));
      return;
    case Opcode::kVmul:
      code.push_back(vector_binary<isa::Vmul>(rng, mode));
      return;
    case Opcode::kVdmul: {
      auto in = vector_binary<isa::Vdmul>(rng, mode);
      in.len = std::max<std::uint32_t>(in.len, 1);
      code.push_back(in);
      return;
    }
    case Opcode::kVmax:
      code.push_back(vector_binary<isa::Vmax>(rng, mode));
      return;
    case Opcode::kVvsll:
    case Opcode::kVvsra: {
      auto in = vector_binary<isa::Vvsll>(rng, mode);
      // Bytes 0x02 read as negative only when bit 1 of some byte is the
      // sign bit; bytes 0x01 only when bit 0 is.
      const bool a_negative = (g.ibiw - 1) % 8 == 1;
      const bool b_negative = (g.ibiw - 1) % 8 == 0;
      in.rs2 = RegId{a_negative ? kShiftRegB
                                : (b_negative || chance(rng, 0.5) ? kShiftRegA : kShiftRegB)};
      if (op == Opcode::kVvsll) {
        code.push_back(in);
      } else {
        code.push_back(isa::Vvsra{in.rd, in.rs1, in.rs2, in.len, in.offset});
      }
      return;
    }
    case Opcode::kVavg:
      code.push_back(isa::Vavg{addr_reg(rng), addr_reg(rng),
                               RegId{static_cast<std::uint32_t>(uniform(rng, kStrideFirst, kStrideLast))},
                               static_cast<std::uint32_t>(uniform(rng, 1, 16)), trailing(8)});
      return;
    case Opcode::kVrelu:
      code.push_back(vector_unary<isa::Vrelu>(rng, mode));
      return;
    case Opcode::kVtanh:
      code.push_back(vector_unary<isa::Vtanh>(rng, mode));
      return;
    case Opcode::kVsigm:
      code.push_back(vector_unary<isa::Vsigm>(rng, mode));
      return;
    case Opcode::kVmv: {
      const RegId src = addr_reg(rng);
      code.push_back(isa::Vmv{other_addr_reg(rng, src), src,
                              RegId{static_cast<std::uint32_t>(uniform(rng, kStrideFirst, kStrideLast))},
                              static_cast<std::uint32_t>(uniform(rng, 0, 16))});
      return;
    }
    case Opcode::kVrsu:
    case Opcode::kVrsl: {
      auto in = vector_binary<isa::Vrsu>(rng, mode);
      in.rs2 = RegId{chance(rng, 0.5) ? kBoundA : kBoundB};
      if (chance(rng, 0.8)) in.rd = other_addr_reg(rng, in.rs1);
      if (op == Opcode::kVrsu) {
        code.push_back(in);
      } else {
        code.push_back(isa::Vrsl{in.rd, in.rs1, in.rs2, in.len, in.offset});
      }
      return;
    }
    case Opcode::kLd:
      code.push_back(isa::Ld{addr_reg(rng), global_reg(rng),
                             static_cast<std::uint32_t>(uniform(rng, 0, 64)),
                             small_offset(rng, mode, 64)});
      return;
    case Opcode::kSt:
      code.push_back(isa::St{global_reg(rng), addr_reg(rng),
                             static_cast<std::uint32_t>(uniform(rng, 0, 64)),
                             small_offset(rng, mode, 64)});
      return;
    case Opcode::kLdi:
      code.push_back(isa::Ldi{addr_reg(rng), static_cast<std::uint32_t>(uniform(rng, 0, 255)),
                              static_cast<std::uint32_t>(uniform(rng, 0, 64)), trailing(64)});
      return;
    case Opcode::kLmv: {
      const RegId src = addr_reg(rng);
      code.push_back(isa::Lmv{other_addr_reg(rng, src), src,
                              static_cast<std::uint32_t>(uniform(rng, 0, 64)),
                              small_offset(rng, mode, 64)});
      return;
    }
    case Opcode::kSync: {
      const auto ev = static_cast<std::uint32_t>(uniform(rng, 0, kSelfEvents - 1));
      ++g.self_events[ev];
      code.push_back(isa::Sync{ev, g.id});
      return;
    }
    case Opcode::kWait: {
      const auto ev = static_cast<std::uint32_t>(uniform(rng, 0, kSelfEvents - 1));
      code.push_back(isa::Wait{ev, g.self_events[ev]});
      g.self_events[ev] = 0;
      return;
    }
    case Opcode::kSend:
    case Opcode::kRecv:
      return;
  }
}

std::array<std::uint32_t, isa::kNumRegisters> random_regs(Rng& rng, std::uint32_t lmem,
                                                          std::uint32_t gmem) {
  std::array<std::uint32_t, isa::kNumRegisters> regs{};
  for (auto& r : regs) {
    const auto kind = uniform(rng, 0, 19);
    if (kind < 14) {
      r = static_cast<std::uint32_t>(uniform(rng, 0, lmem - 1));
    } else if (kind < 16) {
      r = static_cast<std::uint32_t>(uniform(rng, 0, 8));
    } else if (kind < 17) {
      r = static_cast<std::uint32_t>(uniform(rng, lmem - 48, lmem + 16));
    } else if (kind < 18) {
      r = static_cast<std::uint32_t>(uniform(rng, 0, gmem - 1));
    } else {
      r = static_cast<std::uint32_t>(uniform(rng, 0, 0xFFFFFFFFULL));
    }
  }
  return regs;
}

std::uint32_t random_width(Rng& rng) {
  static const std::vector<std::uint32_t> kWidths = {1, 2, 7, 8, 9, 10, 15, 16, 17, 24, 31, 32};
  return chance(rng, 0.3) ? 8U : pick(rng, kWidths);
}

std::vector<std::uint8_t> random_bytes(Rng& rng, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  const auto style = uniform(rng, 0, 9);
  for (auto& b : out) {
    if (style == 0) {
      b = 0x7F;
    } else if (style == 1) {
      b = 0x80;
    } else if (style == 2) {
      b = static_cast<std::uint8_t>(uniform(rng, 0, 3));
    } else {
      b = static_cast<std::uint8_t>(uniform(rng, 0, 255));
    }
  }
  return out;
}

}  // namespace

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* s = std::getenv("PIMKIT_SEED");
  if (s == nullptr || *s == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 0);
  return (end != nullptr && *end == '\0') ? v : fallback;
}

isa::Instruction random_instruction(Rng& rng, Opcode op, EncodingMode mode) {
  return random_by_index(rng, static_cast<std::size_t>(op) - 1, mode,
                         std::make_index_sequence<isa::kNumOpcodes>{});
}

isa::Instruction random_instruction(Rng& rng, EncodingMode mode) {
  return random_instruction(rng, static_cast<Opcode>(uniform(rng, 1, isa::kNumOpcodes)), mode);
}

assembler::SourceProgram random_program(Rng& rng, std::size_t max_len) {
  assembler::SourceProgram p;
  std::vector<std::uint32_t> ids(8);
  std::iota(ids.begin(), ids.end(), 0U);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto sections = uniform(rng, 1, 4);
  for (std::size_t s = 0; s < sections; ++s) {
    assembler::Section sec;
    sec.core_id = ids[s];
    const auto n = uniform(rng, 0, max_len);
    for (std::size_t i = 0; i < n; ++i) {
      sec.instructions.push_back(random_instruction(rng, EncodingMode::kWord64));
    }
    p.sections.push_back(std::move(sec));
  }
  return p;
}

manifest::ProgramBundle random_bundle(Rng& rng, const BundleShape& shape) {
  manifest::ProgramBundle b;
  b.mode = shape.mode;
  b.global_mem_bytes = shape.global_mem_bytes;
  b.global_mem_init.push_back(
      manifest::GlobalInit{0, random_bytes(rng, static_cast<std::size_t>(shape.global_mem_bytes))});
  if (chance(rng, 0.3)) {
    b.activation_qformat.frac_in = static_cast<std::uint32_t>(uniform(rng, 0, 8));
    b.activation_qformat.frac_out = static_cast<std::uint32_t>(uniform(rng, 0, 8));
  }

  std::vector<CoreGen> cores(shape.cores);
  for (std::uint32_t c = 0; c < shape.cores; ++c) {
    CoreGen& g = cores[c];
    g.id = c;
    g.config.core_id = c;
    g.config.local_mem_bytes = shape.local_mem_bytes;
    g.groups = static_cast<std::uint32_t>(uniform(rng, 0, 3));
    add_random_groups(rng, g.config, g.groups, 16);
    emit_setup(rng, g, shape);
  }

  // One global sequence of actions; each core's code is a subsequence.
  std::vector<std::uint32_t> next_event(shape.cores, kSelfEvents);
  const std::size_t total = shape.length * shape.cores;
  for (std::size_t t = 0; t < total; ++t) {
    if (shape.communication && shape.cores > 1 && chance(rng, 0.08)) {
      const auto a = static_cast<std::uint32_t>(uniform(rng, 0, shape.cores - 1));
      auto b2 = static_cast<std::uint32_t>(uniform(rng, 0, shape.cores - 2));
      if (b2 >= a) ++b2;
      if (chance(rng, 0.6)) {
        const auto size = static_cast<std::uint32_t>(uniform(rng, 0, 64));
        cores[a].config.code.push_back(isa::Send{addr_reg(rng), b2, size, 0});
        cores[b2].config.code.push_back(isa::Recv{addr_reg(rng), a, size, 0});
      } else if (next_event[b2] < manifest::kDefaultEventRegisters) {
        const std::uint32_t ev = next_event[b2]++;
        cores[a].config.code.push_back(isa::Sync{ev, b2});
        cores[b2].config.code.push_back(isa::Wait{ev, 1});
      }
      continue;
    }
    emit_body(rng, cores[uniform(rng, 0, shape.cores - 1)], shape.mode);
  }
  for (auto& g : cores) b.cores.push_back(std::move(g.config));
  return b;
}

OpcodeCase random_opcode_case(Rng& rng, Opcode op) {
  OpcodeCase out;
  manifest::ProgramBundle& b = out.bundle;
  const bool pair = op == Opcode::kSend || op == Opcode::kRecv || op == Opcode::kWait ||
                    op == Opcode::kSync;
  const auto lmem = static_cast<std::uint32_t>(uniform(rng, 256, 1024));
  const auto gmem = static_cast<std::uint32_t>(uniform(rng, 256, 2048));
  b.global_mem_bytes = gmem;
  b.variable_bitwidth_supported = !chance(rng, 0.1);
  if (chance(rng, 0.5)) {
    b.activation_qformat.frac_in = static_cast<std::uint32_t>(uniform(rng, 0, 12));
    b.activation_qformat.frac_out = static_cast<std::uint32_t>(uniform(rng, 0, 12));
  }
  const std::uint32_t ncores = pair ? 2 : 1;
  const auto events = static_cast<std::uint32_t>(uniform(rng, 1, 32));
  for (std::uint32_t c = 0; c < ncores; ++c) {
    manifest::CoreConfig core;
    core.core_id = c;
    core.local_mem_bytes = lmem;
    core.event_register_count = events;
    add_random_groups(rng, core, static_cast<std::uint32_t>(uniform(rng, 1, 3)), 8);
    b.cores.push_back(std::move(core));
  }

  isa::Instruction in = random_instruction(rng, op, EncodingMode::kWord64);
  // Keep most accesses near the memories so both in-range and trapping
  // cases are common.
  std::visit(
      [&](auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (requires { x.len; }) {
          const auto k = uniform(rng, 0, 9);
          x.len = static_cast<std::uint32_t>(k < 7 ? uniform(rng, 0, 16)
                                                   : (k < 9 ? uniform(rng, 17, 64) : x.len));
        }
        if constexpr (requires { x.size; }) {
          const auto k = uniform(rng, 0, 9);
          x.size = static_cast<std::uint32_t>(k < 8 ? uniform(rng, 0, 64) : x.size);
        }
        if constexpr (requires { x.offset.value; }) {
          if (chance(rng, 0.9)) x.offset.value = static_cast<std::uint32_t>(uniform(rng, 0, 16));
        }
        if constexpr (requires { x.offset_value; }) {
          if (chance(rng, 0.9)) x.offset_value = static_cast<std::uint32_t>(uniform(rng, 0, 16));
        }
        if constexpr (requires { x.offset_byte; }) {
          if (chance(rng, 0.9)) x.offset_byte = static_cast<std::uint32_t>(uniform(rng, 0, 64));
        }
        if constexpr (std::is_same_v<T, isa::Mvmul>) {
          x.mbiw = static_cast<std::uint32_t>(uniform(rng, 8, 32));
          x.group = chance(rng, 0.95) ? static_cast<std::uint32_t>(uniform(rng, 0, 2)) : x.group;
        }
        if constexpr (std::is_same_v<T, isa::Send> || std::is_same_v<T, isa::Recv>) {
          x.core = 1;
        }
        if constexpr (std::is_same_v<T, isa::Wait>) {
          x.ev = static_cast<std::uint32_t>(uniform(rng, 0, events - 1));
          x.val = static_cast<std::uint32_t>(uniform(rng, 0, 3));
        }
        if constexpr (std::is_same_v<T, isa::Sync>) {
          x.ev = static_cast<std::uint32_t>(uniform(rng, 0, events - 1));
          x.core = static_cast<std::uint32_t>(uniform(rng, 0, 1));
        }
      },
      in);
  // Unknown groups are a load-time error; keep only the ones the core has.
  if (auto* mv = std::get_if<isa::Mvmul>(&in)) {
    mv->group = std::min<std::uint32_t>(
        mv->group, static_cast<std::uint32_t>(b.cores[0].groups.size() - 1));
    // Weights are 8-bit, so any mbiw >= 8 is consistent with them.
  }
  b.cores[0].code.push_back(in);
  const RegId stride_reg = std::visit(
      [](const auto& x) {
        if constexpr (requires { x.rs2; }) return x.rs2;
        return RegId{0};
      },
      in);

  if (pair) {
    auto& partner = b.cores[1].code;
    if (const auto* s = std::get_if<isa::Send>(&in)) {
      const std::uint32_t size = chance(rng, 0.8) ? s->size : (s->size + 1) % 65536;
      partner.push_back(isa::Recv{RegId{static_cast<std::uint32_t>(uniform(rng, 0, 31))}, 0,
                                  size, static_cast<std::uint32_t>(uniform(rng, 0, 64))});
    } else if (const auto* r = std::get_if<isa::Recv>(&in)) {
      const std::uint32_t size = chance(rng, 0.8) ? r->size : (r->size + 1) % 65536;
      partner.push_back(isa::Send{RegId{static_cast<std::uint32_t>(uniform(rng, 0, 31))}, 0,
                                  size, static_cast<std::uint32_t>(uniform(rng, 0, 64))});
    } else if (const auto* w = std::get_if<isa::Wait>(&in)) {
      if (chance(rng, 0.5)) partner.push_back(isa::Sync{w->ev, 0});
    } else if (const auto* sy = std::get_if<isa::Sync>(&in)) {
      if (sy->core == 1 && chance(rng, 0.7)) partner.push_back(isa::Wait{sy->ev, 1});
    }
  }

  oracle::DiffOptions& o = out.options;
  o.machine.overlap = chance(rng, 0.7) ? vm::OverlapMode::kStrict : vm::OverlapMode::kPermissive;
  o.machine.defer_capability_checks = true;
  o.max_steps = 16;
  o.gmem = random_bytes(rng, gmem);
  for (std::uint32_t c = 0; c < ncores; ++c) {
    oracle::CoreInit init;
    init.regs = random_regs(rng, lmem, gmem);
    init.lmem = random_bytes(rng, lmem);
    init.bw = vm::BitWidthState{random_width(rng), random_width(rng)};
    std::vector<std::uint32_t> ev(events);
    for (auto& e : ev) e = static_cast<std::uint32_t>(uniform(rng, 0, 3));
    init.events = std::move(ev);
    o.init.push_back(std::move(init));
  }
  auto& regs = *o.init[0].regs;
  if ((op == Opcode::kVavg || op == Opcode::kVmv) && chance(rng, 0.7)) {
    regs[stride_reg.index] = static_cast<std::uint32_t>(uniform(rng, 1, 4));
  }
  if ((op == Opcode::kVvsll || op == Opcode::kVvsra) && chance(rng, 0.6)) {
    // Mostly non-negative shift counts.
    auto& mem = *o.init[0].lmem;
    const std::size_t base = regs[stride_reg.index];
    for (std::size_t i = base; i < std::min<std::size_t>(mem.size(), base + 64 * 4 + 64); ++i) {
      mem[i] = static_cast<std::uint8_t>(uniform(rng, 0, 20));
    }
  }
  // Global address pairs mostly point into global memory.
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        std::optional<RegId> pair_reg;
        if constexpr (std::is_same_v<T, isa::Sld> || std::is_same_v<T, isa::Ld>) pair_reg = x.rs1;
        if constexpr (std::is_same_v<T, isa::St>) pair_reg = x.rd;
        if (pair_reg && chance(rng, 0.85)) {
          regs[pair_reg->index] = static_cast<std::uint32_t>(uniform(rng, 0, gmem - 1));
          regs[pair_reg->index + 1] = 0;
        }
      },
      in);
  return out;
}

}  // namespace pimkit::fuzz
