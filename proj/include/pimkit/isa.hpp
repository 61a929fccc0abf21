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

// Instruction model and binary codec for the PIM accelerator ISA.
//
// Every opcode is one alternative of the `Instruction` variant. The variant
// index is `opcode - 1`, so opcode numbering and variant order must stay in
// sync.
//
// 64-bit layout (all opcodes):
//
//   [63:58] opcode   [57:53] rd   [52:48] rs1   [47:43] rs2
//   [42:40] offset_select         [39:32] aux8  [31:0]  imm area
//
// The imm area is either a signed imm32 (sldi, saddi, smuli) or two 16-bit
// halves hi=[31:16], lo=[15:0]. Per opcode:
//
//   vector ops        hi=imm_len        lo=offset_value
//   ld/st/lmv         hi=imm_size       lo=offset_byte
//   sld               lo=offset_byte
//   ldi               aux=imm8          hi=imm_size  lo=offset_byte
//   mvmul             aux=mbiw[5:0]|imm_relu[6]     hi=imm_group
//   setbw             aux=ibiw          lo=obiw
//   send/recv         aux=imm_core      hi=imm_size  lo=offset_byte
//   wait/sync         aux=imm_ev        lo=imm_val / imm_core
//
// 32-bit layout:
//
//   [31:26] opcode   [25:21] rd   [20:16] rs1   [15:11] rs2   [10:0] imm11
//
// with the exceptions: sldi/saddi/smuli carry a signed imm16 in [15:0];
// mvmul packs mbiw[15:10] imm_relu[9] imm_group[8:0]; ldi packs imm8[18:11];
// send/recv put imm_core in the rs2 slot; setbw packs ibiw[15:8] obiw[7:0];
// wait/sync pack imm_ev[23:16] and a 16-bit value in [15:0]. No offset field
// of any kind is encodable in 32-bit mode.

#ifndef PIMKIT_ISA_HPP_
#define PIMKIT_ISA_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pimkit::isa {

inline constexpr unsigned kNumRegisters = 32;
inline constexpr unsigned kNumOpcodes = 31;

enum class Opcode : std::uint8_t {
  // scalar / register
  kSldi = 1,
  kSld,
  kSadd,
  kSsub,
  kSmul,
  kSaddi,
  kSmuli,
  // matrix / vector
  kSetbw,
  kMvmul,
  kVvadd,
  kVsub,
  kVmul,
  kVdmul,
  kVmax,
  kVvsll,
  kVvsra,
  kVavg,
  kVrelu,
  kVtanh,
  kVsigm,
  kVmv,
  kVrsu,
  kVrsl,
  // communication / synchronization
  kLd,
  kSt,
  kLdi,
  kLmv,
  kSend,
  kRecv,
  kWait,
  kSync,
};

std::string_view mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view text);

struct RegId {
  std::uint32_t index = 0;
  bool operator==(const RegId&) const = default;
};

// offset_select bit 0 applies to rd, bit 1 to rs1, bit 2 to rs2.
struct Offset {
  std::uint32_t select = 0;
  std::uint32_t value = 0;

  bool empty() const { return select == 0 && value == 0; }
  bool applies_to(unsigned slot) const { return (select >> slot) & 1U; }
  bool operator==(const Offset&) const = default;
};

// Operand metadata. Each instruction struct enumerates its operands, in
// assembly order, through `operands(self, f)` calling `f(spec, field)`.
enum class OperandKind {
  kReg,
  kEvenReg,   // register naming the low half of a 64-bit global address
  kSigned32,  // signed immediate
  kUnsigned,  // unsigned immediate in [min, max]
  kOffset,    // [select:value]; may be omitted in assembly
  kTrailing,  // unsigned, may be omitted in assembly (defaults to 0)
};

struct OperandSpec {
  std::string_view name;
  OperandKind kind;
  std::uint32_t min = 0;
  std::uint32_t max = 0;
};

inline constexpr std::uint32_t kMax16 = 0xFFFF;
inline constexpr std::uint32_t kMax8 = 0xFF;

#define PIMKIT_OPERAND(kind_, name_, min_, max_) \
  OperandSpec { name_, OperandKind::kind_, min_, max_ }

struct Sldi {
  static constexpr Opcode kOpcode = Opcode::kSldi;
  RegId rd;
  std::int32_t imm = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kSigned32, "imm", 0, 0), s.imm);
  }
  bool operator==(const Sldi&) const = default;
};

struct Sld {
  static constexpr Opcode kOpcode = Opcode::kSld;
  RegId rd, rs1;
  std::uint32_t offset_byte = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kEvenReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kTrailing, "offset_byte", 0, kMax16), s.offset_byte);
  }
  bool operator==(const Sld&) const = default;
};

template <Opcode Op>
struct ScalarReg {
  static constexpr Opcode kOpcode = Op;
  RegId rd, rs1, rs2;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kReg, "rs2", 0, 31), s.rs2);
  }
  bool operator==(const ScalarReg&) const = default;
};

template <Opcode Op>
struct ScalarImm {
  static constexpr Opcode kOpcode = Op;
  RegId rd, rs1;
  std::int32_t imm = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kSigned32, "imm", 0, 0), s.imm);
  }
  bool operator==(const ScalarImm&) const = default;
};

struct Setbw {
  static constexpr Opcode kOpcode = Opcode::kSetbw;
  std::uint32_t ibiw = 8;
  std::uint32_t obiw = 8;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kUnsigned, "ibiw", 1, 32), s.ibiw);
    f(PIMKIT_OPERAND(kUnsigned, "obiw", 1, 32), s.obiw);
  }
  bool operator==(const Setbw&) const = default;
};

struct Mvmul {
  static constexpr Opcode kOpcode = Opcode::kMvmul;
  RegId rd, rs1;
  std::uint32_t mbiw = 8;
  std::uint32_t relu = 0;
  std::uint32_t group = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kUnsigned, "mbiw", 1, 32), s.mbiw);
    f(PIMKIT_OPERAND(kUnsigned, "imm_relu", 0, 1), s.relu);
    f(PIMKIT_OPERAND(kUnsigned, "imm_group", 0, kMax16), s.group);
  }
  bool operator==(const Mvmul&) const = default;
};

// vvadd, vsub, vmul, vdmul, vmax, vvsll, vvsra, vrsu, vrsl
template <Opcode Op>
struct VectorBinary {
  static constexpr Opcode kOpcode = Op;
  RegId rd, rs1, rs2;
  std::uint32_t len = 0;
  Offset offset;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kReg, "rs2", 0, 31), s.rs2);
    f(PIMKIT_OPERAND(kUnsigned, "imm_len", 0, kMax16), s.len);
    f(PIMKIT_OPERAND(kOffset, "offset", 0, 0), s.offset);
  }
  bool operator==(const VectorBinary&) const = default;
};

struct Vavg {
  static constexpr Opcode kOpcode = Opcode::kVavg;
  RegId rd, rs1, rs2;
  std::uint32_t len = 0;
  std::uint32_t offset_value = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kReg, "rs2", 0, 31), s.rs2);
    f(PIMKIT_OPERAND(kUnsigned, "imm_len", 0, kMax16), s.len);
    f(PIMKIT_OPERAND(kTrailing, "offset_value", 0, kMax16), s.offset_value);
  }
  bool operator==(const Vavg&) const = default;
};

// vrelu, vtanh, vsigm
template <Opcode Op>
struct VectorUnary {
  static constexpr Opcode kOpcode = Op;
  RegId rd, rs1;
  std::uint32_t len = 0;
  Offset offset;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kUnsigned, "imm_len", 0, kMax16), s.len);
    f(PIMKIT_OPERAND(kOffset, "offset", 0, 0), s.offset);
  }
  bool operator==(const VectorUnary&) const = default;
};

struct Vmv {
  static constexpr Opcode kOpcode = Opcode::kVmv;
  RegId rd, rs1, rs2;
  std::uint32_t len = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kReg, "rs2", 0, 31), s.rs2);
    f(PIMKIT_OPERAND(kUnsigned, "imm_len", 0, kMax16), s.len);
  }
  bool operator==(const Vmv&) const = default;
};

// ld, st, lmv. For ld the global address base is rs1; for st it is rd.
template <Opcode Op>
struct MemCopy {
  static constexpr Opcode kOpcode = Op;
  RegId rd, rs1;
  std::uint32_t size = 0;
  Offset offset;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    constexpr bool kGlobalDst = Op == Opcode::kSt;
    constexpr bool kGlobalSrc = Op == Opcode::kLd;
    f(kGlobalDst ? PIMKIT_OPERAND(kEvenReg, "rd", 0, 31)
                 : PIMKIT_OPERAND(kReg, "rd", 0, 31),
      s.rd);
    f(kGlobalSrc ? PIMKIT_OPERAND(kEvenReg, "rs1", 0, 31)
                 : PIMKIT_OPERAND(kReg, "rs1", 0, 31),
      s.rs1);
    f(PIMKIT_OPERAND(kUnsigned, "imm_size", 0, kMax16), s.size);
    f(PIMKIT_OPERAND(kOffset, "offset", 0, 0), s.offset);
  }
  bool operator==(const MemCopy&) const = default;
};

struct Ldi {
  static constexpr Opcode kOpcode = Opcode::kLdi;
  RegId rd;
  std::uint32_t imm = 0;
  std::uint32_t size = 0;
  std::uint32_t offset_byte = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kUnsigned, "imm", 0, kMax8), s.imm);
    f(PIMKIT_OPERAND(kUnsigned, "imm_size", 0, kMax16), s.size);
    f(PIMKIT_OPERAND(kTrailing, "offset_byte", 0, kMax16), s.offset_byte);
  }
  bool operator==(const Ldi&) const = default;
};

struct Send {
  static constexpr Opcode kOpcode = Opcode::kSend;
  RegId rs1;
  std::uint32_t core = 0;
  std::uint32_t size = 0;
  std::uint32_t offset_byte = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rs1", 0, 31), s.rs1);
    f(PIMKIT_OPERAND(kUnsigned, "imm_core", 0, kMax8), s.core);
    f(PIMKIT_OPERAND(kUnsigned, "imm_size", 0, kMax16), s.size);
    f(PIMKIT_OPERAND(kTrailing, "offset_byte", 0, kMax16), s.offset_byte);
  }
  bool operator==(const Send&) const = default;
};

struct Recv {
  static constexpr Opcode kOpcode = Opcode::kRecv;
  RegId rd;
  std::uint32_t core = 0;
  std::uint32_t size = 0;
  std::uint32_t offset_byte = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kReg, "rd", 0, 31), s.rd);
    f(PIMKIT_OPERAND(kUnsigned, "imm_core", 0, kMax8), s.core);
    f(PIMKIT_OPERAND(kUnsigned, "imm_size", 0, kMax16), s.size);
    f(PIMKIT_OPERAND(kTrailing, "offset_byte", 0, kMax16), s.offset_byte);
  }
  bool operator==(const Recv&) const = default;
};

struct Wait {
  static constexpr Opcode kOpcode = Opcode::kWait;
  std::uint32_t ev = 0;
  std::uint32_t val = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kUnsigned, "imm_ev", 0, kMax8), s.ev);
    f(PIMKIT_OPERAND(kUnsigned, "imm_val", 0, kMax16), s.val);
  }
  bool operator==(const Wait&) const = default;
};

struct Sync {
  static constexpr Opcode kOpcode = Opcode::kSync;
  std::uint32_t ev = 0;
  std::uint32_t core = 0;
  template <class Self, class F>
  static void operands(Self& s, F&& f) {
    f(PIMKIT_OPERAND(kUnsigned, "imm_ev", 0, kMax8), s.ev);
    f(PIMKIT_OPERAND(kUnsigned, "imm_core", 0, kMax16), s.core);
  }
  bool operator==(const Sync&) const = default;
};

#undef PIMKIT_OPERAND

using Sadd = ScalarReg<Opcode::kSadd>;
using Ssub = ScalarReg<Opcode::kSsub>;
using Smul = ScalarReg<Opcode::kSmul>;
using Saddi = ScalarImm<Opcode::kSaddi>;
using Smuli = ScalarImm<Opcode::kSmuli>;
using Vvadd = VectorBinary<Opcode::kVvadd>;
using Vsub = VectorBinary<Opcode::kVsub>;
using Vmul = VectorBinary<Opcode::kVmul>;
using Vdmul = VectorBinary<Opcode::kVdmul>;
using Vmax = VectorBinary<Opcode::kVmax>;
using Vvsll = VectorBinary<Opcode::kVvsll>;
using Vvsra = VectorBinary<Opcode::kVvsra>;
using Vrelu = VectorUnary<Opcode::kVrelu>;
using Vtanh = VectorUnary<Opcode::kVtanh>;
using Vsigm = VectorUnary<Opcode::kVsigm>;
using Vrsu = VectorBinary<Opcode::kVrsu>;
using Vrsl = VectorBinary<Opcode::kVrsl>;
using Ld = MemCopy<Opcode::kLd>;
using St = MemCopy<Opcode::kSt>;
using Lmv = MemCopy<Opcode::kLmv>;

using Instruction =
    std::variant<Sldi, Sld, Sadd, Ssub, Smul, Saddi, Smuli, Setbw, Mvmul,
                 Vvadd, Vsub, Vmul, Vdmul, Vmax, Vvsll, Vvsra, Vavg, Vrelu,
                 Vtanh, Vsigm, Vmv, Vrsu, Vrsl, Ld, St, Ldi, Lmv, Send, Recv,
                 Wait, Sync>;

static_assert(std::variant_size_v<Instruction> == kNumOpcodes);

inline Opcode opcode_of(const Instruction& instr) {
  return static_cast<Opcode>(instr.index() + 1);
}

// Default-constructed instruction for `op`.
Instruction make_instruction(Opcode op);

// All opcodes in numeric order.
std::span<const Opcode> all_opcodes();

enum class EncodingMode : std::uint8_t { kWord64 = 0, kWord32 = 1 };

inline unsigned word_bytes(EncodingMode mode) {
  return mode == EncodingMode::kWord64 ? 8 : 4;
}

enum class ErrorKind {
  kFieldOverflow,
  kEvenRegisterRequired,
  kOffsetUnsupportedIn32BitMode,
  kUnknownOpcode,
  kReservedFieldNonzero,
  kMalformedStream,
};

std::string_view to_string(ErrorKind kind);

struct Violation {
  ErrorKind kind;
  std::string op;     // mnemonic
  std::string field;  // operand or bit-range name
  std::uint64_t value = 0;
  std::uint64_t limit = 0;

  std::string message() const;
};

class IsaError : public std::runtime_error {
 public:
  explicit IsaError(Violation v);
  const Violation& violation() const { return violation_; }
  ErrorKind kind() const { return violation_.kind; }

 private:
  Violation violation_;
};

struct ValidationLimits {
  // When set, wait/sync imm_ev must be below this count.
  std::optional<std::uint32_t> event_registers;
};

// Static checks: register ranges, even-register rules, field ranges. Returns
// every violation found; an empty list means the instruction is valid.
std::vector<Violation> validate(const Instruction& instr,
                                const ValidationLimits& limits = {});

// Throws IsaError on the first violation, including the 32-bit mode
// restrictions.
std::uint64_t encode(const Instruction& instr, EncodingMode mode);

// Throws IsaError for unknown opcodes, nonzero reserved bits, and words that
// decode to an invalid instruction.
Instruction decode(std::uint64_t word, EncodingMode mode);

// "PIMI" program stream: magic, version (1), mode, 2 reserved bytes, u32 LE
// instruction count, then little-endian instruction words.
inline constexpr std::uint8_t kStreamVersion = 1;

std::vector<std::uint8_t> write_stream(std::span<const Instruction> code,
                                       EncodingMode mode);

struct DecodedStream {
  EncodingMode mode = EncodingMode::kWord64;
  std::vector<Instruction> code;
};

DecodedStream read_stream(std::span<const std::uint8_t> bytes);

}  // namespace pimkit::isa

#endif  // PIMKIT_ISA_HPP_
