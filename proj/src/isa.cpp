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

#include "pimkit/isa.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <type_traits>
#include <utility>

namespace pimkit::isa {
namespace {

constexpr std::array<std::string_view, kNumOpcodes> kMnemonics = {
    "sldi", "sld",   "sadd",  "ssub", "smul", "saddi", "smuli", "setbw",
    "mvmul", "vvadd", "vsub", "vmul", "vdmul", "vmax", "vvsll", "vvsra",
    "vavg", "vrelu", "vtanh", "vsigm", "vmv",  "vrsu",  "vrsl",  "ld",
    "st",   "ldi",   "lmv",   "send", "recv", "wait",  "sync",
};

constexpr std::array<Opcode, kNumOpcodes> kAllOpcodes = [] {
  std::array<Opcode, kNumOpcodes> ops{};
  for (unsigned i = 0; i < kNumOpcodes; ++i) ops[i] = static_cast<Opcode>(i + 1);
  return ops;
}();

template <class T>
inline constexpr bool kIsVectorBinary = false;
template <Opcode Op>
inline constexpr bool kIsVectorBinary<VectorBinary<Op>> = true;
template <class T>
inline constexpr bool kIsVectorUnary = false;
template <Opcode Op>
inline constexpr bool kIsVectorUnary<VectorUnary<Op>> = true;
template <class T>
inline constexpr bool kIsMemCopy = false;
template <Opcode Op>
inline constexpr bool kIsMemCopy<MemCopy<Op>> = true;
template <class T>
inline constexpr bool kIsScalarReg = false;
template <Opcode Op>
inline constexpr bool kIsScalarReg<ScalarReg<Op>> = true;
template <class T>
inline constexpr bool kIsScalarImm = false;
template <Opcode Op>
inline constexpr bool kIsScalarImm<ScalarImm<Op>> = true;

[[noreturn]] void fail(ErrorKind kind, Opcode op, std::string field,
                       std::uint64_t value = 0, std::uint64_t limit = 0) {
  throw IsaError(Violation{kind, std::string(mnemonic(op)), std::move(field),
                           value, limit});
}

// Bit-field writer that rejects values wider than the field.
class Packer {
 public:
  explicit Packer(Opcode op) : op_(op) {}

  void put(std::uint64_t value, unsigned lsb, unsigned width,
           std::string_view field) {
    const std::uint64_t max = (width >= 64) ? ~0ULL : ((1ULL << width) - 1);
    if (value > max) {
      fail(ErrorKind::kFieldOverflow, op_, std::string(field), value, max);
    }
    word_ |= value << lsb;
  }

  void put_signed(std::int64_t value, unsigned lsb, unsigned width,
                  std::string_view field) {
    const std::int64_t lo = -(std::int64_t{1} << (width - 1));
    const std::int64_t hi = (std::int64_t{1} << (width - 1)) - 1;
    if (value < lo || value > hi) {
      fail(ErrorKind::kFieldOverflow, op_, std::string(field),
           static_cast<std::uint64_t>(value), static_cast<std::uint64_t>(hi));
    }
    const std::uint64_t mask = (1ULL << width) - 1;
    word_ |= (static_cast<std::uint64_t>(value) & mask) << lsb;
  }

  std::uint64_t word() const { return word_; }

 private:
  Opcode op_;
  std::uint64_t word_ = 0;
};

std::uint32_t bits(std::uint64_t word, unsigned lsb, unsigned width) {
  return static_cast<std::uint32_t>((word >> lsb) & ((1ULL << width) - 1));
}

std::int32_t signed_bits(std::uint64_t word, unsigned lsb, unsigned width) {
  const std::uint32_t raw = bits(word, lsb, width);
  const std::uint32_t sign = 1U << (width - 1);
  return static_cast<std::int32_t>((raw ^ sign) - sign);
}

// ---- 64-bit mode -----------------------------------------------------------

template <class T>
std::uint64_t encode64(const T& in) {
  Packer p(T::kOpcode);
  p.put(static_cast<std::uint64_t>(T::kOpcode), 58, 6, "opcode");
  auto reg = [&](RegId r, unsigned lsb, std::string_view name) {
    p.put(r.index, lsb, 5, name);
  };
  if constexpr (std::is_same_v<T, Sldi>) {
    reg(in.rd, 53, "rd");
    p.put(static_cast<std::uint32_t>(in.imm), 0, 32, "imm");
  } else if constexpr (std::is_same_v<T, Sld>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    p.put(in.offset_byte, 0, 16, "offset_byte");
  } else if constexpr (kIsScalarReg<T>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    reg(in.rs2, 43, "rs2");
  } else if constexpr (kIsScalarImm<T>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    p.put(static_cast<std::uint32_t>(in.imm), 0, 32, "imm");
  } else if constexpr (std::is_same_v<T, Setbw>) {
    p.put(in.ibiw, 32, 8, "ibiw");
    p.put(in.obiw, 0, 8, "obiw");
  } else if constexpr (std::is_same_v<T, Mvmul>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    p.put(in.mbiw, 32, 6, "mbiw");
    p.put(in.relu, 38, 1, "imm_relu");
    p.put(in.group, 16, 16, "imm_group");
  } else if constexpr (kIsVectorBinary<T>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    reg(in.rs2, 43, "rs2");
    p.put(in.offset.select, 40, 3, "offset_select");
    p.put(in.len, 16, 16, "imm_len");
    p.put(in.offset.value, 0, 16, "offset_value");
  } else if constexpr (std::is_same_v<T, Vavg>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    reg(in.rs2, 43, "rs2");
    p.put(in.len, 16, 16, "imm_len");
    p.put(in.offset_value, 0, 16, "offset_value");
  } else if constexpr (kIsVectorUnary<T>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    p.put(in.offset.select, 40, 3, "offset_select");
    p.put(in.len, 16, 16, "imm_len");
    p.put(in.offset.value, 0, 16, "offset_value");
  } else if constexpr (std::is_same_v<T, Vmv>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    reg(in.rs2, 43, "rs2");
    p.put(in.len, 16, 16, "imm_len");
  } else if constexpr (kIsMemCopy<T>) {
    reg(in.rd, 53, "rd");
    reg(in.rs1, 48, "rs1");
    p.put(in.offset.select, 40, 3, "offset_select");
    p.put(in.size, 16, 16, "imm_size");
    p.put(in.offset.value, 0, 16, "offset_byte");
  } else if constexpr (std::is_same_v<T, Ldi>) {
    reg(in.rd, 53, "rd");
    p.put(in.imm, 32, 8, "imm");
    p.put(in.size, 16, 16, "imm_size");
    p.put(in.offset_byte, 0, 16, "offset_byte");
  } else if constexpr (std::is_same_v<T, Send>) {
    reg(in.rs1, 48, "rs1");
    p.put(in.core, 32, 8, "imm_core");
    p.put(in.size, 16, 16, "imm_size");
    p.put(in.offset_byte, 0, 16, "offset_byte");
  } else if constexpr (std::is_same_v<T, Recv>) {
    reg(in.rd, 53, "rd");
    p.put(in.core, 32, 8, "imm_core");
    p.put(in.size, 16, 16, "imm_size");
    p.put(in.offset_byte, 0, 16, "offset_byte");
  } else if constexpr (std::is_same_v<T, Wait>) {
    p.put(in.ev, 32, 8, "imm_ev");
    p.put(in.val, 0, 16, "imm_val");
  } else if constexpr (std::is_same_v<T, Sync>) {
    p.put(in.ev, 32, 8, "imm_ev");
    p.put(in.core, 0, 16, "imm_core");
  } else {
    static_assert(sizeof(T) == 0, "unhandled instruction");
  }
  return p.word();
}

template <class T>
T decode64(std::uint64_t w) {
  T out{};
  RegId rd{bits(w, 53, 5)}, rs1{bits(w, 48, 5)}, rs2{bits(w, 43, 5)};
  const std::uint32_t select = bits(w, 40, 3);
  const std::uint32_t aux = bits(w, 32, 8);
  const std::uint32_t hi = bits(w, 16, 16);
  const std::uint32_t lo = bits(w, 0, 16);
  if constexpr (std::is_same_v<T, Sldi>) {
    out.rd = rd;
    out.imm = signed_bits(w, 0, 32);
  } else if constexpr (std::is_same_v<T, Sld>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.offset_byte = lo;
  } else if constexpr (kIsScalarReg<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.rs2 = rs2;
  } else if constexpr (kIsScalarImm<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.imm = signed_bits(w, 0, 32);
  } else if constexpr (std::is_same_v<T, Setbw>) {
    out.ibiw = aux;
    out.obiw = bits(w, 0, 8);
  } else if constexpr (std::is_same_v<T, Mvmul>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.mbiw = aux & 0x3F;
    out.relu = (aux >> 6) & 1;
    out.group = hi;
  } else if constexpr (kIsVectorBinary<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.rs2 = rs2;
    out.len = hi;
    out.offset = Offset{select, lo};
  } else if constexpr (std::is_same_v<T, Vavg>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.rs2 = rs2;
    out.len = hi;
    out.offset_value = lo;
  } else if constexpr (kIsVectorUnary<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.len = hi;
    out.offset = Offset{select, lo};
  } else if constexpr (std::is_same_v<T, Vmv>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.rs2 = rs2;
    out.len = hi;
  } else if constexpr (kIsMemCopy<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.size = hi;
    out.offset = Offset{select, lo};
  } else if constexpr (std::is_same_v<T, Ldi>) {
    out.rd = rd;
    out.imm = aux;
    out.size = hi;
    out.offset_byte = lo;
  } else if constexpr (std::is_same_v<T, Send>) {
    out.rs1 = rs1;
    out.core = aux;
    out.size = hi;
    out.offset_byte = lo;
  } else if constexpr (std::is_same_v<T, Recv>) {
    out.rd = rd;
    out.core = aux;
    out.size = hi;
    out.offset_byte = lo;
  } else if constexpr (std::is_same_v<T, Wait>) {
    out.ev = aux;
    out.val = lo;
  } else if constexpr (std::is_same_v<T, Sync>) {
    out.ev = aux;
    out.core = lo;
  }
  return out;
}

// ---- 32-bit mode -----------------------------------------------------------

template <class T>
void require_no_offset(const T& in) {
  bool has_offset = false;
  if constexpr (kIsVectorBinary<T> || kIsVectorUnary<T> || kIsMemCopy<T>) {
    has_offset = !in.offset.empty();
  } else if constexpr (std::is_same_v<T, Sld> || std::is_same_v<T, Ldi> ||
                       std::is_same_v<T, Send> || std::is_same_v<T, Recv>) {
    has_offset = in.offset_byte != 0;
  } else if constexpr (std::is_same_v<T, Vavg>) {
    has_offset = in.offset_value != 0;
  }
  if (has_offset) {
    fail(ErrorKind::kOffsetUnsupportedIn32BitMode, T::kOpcode, "offset");
  }
}

template <class T>
std::uint64_t encode32(const T& in) {
  require_no_offset(in);
  Packer p(T::kOpcode);
  p.put(static_cast<std::uint64_t>(T::kOpcode), 26, 6, "opcode");
  auto reg = [&](RegId r, unsigned lsb, std::string_view name) {
    p.put(r.index, lsb, 5, name);
  };
  if constexpr (std::is_same_v<T, Sldi>) {
    reg(in.rd, 21, "rd");
    p.put_signed(in.imm, 0, 16, "imm");
  } else if constexpr (std::is_same_v<T, Sld>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
  } else if constexpr (kIsScalarReg<T>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
    reg(in.rs2, 11, "rs2");
  } else if constexpr (kIsScalarImm<T>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
    p.put_signed(in.imm, 0, 16, "imm");
  } else if constexpr (std::is_same_v<T, Setbw>) {
    p.put(in.ibiw, 8, 8, "ibiw");
    p.put(in.obiw, 0, 8, "obiw");
  } else if constexpr (std::is_same_v<T, Mvmul>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
    p.put(in.mbiw, 10, 6, "mbiw");
    p.put(in.relu, 9, 1, "imm_relu");
    p.put(in.group, 0, 9, "imm_group");
  } else if constexpr (kIsVectorBinary<T> || std::is_same_v<T, Vavg> ||
                       std::is_same_v<T, Vmv>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
    reg(in.rs2, 11, "rs2");
    p.put(in.len, 0, 11, "imm_len");
  } else if constexpr (kIsVectorUnary<T>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
    p.put(in.len, 0, 11, "imm_len");
  } else if constexpr (kIsMemCopy<T>) {
    reg(in.rd, 21, "rd");
    reg(in.rs1, 16, "rs1");
    p.put(in.size, 0, 11, "imm_size");
  } else if constexpr (std::is_same_v<T, Ldi>) {
    reg(in.rd, 21, "rd");
    p.put(in.imm, 11, 8, "imm");
    p.put(in.size, 0, 11, "imm_size");
  } else if constexpr (std::is_same_v<T, Send>) {
    reg(in.rs1, 16, "rs1");
    p.put(in.core, 11, 5, "imm_core");
    p.put(in.size, 0, 11, "imm_size");
  } else if constexpr (std::is_same_v<T, Recv>) {
    reg(in.rd, 21, "rd");
    p.put(in.core, 11, 5, "imm_core");
    p.put(in.size, 0, 11, "imm_size");
  } else if constexpr (std::is_same_v<T, Wait>) {
    p.put(in.ev, 16, 8, "imm_ev");
    p.put(in.val, 0, 16, "imm_val");
  } else if constexpr (std::is_same_v<T, Sync>) {
    p.put(in.ev, 16, 8, "imm_ev");
    p.put(in.core, 0, 16, "imm_core");
  } else {
    static_assert(sizeof(T) == 0, "unhandled instruction");
  }
  return p.word();
}

template <class T>
T decode32(std::uint64_t w) {
  T out{};
  RegId rd{bits(w, 21, 5)}, rs1{bits(w, 16, 5)}, rs2{bits(w, 11, 5)};
  const std::uint32_t imm11 = bits(w, 0, 11);
  if constexpr (std::is_same_v<T, Sldi>) {
    out.rd = rd;
    out.imm = signed_bits(w, 0, 16);
  } else if constexpr (std::is_same_v<T, Sld>) {
    out.rd = rd;
    out.rs1 = rs1;
  } else if constexpr (kIsScalarReg<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.rs2 = rs2;
  } else if constexpr (kIsScalarImm<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.imm = signed_bits(w, 0, 16);
  } else if constexpr (std::is_same_v<T, Setbw>) {
    out.ibiw = bits(w, 8, 8);
    out.obiw = bits(w, 0, 8);
  } else if constexpr (std::is_same_v<T, Mvmul>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.mbiw = bits(w, 10, 6);
    out.relu = bits(w, 9, 1);
    out.group = bits(w, 0, 9);
  } else if constexpr (kIsVectorBinary<T> || std::is_same_v<T, Vavg> ||
                       std::is_same_v<T, Vmv>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.rs2 = rs2;
    out.len = imm11;
  } else if constexpr (kIsVectorUnary<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.len = imm11;
  } else if constexpr (kIsMemCopy<T>) {
    out.rd = rd;
    out.rs1 = rs1;
    out.size = imm11;
  } else if constexpr (std::is_same_v<T, Ldi>) {
    out.rd = rd;
    out.imm = bits(w, 11, 8);
    out.size = imm11;
  } else if constexpr (std::is_same_v<T, Send>) {
    out.rs1 = rs1;
    out.core = bits(w, 11, 5);
    out.size = imm11;
  } else if constexpr (std::is_same_v<T, Recv>) {
    out.rd = rd;
    out.core = bits(w, 11, 5);
    out.size = imm11;
  } else if constexpr (std::is_same_v<T, Wait>) {
    out.ev = bits(w, 16, 8);
    out.val = bits(w, 0, 16);
  } else if constexpr (std::is_same_v<T, Sync>) {
    out.ev = bits(w, 16, 8);
    out.core = bits(w, 0, 16);
  }
  return out;
}

std::string reserved_region(std::uint64_t diff, EncodingMode mode) {
  unsigned top = 63;
  while (top > 0 && !((diff >> top) & 1)) --top;
  struct Region {
    unsigned msb, lsb;
    const char* name;
  };
  static constexpr Region k64[] = {
      {57, 53, "rd"},          {52, 48, "rs1"}, {47, 43, "rs2"},
      {42, 40, "offset_select"}, {39, 32, "aux"}, {31, 16, "imm[31:16]"},
      {15, 0, "imm[15:0]"}};
  static constexpr Region k32[] = {{25, 21, "rd"},
                                   {20, 16, "rs1"},
                                   {15, 11, "rs2"},
                                   {10, 0, "imm11"},
                                   {63, 32, "upper word"}};
  const auto regions = mode == EncodingMode::kWord64
                           ? std::span<const Region>(k64)
                           : std::span<const Region>(k32);
  for (const Region& r : regions) {
    if (top <= r.msb && top >= r.lsb) return r.name;
  }
  return "bits";
}

template <std::size_t... I>
Instruction make_by_index(std::size_t index, std::index_sequence<I...>) {
  static constexpr Instruction (*kMakers[])() = {
      +[]() -> Instruction { return std::variant_alternative_t<I, Instruction>{}; }...};
  return kMakers[index]();
}

template <std::size_t... I>
Instruction decode_by_index(std::size_t index, std::uint64_t word,
                            EncodingMode mode, std::index_sequence<I...>) {
  using Fn = Instruction (*)(std::uint64_t);
  static constexpr Fn k64[] = {+[](std::uint64_t w) -> Instruction {
    return decode64<std::variant_alternative_t<I, Instruction>>(w);
  }...};
  static constexpr Fn k32[] = {+[](std::uint64_t w) -> Instruction {
    return decode32<std::variant_alternative_t<I, Instruction>>(w);
  }...};
  return mode == EncodingMode::kWord64 ? k64[index](word) : k32[index](word);
}

}  // namespace

std::string_view mnemonic(Opcode op) {
  const auto i = static_cast<unsigned>(op);
  if (i == 0 || i > kNumOpcodes) return "<invalid>";
  return kMnemonics[i - 1];
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view text) {
  for (unsigned i = 0; i < kNumOpcodes; ++i) {
    if (kMnemonics[i] == text) return static_cast<Opcode>(i + 1);
  }
  return std::nullopt;
}

Instruction make_instruction(Opcode op) {
  const auto i = static_cast<unsigned>(op);
  if (i == 0 || i > kNumOpcodes) {
    throw IsaError(Violation{ErrorKind::kUnknownOpcode, "", "opcode", i, 0});
  }
  return make_by_index(i - 1, std::make_index_sequence<kNumOpcodes>{});
}

std::span<const Opcode> all_opcodes() { return kAllOpcodes; }

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFieldOverflow:
      return "FieldOverflow";
    case ErrorKind::kEvenRegisterRequired:
      return "EvenRegisterRequired";
    case ErrorKind::kOffsetUnsupportedIn32BitMode:
      return "OffsetUnsupportedIn32BitMode";
    case ErrorKind::kUnknownOpcode:
      return "UnknownOpcode";
    case ErrorKind::kReservedFieldNonzero:
      return "ReservedFieldNonzero";
    case ErrorKind::kMalformedStream:
      return "MalformedStream";
  }
  return "?";
}

std::string Violation::message() const {
  std::ostringstream os;
  switch (kind) {
    case ErrorKind::kFieldOverflow:
      os << op << ": " << field << " value " << value << " out of range (max "
         << limit << ")";
      break;
    case ErrorKind::kEvenRegisterRequired:
      os << op << ": " << field << " must be even";
      break;
    case ErrorKind::kOffsetUnsupportedIn32BitMode:
      os << op << ": offsets are not supported in 32-bit mode";
      break;
    case ErrorKind::kUnknownOpcode:
      os << "unknown opcode " << value;
      break;
    case ErrorKind::kReservedFieldNonzero:
      os << op << ": reserved field " << field << " is nonzero";
      break;
    case ErrorKind::kMalformedStream:
      os << "malformed program stream: " << field;
      break;
  }
  return os.str();
}

IsaError::IsaError(Violation v)
    : std::runtime_error(v.message()), violation_(std::move(v)) {}

std::vector<Violation> validate(const Instruction& instr,
                                const ValidationLimits& limits) {
  std::vector<Violation> out;
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        const std::string op(mnemonic(T::kOpcode));
        T::operands(in, [&](const OperandSpec& spec, const auto& field) {
          using F = std::decay_t<decltype(field)>;
          if constexpr (std::is_same_v<F, RegId>) {
            if (field.index >= kNumRegisters) {
              out.push_back({ErrorKind::kFieldOverflow, op,
                             std::string(spec.name), field.index,
                             kNumRegisters - 1});
            } else if (spec.kind == OperandKind::kEvenReg &&
                       field.index % 2 != 0) {
              out.push_back({ErrorKind::kEvenRegisterRequired, op,
                             std::string(spec.name), field.index, 0});
            }
          } else if constexpr (std::is_same_v<F, Offset>) {
            if (field.select > 7) {
              out.push_back({ErrorKind::kFieldOverflow, op, "offset_select",
                             field.select, 7});
            }
            if (field.value > kMax16) {
              out.push_back({ErrorKind::kFieldOverflow, op, "offset_value",
                             field.value, kMax16});
            }
          } else if constexpr (std::is_same_v<F, std::uint32_t>) {
            std::uint64_t max = spec.max;
            if (limits.event_registers && spec.name == "imm_ev") {
              max = std::min<std::uint64_t>(max, *limits.event_registers);
              if (field >= *limits.event_registers) {
                out.push_back({ErrorKind::kFieldOverflow, op, "imm_ev", field,
                               max == 0 ? 0 : max - 1});
                return;
              }
            }
            if (field < spec.min || field > max) {
              out.push_back({ErrorKind::kFieldOverflow, op,
                             std::string(spec.name), field, max});
            }
          }
        });
      },
      instr);
  return out;
}

std::uint64_t encode(const Instruction& instr, EncodingMode mode) {
  if (auto v = validate(instr); !v.empty()) throw IsaError(std::move(v.front()));
  return std::visit(
      [mode](const auto& in) -> std::uint64_t {
        return mode == EncodingMode::kWord64 ? encode64(in) : encode32(in);
      },
      instr);
}

Instruction decode(std::uint64_t word, EncodingMode mode) {
  const unsigned op_bits = mode == EncodingMode::kWord64
                               ? bits(word, 58, 6)
                               : bits(word, 26, 6);
  if (op_bits == 0 || op_bits > kNumOpcodes) {
    throw IsaError(
        Violation{ErrorKind::kUnknownOpcode, "", "opcode", op_bits, 0});
  }
  const auto op = static_cast<Opcode>(op_bits);
  Instruction instr = decode_by_index(op_bits - 1, word, mode,
                                      std::make_index_sequence<kNumOpcodes>{});
  if (auto v = validate(instr); !v.empty()) throw IsaError(std::move(v.front()));
  std::uint64_t canonical = 0;
  try {
    canonical = encode(instr, mode);
  } catch (const IsaError&) {
    canonical = 0;
  }
  if (canonical != word) {
    fail(ErrorKind::kReservedFieldNonzero, op,
         reserved_region(canonical ^ word, mode));
  }
  return instr;
}

std::vector<std::uint8_t> write_stream(std::span<const Instruction> code,
                                       EncodingMode mode) {
  const unsigned wb = word_bytes(mode);
  std::vector<std::uint8_t> out;
  out.reserve(12 + code.size() * wb);
  out.insert(out.end(), {'P', 'I', 'M', 'I'});
  out.push_back(kStreamVersion);
  out.push_back(static_cast<std::uint8_t>(mode));
  out.push_back(0);
  out.push_back(0);
  const auto count = static_cast<std::uint32_t>(code.size());
  for (unsigned i = 0; i < 4; ++i) out.push_back((count >> (8 * i)) & 0xFF);
  for (const Instruction& instr : code) {
    const std::uint64_t w = encode(instr, mode);
    for (unsigned i = 0; i < wb; ++i) out.push_back((w >> (8 * i)) & 0xFF);
  }
  return out;
}

DecodedStream read_stream(std::span<const std::uint8_t> bytes) {
  auto malformed = [](const char* why) {
    throw IsaError(Violation{ErrorKind::kMalformedStream, "", why, 0, 0});
  };
  if (bytes.size() < 12) malformed("truncated header");
  if (bytes[0] != 'P' || bytes[1] != 'I' || bytes[2] != 'M' || bytes[3] != 'I') {
    malformed("bad magic");
  }
  if (bytes[4] != kStreamVersion) malformed("unsupported version");
  if (bytes[5] > 1) malformed("bad mode");
  if (bytes[6] != 0 || bytes[7] != 0) malformed("reserved header bytes");
  DecodedStream out;
  out.mode = static_cast<EncodingMode>(bytes[5]);
  std::uint32_t count = 0;
  for (unsigned i = 0; i < 4; ++i) count |= std::uint32_t{bytes[8 + i]} << (8 * i);
  const unsigned wb = word_bytes(out.mode);
  if (bytes.size() != 12 + std::size_t{count} * wb) malformed("length mismatch");
  out.code.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t w = 0;
    for (unsigned i = 0; i < wb; ++i) {
      w |= std::uint64_t{bytes[12 + k * wb + i]} << (8 * i);
    }
    out.code.push_back(decode(w, out.mode));
  }
  return out;
}

}  // namespace pimkit::isa
