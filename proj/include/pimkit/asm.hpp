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

// Text assembler and disassembler.
//
// Syntax, one instruction per line:
//
//   .core 0
//   sldi  $r1, 42            # comment
//   vvadd $r1, $r2, $r3, 16, [0b011:8]
//
// Immediates are decimal, 0x hex or 0b binary. A bracket offset is written
// `[select:value]`; omitting it means select=0, value=0. Trailing byte
// offsets (sld, ldi, send, recv, vavg) may also be omitted. Instructions that
// appear before any `.core` directive belong to core 0.

#ifndef PIMKIT_ASM_HPP_
#define PIMKIT_ASM_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pimkit/isa.hpp"

namespace pimkit::assembler {

struct Section {
  std::uint32_t core_id = 0;
  std::vector<isa::Instruction> instructions;
  std::vector<std::uint32_t> source_lines;  // 1-based, parallel to instructions

  // Source lines are provenance only and do not take part in equality.
  bool operator==(const Section& other) const {
    return core_id == other.core_id && instructions == other.instructions;
  }
};

struct SourceProgram {
  std::vector<Section> sections;
  bool operator==(const SourceProgram&) const = default;
};

enum class Severity { kError, kWarning };

struct Diagnostic {
  std::uint32_t line = 1;
  std::uint32_t column = 1;
  std::string message;
  Severity severity = Severity::kError;
};

std::string format(const Diagnostic& d);

struct AssembleResult {
  std::variant<SourceProgram, std::vector<Diagnostic>> value;

  bool ok() const { return value.index() == 0; }
  const SourceProgram& program() const { return std::get<0>(value); }
  const std::vector<Diagnostic>& diagnostics() const {
    return std::get<1>(value);
  }
};

AssembleResult assemble(std::string_view text);

// Canonical text for a single instruction, without a trailing newline.
std::string to_text(const isa::Instruction& instr);

// Parses one instruction line (no directives). Throws std::invalid_argument
// with the diagnostic text on failure.
isa::Instruction parse_instruction(std::string_view line);

std::string disassemble(const SourceProgram& program);

}  // namespace pimkit::assembler

#endif  // PIMKIT_ASM_HPP_
