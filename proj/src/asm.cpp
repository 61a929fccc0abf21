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

#include "pimkit/asm.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace pimkit::assembler {
namespace {

using isa::Instruction;
using isa::OperandKind;
using isa::OperandSpec;

struct Token {
  std::string_view text;
  std::uint32_t column = 1;  // 1-based
};

struct ParseError {
  std::uint32_t column;
  std::string message;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\v' || c == '\f'; }

Token trim(std::string_view s, std::uint32_t column) {
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && is_space(s[e - 1])) --e;
  return {s.substr(b, e - b), column + static_cast<std::uint32_t>(b)};
}

// Signed 64-bit literal: [+-]?(0x[0-9a-f]+|0b[01]+|[0-9]+).
std::optional<std::int64_t> parse_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  } else if (s.size() > 2 && s[0] == '0' && (s[1] == 'b' || s[1] == 'B')) {
    base = 2;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t magnitude = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), magnitude, base);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (magnitude > (std::uint64_t{1} << 62)) return std::nullopt;
  const auto v = static_cast<std::int64_t>(magnitude);
  return negative ? -v : v;
}

std::uint32_t parse_register(const Token& tok) {
  std::string_view s = tok.text;
  if (s.size() < 3 || s[0] != '$' || s[1] != 'r') {
    throw ParseError{tok.column, "expected register, got '" + std::string(s) + "'"};
  }
  s.remove_prefix(2);
  std::uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n, 10);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError{tok.column, "malformed register '" + std::string(tok.text) + "'"};
  }
  if (n >= isa::kNumRegisters) {
    throw ParseError{tok.column, "register out of range: " + std::string(tok.text)};
  }
  return static_cast<std::uint32_t>(n);
}

std::uint32_t parse_unsigned(const Token& tok, const OperandSpec& spec) {
  const auto v = parse_integer(tok.text);
  if (!v) {
    throw ParseError{tok.column, "malformed immediate '" + std::string(tok.text) + "'"};
  }
  if (*v < static_cast<std::int64_t>(spec.min) ||
      *v > static_cast<std::int64_t>(spec.max)) {
    std::ostringstream os;
    os << "immediate overflow: " << spec.name << " = " << *v << " not in ["
       << spec.min << ", " << spec.max << "]";
    throw ParseError{tok.column, os.str()};
  }
  return static_cast<std::uint32_t>(*v);
}

std::int32_t parse_signed32(const Token& tok, const OperandSpec& spec) {
  const auto v = parse_integer(tok.text);
  if (!v) {
    throw ParseError{tok.column, "malformed immediate '" + std::string(tok.text) + "'"};
  }
  // Accept both the signed range and raw 32-bit patterns.
  if (*v < std::numeric_limits<std::int32_t>::min() ||
      *v > static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max())) {
    throw ParseError{tok.column, "immediate overflow: " + std::string(spec.name) +
                                     " does not fit in 32 bits"};
  }
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(*v));
}

isa::Offset parse_offset(const Token& tok) {
  std::string_view s = tok.text;
  if (s.size() < 5 || s.front() != '[' || s.back() != ']') {
    throw ParseError{tok.column, "expected offset [select:value], got '" +
                                     std::string(s) + "'"};
  }
  s = s.substr(1, s.size() - 2);
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError{tok.column, "offset needs ':' between select and value"};
  }
  const Token sel_tok = trim(s.substr(0, colon), tok.column + 1);
  const Token val_tok =
      trim(s.substr(colon + 1), tok.column + 2 + static_cast<std::uint32_t>(colon));
  const auto sel = parse_integer(sel_tok.text);
  const auto val = parse_integer(val_tok.text);
  if (!sel || *sel < 0 || *sel > 7) {
    throw ParseError{sel_tok.column, "offset select must be a 3-bit mask"};
  }
  if (!val || *val < 0 || *val > isa::kMax16) {
    throw ParseError{val_tok.column, "immediate overflow: offset value not in [0, 65535]"};
  }
  return {static_cast<std::uint32_t>(*sel), static_cast<std::uint32_t>(*val)};
}

std::vector<Token> split_operands(const Token& rest) {
  std::vector<Token> out;
  if (rest.text.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= rest.text.size(); ++i) {
    if (i == rest.text.size() || rest.text[i] == ',') {
      Token t = trim(rest.text.substr(start, i - start),
                     rest.column + static_cast<std::uint32_t>(start));
      if (t.text.empty()) throw ParseError{t.column, "empty operand"};
      out.push_back(t);
      start = i + 1;
    }
  }
  return out;
}

Instruction build(isa::Opcode op, const std::vector<Token>& operands,
                  std::uint32_t mnemonic_column) {
  Instruction instr = isa::make_instruction(op);
  std::visit(
      [&](auto& in) {
        using T = std::decay_t<decltype(in)>;
        std::size_t required = 0, optional = 0;
        T::operands(in, [&](const OperandSpec& spec, const auto&) {
          if (spec.kind == OperandKind::kOffset || spec.kind == OperandKind::kTrailing) {
            ++optional;
          } else {
            ++required;
          }
        });
        if (operands.size() < required || operands.size() > required + optional) {
          std::ostringstream os;
          os << "wrong operand count for " << isa::mnemonic(op) << ": expected ";
          if (optional == 0) {
            os << required;
          } else {
            os << required << " to " << required + optional;
          }
          os << ", got " << operands.size();
          throw ParseError{mnemonic_column, os.str()};
        }
        std::size_t next = 0;
        T::operands(in, [&](const OperandSpec& spec, auto& field) {
          using F = std::decay_t<decltype(field)>;
          if (next >= operands.size()) return;  // omitted optional operand
          const Token& tok = operands[next++];
          if constexpr (std::is_same_v<F, isa::RegId>) {
            field.index = parse_register(tok);
          } else if constexpr (std::is_same_v<F, isa::Offset>) {
            field = parse_offset(tok);
          } else if constexpr (std::is_same_v<F, std::int32_t>) {
            field = parse_signed32(tok, spec);
          } else {
            field = parse_unsigned(tok, spec);
          }
        });
      },
      instr);
  return instr;
}

Instruction parse_line(const Token& line) {
  std::size_t end = 0;
  while (end < line.text.size() && !is_space(line.text[end])) ++end;
  const std::string_view word = line.text.substr(0, end);
  const auto op = isa::opcode_from_mnemonic(word);
  if (!op) {
    throw ParseError{line.column, "unknown mnemonic '" + std::string(word) + "'"};
  }
  const Token rest =
      trim(line.text.substr(end), line.column + static_cast<std::uint32_t>(end));
  Instruction instr = build(*op, split_operands(rest), line.column);
  if (auto v = isa::validate(instr); !v.empty()) {
    throw ParseError{line.column, v.front().message()};
  }
  return instr;
}

// Splits on \n, \r\n and lone \r.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' || text[i] == '\r') {
      lines.push_back(text.substr(start, i - start));
      if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      start = i + 1;
    }
  }
  if (start < text.size()) lines.push_back(text.substr(start));
  return lines;
}

std::string offset_text(const isa::Offset& o) {
  std::string s = "[0b";
  for (int b = 2; b >= 0; --b) s += ((o.select >> b) & 1) ? '1' : '0';
  return s + ":" + std::to_string(o.value) + "]";
}

}  // namespace

std::string format(const Diagnostic& d) {
  std::ostringstream os;
  os << "line " << d.line << ":" << d.column << ": "
     << (d.severity == Severity::kError ? "error" : "warning") << ": " << d.message;
  return os.str();
}

AssembleResult assemble(std::string_view text) {
  SourceProgram program;
  std::vector<Diagnostic> diags;
  std::set<std::uint32_t> seen_cores;
  Section* current = nullptr;

  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = static_cast<std::uint32_t>(i + 1);
    std::string_view raw = lines[i];
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const Token line = trim(raw, 1);
    if (line.text.empty()) continue;
    try {
      if (line.text.front() == '.') {
        std::size_t end = 0;
        while (end < line.text.size() && !is_space(line.text[end])) ++end;
        if (line.text.substr(0, end) != ".core") {
          throw ParseError{line.column, "unknown directive '" +
                                            std::string(line.text.substr(0, end)) + "'"};
        }
        const Token arg =
            trim(line.text.substr(end), line.column + static_cast<std::uint32_t>(end));
        const auto id = parse_integer(arg.text);
        if (!id || *id < 0 || *id > std::numeric_limits<std::uint32_t>::max()) {
          throw ParseError{arg.column, ".core expects a core number"};
        }
        const auto core = static_cast<std::uint32_t>(*id);
        if (!seen_cores.insert(core).second) {
          throw ParseError{line.column, "duplicate .core " + std::to_string(core)};
        }
        program.sections.push_back(Section{core, {}, {}});
        current = &program.sections.back();
        continue;
      }
      Instruction instr = parse_line(line);
      if (current == nullptr) {
        if (!seen_cores.insert(0).second) {
          throw ParseError{line.column, "duplicate .core 0"};
        }
        program.sections.push_back(Section{0, {}, {}});
        current = &program.sections.back();
      }
      current->instructions.push_back(std::move(instr));
      current->source_lines.push_back(line_no);
    } catch (const ParseError& e) {
      diags.push_back(Diagnostic{line_no, e.column, e.message, Severity::kError});
    } catch (const std::exception& e) {
      diags.push_back(Diagnostic{line_no, line.column, e.what(), Severity::kError});
    }
  }
  if (!diags.empty()) return AssembleResult{std::move(diags)};
  return AssembleResult{std::move(program)};
}

isa::Instruction parse_instruction(std::string_view line) {
  try {
    return parse_line(trim(line, 1));
  } catch (const ParseError& e) {
    throw std::invalid_argument("column " + std::to_string(e.column) + ": " +
                                e.message);
  }
}

std::string to_text(const Instruction& instr) {
  std::string out;
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        out = std::string(isa::mnemonic(T::kOpcode));
        bool first = true;
        T::operands(in, [&](const OperandSpec&, const auto& field) {
          using F = std::decay_t<decltype(field)>;
          std::string piece;
          if constexpr (std::is_same_v<F, isa::RegId>) {
            piece = "$r" + std::to_string(field.index);
          } else if constexpr (std::is_same_v<F, isa::Offset>) {
            if (field.empty()) return;
            piece = offset_text(field);
          } else {
            piece = std::to_string(field);
          }
          out += first ? " " : ", ";
          out += piece;
          first = false;
        });
      },
      instr);
  return out;
}

std::string disassemble(const SourceProgram& program) {
  std::string out;
  for (std::size_t s = 0; s < program.sections.size(); ++s) {
    const Section& section = program.sections[s];
    if (s > 0) out += "\n";
    out += ".core " + std::to_string(section.core_id) + "\n";
    for (const Instruction& instr : section.instructions) {
      out += to_text(instr);
      out += "\n";
    }
  }
  return out;
}

}  // namespace pimkit::assembler
