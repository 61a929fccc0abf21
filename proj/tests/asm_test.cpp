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

#include <gtest/gtest.h>

#include "pimkit/fuzz.hpp"

namespace pimkit::assembler {
namespace {

using isa::RegId;

TEST(AsmTest, SingleInstruction) {
  const AssembleResult r = assemble(".core 0\nsldi $r1, 42\n");
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.program().sections.size(), 1U);
  const Section& s = r.program().sections[0];
  EXPECT_EQ(s.core_id, 0U);
  ASSERT_EQ(s.instructions.size(), 1U);
  EXPECT_EQ(s.instructions[0], isa::Instruction(isa::Sldi{RegId{1}, 42}));
  EXPECT_EQ(s.source_lines[0], 2U);
}

TEST(AsmTest, OffsetSyntax) {
  const isa::Instruction instr = parse_instruction("vvadd $r1, $r2, $r3, 16, [0b011:8]");
  const auto* v = std::get_if<isa::Vvadd>(&instr);
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(v->len, 16U);
  EXPECT_EQ(v->offset.select, 0b011U);
  EXPECT_EQ(v->offset.value, 8U);
  EXPECT_EQ(to_text(instr), "vvadd $r1, $r2, $r3, 16, [0b011:8]");
}

TEST(AsmTest, OddGlobalRegisterDiagnostic) {
  const AssembleResult r = assemble(".core 0\nsld $r0, $r3, 4\n");
  ASSERT_FALSE(r.ok());
  ASSERT_FALSE(r.diagnostics().empty());
  EXPECT_EQ(r.diagnostics()[0].line, 2U);
  EXPECT_NE(r.diagnostics()[0].message.find("rs1 must be even"), std::string::npos)
      << r.diagnostics()[0].message;
}

TEST(AsmTest, UnknownMnemonicNamesTheLine) {
  const AssembleResult r = assemble(".core 0\nsldi $r1, 1\nvfoo $r1\n");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.diagnostics()[0].line, 3U);
  EXPECT_NE(format(r.diagnostics()[0]).find("3"), std::string::npos);
}

TEST(AsmTest, CanonicalPrinting) {
  SourceProgram p;
  p.sections.push_back(Section{0, {isa::Sadd{RegId{3}, RegId{1}, RegId{2}}}, {}});
  EXPECT_EQ(disassemble(p), ".core 0\nsadd $r3, $r1, $r2\n");
}

TEST(AsmTest, EmptySection) {
  SourceProgram p;
  p.sections.push_back(Section{0, {}, {}});
  EXPECT_EQ(disassemble(p), ".core 0\n");
  const AssembleResult r = assemble(".core 0\n");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.program(), p);
}

TEST(AsmTest, CommentsAndMultipleSections) {
  const AssembleResult r = assemble(
      "# two cores\n"
      ".core 0\n"
      "send $r1, 1, 4   # to core 1\n"
      "\n"
      ".core 1\n"
      "recv $r2, 0, 4\n");
  ASSERT_TRUE(r.ok()) << format(r.diagnostics()[0]);
  ASSERT_EQ(r.program().sections.size(), 2U);
  EXPECT_EQ(r.program().sections[1].core_id, 1U);
  EXPECT_EQ(r.program().sections[1].source_lines[0], 6U);
}

TEST(AsmTest, DuplicateCoreIsAnError) {
  EXPECT_FALSE(assemble(".core 1\nsldi $r1, 1\n.core 1\n").ok());
}

TEST(AsmTest, FuzzedProgramsRoundTrip) {
  fuzz::Rng rng(fuzz::seed_from_env(21));
  for (int i = 0; i < 500; ++i) {
    const SourceProgram p = fuzz::random_program(rng);
    const std::string text = disassemble(p);
    const AssembleResult r = assemble(text);
    ASSERT_TRUE(r.ok()) << text;
    ASSERT_EQ(r.program(), p) << text;
    ASSERT_EQ(disassemble(r.program()), text);
  }
}

}  // namespace
}  // namespace pimkit::assembler
