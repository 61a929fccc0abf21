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

#include <gtest/gtest.h>

#include "pimkit/fuzz.hpp"

namespace pimkit::isa {
namespace {

bool has_kind(const std::vector<Violation>& v, ErrorKind kind) {
  for (const auto& x : v) {
    if (x.kind == kind) return true;
  }
  return false;
}

ErrorKind encode_error(const Instruction& instr, EncodingMode mode) {
  try {
    encode(instr, mode);
  } catch (const IsaError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "encode did not throw";
  return ErrorKind::kMalformedStream;
}

TEST(IsaTest, MnemonicsRoundTrip) {
  ASSERT_EQ(all_opcodes().size(), kNumOpcodes);
  for (const Opcode op : all_opcodes()) {
    const auto back = opcode_from_mnemonic(mnemonic(op));
    ASSERT_TRUE(back.has_value()) << mnemonic(op);
    EXPECT_EQ(*back, op);
    EXPECT_EQ(opcode_of(make_instruction(op)), op);
  }
  EXPECT_FALSE(opcode_from_mnemonic("vfoo").has_value());
}

TEST(IsaTest, SaddPacksFieldsInBothModes) {
  const Instruction sadd = Sadd{RegId{3}, RegId{1}, RegId{2}};
  const std::uint64_t w64 = (std::uint64_t{3} << 58) | (std::uint64_t{3} << 53) |
                            (std::uint64_t{1} << 48) | (std::uint64_t{2} << 43);
  EXPECT_EQ(encode(sadd, EncodingMode::kWord64), w64);
  const std::uint64_t w32 = (3U << 26) | (3U << 21) | (1U << 16) | (2U << 11);
  EXPECT_EQ(encode(sadd, EncodingMode::kWord32), w32);
}

TEST(IsaTest, SldiRoundTrip) {
  const Instruction sldi = Sldi{RegId{5}, 42};
  EXPECT_EQ(decode(encode(sldi, EncodingMode::kWord64), EncodingMode::kWord64), sldi);
  EXPECT_EQ(decode(encode(sldi, EncodingMode::kWord32), EncodingMode::kWord32), sldi);
  const Instruction negative = Sldi{RegId{31}, -2147483647 - 1};
  EXPECT_EQ(decode(encode(negative, EncodingMode::kWord64), EncodingMode::kWord64), negative);
}

TEST(IsaTest, OddGlobalRegisterIsRejected) {
  const Instruction sld = Sld{RegId{0}, RegId{1}, 0};
  const auto v = validate(sld);
  ASSERT_EQ(v.size(), 1U);
  EXPECT_EQ(v[0].kind, ErrorKind::kEvenRegisterRequired);
  EXPECT_EQ(v[0].op, "sld");
  EXPECT_EQ(v[0].field, "rs1");
  EXPECT_EQ(encode_error(sld, EncodingMode::kWord64), ErrorKind::kEvenRegisterRequired);
}

TEST(IsaTest, StoreWithEvenDestinationIsValid) {
  EXPECT_TRUE(validate(St{RegId{2}, RegId{4}, 16, {}}).empty());
  EXPECT_TRUE(has_kind(validate(St{RegId{3}, RegId{4}, 16, {}}),
                       ErrorKind::kEvenRegisterRequired));
  EXPECT_TRUE(has_kind(validate(Ld{RegId{4}, RegId{5}, 16, {}}),
                       ErrorKind::kEvenRegisterRequired));
}

TEST(IsaTest, OffsetsAreRejectedInWord32) {
  const Instruction vvadd = Vvadd{RegId{1}, RegId{2}, RegId{3}, 4, Offset{0b101, 1}};
  EXPECT_EQ(encode_error(vvadd, EncodingMode::kWord32),
            ErrorKind::kOffsetUnsupportedIn32BitMode);
  EXPECT_EQ(decode(encode(vvadd, EncodingMode::kWord64), EncodingMode::kWord64), vvadd);
  EXPECT_EQ(encode_error(Sld{RegId{1}, RegId{2}, 4}, EncodingMode::kWord32),
            ErrorKind::kOffsetUnsupportedIn32BitMode);
}

TEST(IsaTest, Word32FieldLimits) {
  EXPECT_EQ(encode_error(Vvadd{RegId{1}, RegId{2}, RegId{3}, 2048, {}}, EncodingMode::kWord32),
            ErrorKind::kFieldOverflow);
  EXPECT_NO_THROW(encode(Vvadd{RegId{1}, RegId{2}, RegId{3}, 2047, {}}, EncodingMode::kWord32));
  EXPECT_EQ(encode_error(Sldi{RegId{1}, 40000}, EncodingMode::kWord32), ErrorKind::kFieldOverflow);
  EXPECT_EQ(encode_error(Send{RegId{1}, 32, 4, 0}, EncodingMode::kWord32),
            ErrorKind::kFieldOverflow);
}

TEST(IsaTest, UnassignedOpcodeIsRejected) {
  try {
    decode(std::uint64_t{0b111111} << 58, EncodingMode::kWord64);
    FAIL() << "decode accepted opcode 63";
  } catch (const IsaError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnknownOpcode);
  }
  EXPECT_THROW(decode(0, EncodingMode::kWord64), IsaError);
  EXPECT_THROW(decode(std::uint64_t{0b111111} << 26, EncodingMode::kWord32), IsaError);
}

TEST(IsaTest, ReservedBitsMustBeZero) {
  const std::uint64_t word = encode(Sadd{RegId{3}, RegId{1}, RegId{2}}, EncodingMode::kWord64);
  try {
    decode(word | 1, EncodingMode::kWord64);
    FAIL() << "decode accepted a nonzero reserved bit";
  } catch (const IsaError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kReservedFieldNonzero);
  }
}

TEST(IsaTest, ValidateFieldRanges) {
  EXPECT_TRUE(has_kind(validate(Mvmul{RegId{1}, RegId{2}, 8, 2, 0}), ErrorKind::kFieldOverflow));
  EXPECT_TRUE(has_kind(validate(Mvmul{RegId{1}, RegId{2}, 0, 0, 0}), ErrorKind::kFieldOverflow));
  EXPECT_TRUE(has_kind(validate(Setbw{33, 8}), ErrorKind::kFieldOverflow));
  EXPECT_TRUE(has_kind(validate(Vvadd{RegId{1}, RegId{2}, RegId{3}, 1, Offset{8, 0}}),
                       ErrorKind::kFieldOverflow));
  EXPECT_TRUE(validate(Wait{15, 1}, ValidationLimits{16}).empty());
  EXPECT_TRUE(has_kind(validate(Wait{16, 1}, ValidationLimits{16}), ErrorKind::kFieldOverflow));
  EXPECT_TRUE(has_kind(validate(Sync{16, 0}, ValidationLimits{16}), ErrorKind::kFieldOverflow));
}

TEST(IsaTest, StreamRoundTrip) {
  const std::vector<Instruction> code = {Sldi{RegId{1}, 7}, Vvadd{RegId{1}, RegId{2}, RegId{3}, 4, {}},
                                         Wait{1, 2}};
  for (const auto mode : {EncodingMode::kWord64, EncodingMode::kWord32}) {
    const auto bytes = write_stream(code, mode);
    ASSERT_EQ(bytes.size(), 12 + code.size() * word_bytes(mode));
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PIMI");
    const DecodedStream back = read_stream(bytes);
    EXPECT_EQ(back.mode, mode);
    EXPECT_EQ(back.code, code);
  }
}

TEST(IsaTest, MalformedStreams) {
  auto bytes = write_stream(std::vector<Instruction>{Sldi{RegId{1}, 7}}, EncodingMode::kWord64);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(read_stream(truncated), IsaError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(read_stream(bad_magic), IsaError);
}

TEST(IsaTest, FuzzedRoundTripBothModes) {
  fuzz::Rng rng(fuzz::seed_from_env(11));
  for (int i = 0; i < 20000; ++i) {
    const auto mode = i % 2 ? EncodingMode::kWord32 : EncodingMode::kWord64;
    const Instruction instr = fuzz::random_instruction(rng, mode);
    ASSERT_TRUE(validate(instr).empty());
    const std::uint64_t word = encode(instr, mode);
    if (mode == EncodingMode::kWord32) ASSERT_LT(word, std::uint64_t{1} << 32);
    ASSERT_EQ(decode(word, mode), instr);
  }
}

}  // namespace
}  // namespace pimkit::isa
