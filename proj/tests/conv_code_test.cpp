#include "seqdec/conv_code.hpp"

#include <gtest/gtest.h>

#include "seqdec/rng.hpp"

using namespace seqdec;

namespace {

BitStream xor_bits(const BitStream& a, const BitStream& b) {
  BitStream out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

}  // namespace

TEST(ParseOctalGenerators, BenchmarkFamily) {
  struct Row {
    const char* text;
    std::uint32_t g0, g1;
    int memory, traceback;
  };
  const Row rows[] = {
      {"1,3", 01, 03, 1, 10},           {"5,7", 05, 07, 2, 15},
      {"23,35", 023, 035, 4, 25},       {"133,171", 0133, 0171, 6, 35},
      {"561,753", 0561, 0753, 8, 45},   {"2335,3661", 02335, 03661, 10, 55},
  };
  for (const Row& row : rows) {
    const CodeSpec code = parse_octal_generators(row.text);
    EXPECT_EQ(code.generators[0], row.g0) << row.text;
    EXPECT_EQ(code.generators[1], row.g1) << row.text;
    EXPECT_EQ(code.memory, row.memory) << row.text;
    EXPECT_EQ(code.constraint_length(), row.memory + 1) << row.text;
    EXPECT_EQ(code.traceback_hint, row.traceback) << row.text;
    EXPECT_EQ(code.octal_string(), row.text);
  }
}

TEST(ParseOctalGenerators, ReferenceCodesMatchesFamily) {
  const auto codes = reference_codes();
  ASSERT_EQ(codes.size(), 6u);
  const int memories[] = {1, 2, 4, 6, 8, 10};
  for (std::size_t i = 0; i < codes.size(); ++i) EXPECT_EQ(codes[i].memory, memories[i]);
}

TEST(ParseOctalGenerators, AcceptsWhitespace) {
  const CodeSpec code = parse_octal_generators("  133 , 171 ");
  EXPECT_EQ(code.memory, 6);
}

TEST(ParseOctalGenerators, Rejects) {
  EXPECT_THROW(parse_octal_generators("13,5"), std::invalid_argument);   // width mismatch
  EXPECT_THROW(parse_octal_generators("133,71"), std::invalid_argument); // width mismatch
  EXPECT_THROW(parse_octal_generators("5,9"), std::invalid_argument);    // non-octal digit
  EXPECT_THROW(parse_octal_generators("0,0"), std::invalid_argument);    // zero mask
  EXPECT_THROW(parse_octal_generators("5 7"), std::invalid_argument);    // no comma
  EXPECT_THROW(parse_octal_generators("5,7,7"), std::invalid_argument);  // extra token
  EXPECT_THROW(parse_octal_generators("5,"), std::invalid_argument);     // empty mask
  EXPECT_THROW(parse_octal_generators(","), std::invalid_argument);
  EXPECT_THROW(parse_octal_generators("77777777777777,77777777777777"), std::invalid_argument);
}

TEST(ParseOctalGenerators, LeadingZerosCountAsDigits) {
  const CodeSpec code = parse_octal_generators("05,07");
  EXPECT_EQ(code.memory, 2);
  EXPECT_THROW(parse_octal_generators("05,7"), std::invalid_argument);
}

TEST(Encode, FrozenExamples) {
  // (o5,o7), u = 1 0 0: registers 001,010,100 -> outputs (1,1) (0,1) (1,1).
  const CodeSpec c57 = parse_octal_generators("5,7");
  EXPECT_EQ(encode({1, 0, 0}, c57), (BitStream{1, 1, 0, 1, 1, 1}));

  // (o1,o3), u = 1: g0 taps only u_k, g1 taps u_k and u_{k-1}.
  const CodeSpec c13 = parse_octal_generators("1,3");
  EXPECT_EQ(encode({1}, c13), (BitStream{1, 1}));
  EXPECT_EQ(encode({1, 1}, c13), (BitStream{1, 1, 1, 0}));
}

TEST(Encode, RateIsHalf) {
  const CodeSpec code = parse_octal_generators("133,171");
  Rng rng(7);
  const BitStream u = random_bits(137, 0.5, rng);
  EXPECT_EQ(encode(u, code).size(), 2 * u.size());
}

TEST(Encode, EmptyInputThrows) {
  EXPECT_THROW(encode({}, parse_octal_generators("5,7")), std::invalid_argument);
}

TEST(Encode, Linearity) {
  Rng rng(11);
  for (const CodeSpec& code : reference_codes()) {
    for (int trial = 0; trial < 20; ++trial) {
      const BitStream a = random_bits(64, 0.5, rng);
      const BitStream b = random_bits(64, 0.5, rng);
      EXPECT_EQ(encode(xor_bits(a, b), code), xor_bits(encode(a, code), encode(b, code)));
    }
  }
}

TEST(Encode, ZeroPrefixShiftsOutput) {
  Rng rng(13);
  const CodeSpec code = parse_octal_generators("23,35");
  const BitStream u = random_bits(40, 0.5, rng);
  BitStream prefixed(8, 0);
  prefixed.insert(prefixed.end(), u.begin(), u.end());
  const BitStream coded = encode(prefixed, code);
  const BitStream expected_tail = encode(u, code);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(coded[i], 0);
  for (std::size_t i = 0; i < expected_tail.size(); ++i) EXPECT_EQ(coded[16 + i], expected_tail[i]);
}

TEST(Trellis, FrozenBranchExample) {
  // (o5,o7) from state 0 with input 1: outputs (1,1), next state 1.
  const Trellis t = build_trellis(parse_octal_generators("5,7"));
  ASSERT_EQ(t.num_states, 4u);
  const auto& br = t.branch(0, 1);
  EXPECT_EQ(br.out0, 1);
  EXPECT_EQ(br.out1, 1);
  EXPECT_EQ(br.next, 1u);
  // From state 0 with input 0: stays, outputs (0,0).
  EXPECT_EQ(t.branch(0, 0).next, 0u);
  EXPECT_EQ(t.branch(0, 0).out0, 0);
  EXPECT_EQ(t.branch(0, 0).out1, 0);
}

TEST(Trellis, StateUpdateRule) {
  for (const CodeSpec& code : reference_codes()) {
    const Trellis t = build_trellis(code);
    const std::uint32_t mask = t.num_states - 1;
    for (std::uint32_t s = 0; s < t.num_states; ++s)
      for (int b = 0; b < 2; ++b)
        EXPECT_EQ(t.branch(s, b).next, ((s << 1) | static_cast<std::uint32_t>(b)) & mask);
  }
}

TEST(Trellis, EveryStateHasTwoPredecessors) {
  const Trellis t = build_trellis(parse_octal_generators("133,171"));
  std::vector<int> pred_count(t.num_states, 0);
  for (std::uint32_t s = 0; s < t.num_states; ++s)
    for (int b = 0; b < 2; ++b) pred_count[t.branch(s, b).next]++;
  for (int c : pred_count) EXPECT_EQ(c, 2);
}

TEST(Trellis, WalkMatchesEncode) {
  Rng rng(17);
  for (const CodeSpec& code : reference_codes()) {
    const Trellis t = build_trellis(code);
    const BitStream u = random_bits(200, 0.5, rng);
    const BitStream coded = encode(u, code);
    std::uint32_t state = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const auto& br = t.branch(state, u[k]);
      EXPECT_EQ(br.out0, coded[2 * k]);
      EXPECT_EQ(br.out1, coded[2 * k + 1]);
      state = br.next;
    }
    // Final state holds the last nu inputs, newest in bit 0.
    std::uint32_t expected = 0;
    for (int i = 0; i < code.memory; ++i)
      expected |= static_cast<std::uint32_t>(u[u.size() - 1 - i]) << i;
    EXPECT_EQ(state, expected);
  }
}

TEST(Trellis, MemoryGuard) {
  EXPECT_THROW(build_trellis(parse_octal_generators("40001,40003")), std::invalid_argument);
  EXPECT_NO_THROW(build_trellis(parse_octal_generators("40001,40003"), 14));
}
