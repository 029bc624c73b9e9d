#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqdec/bitstream.hpp"

namespace seqdec {

// Rate-1/2 feedforward nonsystematic convolutional code. Generator masks are the
// octal tap polynomials: bit i of a mask taps input u_{k-i}, so the mask's top
// bit fixes the oldest tapped input and the code memory.
struct CodeSpec {
  std::array<std::uint32_t, 2> generators{};  // tap masks
  int memory = 0;                             // nu = constraint_length - 1
  int traceback_hint = 0;                     // 5 * (nu + 1)

  int constraint_length() const { return memory + 1; }
  static constexpr double rate() { return 0.5; }

  std::string octal_string() const {
    auto oct = [](std::uint32_t m) {
      std::string s;
      do {
        s.insert(s.begin(), static_cast<char>('0' + (m & 7)));
        m >>= 3;
      } while (m != 0);
      return s;
    };
    return oct(generators[0]) + "," + oct(generators[1]);
  }
};

// Parses "g0,g1" with both generators written in octal. The two octal strings
// must be the same width: differing digit counts imply different register
// lengths as written and are rejected rather than zero-padded.
inline CodeSpec parse_octal_generators(std::string_view text) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("invalid generator spec \"" + std::string(text) + "\": " + why);
  };

  const auto comma = text.find(',');
  if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos)
    fail("expected exactly two comma-separated octal masks");

  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };

  std::array<std::string_view, 2> tokens = {trim(text.substr(0, comma)), trim(text.substr(comma + 1))};
  std::array<std::uint32_t, 2> masks{};
  for (int g = 0; g < 2; ++g) {
    const auto tok = tokens[g];
    if (tok.empty()) fail("empty mask");
    std::uint64_t value = 0;
    for (char c : tok) {
      if (c < '0' || c > '7') fail("non-octal digit");
      value = value * 8 + static_cast<std::uint64_t>(c - '0');
      if (value > 0xffffffffULL) fail("mask out of range");
    }
    if (value == 0) fail("zero mask");
    masks[g] = static_cast<std::uint32_t>(value);
  }
  if (tokens[0].size() != tokens[1].size())
    fail("masks imply different constraint lengths");

  CodeSpec code;
  code.generators = masks;
  code.memory = std::bit_width(masks[0] | masks[1]) - 1;
  code.traceback_hint = 5 * (code.memory + 1);
  return code;
}

// The benchmark family: one code per memory 1,2,4,6,8,10.
inline std::vector<CodeSpec> reference_codes() {
  std::vector<CodeSpec> codes;
  for (const char* gens : {"1,3", "5,7", "23,35", "133,171", "561,753", "2335,3661"})
    codes.push_back(parse_octal_generators(gens));
  return codes;
}

// Explicit state machine over the 2^nu register states. State holds the last nu
// input bits, newest in bit 0.
struct Trellis {
  struct Branch {
    std::uint32_t next = 0;
    std::uint8_t out0 = 0, out1 = 0;
  };

  int memory = 0;
  std::uint32_t num_states = 1;
  std::vector<Branch> branches;  // indexed by state * 2 + input_bit

  const Branch& branch(std::uint32_t state, int input_bit) const {
    return branches[state * 2 + static_cast<std::uint32_t>(input_bit)];
  }
};

inline Trellis build_trellis(const CodeSpec& code, int max_memory = 12) {
  if (code.memory < 0 || code.memory > max_memory)
    throw std::invalid_argument("build_trellis: memory " + std::to_string(code.memory) +
                                " exceeds limit " + std::to_string(max_memory));
  Trellis t;
  t.memory = code.memory;
  t.num_states = 1u << code.memory;
  t.branches.resize(t.num_states * 2);
  const std::uint32_t reg_mask = (1u << (code.memory + 1)) - 1;
  for (std::uint32_t state = 0; state < t.num_states; ++state) {
    for (std::uint32_t bit = 0; bit < 2; ++bit) {
      const std::uint32_t reg = ((state << 1) | bit) & reg_mask;
      Trellis::Branch& br = t.branches[state * 2 + bit];
      br.out0 = static_cast<std::uint8_t>(std::popcount(reg & code.generators[0]) & 1);
      br.out1 = static_cast<std::uint8_t>(std::popcount(reg & code.generators[1]) & 1);
      br.next = reg & (t.num_states - 1);
    }
  }
  return t;
}

// Encodes from the all-zero register state; output is 2 coded bits per input bit.
inline BitStream encode(const BitStream& u, const CodeSpec& code) {
  if (u.empty()) throw std::invalid_argument("encode: empty input");
  const std::uint32_t reg_mask = (1u << (code.memory + 1)) - 1;
  BitStream coded;
  coded.reserve(2 * u.size());
  std::uint32_t reg = 0;
  for (std::uint8_t bit : u) {
    reg = ((reg << 1) | (bit & 1u)) & reg_mask;
    coded.push_back(static_cast<std::uint8_t>(std::popcount(reg & code.generators[0]) & 1));
    coded.push_back(static_cast<std::uint8_t>(std::popcount(reg & code.generators[1]) & 1));
  }
  return coded;
}

}  // namespace seqdec
