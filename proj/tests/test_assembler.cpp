#include <doctest.h>

#include <random>

#include "rv32i_corpus.hpp"
#include "tilesim/assembler.hpp"
#include "tilesim/errors.hpp"

using namespace tilesim;
using assembler::Segment;

TEST_CASE("single instructions assemble to the reference encodings") {
  for (const RefEncoding& e : kRv32iCorpus) {
    CAPTURE(e.text);
    auto segs = assembler::assemble(e.text);
    REQUIRE(segs.size() == 1);
    REQUIRE(segs[0].words.size() == 1);
    CHECK(segs[0].words[0] == e.word);
  }
  for (const RefEncoding& e : kCustomCorpus) {
    CAPTURE(e.text);
    auto segs = assembler::assemble(e.text);
    CHECK(segs[0].words[0] == e.word);
  }
}

TEST_CASE("labels resolve relative to instruction addresses") {
  auto segs = assembler::assemble(
      "start:\n"
      "  addi x1, x0, 5\n"
      "loop: beq x0, x0, loop\n"
      "  jal x0, start\n");
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].base == 0);
  REQUIRE(segs[0].words.size() == 3);
  CHECK(segs[0].words[0] == 0x00500093);
  CHECK(segs[0].words[1] == 0x00000063);  // self-loop, offset 0
  CHECK(segs[0].words[2] == isa::encode({isa::Op::kJal, 0, 0, 0, -8}));
}

TEST_CASE("pseudo-instructions expand to their fixed forms") {
  auto segs = assembler::assemble("  nop\n  ret\n");
  CHECK(segs[0].words[0] == 0x00000013);
  CHECK(segs[0].words[1] == 0x00000067);
}

TEST_CASE("directives place words and move the cursor") {
  auto segs = assembler::assemble(
      ".org 0x40\n"
      "  .word 0xdeadbeef\n"
      "  addi x1, x0, 1\n"
      ".org 0x100\n"
      "  ret\n");
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].base == 0x40);
  CHECK(segs[0].words[0] == 0xDEADBEEF);
  CHECK(segs[1].base == 0x100);
  CHECK(segs[1].words[0] == 0x00000067);
}

TEST_CASE("diagnostics carry line numbers") {
  auto line_of = [](const std::string& text) {
    try {
      assembler::assemble(text);
    } catch (const AsmError& e) {
      return e.line;
    }
    return -1;
  };
  CHECK(line_of("  addi x1, x0, 1\n  frobnicate x1\n") == 2);
  CHECK(line_of("  jal x0, nowhere\n") == 1);
  CHECK(line_of("  nop\n  nop\n  addi x1, x0, 5000\n") == 3);  // imm overflow
  CHECK(line_of("  recv x31\n") == 1);
  CHECK(line_of("  lw x1, 8\n") == 1);       // missing (reg)
  CHECK(line_of("  addi x32, x0, 0\n") == 1);  // no such register
  CHECK(line_of("a: nop\na: nop\n") == 2);   // duplicate label
}

TEST_CASE("overlapping segments are rejected") {
  CHECK_THROWS_AS(assembler::assemble(".org 0x40\n nop\n nop\n.org 0x44\n nop\n"),
                  AsmError);
}

TEST_CASE("comments and blank lines are ignored") {
  auto segs = assembler::assemble(
      "# leading comment\n"
      "\n"
      "  addi x1, x0, 5  # trailing comment\n"
      "   \n");
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].words.size() == 1);
}

TEST_CASE("disassembly produces canonical text that reassembles identically") {
  CHECK(assembler::format_instruction(isa::decode(0x00500093)) == "addi x1, x0, 5");

  auto segs = assembler::assemble(
      ".org 0x10\n"
      "top:\n"
      "  addi x1, x0, 5\n"
      "  lw x5, 8(x2)\n"
      "  sw x5, -12(x2)\n"
      "  lui x9, 0xfffff\n"
      "  beq x1, x0, top\n"
      "  jal x0, top\n"
      "  send x2, x3\n"
      "  recv x4\n"
      "  fmul x7, x1, x2\n"
      "  .word 0xffffffff\n"
      "  ret\n");
  std::string text = assembler::disassemble(segs);
  CHECK(text.find(".word 0xffffffff") != std::string::npos);
  auto again = assembler::assemble(text);
  CHECK(again == segs);
}

TEST_CASE("arbitrary word streams survive disassemble/assemble") {
  // Valid words come back through canonical mnemonics, everything else
  // through .word escapes; either way the image must be reproduced.
  std::mt19937 rng(20240617);
  for (int trial = 0; trial < 50; ++trial) {
    Segment seg;
    seg.base = (rng() % 64) * 4;
    size_t n = 1 + rng() % 64;
    for (size_t i = 0; i < n; ++i) seg.words.push_back(uint32_t(rng()));
    std::vector<Segment> segs{seg};
    auto again = assembler::assemble(assembler::disassemble(segs));
    REQUIRE(again == segs);
  }
}

TEST_CASE("every assembled word decodes, directives aside") {
  auto segs = assembler::assemble(
      "  addi x1, x0, 1\n"
      "  fadd x2, x1, x1\n"
      "  bge x2, x1, 8\n"
      "  ret\n");
  for (const Segment& s : segs) {
    for (uint32_t w : s.words) CHECK(isa::decode(w).valid());
  }
}
