#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tilesim/isa.hpp"

namespace tilesim::assembler {

// A run of contiguous instruction-memory words starting at `base`.
struct Segment {
  uint32_t base = 0;
  std::vector<uint32_t> words;
  bool operator==(const Segment&) const = default;
};

// Two-pass assembly of the textual form: one instruction or directive per
// line, `#` comments, `name:` labels, `.org ADDR` and `.word VALUE`
// directives, registers x0-x31, and the pseudo-instructions `nop` and
// `ret` (the task epilogue, jalr x0, 0(x0)). Branch and jump targets are
// labels or numeric pc-relative byte offsets.
// Throws AsmError with the offending line number.
std::vector<Segment> assemble(const std::string& text);

// Canonical text that assembles back to the same segments word for word.
// Words that do not decode are emitted as `.word 0x...`.
std::string disassemble(const std::vector<Segment>& segments);

std::string format_instruction(const isa::Instruction& ins);

}  // namespace tilesim::assembler
