#pragma once

#include <cstdint>
#include <string_view>

namespace tilesim::isa {

// RV32I integer subset plus the five custom instructions carried in the
// custom-0 major opcode (0001011): funct3 0=send 1=recv 2=fmul 3=fadd 4=fsub.
enum class Op : uint8_t {
  kInvalid = 0,
  kLui,
  kAuipc,
  kJal,
  kJalr,
  kBeq,
  kBne,
  kBlt,
  kBge,
  kBltu,
  kBgeu,
  kLw,
  kSw,
  kAddi,
  kSlti,
  kSltiu,
  kXori,
  kOri,
  kAndi,
  kSlli,
  kSrli,
  kSrai,
  kAdd,
  kSub,
  kSll,
  kSlt,
  kSltu,
  kXor,
  kSrl,
  kSra,
  kOr,
  kAnd,
  kSend,
  kRecv,
  kFmul,
  kFadd,
  kFsub,
};

enum class Format : uint8_t {
  kR,       // rd, rs1, rs2
  kI,       // rd, rs1, imm12
  kIShift,  // rd, rs1, shamt
  kLoad,    // rd, imm(rs1)
  kStore,   // rs2, imm(rs1)
  kBranch,  // rs1, rs2, pc-relative imm13 (even)
  kU,       // rd, imm (low 12 bits zero)
  kJal,     // rd, pc-relative imm21 (even)
  kJalr,    // rd, imm(rs1)
  kSend,    // rs1, rs2
  kRecv,    // rd
};

// Unused fields for a given format are always zero, so two equal
// instructions compare equal field-by-field.
struct Instruction {
  Op op = Op::kInvalid;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int32_t imm = 0;  // fully sign-extended (U-type: full value with low 12 bits zero)

  bool operator==(const Instruction&) const = default;
  bool valid() const { return op != Op::kInvalid; }
};

constexpr uint32_t kCustomOpcode = 0x0B;  // custom-0 major opcode

// Decodes any 32-bit word. Unsupported or malformed words come back with
// op == Op::kInvalid; they are never silently treated as something else.
Instruction decode(uint32_t word) noexcept;

// Produces the unique word that decodes back to `ins`.
// Throws EncodingRangeError when a field does not fit its format.
uint32_t encode(const Instruction& ins);

Format format_of(Op op);
std::string_view mnemonic(Op op);

}  // namespace tilesim::isa
