#include "tilesim/isa.hpp"

#include <sstream>

#include "tilesim/errors.hpp"

namespace tilesim::isa {

namespace {

constexpr uint32_t kOpLui = 0x37;
constexpr uint32_t kOpAuipc = 0x17;
constexpr uint32_t kOpJal = 0x6F;
constexpr uint32_t kOpJalr = 0x67;
constexpr uint32_t kOpBranch = 0x63;
constexpr uint32_t kOpLoad = 0x03;
constexpr uint32_t kOpStore = 0x23;
constexpr uint32_t kOpImm = 0x13;
constexpr uint32_t kOpReg = 0x33;

int32_t sign_extend(uint32_t value, unsigned bits) {
  uint32_t mask = 1u << (bits - 1);
  return static_cast<int32_t>((value ^ mask) - mask);
}

int32_t decode_imm_i(uint32_t w) { return sign_extend(w >> 20, 12); }

int32_t decode_imm_s(uint32_t w) {
  uint32_t imm = ((w >> 25) << 5) | ((w >> 7) & 0x1F);
  return sign_extend(imm, 12);
}

int32_t decode_imm_b(uint32_t w) {
  uint32_t imm = (((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) |
                 (((w >> 25) & 0x3F) << 5) | (((w >> 8) & 0xF) << 1);
  return sign_extend(imm, 13);
}

int32_t decode_imm_j(uint32_t w) {
  uint32_t imm = (((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) |
                 (((w >> 20) & 1) << 11) | (((w >> 21) & 0x3FF) << 1);
  return sign_extend(imm, 21);
}

uint32_t field_rd(uint32_t w) { return (w >> 7) & 0x1F; }
uint32_t field_rs1(uint32_t w) { return (w >> 15) & 0x1F; }
uint32_t field_rs2(uint32_t w) { return (w >> 20) & 0x1F; }
uint32_t field_f3(uint32_t w) { return (w >> 12) & 0x7; }
uint32_t field_f7(uint32_t w) { return w >> 25; }

Instruction make(Op op, uint32_t rd, uint32_t rs1, uint32_t rs2, int32_t imm) {
  Instruction i;
  i.op = op;
  i.rd = static_cast<uint8_t>(rd);
  i.rs1 = static_cast<uint8_t>(rs1);
  i.rs2 = static_cast<uint8_t>(rs2);
  i.imm = imm;
  return i;
}

[[noreturn]] void range_error(const Instruction& ins, const char* what) {
  std::ostringstream os;
  os << mnemonic(ins.op) << ": " << what << " (imm=" << ins.imm << ")";
  throw EncodingRangeError(os.str());
}

void check_reg(uint32_t r) {
  if (r > 31) throw EncodingRangeError("register index out of range");
}

uint32_t enc_r(uint32_t f7, uint32_t rs2, uint32_t rs1, uint32_t f3, uint32_t rd,
               uint32_t opcode) {
  return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode;
}

uint32_t enc_i(int32_t imm, uint32_t rs1, uint32_t f3, uint32_t rd, uint32_t opcode) {
  return ((static_cast<uint32_t>(imm) & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) |
         (rd << 7) | opcode;
}

}  // namespace

Instruction decode(uint32_t w) noexcept {
  const uint32_t opcode = w & 0x7F;
  const uint32_t rd = field_rd(w);
  const uint32_t rs1 = field_rs1(w);
  const uint32_t rs2 = field_rs2(w);
  const uint32_t f3 = field_f3(w);
  const uint32_t f7 = field_f7(w);
  const Instruction invalid{};

  switch (opcode) {
    case kOpLui:
      return make(Op::kLui, rd, 0, 0, static_cast<int32_t>(w & 0xFFFFF000));
    case kOpAuipc:
      return make(Op::kAuipc, rd, 0, 0, static_cast<int32_t>(w & 0xFFFFF000));
    case kOpJal:
      return make(Op::kJal, rd, 0, 0, decode_imm_j(w));
    case kOpJalr:
      if (f3 != 0) return invalid;
      return make(Op::kJalr, rd, rs1, 0, decode_imm_i(w));
    case kOpBranch: {
      Op op;
      switch (f3) {
        case 0: op = Op::kBeq; break;
        case 1: op = Op::kBne; break;
        case 4: op = Op::kBlt; break;
        case 5: op = Op::kBge; break;
        case 6: op = Op::kBltu; break;
        case 7: op = Op::kBgeu; break;
        default: return invalid;
      }
      return make(op, 0, rs1, rs2, decode_imm_b(w));
    }
    case kOpLoad:
      if (f3 != 2) return invalid;  // word accesses only
      return make(Op::kLw, rd, rs1, 0, decode_imm_i(w));
    case kOpStore:
      if (f3 != 2) return invalid;
      return make(Op::kSw, 0, rs1, rs2, decode_imm_s(w));
    case kOpImm:
      switch (f3) {
        case 0: return make(Op::kAddi, rd, rs1, 0, decode_imm_i(w));
        case 2: return make(Op::kSlti, rd, rs1, 0, decode_imm_i(w));
        case 3: return make(Op::kSltiu, rd, rs1, 0, decode_imm_i(w));
        case 4: return make(Op::kXori, rd, rs1, 0, decode_imm_i(w));
        case 6: return make(Op::kOri, rd, rs1, 0, decode_imm_i(w));
        case 7: return make(Op::kAndi, rd, rs1, 0, decode_imm_i(w));
        case 1:
          if (f7 != 0) return invalid;
          return make(Op::kSlli, rd, rs1, 0, static_cast<int32_t>(rs2));
        case 5:
          if (f7 == 0x00) return make(Op::kSrli, rd, rs1, 0, static_cast<int32_t>(rs2));
          if (f7 == 0x20) return make(Op::kSrai, rd, rs1, 0, static_cast<int32_t>(rs2));
          return invalid;
        default: return invalid;
      }
    case kOpReg: {
      Op op;
      if (f7 == 0x00) {
        switch (f3) {
          case 0: op = Op::kAdd; break;
          case 1: op = Op::kSll; break;
          case 2: op = Op::kSlt; break;
          case 3: op = Op::kSltu; break;
          case 4: op = Op::kXor; break;
          case 5: op = Op::kSrl; break;
          case 6: op = Op::kOr; break;
          case 7: op = Op::kAnd; break;
          default: return invalid;
        }
      } else if (f7 == 0x20) {
        switch (f3) {
          case 0: op = Op::kSub; break;
          case 5: op = Op::kSra; break;
          default: return invalid;
        }
      } else {
        return invalid;
      }
      return make(op, rd, rs1, rs2, 0);
    }
    case kCustomOpcode:
      if (f7 != 0) return invalid;
      switch (f3) {
        case 0:  // send rs1, rs2
          if (rd != 0) return invalid;
          return make(Op::kSend, 0, rs1, rs2, 0);
        case 1:  // recv rd
          if (rs1 != 0 || rs2 != 0) return invalid;
          return make(Op::kRecv, rd, 0, 0, 0);
        case 2: return make(Op::kFmul, rd, rs1, rs2, 0);
        case 3: return make(Op::kFadd, rd, rs1, rs2, 0);
        case 4: return make(Op::kFsub, rd, rs1, rs2, 0);
        default: return invalid;
      }
    default:
      return invalid;
  }
}

uint32_t encode(const Instruction& ins) {
  check_reg(ins.rd);
  check_reg(ins.rs1);
  check_reg(ins.rs2);
  const int32_t imm = ins.imm;

  auto check_i_imm = [&] {
    if (imm < -2048 || imm > 2047) range_error(ins, "immediate outside 12-bit range");
  };
  auto check_b_imm = [&] {
    if (imm & 1) range_error(ins, "branch offset must be even");
    if (imm < -4096 || imm > 4094) range_error(ins, "branch offset outside 13-bit range");
  };
  auto enc_b = [&](uint32_t f3) {
    uint32_t u = static_cast<uint32_t>(imm);
    return (((u >> 12) & 1) << 31) | (((u >> 5) & 0x3F) << 25) |
           (uint32_t(ins.rs2) << 20) | (uint32_t(ins.rs1) << 15) | (f3 << 12) |
           (((u >> 1) & 0xF) << 8) | (((u >> 11) & 1) << 7) | kOpBranch;
  };
  auto check_shift = [&] {
    if (imm < 0 || imm > 31) range_error(ins, "shift amount outside 0..31");
  };

  switch (ins.op) {
    case Op::kLui:
    case Op::kAuipc:
      if (imm & 0xFFF) range_error(ins, "upper immediate has nonzero low 12 bits");
      return (static_cast<uint32_t>(imm) & 0xFFFFF000) | (uint32_t(ins.rd) << 7) |
             (ins.op == Op::kLui ? kOpLui : kOpAuipc);
    case Op::kJal: {
      if (imm & 1) range_error(ins, "jump offset must be even");
      if (imm < -1048576 || imm > 1048574) range_error(ins, "jump offset outside 21-bit range");
      uint32_t u = static_cast<uint32_t>(imm);
      return (((u >> 20) & 1) << 31) | (((u >> 1) & 0x3FF) << 21) |
             (((u >> 11) & 1) << 20) | (((u >> 12) & 0xFF) << 12) |
             (uint32_t(ins.rd) << 7) | kOpJal;
    }
    case Op::kJalr:
      check_i_imm();
      return enc_i(imm, ins.rs1, 0, ins.rd, kOpJalr);
    case Op::kBeq: check_b_imm(); return enc_b(0);
    case Op::kBne: check_b_imm(); return enc_b(1);
    case Op::kBlt: check_b_imm(); return enc_b(4);
    case Op::kBge: check_b_imm(); return enc_b(5);
    case Op::kBltu: check_b_imm(); return enc_b(6);
    case Op::kBgeu: check_b_imm(); return enc_b(7);
    case Op::kLw:
      check_i_imm();
      return enc_i(imm, ins.rs1, 2, ins.rd, kOpLoad);
    case Op::kSw: {
      check_i_imm();
      uint32_t u = static_cast<uint32_t>(imm);
      return (((u >> 5) & 0x7F) << 25) | (uint32_t(ins.rs2) << 20) |
             (uint32_t(ins.rs1) << 15) | (2u << 12) | ((u & 0x1F) << 7) | kOpStore;
    }
    case Op::kAddi: check_i_imm(); return enc_i(imm, ins.rs1, 0, ins.rd, kOpImm);
    case Op::kSlti: check_i_imm(); return enc_i(imm, ins.rs1, 2, ins.rd, kOpImm);
    case Op::kSltiu: check_i_imm(); return enc_i(imm, ins.rs1, 3, ins.rd, kOpImm);
    case Op::kXori: check_i_imm(); return enc_i(imm, ins.rs1, 4, ins.rd, kOpImm);
    case Op::kOri: check_i_imm(); return enc_i(imm, ins.rs1, 6, ins.rd, kOpImm);
    case Op::kAndi: check_i_imm(); return enc_i(imm, ins.rs1, 7, ins.rd, kOpImm);
    case Op::kSlli:
      check_shift();
      return enc_r(0x00, static_cast<uint32_t>(imm), ins.rs1, 1, ins.rd, kOpImm);
    case Op::kSrli:
      check_shift();
      return enc_r(0x00, static_cast<uint32_t>(imm), ins.rs1, 5, ins.rd, kOpImm);
    case Op::kSrai:
      check_shift();
      return enc_r(0x20, static_cast<uint32_t>(imm), ins.rs1, 5, ins.rd, kOpImm);
    case Op::kAdd: return enc_r(0x00, ins.rs2, ins.rs1, 0, ins.rd, kOpReg);
    case Op::kSub: return enc_r(0x20, ins.rs2, ins.rs1, 0, ins.rd, kOpReg);
    case Op::kSll: return enc_r(0x00, ins.rs2, ins.rs1, 1, ins.rd, kOpReg);
    case Op::kSlt: return enc_r(0x00, ins.rs2, ins.rs1, 2, ins.rd, kOpReg);
    case Op::kSltu: return enc_r(0x00, ins.rs2, ins.rs1, 3, ins.rd, kOpReg);
    case Op::kXor: return enc_r(0x00, ins.rs2, ins.rs1, 4, ins.rd, kOpReg);
    case Op::kSrl: return enc_r(0x00, ins.rs2, ins.rs1, 5, ins.rd, kOpReg);
    case Op::kSra: return enc_r(0x20, ins.rs2, ins.rs1, 5, ins.rd, kOpReg);
    case Op::kOr: return enc_r(0x00, ins.rs2, ins.rs1, 6, ins.rd, kOpReg);
    case Op::kAnd: return enc_r(0x00, ins.rs2, ins.rs1, 7, ins.rd, kOpReg);
    case Op::kSend: return enc_r(0x00, ins.rs2, ins.rs1, 0, 0, kCustomOpcode);
    case Op::kRecv: return enc_r(0x00, 0, 0, 1, ins.rd, kCustomOpcode);
    case Op::kFmul: return enc_r(0x00, ins.rs2, ins.rs1, 2, ins.rd, kCustomOpcode);
    case Op::kFadd: return enc_r(0x00, ins.rs2, ins.rs1, 3, ins.rd, kCustomOpcode);
    case Op::kFsub: return enc_r(0x00, ins.rs2, ins.rs1, 4, ins.rd, kCustomOpcode);
    case Op::kInvalid:
      break;
  }
  throw EncodingRangeError("cannot encode an invalid instruction");
}

Format format_of(Op op) {
  switch (op) {
    case Op::kLui:
    case Op::kAuipc: return Format::kU;
    case Op::kJal: return Format::kJal;
    case Op::kJalr: return Format::kJalr;
    case Op::kBeq:
    case Op::kBne:
    case Op::kBlt:
    case Op::kBge:
    case Op::kBltu:
    case Op::kBgeu: return Format::kBranch;
    case Op::kLw: return Format::kLoad;
    case Op::kSw: return Format::kStore;
    case Op::kAddi:
    case Op::kSlti:
    case Op::kSltiu:
    case Op::kXori:
    case Op::kOri:
    case Op::kAndi: return Format::kI;
    case Op::kSlli:
    case Op::kSrli:
    case Op::kSrai: return Format::kIShift;
    case Op::kSend: return Format::kSend;
    case Op::kRecv: return Format::kRecv;
    default: return Format::kR;
  }
}

std::string_view mnemonic(Op op) {
  switch (op) {
    case Op::kInvalid: return "invalid";
    case Op::kLui: return "lui";
    case Op::kAuipc: return "auipc";
    case Op::kJal: return "jal";
    case Op::kJalr: return "jalr";
    case Op::kBeq: return "beq";
    case Op::kBne: return "bne";
    case Op::kBlt: return "blt";
    case Op::kBge: return "bge";
    case Op::kBltu: return "bltu";
    case Op::kBgeu: return "bgeu";
    case Op::kLw: return "lw";
    case Op::kSw: return "sw";
    case Op::kAddi: return "addi";
    case Op::kSlti: return "slti";
    case Op::kSltiu: return "sltiu";
    case Op::kXori: return "xori";
    case Op::kOri: return "ori";
    case Op::kAndi: return "andi";
    case Op::kSlli: return "slli";
    case Op::kSrli: return "srli";
    case Op::kSrai: return "srai";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kSll: return "sll";
    case Op::kSlt: return "slt";
    case Op::kSltu: return "sltu";
    case Op::kXor: return "xor";
    case Op::kSrl: return "srl";
    case Op::kSra: return "sra";
    case Op::kOr: return "or";
    case Op::kAnd: return "and";
    case Op::kSend: return "send";
    case Op::kRecv: return "recv";
    case Op::kFmul: return "fmul";
    case Op::kFadd: return "fadd";
    case Op::kFsub: return "fsub";
  }
  return "?";
}

}  // namespace tilesim::isa
