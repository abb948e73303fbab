#include "tilesim/tile.hpp"

#include <bit>
#include <sstream>

namespace tilesim {

using isa::Op;

void Tile::halt(const std::string& cause) {
  fault_ = TileFault{pc_, cause};
  mode_ = TileMode::kHaltedError;
}

TileEffect Tile::step() {
  switch (mode_) {
    case TileMode::kHaltedError:
      counters_.idle++;
      return {TileEffect::Kind::kError};

    case TileMode::kIdle: {
      counters_.idle++;
      if (inq_.empty()) return {};
      noc::Message m = inq_.pop();
      process_idle_message(m);
      if (mode_ == TileMode::kRunning) return {TileEffect::Kind::kTaskStarted};
      if (mode_ == TileMode::kHaltedError) return {TileEffect::Kind::kError};
      return {};
    }

    case TileMode::kStallSend: {
      // Retry the send that stalled; pc still points at it.
      isa::Instruction ins = isa::decode(load_le(imem_, pc_));
      if (outq_.full()) {
        counters_.stall_send++;
        return {};
      }
      outq_.push({regs_[ins.rs1], regs_[ins.rs2]});
      pc_ += 4;
      mode_ = TileMode::kRunning;
      counters_.busy++;
      return {TileEffect::Kind::kEnqueuedOutput};
    }

    case TileMode::kStallRecv: {
      isa::Instruction ins = isa::decode(load_le(imem_, pc_));
      if (inq_.empty()) {
        counters_.stall_recv++;
        return {};
      }
      noc::Message m = inq_.pop();
      set_reg(ins.rd, m.metadata);
      set_reg(ins.rd + 1, m.data);
      pc_ += 4;
      mode_ = TileMode::kRunning;
      counters_.busy++;
      return {};
    }

    case TileMode::kRunning:
      return exec_one();
  }
  return {};
}

void Tile::process_idle_message(const noc::Message& m) {
  noc::Metadata md = noc::unpack_metadata(m.metadata);
  switch (md.task_type) {
    case noc::kWriteInstr:
      if (md.addr & 3) {
        halt("misaligned instruction-memory write");
        return;
      }
      store_le(imem_, md.addr, m.data);
      return;
    case noc::kWriteLut:
      lut_[md.addr % kLutEntries] = uint16_t(m.data & 0xFFFF);
      return;
    case noc::kStartTask:
      pc_ = lut_[md.addr % kLutEntries];
      mode_ = TileMode::kRunning;
      return;
    default:
      // Data writes: type 1 is the system form, 4-15 arrive from other
      // tiles or the host while this tile idles.
      if (md.addr & 3) {
        halt("misaligned data-memory write");
        return;
      }
      store_le(dmem_, md.addr, m.data);
      return;
  }
}

TileEffect Tile::exec_one() {
  if (pc_ & 3) {
    halt("misaligned instruction fetch");
    counters_.busy++;
    return {TileEffect::Kind::kError};
  }
  if (pc_ + 3 >= kImemSize) {
    halt("instruction fetch outside instruction region");
    counters_.busy++;
    return {TileEffect::Kind::kError};
  }
  const uint32_t word = load_le(imem_, pc_);
  const isa::Instruction ins = isa::decode(word);
  if (!ins.valid()) {
    std::ostringstream os;
    os << "invalid instruction word 0x" << std::hex << word;
    halt(os.str());
    counters_.busy++;
    return {TileEffect::Kind::kError};
  }

  const uint32_t a = regs_[ins.rs1];
  const uint32_t b = regs_[ins.rs2];
  TileEffect effect{};

  auto data_access = [&](const char* what) -> std::optional<uint32_t> {
    uint32_t addr = a + uint32_t(ins.imm);
    if (addr & 3) {
      std::ostringstream os;
      os << "misaligned " << what << " at 0x" << std::hex << addr;
      halt(os.str());
      return std::nullopt;
    }
    if (addr < kDmemBase || addr + 3 >= kDmemBase + kDmemSize) {
      std::ostringstream os;
      os << what << " outside data region at 0x" << std::hex << addr;
      halt(os.str());
      return std::nullopt;
    }
    return addr - kDmemBase;
  };
  auto fbits = [](uint32_t v) { return std::bit_cast<float>(v); };
  auto bits = [](float v) { return std::bit_cast<uint32_t>(v); };

  switch (ins.op) {
    case Op::kLui:
      set_reg(ins.rd, uint32_t(ins.imm));
      pc_ += 4;
      break;
    case Op::kAuipc:
      set_reg(ins.rd, pc_ + uint32_t(ins.imm));
      pc_ += 4;
      break;
    case Op::kJal:
      set_reg(ins.rd, pc_ + 4);
      pc_ += uint32_t(ins.imm);
      break;
    case Op::kJalr: {
      uint32_t target = (a + uint32_t(ins.imm)) & ~1u;
      if (target == 0 && ins.rd == 0) {
        // Task-return convention: back to the idle loop.
        mode_ = TileMode::kIdle;
        pc_ = 0;
        effect.kind = TileEffect::Kind::kTaskEnded;
      } else {
        set_reg(ins.rd, pc_ + 4);
        pc_ = target;
      }
      break;
    }
    case Op::kBeq: pc_ += (a == b) ? uint32_t(ins.imm) : 4; break;
    case Op::kBne: pc_ += (a != b) ? uint32_t(ins.imm) : 4; break;
    case Op::kBlt: pc_ += (int32_t(a) < int32_t(b)) ? uint32_t(ins.imm) : 4; break;
    case Op::kBge: pc_ += (int32_t(a) >= int32_t(b)) ? uint32_t(ins.imm) : 4; break;
    case Op::kBltu: pc_ += (a < b) ? uint32_t(ins.imm) : 4; break;
    case Op::kBgeu: pc_ += (a >= b) ? uint32_t(ins.imm) : 4; break;
    case Op::kLw: {
      auto off = data_access("load");
      if (!off) return {TileEffect::Kind::kError};
      set_reg(ins.rd, load_le(dmem_, *off));
      pc_ += 4;
      break;
    }
    case Op::kSw: {
      auto off = data_access("store");
      if (!off) return {TileEffect::Kind::kError};
      store_le(dmem_, *off, b);
      pc_ += 4;
      break;
    }
    case Op::kAddi: set_reg(ins.rd, a + uint32_t(ins.imm)); pc_ += 4; break;
    case Op::kSlti: set_reg(ins.rd, int32_t(a) < ins.imm ? 1 : 0); pc_ += 4; break;
    case Op::kSltiu: set_reg(ins.rd, a < uint32_t(ins.imm) ? 1 : 0); pc_ += 4; break;
    case Op::kXori: set_reg(ins.rd, a ^ uint32_t(ins.imm)); pc_ += 4; break;
    case Op::kOri: set_reg(ins.rd, a | uint32_t(ins.imm)); pc_ += 4; break;
    case Op::kAndi: set_reg(ins.rd, a & uint32_t(ins.imm)); pc_ += 4; break;
    case Op::kSlli: set_reg(ins.rd, a << (ins.imm & 31)); pc_ += 4; break;
    case Op::kSrli: set_reg(ins.rd, a >> (ins.imm & 31)); pc_ += 4; break;
    case Op::kSrai: set_reg(ins.rd, uint32_t(int32_t(a) >> (ins.imm & 31))); pc_ += 4; break;
    case Op::kAdd: set_reg(ins.rd, a + b); pc_ += 4; break;
    case Op::kSub: set_reg(ins.rd, a - b); pc_ += 4; break;
    case Op::kSll: set_reg(ins.rd, a << (b & 31)); pc_ += 4; break;
    case Op::kSlt: set_reg(ins.rd, int32_t(a) < int32_t(b) ? 1 : 0); pc_ += 4; break;
    case Op::kSltu: set_reg(ins.rd, a < b ? 1 : 0); pc_ += 4; break;
    case Op::kXor: set_reg(ins.rd, a ^ b); pc_ += 4; break;
    case Op::kSrl: set_reg(ins.rd, a >> (b & 31)); pc_ += 4; break;
    case Op::kSra: set_reg(ins.rd, uint32_t(int32_t(a) >> (b & 31))); pc_ += 4; break;
    case Op::kOr: set_reg(ins.rd, a | b); pc_ += 4; break;
    case Op::kAnd: set_reg(ins.rd, a & b); pc_ += 4; break;

    case Op::kSend:
      if (outq_.full()) {
        mode_ = TileMode::kStallSend;
        counters_.stall_send++;
        return {};
      }
      outq_.push({a, b});
      pc_ += 4;
      effect.kind = TileEffect::Kind::kEnqueuedOutput;
      break;

    case Op::kRecv: {
      if (ins.rd > 30) {
        halt("recv needs a destination register pair below x31");
        counters_.busy++;
        return {TileEffect::Kind::kError};
      }
      if (inq_.empty()) {
        mode_ = TileMode::kStallRecv;
        counters_.stall_recv++;
        return {};
      }
      noc::Message m = inq_.pop();
      set_reg(ins.rd, m.metadata);
      set_reg(ins.rd + 1, m.data);
      pc_ += 4;
      break;
    }

    case Op::kFmul: set_reg(ins.rd, bits(fbits(a) * fbits(b))); pc_ += 4; break;
    case Op::kFadd: set_reg(ins.rd, bits(fbits(a) + fbits(b))); pc_ += 4; break;
    case Op::kFsub: set_reg(ins.rd, bits(fbits(a) - fbits(b))); pc_ += 4; break;

    case Op::kInvalid:
      break;  // unreachable; handled above
  }

  counters_.busy++;
  return effect;
}

}  // namespace tilesim
