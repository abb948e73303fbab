#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tilesim/isa.hpp"
#include "tilesim/noc.hpp"

namespace tilesim {

// Local address map. Instruction fetch is confined to the low 64 KB;
// loads and stores are confined to the data 64 KB. Message addresses are
// offsets within their target region.
constexpr uint32_t kImemBase = 0x00000;
constexpr uint32_t kImemSize = 0x10000;
constexpr uint32_t kDmemBase = 0x10000;
constexpr uint32_t kDmemSize = 0x10000;
constexpr unsigned kNumRegs = 32;
constexpr unsigned kLutEntries = 16;

enum class TileMode : uint8_t {
  kIdle = 0,
  kRunning,
  kStallRecv,
  kStallSend,
  kHaltedError,
};

// Per-mode cycle tallies; they always sum to the cycles this tile has seen.
struct TileCounters {
  uint64_t busy = 0;
  uint64_t stall_send = 0;
  uint64_t stall_recv = 0;
  uint64_t idle = 0;
  uint64_t total() const { return busy + stall_send + stall_recv + idle; }
};

struct TileEffect {
  enum class Kind : uint8_t {
    kNone = 0,
    kEnqueuedOutput,
    kTaskStarted,
    kTaskEnded,
    kError,
  };
  Kind kind = Kind::kNone;
};

struct TileFault {
  uint32_t pc = 0;
  std::string cause;
};

// One tile: PE state, its two SRAM regions, the 16-entry task lookup
// table, and its network queues. A tile is stepped one cycle at a time
// and never touches anything outside itself; the only outward effect is
// pushing onto its own output queue.
class Tile {
 public:
  Tile(noc::Coord coord, size_t fifo_depth)
      : coord_(coord),
        imem_(kImemSize, 0),
        dmem_(kDmemSize, 0),
        inq_(fifo_depth),
        outq_(fifo_depth) {}

  // Advances exactly one cycle.
  //
  // Idle: pop and process one message if available (writes to memory or
  // the LUT, or dispatches a task via the LUT on a start message);
  // otherwise count an idle cycle. Running: fetch/decode/execute one
  // instruction; send retries against a full output queue and recv
  // retries against an empty input queue, counting stall cycles until
  // they complete. A jalr to address 0 with rd=x0 ends the task and
  // returns the tile to idle with pc=0.
  TileEffect step();

  noc::Coord coord() const { return coord_; }
  TileMode mode() const { return mode_; }
  uint32_t pc() const { return pc_; }
  const TileCounters& counters() const { return counters_; }
  const std::optional<TileFault>& fault() const { return fault_; }

  noc::Fifo& inq() { return inq_; }
  noc::Fifo& outq() { return outq_; }
  const noc::Fifo& inq() const { return inq_; }
  const noc::Fifo& outq() const { return outq_; }

  uint32_t reg(unsigned i) const { return regs_[i]; }
  uint16_t lut(unsigned i) const { return lut_[i]; }

  // Backdoor accessors used by the host side for loading checks, result
  // gathering, and tests. Offsets are region-relative byte addresses.
  uint32_t imem_word(uint32_t offset) const { return load_le(imem_, offset); }
  uint32_t dmem_word(uint32_t offset) const { return load_le(dmem_, offset); }
  void poke_dmem_word(uint32_t offset, uint32_t value) { store_le(dmem_, offset, value); }
  void poke_imem_word(uint32_t offset, uint32_t value) { store_le(imem_, offset, value); }
  void poke_reg(unsigned i, uint32_t v) {
    if (i != 0) regs_[i] = v;
  }
  void poke_lut(unsigned i, uint16_t v) { lut_[i] = v; }
  void force_mode_running(uint32_t pc) {
    mode_ = TileMode::kRunning;
    pc_ = pc;
  }

  bool quiescent() const { return mode_ == TileMode::kIdle && inq_.empty() && outq_.empty(); }

 private:
  static uint32_t load_le(const std::vector<uint8_t>& mem, uint32_t off) {
    return uint32_t(mem[off]) | uint32_t(mem[off + 1]) << 8 | uint32_t(mem[off + 2]) << 16 |
           uint32_t(mem[off + 3]) << 24;
  }
  static void store_le(std::vector<uint8_t>& mem, uint32_t off, uint32_t v) {
    mem[off] = uint8_t(v);
    mem[off + 1] = uint8_t(v >> 8);
    mem[off + 2] = uint8_t(v >> 16);
    mem[off + 3] = uint8_t(v >> 24);
  }

  void set_reg(unsigned i, uint32_t v) {
    if (i != 0) regs_[i] = v;
  }
  void halt(const std::string& cause);
  void process_idle_message(const noc::Message& m);
  TileEffect exec_one();

  noc::Coord coord_;
  uint32_t pc_ = 0;
  std::array<uint32_t, kNumRegs> regs_{};
  std::vector<uint8_t> imem_;
  std::vector<uint8_t> dmem_;
  std::array<uint16_t, kLutEntries> lut_{};
  noc::Fifo inq_;
  noc::Fifo outq_;
  TileMode mode_ = TileMode::kIdle;
  TileCounters counters_;
  std::optional<TileFault> fault_;
};

}  // namespace tilesim
