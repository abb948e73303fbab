#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilesim/noc.hpp"
#include "tilesim/tile.hpp"

namespace tilesim {

struct MachineConfig {
  unsigned grid_rows = 16;
  unsigned grid_cols = 16;
  size_t fifo_depth = 16;
  // Watchdog for both the load and the execution loops.
  uint64_t max_cycles = 50'000'000;
  // Host messages injected per load cycle; 0 means unlimited.
  size_t host_injection_rate = 0;
  // When true, load cycles are folded into the reported total; they are
  // always also reported on their own.
  bool count_load_phase = false;
};

struct TilePhaseCounters {
  unsigned row = 0;
  unsigned col = 0;
  TileCounters counters;
};

struct Stats {
  std::vector<TilePhaseCounters> per_tile;  // execution-phase tallies
  uint64_t messages_injected = 0;
  uint64_t messages_delivered = 0;
  uint64_t host_mailbox_delivered = 0;
  uint64_t total_hops = 0;
  double max_link_utilization = 0.0;
  uint64_t load_cycles = 0;
  uint64_t exec_cycles = 0;
  uint64_t total_cycles = 0;
  size_t host_injection_rate = 0;
  bool count_load_phase = false;
  // busy / (busy + stalls) over tiles that executed at least one
  // instruction; 0 when no tile ran.
  double compute_bound_ratio = 0.0;
};

nlohmann::ordered_json stats_to_json(const Stats& s);

struct Trigger {
  noc::Coord coord;
  unsigned lut_index = 0;
};

// The whole machine: a torus of tiles, the interconnect, the host mailbox
// and a single logical clock. Every cycle steps all tiles first (their
// only cross-tile effect is pushing onto their own output queues), then
// the network, which applies its deliveries at the end of the cycle, so a
// run is a pure function of (config, load script, triggers).
class Machine {
 public:
  explicit Machine(const MachineConfig& cfg);
  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  // Feeds an ordered script of system/data writes (task types 0-2 and
  // 4-14) into idle tiles and runs the clock until every message has been
  // consumed. Returns the elapsed cycles.
  uint64_t load_phase(std::span<const noc::Message> script);

  // Queues START_TASK messages for the listed tiles.
  void start_tasks(std::span<const Trigger> triggers);

  // Runs until all tiles are idle, all queues are empty and nothing is in
  // flight. Throws DeadlockSuspectedError at the watchdog and
  // TileFaultError when a tile halts.
  Stats run_until_quiescent();

  // Drains the host mailbox in arrival order.
  std::vector<noc::Message> read_host_mailbox();

  Stats stats() const;
  bool quiescent() const;
  uint64_t cycle() const { return cycle_; }

  const MachineConfig& config() const { return cfg_; }
  unsigned grid_rows() const { return cfg_.grid_rows; }
  unsigned grid_cols() const { return cfg_.grid_cols; }

  Tile& tile(noc::Coord c) { return tiles_[size_t(c.row) * cfg_.grid_cols + c.col]; }
  const Tile& tile(noc::Coord c) const {
    return tiles_[size_t(c.row) * cfg_.grid_cols + c.col];
  }
  size_t tile_count() const { return tiles_.size(); }
  const noc::Network& network() const { return net_; }
  size_t host_mailbox_size() const { return mailbox_.size(); }

  // Single-cycle advance, exposed for trace-level tests.
  void step_cycle();

 private:
  std::vector<TileCounters> snapshot_counters() const;
  void accumulate(std::vector<TileCounters>& acc,
                  const std::vector<TileCounters>& before) const;
  void check_faults() const;
  std::vector<StuckTileInfo> stuck_tiles() const;

  MachineConfig cfg_;
  std::vector<Tile> tiles_;
  std::vector<noc::TilePorts> ports_;
  noc::Network net_;
  std::vector<noc::Message> mailbox_;
  uint64_t cycle_ = 0;
  uint64_t load_cycles_ = 0;
  uint64_t exec_cycles_ = 0;
  std::vector<TileCounters> load_acc_;
  std::vector<TileCounters> exec_acc_;
};

}  // namespace tilesim
