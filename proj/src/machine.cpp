#include "tilesim/machine.hpp"

#include <sstream>

namespace tilesim {

namespace {

const char* mode_name(TileMode m) {
  switch (m) {
    case TileMode::kIdle: return "idle";
    case TileMode::kRunning: return "running";
    case TileMode::kStallRecv: return "stall-recv";
    case TileMode::kStallSend: return "stall-send";
    case TileMode::kHaltedError: return "halted";
  }
  return "?";
}

}  // namespace

Machine::Machine(const MachineConfig& cfg)
    : cfg_(cfg), net_(cfg.grid_rows, cfg.grid_cols, cfg.fifo_depth) {
  if (cfg.grid_rows < 1 || cfg.grid_cols < 1) {
    throw ConfigError("grid must be at least 1x1");
  }
  if (cfg.grid_rows > 63 || cfg.grid_cols > 63) {
    throw ConfigError("grid is capped at 63x63: coordinate (63,63) is the host");
  }
  if (cfg.fifo_depth < 1) throw ConfigError("fifo depth must be at least 1");
  if (cfg.max_cycles < 1) throw ConfigError("watchdog must allow at least one cycle");

  const size_t n = size_t(cfg.grid_rows) * cfg.grid_cols;
  tiles_.reserve(n);
  for (unsigned r = 0; r < cfg.grid_rows; ++r)
    for (unsigned c = 0; c < cfg.grid_cols; ++c)
      tiles_.emplace_back(noc::Coord{r, c}, cfg.fifo_depth);
  ports_.resize(n);
  for (size_t i = 0; i < n; ++i) ports_[i] = {&tiles_[i].outq(), &tiles_[i].inq()};
  load_acc_.resize(n);
  exec_acc_.resize(n);
}

std::vector<TileCounters> Machine::snapshot_counters() const {
  std::vector<TileCounters> snap(tiles_.size());
  for (size_t i = 0; i < tiles_.size(); ++i) snap[i] = tiles_[i].counters();
  return snap;
}

void Machine::accumulate(std::vector<TileCounters>& acc,
                         const std::vector<TileCounters>& before) const {
  for (size_t i = 0; i < tiles_.size(); ++i) {
    const TileCounters& cur = tiles_[i].counters();
    acc[i].busy += cur.busy - before[i].busy;
    acc[i].stall_send += cur.stall_send - before[i].stall_send;
    acc[i].stall_recv += cur.stall_recv - before[i].stall_recv;
    acc[i].idle += cur.idle - before[i].idle;
  }
}

void Machine::step_cycle() {
  for (Tile& t : tiles_) t.step();
  net_.step(ports_, mailbox_, cycle_);
  cycle_++;
}

void Machine::check_faults() const {
  for (const Tile& t : tiles_) {
    if (t.mode() == TileMode::kHaltedError) {
      const TileFault& f = *t.fault();
      std::ostringstream os;
      os << "tile (" << t.coord().row << "," << t.coord().col << ") halted at pc=0x"
         << std::hex << f.pc << ": " << f.cause;
      throw TileFaultError(os.str(), t.coord().row, t.coord().col, f.pc);
    }
  }
}

bool Machine::quiescent() const {
  if (!net_.drained()) return false;
  for (const Tile& t : tiles_)
    if (!t.quiescent()) return false;
  return true;
}

std::vector<StuckTileInfo> Machine::stuck_tiles() const {
  std::vector<StuckTileInfo> out;
  for (const Tile& t : tiles_) {
    if (t.quiescent()) continue;
    out.push_back({t.coord().row, t.coord().col, int(t.mode()), t.pc(), t.inq().size(),
                   t.outq().size()});
  }
  return out;
}

uint64_t Machine::load_phase(std::span<const noc::Message> script) {
  if (!quiescent()) throw SimError("load_phase requires a quiescent machine");
  for (size_t i = 0; i < script.size(); ++i) {
    unsigned type = noc::unpack_metadata(script[i].metadata).task_type;
    if (type == noc::kStartTask || type == noc::kDone) {
      std::ostringstream os;
      os << "load script entry " << i << " carries task type " << type
         << "; loads accept types 0-2 and 4-14 only";
      throw ConfigError(os.str());
    }
  }

  const auto before = snapshot_counters();
  const uint64_t start = cycle_;
  size_t next = 0;
  const size_t rate = cfg_.host_injection_rate == 0 ? SIZE_MAX : cfg_.host_injection_rate;

  while (true) {
    bool drained = next == script.size() && net_.drained();
    if (drained) {
      bool all_empty = true;
      for (const Tile& t : tiles_)
        if (!t.inq().empty()) all_empty = false;
      if (all_empty) break;
    }
    if (cycle_ - start >= cfg_.max_cycles) {
      std::ostringstream os;
      os << "load did not drain within " << cfg_.max_cycles << " cycles; "
         << (script.size() - next) << " messages not yet injected;";
      for (const StuckTileInfo& s : stuck_tiles())
        os << " tile(" << s.row << "," << s.col << ") inq=" << s.inq_size
           << " outq=" << s.outq_size << ";";
      throw LoadTimeoutError(os.str());
    }
    for (size_t k = 0; k < rate && next < script.size(); ++k)
      net_.host_inject(script[next++], cycle_);
    step_cycle();
    check_faults();
  }

  const uint64_t elapsed = cycle_ - start;
  load_cycles_ += elapsed;
  accumulate(load_acc_, before);
  return elapsed;
}

void Machine::start_tasks(std::span<const Trigger> triggers) {
  if (!quiescent()) throw SimError("start_tasks requires a quiescent machine");
  for (const Trigger& t : triggers) {
    if (t.lut_index >= kLutEntries) {
      throw FieldRangeError("trigger lut index must be below 16");
    }
    if (t.coord.row >= cfg_.grid_rows || t.coord.col >= cfg_.grid_cols) {
      throw ConfigError("trigger addressed outside the grid");
    }
    noc::Message m{noc::pack_metadata(t.coord.row, t.coord.col, noc::kStartTask,
                                      t.lut_index),
                   0};
    net_.host_inject(m, cycle_);
  }
}

Stats Machine::run_until_quiescent() {
  const auto before = snapshot_counters();
  const uint64_t start = cycle_;
  while (!quiescent()) {
    if (cycle_ - start >= cfg_.max_cycles) {
      auto stuck = stuck_tiles();
      std::ostringstream os;
      os << "no quiescence after " << cfg_.max_cycles << " cycles;";
      for (const StuckTileInfo& s : stuck)
        os << " tile(" << s.row << "," << s.col << ") " << mode_name(TileMode(s.mode))
           << " pc=0x" << std::hex << s.pc << std::dec << " inq=" << s.inq_size
           << " outq=" << s.outq_size << ";";
      os << " in_flight=" << net_.in_flight();
      throw DeadlockSuspectedError(os.str(), std::move(stuck));
    }
    step_cycle();
    check_faults();
  }
  exec_cycles_ += cycle_ - start;
  accumulate(exec_acc_, before);
  return stats();
}

std::vector<noc::Message> Machine::read_host_mailbox() {
  std::vector<noc::Message> out;
  out.swap(mailbox_);
  return out;
}

Stats Machine::stats() const {
  Stats s;
  s.per_tile.resize(tiles_.size());
  uint64_t busy_sum = 0, stall_sum = 0;
  for (size_t i = 0; i < tiles_.size(); ++i) {
    s.per_tile[i].row = tiles_[i].coord().row;
    s.per_tile[i].col = tiles_[i].coord().col;
    s.per_tile[i].counters = exec_acc_[i];
    if (exec_acc_[i].busy > 0) {
      busy_sum += exec_acc_[i].busy;
      stall_sum += exec_acc_[i].stall_send + exec_acc_[i].stall_recv;
    }
  }
  const noc::NetworkCounters& nc = net_.counters();
  s.messages_injected = nc.injected;
  s.messages_delivered = nc.delivered;
  s.host_mailbox_delivered = nc.host_delivered;
  s.total_hops = nc.total_hops;
  s.max_link_utilization = net_.max_link_utilization();
  s.load_cycles = load_cycles_;
  s.exec_cycles = exec_cycles_;
  s.total_cycles = exec_cycles_ + (cfg_.count_load_phase ? load_cycles_ : 0);
  s.host_injection_rate = cfg_.host_injection_rate;
  s.count_load_phase = cfg_.count_load_phase;
  s.compute_bound_ratio =
      (busy_sum + stall_sum) == 0 ? 0.0 : double(busy_sum) / double(busy_sum + stall_sum);
  return s;
}

nlohmann::ordered_json stats_to_json(const Stats& s) {
  nlohmann::ordered_json j;
  j["per_tile"] = nlohmann::ordered_json::array();
  for (const TilePhaseCounters& t : s.per_tile) {
    j["per_tile"].push_back({{"row", t.row},
                             {"col", t.col},
                             {"busy", t.counters.busy},
                             {"stall_send", t.counters.stall_send},
                             {"stall_recv", t.counters.stall_recv},
                             {"idle", t.counters.idle}});
  }
  j["network"] = {{"messages_injected", s.messages_injected},
                  {"messages_delivered", s.messages_delivered},
                  {"host_mailbox_delivered", s.host_mailbox_delivered},
                  {"total_hops", s.total_hops},
                  {"max_link_utilization", s.max_link_utilization}};
  j["phases"] = {{"load_cycles", s.load_cycles},
                 {"exec_cycles", s.exec_cycles},
                 {"total_cycles", s.total_cycles},
                 {"host_injection_rate", s.host_injection_rate},
                 {"count_load_phase", s.count_load_phase}};
  j["compute_bound_ratio"] = s.compute_bound_ratio;
  return j;
}

}  // namespace tilesim
