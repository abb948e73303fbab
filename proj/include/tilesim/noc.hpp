#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "tilesim/errors.hpp"

namespace tilesim::noc {

// 4-bit task type field of a message. 0-3 get system handling by an idle
// tile, 4-14 are application payloads, 15 reports task completion.
enum TaskType : uint8_t {
  kWriteInstr = 0,
  kWriteData = 1,
  kWriteLut = 2,
  kStartTask = 3,
  kDataX = 4,  // first application type; kernels ship x/b values with it
  kDone = 15,
};

struct Metadata {
  uint8_t row = 0;   // 6 bits
  uint8_t col = 0;   // 6 bits
  uint8_t task_type = 0;  // 4 bits
  uint16_t addr = 0;
  bool operator==(const Metadata&) const = default;
};

// Packed layout: bits[31:26]=row, [25:20]=col, [19:16]=task type, [15:0]=addr.
uint32_t pack_metadata(unsigned row, unsigned col, unsigned task_type, unsigned addr);
Metadata unpack_metadata(uint32_t word);

// One 64-bit packet: packed metadata word plus one data word.
struct Message {
  uint32_t metadata = 0;
  uint32_t data = 0;
  bool operator==(const Message&) const = default;
};

struct Coord {
  unsigned row = 0;
  unsigned col = 0;
  bool operator==(const Coord&) const = default;
};

// Messages addressed here leave the grid for the host mailbox, and host
// writes enter the grid from here. Grids are capped at 63x63 so the
// coordinate can never name a real tile.
constexpr Coord kHostCoord{63, 63};

enum class Direction : uint8_t { kEast, kWest, kNorth, kSouth, kLocal };

// Dimension-ordered torus routing: fix the column first, then the row.
// Within a ring the shorter way wins; an exact tie goes the positive
// (increasing-index, wrapping) way. kLocal iff cur == dst.
Direction route_next_hop(Coord cur, Coord dst, unsigned grid_rows, unsigned grid_cols);

// Bounded message queue. Tiles own one for input and one for output.
class Fifo {
 public:
  explicit Fifo(size_t capacity = 16) : cap_(capacity) {}

  bool empty() const { return q_.empty(); }
  bool full() const { return q_.size() >= cap_; }
  size_t size() const { return q_.size(); }
  size_t capacity() const { return cap_; }

  bool push(const Message& m) {
    if (full()) return false;
    q_.push_back(m);
    return true;
  }

  Message pop() {
    Message m = q_.front();
    q_.pop_front();
    return m;
  }

  const Message& front() const { return q_.front(); }

 private:
  size_t cap_;
  std::deque<Message> q_;
};

// The network's per-tile attachment points.
struct TilePorts {
  Fifo* outq = nullptr;
  Fifo* inq = nullptr;
};

struct NetworkCounters {
  uint64_t injected = 0;        // accepted from a tile outq or the host
  uint64_t delivered = 0;       // pushed into a tile input queue
  uint64_t host_delivered = 0;  // pushed into the host mailbox
  uint64_t total_hops = 0;      // grid link traversals (host paths excluded)
};

// 2D-torus interconnect. Tile queues are bounded; router-side queues (the
// per-link transit queues and each destination's ingress queue) are not,
// so congestion shows up as growing in-flight occupancy rather than as
// cyclic waits between routers (the torus has no virtual channels).
// Link bandwidth stays one message per cycle.
//
// Timing: one hop per cycle, and the final hop lands directly in the
// destination input queue, so a self-send or a one-hop message is visible
// after one network cycle. When the input queue is full the message waits
// in that tile's ingress queue and moves over as space frees, one per
// cycle, ahead of any newer arrivals. Host-bound traffic is modeled as
// leaving via the nearest grid edge: delivery hops_to_edge + 1 cycles
// after injection.
class Network {
 public:
  Network(unsigned rows, unsigned cols, size_t fifo_depth);

  // Advances one cycle: routers first (round-robin per output port,
  // decisions taken against the start-of-cycle queue snapshot, moves
  // applied together), then due host ingress/egress deliveries.
  void step(std::vector<TilePorts>& tiles, std::vector<Message>& host_mailbox,
            uint64_t cycle);

  // Queues a host-to-tile message (destination in the packed metadata).
  void host_inject(const Message& m, uint64_t cycle);

  bool drained() const;       // no messages in links or host paths
  uint64_t in_flight() const;
  const NetworkCounters& counters() const { return counters_; }
  double max_link_utilization() const;
  uint64_t cycles_stepped() const { return cycles_stepped_; }

  unsigned rows() const { return rows_; }
  unsigned cols() const { return cols_; }
  unsigned hops_to_edge(Coord c) const;

 private:
  // Router input sources, in arbitration order.
  enum Source : uint8_t { kInject = 0, kFromEast, kFromWest, kFromNorth, kFromSouth };
  // Output ports: the four link directions plus local delivery and the
  // off-grid host port.
  enum Port : uint8_t { kPortEast = 0, kPortWest, kPortNorth, kPortSouth, kPortLocal, kPortHost, kNumPorts };

  struct Router {
    std::array<std::deque<Message>, 4> in;  // indexed by Source-1
    std::array<uint8_t, kNumPorts> last_grant{};  // round-robin cursors
  };

  struct HostBound {
    uint64_t due;
    uint64_t seq;
    Message msg;
  };

  size_t index(Coord c) const { return size_t(c.row) * cols_ + c.col; }
  Coord neighbor(Coord c, Port p) const;

  unsigned rows_, cols_;
  size_t fifo_depth_;
  std::vector<Router> routers_;
  std::vector<std::deque<Message>> local_pending_;  // arrivals awaiting inq space
  std::vector<std::deque<HostBound>> ingress_;  // per destination tile, FIFO
  std::vector<HostBound> egress_;               // tile -> host mailbox
  std::vector<uint64_t> link_traversals_;       // [tile][port 0..3]
  NetworkCounters counters_;
  uint64_t cycles_stepped_ = 0;
  uint64_t seq_ = 0;
};

}  // namespace tilesim::noc
