#include "tilesim/noc.hpp"

#include <algorithm>
#include <sstream>

namespace tilesim::noc {

uint32_t pack_metadata(unsigned row, unsigned col, unsigned task_type, unsigned addr) {
  if (row > 63) throw FieldRangeError("metadata row exceeds 6 bits");
  if (col > 63) throw FieldRangeError("metadata col exceeds 6 bits");
  if (task_type > 15) throw FieldRangeError("metadata task type exceeds 4 bits");
  if (addr > 0xFFFF) throw FieldRangeError("metadata addr exceeds 16 bits");
  return (row << 26) | (col << 20) | (task_type << 16) | addr;
}

Metadata unpack_metadata(uint32_t word) {
  Metadata m;
  m.row = static_cast<uint8_t>(word >> 26);
  m.col = static_cast<uint8_t>((word >> 20) & 0x3F);
  m.task_type = static_cast<uint8_t>((word >> 16) & 0xF);
  m.addr = static_cast<uint16_t>(word & 0xFFFF);
  return m;
}

Direction route_next_hop(Coord cur, Coord dst, unsigned grid_rows, unsigned grid_cols) {
  if (cur.row >= grid_rows || cur.col >= grid_cols || dst.row >= grid_rows ||
      dst.col >= grid_cols) {
    throw FieldRangeError("route_next_hop: coordinate outside grid");
  }
  if (cur == dst) return Direction::kLocal;
  if (cur.col != dst.col) {
    unsigned fwd = (dst.col + grid_cols - cur.col) % grid_cols;
    unsigned bwd = grid_cols - fwd;
    return fwd <= bwd ? Direction::kEast : Direction::kWest;
  }
  unsigned fwd = (dst.row + grid_rows - cur.row) % grid_rows;
  unsigned bwd = grid_rows - fwd;
  return fwd <= bwd ? Direction::kSouth : Direction::kNorth;
}

Network::Network(unsigned rows, unsigned cols, size_t fifo_depth)
    : rows_(rows),
      cols_(cols),
      fifo_depth_(fifo_depth),
      routers_(size_t(rows) * cols),
      local_pending_(size_t(rows) * cols),
      ingress_(size_t(rows) * cols),
      link_traversals_(size_t(rows) * cols * 4, 0) {}

Coord Network::neighbor(Coord c, Port p) const {
  switch (p) {
    case kPortEast: return {c.row, (c.col + 1) % cols_};
    case kPortWest: return {c.row, (c.col + cols_ - 1) % cols_};
    case kPortNorth: return {(c.row + rows_ - 1) % rows_, c.col};
    case kPortSouth: return {(c.row + 1) % rows_, c.col};
    default: return c;
  }
}

unsigned Network::hops_to_edge(Coord c) const {
  return std::min(std::min(c.row, rows_ - 1 - c.row), std::min(c.col, cols_ - 1 - c.col));
}

void Network::host_inject(const Message& m, uint64_t cycle) {
  Metadata md = unpack_metadata(m.metadata);
  if (md.row >= rows_ || md.col >= cols_) {
    std::ostringstream os;
    os << "host message addressed outside the grid: (" << unsigned(md.row) << ","
       << unsigned(md.col) << ")";
    throw SimError(os.str());
  }
  Coord dst{md.row, md.col};
  ingress_[index(dst)].push_back({cycle + hops_to_edge(dst) + 1, seq_++, m});
  counters_.injected++;
}

uint64_t Network::in_flight() const {
  uint64_t n = egress_.size();
  for (const auto& r : routers_)
    for (const auto& q : r.in) n += q.size();
  for (const auto& q : local_pending_) n += q.size();
  for (const auto& q : ingress_) n += q.size();
  return n;
}

bool Network::drained() const { return in_flight() == 0; }

double Network::max_link_utilization() const {
  if (cycles_stepped_ == 0) return 0.0;
  uint64_t peak = 0;
  for (uint64_t t : link_traversals_) peak = std::max(peak, t);
  return double(peak) / double(cycles_stepped_);
}

void Network::step(std::vector<TilePorts>& tiles, std::vector<Message>& host_mailbox,
                   uint64_t cycle) {
  cycles_stepped_++;

  struct Move {
    size_t tile;     // router making the move
    int source;      // Source index (kInject..kFromSouth)
    Port port;
    bool final_hop;  // lands in an input queue rather than a transit queue
    Coord target;    // neighbor / self for final hops
  };
  std::vector<Move> moves;
  // A source queue gives up at most one head per cycle.
  std::vector<std::array<bool, 5>> consumed(routers_.size());
  for (auto& c : consumed) c.fill(false);

  auto head_of = [&](size_t t, int source) -> const Message* {
    if (source == kInject) {
      Fifo* out = tiles[t].outq;
      return (out && !out->empty()) ? &out->front() : nullptr;
    }
    const auto& q = routers_[t].in[source - 1];
    return q.empty() ? nullptr : &q.front();
  };

  // Deliver into the input queue when it has room and no older arrival is
  // still waiting; otherwise the message joins the tile's ingress queue.
  auto deliver = [&](size_t t, const Message& m) {
    if (local_pending_[t].empty() && tiles[t].inq->push(m)) {
      counters_.delivered++;
    } else {
      local_pending_[t].push_back(m);
    }
  };

  // Waiting arrivals move over first, one per tile per cycle.
  for (size_t t = 0; t < local_pending_.size(); ++t) {
    if (!local_pending_[t].empty() && tiles[t].inq->push(local_pending_[t].front())) {
      local_pending_[t].pop_front();
      counters_.delivered++;
    }
  }

  for (size_t t = 0; t < routers_.size(); ++t) {
    Coord here{unsigned(t / cols_), unsigned(t % cols_)};
    for (int port = 0; port < kNumPorts; ++port) {
      uint8_t& cursor = routers_[t].last_grant[port];
      for (int k = 1; k <= 5; ++k) {
        int source = (cursor + k) % 5;
        if (consumed[t][source]) continue;
        const Message* head = head_of(t, source);
        if (!head) continue;

        Metadata md = unpack_metadata(head->metadata);
        Port want = kPortHost;
        bool final_hop = false;
        Coord target{};
        if (md.row == kHostCoord.row && md.col == kHostCoord.col) {
          want = kPortHost;
        } else if (md.row >= rows_ || md.col >= cols_) {
          std::ostringstream os;
          os << "message addressed outside the grid: (" << unsigned(md.row) << ","
             << unsigned(md.col) << ") from tile (" << here.row << "," << here.col << ")";
          throw SimError(os.str());
        } else {
          Coord dst{md.row, md.col};
          switch (route_next_hop(here, dst, rows_, cols_)) {
            case Direction::kLocal: want = kPortLocal; target = here; final_hop = true; break;
            case Direction::kEast: want = kPortEast; break;
            case Direction::kWest: want = kPortWest; break;
            case Direction::kNorth: want = kPortNorth; break;
            case Direction::kSouth: want = kPortSouth; break;
          }
          if (want != kPortLocal) {
            target = neighbor(here, Port(want));
            final_hop = (target == dst);
          }
        }
        if (int(want) != port) continue;

        moves.push_back({t, source, Port(port), final_hop, target});
        consumed[t][source] = true;
        cursor = uint8_t(source);
        break;
      }
    }
  }

  // Apply the granted moves together, so every decision above was taken
  // against the same start-of-cycle snapshot.
  for (const Move& mv : moves) {
    Message m;
    if (mv.source == kInject) {
      m = tiles[mv.tile].outq->pop();
      counters_.injected++;
    } else {
      auto& q = routers_[mv.tile].in[mv.source - 1];
      m = q.front();
      q.pop_front();
    }
    switch (mv.port) {
      case kPortLocal:
        deliver(mv.tile, m);
        break;
      case kPortHost: {
        Coord here{unsigned(mv.tile / cols_), unsigned(mv.tile % cols_)};
        egress_.push_back({cycle + hops_to_edge(here) + 1, seq_++, m});
        break;
      }
      default: {
        counters_.total_hops++;
        link_traversals_[mv.tile * 4 + mv.port]++;
        size_t nt = index(mv.target);
        if (mv.final_hop) {
          deliver(nt, m);
        } else {
          // Arriving eastbound means entering the neighbor's west input.
          static constexpr int kOppositeSource[4] = {kFromWest, kFromEast, kFromSouth,
                                                     kFromNorth};
          routers_[nt].in[kOppositeSource[mv.port] - 1].push_back(m);
        }
        break;
      }
    }
  }

  // Host ingress: one delivery attempt per destination tile per cycle,
  // in arrival order, retried while the input queue is full.
  for (size_t t = 0; t < ingress_.size(); ++t) {
    auto& q = ingress_[t];
    if (q.empty() || q.front().due > cycle) continue;
    if (!tiles[t].inq->push(q.front().msg)) continue;
    q.pop_front();
    counters_.delivered++;
  }

  // Host egress: everything due this cycle lands in the mailbox in
  // injection order.
  if (!egress_.empty()) {
    std::stable_sort(egress_.begin(), egress_.end(),
                     [](const HostBound& a, const HostBound& b) {
                       return a.due != b.due ? a.due < b.due : a.seq < b.seq;
                     });
    size_t n = 0;
    while (n < egress_.size() && egress_[n].due <= cycle) {
      host_mailbox.push_back(egress_[n].msg);
      counters_.host_delivered++;
      n++;
    }
    egress_.erase(egress_.begin(), egress_.begin() + n);
  }
}

}  // namespace tilesim::noc
