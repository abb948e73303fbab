#include <doctest.h>

#include "tilesim/assembler.hpp"
#include "tilesim/machine.hpp"

using namespace tilesim;
using noc::Coord;
using noc::Message;

namespace {

MachineConfig small_config(unsigned rows, unsigned cols, size_t depth = 16,
                           uint64_t watchdog = 200000) {
  MachineConfig cfg;
  cfg.grid_rows = rows;
  cfg.grid_cols = cols;
  cfg.fifo_depth = depth;
  cfg.max_cycles = watchdog;
  return cfg;
}

// Assembles a program at 0x10 and returns the load messages that place it
// (instruction words plus a lookup-table entry at index 0).
std::vector<Message> program_load(Coord c, const std::string& body) {
  auto segs = assembler::assemble(".org 0x10\n" + body);
  std::vector<Message> msgs;
  for (const auto& seg : segs) {
    for (size_t k = 0; k < seg.words.size(); ++k) {
      msgs.push_back({noc::pack_metadata(c.row, c.col, noc::kWriteInstr,
                                         unsigned(seg.base + 4 * k)),
                      seg.words[k]});
    }
  }
  msgs.push_back({noc::pack_metadata(c.row, c.col, noc::kWriteLut, 0), 0x10});
  return msgs;
}

void append(std::vector<Message>& into, std::vector<Message> more) {
  into.insert(into.end(), more.begin(), more.end());
}

}  // namespace

TEST_CASE("default build is a 16x16 grid of full tiles") {
  Machine m(MachineConfig{});
  CHECK(m.tile_count() == 256);
  CHECK(kImemSize == 64 * 1024);
  CHECK(kDmemSize == 64 * 1024);
  CHECK(kNumRegs == 32);
  CHECK(kLutEntries == 16);
  for (Coord c : {Coord{0, 0}, Coord{15, 15}}) {
    CHECK(m.tile(c).mode() == TileMode::kIdle);
    CHECK(m.tile(c).pc() == 0);
    CHECK(m.tile(c).inq().capacity() == 16);
  }
  CHECK(m.quiescent());
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(Machine(small_config(2, 2)));
  CHECK_THROWS_AS(Machine(small_config(64, 16)), ConfigError);
  CHECK_THROWS_AS(Machine(small_config(16, 64)), ConfigError);
  CHECK_THROWS_AS(Machine(small_config(0, 4)), ConfigError);
  MachineConfig cfg = small_config(2, 2);
  cfg.fifo_depth = 0;
  CHECK_THROWS_AS(Machine{cfg}, ConfigError);
}

TEST_CASE("load phase writes every tile and reports its cycles") {
  Machine m(small_config(2, 2));
  std::vector<Message> script;
  for (unsigned r = 0; r < 2; ++r)
    for (unsigned c = 0; c < 2; ++c)
      script.push_back({noc::pack_metadata(r, c, noc::kWriteInstr, 0x0100), 0x00500093});
  uint64_t cycles = m.load_phase(script);
  CHECK(cycles >= 2);
  for (unsigned r = 0; r < 2; ++r)
    for (unsigned c = 0; c < 2; ++c) CHECK(m.tile({r, c}).imem_word(0x0100) == 0x00500093);
  CHECK(m.quiescent());

  CHECK(m.load_phase({}) == 0);

  std::vector<Message> bad{{noc::pack_metadata(0, 0, noc::kStartTask, 0), 0}};
  CHECK_THROWS_AS(m.load_phase(bad), ConfigError);
}

TEST_CASE("triggers dispatch tasks that run and return to idle") {
  Machine m(small_config(2, 2));
  std::vector<Message> script = program_load({0, 0},
                                             "  addi x1, x0, 1\n"
                                             "  addi x2, x0, 2\n"
                                             "  ret\n");
  m.load_phase(script);

  std::vector<Trigger> triggers{{{0, 0}, 0}};
  m.start_tasks(triggers);
  Stats s = m.run_until_quiescent();
  CHECK(m.tile({0, 0}).mode() == TileMode::kIdle);
  CHECK(m.tile({0, 0}).pc() == 0);
  CHECK(m.tile({0, 0}).reg(1) == 1);
  CHECK(m.tile({0, 0}).reg(2) == 2);
  CHECK(s.per_tile[0].counters.busy == 3);

  std::vector<Trigger> bad{{{0, 0}, 16}};
  CHECK_THROWS_AS(m.start_tasks(bad), FieldRangeError);

  CHECK_NOTHROW(m.start_tasks({}));
  CHECK(m.run_until_quiescent().exec_cycles == s.exec_cycles);
}

TEST_CASE("all tiles of a grid can run tasks independently") {
  Machine m(small_config(2, 2));
  std::vector<Message> script;
  std::vector<Trigger> triggers;
  for (unsigned r = 0; r < 2; ++r) {
    for (unsigned c = 0; c < 2; ++c) {
      append(script, program_load({r, c}, "  addi x1, x0, 9\n  ret\n"));
      triggers.push_back({{r, c}, 0});
    }
  }
  m.load_phase(script);
  m.start_tasks(triggers);
  m.run_until_quiescent();
  for (unsigned r = 0; r < 2; ++r)
    for (unsigned c = 0; c < 2; ++c) CHECK(m.tile({r, c}).reg(1) == 9);
}

TEST_CASE("a quiet machine runs zero additional cycles") {
  Machine m(small_config(2, 2));
  Stats s = m.run_until_quiescent();
  CHECK(s.exec_cycles == 0);
}

TEST_CASE("send/recv pair moves one value and reaches quiescence") {
  Machine m(small_config(1, 2));
  std::vector<Message> script = program_load({0, 0},
                                             "  lui x2, 0x140\n"  // dest (0,1), type 4
                                             "  addi x3, x0, 7\n"
                                             "  send x2, x3\n"
                                             "  ret\n");
  append(script, program_load({0, 1},
                              "  recv x4\n"
                              "  lui x12, 0x10\n"
                              "  sw x5, 256(x12)\n"
                              "  ret\n"));
  m.load_phase(script);
  uint64_t injected_before = m.stats().messages_injected;
  std::vector<Trigger> triggers{{{0, 0}, 0}, {{0, 1}, 0}};
  m.start_tasks(triggers);
  Stats s = m.run_until_quiescent();
  CHECK(m.tile({0, 1}).dmem_word(0x100) == 7);
  // Two triggers plus exactly one data message.
  CHECK(s.messages_injected - injected_before == 3);
  CHECK(s.messages_injected == s.messages_delivered + s.host_mailbox_delivered);
}

TEST_CASE("a tile can message itself through the local port") {
  Machine m(small_config(2, 2));
  m.load_phase(program_load({0, 0},
                            "  lui x2, 0x40\n"  // dest (0,0), payload type
                            "  addi x3, x0, 99\n"
                            "  send x2, x3\n"
                            "  recv x4\n"
                            "  lui x12, 0x10\n"
                            "  sw x5, 0(x12)\n"
                            "  ret\n"));
  std::vector<Trigger> triggers{{{0, 0}, 0}};
  m.start_tasks(triggers);
  m.run_until_quiescent();
  CHECK(m.tile({0, 0}).dmem_word(0) == 99);
}

TEST_CASE("quiescence is stable under one more cycle") {
  Machine m(small_config(2, 2));
  m.load_phase(program_load({1, 1}, "  addi x1, x0, 3\n  ret\n"));
  std::vector<Trigger> triggers{{{1, 1}, 0}};
  m.start_tasks(triggers);
  m.run_until_quiescent();
  REQUIRE(m.quiescent());
  uint32_t before = m.tile({1, 1}).dmem_word(0);
  m.step_cycle();
  CHECK(m.quiescent());
  CHECK(m.tile({1, 1}).dmem_word(0) == before);
  CHECK(m.tile({1, 1}).reg(1) == 3);
}

TEST_CASE("circular recv wait trips the deadlock watchdog") {
  Machine m(small_config(1, 2, 16, 500));
  std::vector<Message> script = program_load({0, 0}, "  recv x4\n  send x4, x5\n  ret\n");
  append(script, program_load({0, 1}, "  recv x4\n  send x4, x5\n  ret\n"));
  m.load_phase(script);
  std::vector<Trigger> triggers{{{0, 0}, 0}, {{0, 1}, 0}};
  m.start_tasks(triggers);
  try {
    m.run_until_quiescent();
    FAIL("expected DeadlockSuspectedError");
  } catch (const DeadlockSuspectedError& e) {
    REQUIRE(e.stuck_tiles.size() == 2);
    for (const StuckTileInfo& s : e.stuck_tiles) {
      CHECK(TileMode(s.mode) == TileMode::kStallRecv);
    }
  }
}

TEST_CASE("tile faults surface as machine errors with coordinates") {
  Machine m(small_config(2, 2));
  m.load_phase(program_load({1, 0}, "  .word 0xffffffff\n"));
  std::vector<Trigger> triggers{{{1, 0}, 0}};
  m.start_tasks(triggers);
  try {
    m.run_until_quiescent();
    FAIL("expected TileFaultError");
  } catch (const TileFaultError& e) {
    CHECK(e.row == 1);
    CHECK(e.col == 0);
    CHECK(e.pc == 0x10);
  }
}

TEST_CASE("done messages land in the host mailbox in order") {
  Machine m(small_config(2, 2));
  std::vector<Message> script;
  std::vector<Trigger> triggers;
  for (unsigned r = 0; r < 2; ++r) {
    for (unsigned c = 0; c < 2; ++c) {
      // metadata (63,63,15,addr=0) = 0xffff0000
      append(script, program_load({r, c},
                                  "  lui x2, 0xffff0\n"
                                  "  addi x3, x0, " + std::to_string(r * 2 + c) + "\n"
                                  "  send x2, x3\n"
                                  "  ret\n"));
      triggers.push_back({{r, c}, 0});
    }
  }
  m.load_phase(script);
  CHECK(m.read_host_mailbox().empty());
  m.start_tasks(triggers);
  Stats s = m.run_until_quiescent();
  auto mail = m.read_host_mailbox();
  REQUIRE(mail.size() == 4);
  for (const Message& msg : mail) {
    CHECK(noc::unpack_metadata(msg.metadata).task_type == noc::kDone);
  }
  CHECK(s.host_mailbox_delivered == 4);
  CHECK(s.messages_injected == s.messages_delivered + s.host_mailbox_delivered);
  CHECK(m.read_host_mailbox().empty());  // drained
}

TEST_CASE("per-tile counters sum to the execution cycles") {
  Machine m(small_config(1, 2));
  std::vector<Message> script = program_load({0, 0},
                                             "  lui x2, 0x140\n"
                                             "  addi x3, x0, 1\n"
                                             "  send x2, x3\n"
                                             "  ret\n");
  append(script, program_load({0, 1}, "  recv x4\n  ret\n"));
  m.load_phase(script);
  std::vector<Trigger> triggers{{{0, 0}, 0}, {{0, 1}, 0}};
  m.start_tasks(triggers);
  Stats s = m.run_until_quiescent();
  for (const TilePhaseCounters& t : s.per_tile) {
    CHECK(t.counters.total() == s.exec_cycles);
  }
}

TEST_CASE("fifo depth changes timing but never values") {
  auto run_with_depth = [](size_t depth) {
    Machine m(small_config(1, 2, depth));
    std::string sender = "  lui x2, 0x140\n";
    for (int i = 1; i <= 5; ++i) {
      sender += "  addi x3, x0, " + std::to_string(i) + "\n  send x2, x3\n";
    }
    sender += "  ret\n";
    std::string receiver = "  addi x6, x0, 0\n";
    for (int i = 0; i < 5; ++i) receiver += "  recv x4\n  add x6, x6, x5\n";
    receiver += "  lui x12, 0x10\n  sw x6, 0(x12)\n  ret\n";
    std::vector<Message> script = program_load({0, 0}, sender);
    append(script, program_load({0, 1}, receiver));
    m.load_phase(script);
    std::vector<Trigger> triggers{{{0, 0}, 0}, {{0, 1}, 0}};
    m.start_tasks(triggers);
    m.run_until_quiescent();
    return m.tile({0, 1}).dmem_word(0);
  };
  CHECK(run_with_depth(1) == 15);
  CHECK(run_with_depth(2) == 15);
  CHECK(run_with_depth(16) == 15);
}

TEST_CASE("a throttled host injection rate slows loading, not results") {
  auto run_with_rate = [](size_t rate) {
    MachineConfig cfg = small_config(2, 2);
    cfg.host_injection_rate = rate;
    Machine m(cfg);
    std::vector<Message> script;
    for (int k = 0; k < 32; ++k)
      script.push_back({noc::pack_metadata(k % 2, (k / 2) % 2, noc::kWriteData,
                                           unsigned(4 * (k / 4))),
                        uint32_t(100 + k)});
    uint64_t cycles = m.load_phase(script);
    std::vector<uint32_t> words;
    for (int k = 0; k < 32; ++k)
      words.push_back(m.tile({unsigned(k % 2), unsigned((k / 2) % 2)}).dmem_word(4 * (k / 4)));
    return std::pair{cycles, words};
  };
  auto fast = run_with_rate(0);   // unlimited
  auto slow = run_with_rate(1);
  CHECK(slow.first > fast.first);
  CHECK(slow.second == fast.second);
}

TEST_CASE("triggers require a quiescent machine") {
  Machine m(small_config(2, 2));
  m.load_phase(program_load({0, 0}, "  recv x4\n  ret\n"));
  std::vector<Trigger> t{{{0, 0}, 0}};
  m.start_tasks(t);
  // The trigger is still in flight, so a second batch must be refused.
  CHECK_THROWS_AS(m.start_tasks(t), SimError);
}

TEST_CASE("count_load_phase folds loading into the reported total") {
  for (bool fold : {false, true}) {
    MachineConfig cfg = small_config(2, 2);
    cfg.count_load_phase = fold;
    Machine m(cfg);
    m.load_phase(program_load({0, 0}, "  addi x1, x0, 1\n  ret\n"));
    std::vector<Trigger> t{{{0, 0}, 0}};
    m.start_tasks(t);
    Stats s = m.run_until_quiescent();
    CHECK(s.load_cycles > 0);
    CHECK(s.total_cycles == s.exec_cycles + (fold ? s.load_cycles : 0));
  }
}

TEST_CASE("load phase times out under an impossible watchdog") {
  Machine m(small_config(2, 2, 16, 3));
  std::vector<Message> script;
  for (int k = 0; k < 64; ++k)
    script.push_back({noc::pack_metadata(1, 1, noc::kWriteData, unsigned(4 * k)), 1u});
  CHECK_THROWS_AS(m.load_phase(script), LoadTimeoutError);
}

TEST_CASE("identical configurations produce byte-identical stats") {
  auto run_once = [] {
    Machine m(small_config(2, 2));
    std::vector<Message> script = program_load({0, 0},
                                               "  lui x2, 0x140\n"  // to (0,1)
                                               "  addi x3, x0, 3\n"
                                               "  send x2, x3\n"
                                               "  ret\n");
    append(script, program_load({0, 1}, "  recv x4\n  ret\n"));
    m.load_phase(script);
    std::vector<Trigger> triggers{{{0, 0}, 0}, {{0, 1}, 0}};
    m.start_tasks(triggers);
    Stats s = m.run_until_quiescent();
    return stats_to_json(s).dump(2);
  };
  std::string a = run_once();
  std::string b = run_once();
  CHECK(a == b);
}
