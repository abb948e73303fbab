// Command-line harness: loads matrices, builds machines, runs kernels or
// raw per-tile programs, and writes JSON reports with oracle comparisons
// and cycle statistics.

#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tilesim/assembler.hpp"
#include "tilesim/kernels.hpp"
#include "tilesim/machine.hpp"
#include "tilesim/oracle.hpp"
#include "tilesim/sparse.hpp"

using ordered_json = nlohmann::ordered_json;
using namespace tilesim;

namespace {

constexpr int kSchemaVersion = 1;

struct CommonOpts {
  std::string grid = "2x2";
  size_t fifo_depth = 16;
  uint64_t max_cycles = 50'000'000;
  std::string matrix_path;
  std::string vector_spec = "ones";
  std::string oracle_mode = "same-order";
  std::string out_path;
  unsigned repeat = 1;
};

MachineConfig machine_config(const CommonOpts& o) {
  MachineConfig cfg;
  unsigned rows = 0, cols = 0;
  char x = 0;
  std::istringstream is(o.grid);
  if (!(is >> rows >> x >> cols) || (x != 'x' && x != 'X') || is.peek() != EOF) {
    throw ConfigError("--grid expects ROWSxCOLS, e.g. 4x4");
  }
  cfg.grid_rows = rows;
  cfg.grid_cols = cols;
  cfg.fifo_depth = o.fifo_depth;
  cfg.max_cycles = o.max_cycles;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool with_matrix = true) {
  cmd->add_option("--grid", o.grid, "Grid shape ROWSxCOLS (default 2x2)");
  cmd->add_option("--fifo-depth", o.fifo_depth, "Tile queue depth (default 16)");
  cmd->add_option("--max-cycles", o.max_cycles, "Watchdog cycle budget");
  cmd->add_option("--out", o.out_path, "Write the JSON report here (default stdout)");
  if (with_matrix) {
    cmd->add_option("--matrix", o.matrix_path, "Matrix Market file")->required();
    cmd->add_option("--vector", o.vector_spec, "ones | random:SEED | PATH (default ones)");
    cmd->add_option("--oracle", o.oracle_mode, "same-order | f64 (default same-order)");
    cmd->add_option("--repeat", o.repeat, "Run the kernel this many times (default 1)");
  }
}

// Deterministic values on a 2^-23 lattice in [-1, 1); identical across
// platforms for a given seed.
std::vector<float> seeded_vector(size_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<float> v(n);
  for (float& f : v) f = float(int32_t(rng() & 0xFFFFFFu) - 0x800000) / float(0x800000);
  return v;
}

std::vector<float> load_vector(const std::string& source, size_t n) {
  if (source == "ones") return std::vector<float>(n, 1.0f);
  if (source.rfind("random:", 0) == 0) {
    return seeded_vector(n, uint32_t(std::stoul(source.substr(7))));
  }
  std::ifstream f(source);
  if (!f) throw SimError("cannot open vector file: " + source);
  std::vector<float> v;
  double x;
  while (f >> x) v.push_back(float(x));
  if (v.size() != n) {
    std::ostringstream os;
    os << "vector file holds " << v.size() << " values, matrix needs " << n;
    throw DimensionMismatchError(os.str());
  }
  return v;
}

ordered_json comparison_json(const oracle::ComparisonReport& r) {
  return {{"bitwise_equal", r.bitwise_equal},
          {"max_abs_diff", r.max_abs_diff},
          {"max_rel_diff", r.max_rel_diff},
          {"rel_inf_norm", r.rel_inf_norm},
          {"worst_index", r.worst_index}};
}

ordered_json audit_json(const kernels::LoadAudit& a) {
  return {{"write_instr", a.write_instr},
          {"write_lut", a.write_lut},
          {"matrix_words", a.matrix_words},
          {"vector_words", a.vector_words},
          {"total", a.total()}};
}

ordered_json config_json(const CommonOpts& o, const MachineConfig& cfg) {
  return {{"grid_rows", cfg.grid_rows},
          {"grid_cols", cfg.grid_cols},
          {"fifo_depth", cfg.fifo_depth},
          {"max_cycles", cfg.max_cycles},
          {"matrix", o.matrix_path},
          {"vector", o.vector_spec},
          {"oracle", o.oracle_mode},
          {"repeat", o.repeat}};
}

void emit(const ordered_json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw SimError("cannot open output file: " + out_path);
    f << report.dump(2) << "\n";
  }
}

bool comparison_passes(const std::string& mode, const oracle::ComparisonReport& r) {
  return mode == "same-order" ? r.bitwise_equal : r.rel_inf_norm <= 1e-5;
}

sparse::CsrMatrix load_matrix(const std::string& path) {
  return sparse::coo_to_csr(sparse::parse_matrix_market_file(path));
}

int run_kernel_command(const CommonOpts& o, bool triangular) {
  if (o.oracle_mode != "same-order" && o.oracle_mode != "f64")
    throw ConfigError("--oracle must be same-order or f64");
  MachineConfig cfg = machine_config(o);
  sparse::CsrMatrix m = load_matrix(o.matrix_path);
  std::vector<float> v =
      load_vector(o.vector_spec, triangular ? m.n_rows : m.n_cols);

  kernels::Device dev(cfg);
  kernels::KernelResult res;
  ordered_json audits = ordered_json::array();
  for (unsigned k = 0; k < std::max(1u, o.repeat); ++k) {
    res = triangular ? dev.run_sptrsv(m, v) : dev.run_spmv(m, v);
    audits.push_back(audit_json(res.load_audit));
  }

  std::vector<float> ref =
      triangular ? oracle::sptrsv_ref(m, v, oracle::Mode::kBinary32SameOrder)
                 : oracle::spmv_ref(m, v, oracle::Mode::kBinary32SameOrder);
  std::vector<float> ref64 = triangular
                                 ? oracle::sptrsv_ref(m, v, oracle::Mode::kFloat64)
                                 : oracle::spmv_ref(m, v, oracle::Mode::kFloat64);
  oracle::ComparisonReport same =
      oracle::compare(std::span<const float>(res.output), ref);
  oracle::ComparisonReport wide =
      oracle::compare(std::span<const float>(res.output), ref64);
  const oracle::ComparisonReport& bar = o.oracle_mode == "same-order" ? same : wide;
  bool passed = comparison_passes(o.oracle_mode, bar);

  ordered_json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = triangular ? "run-sptrsv" : "run-spmv";
  report["config"] = config_json(o, cfg);
  report["result"] = {{"output", res.output},
                      {"done_messages", res.done_messages},
                      {"load_cycles", res.load_cycles},
                      {"exec_cycles", res.exec_cycles},
                      {"exec_messages", res.exec_messages}};
  report["comparison"] = {{"same_order", comparison_json(same)},
                          {"f64", comparison_json(wide)},
                          {"bar", o.oracle_mode},
                          {"passed", passed}};
  report["load_audit"] = audits;
  report["stats"] = stats_to_json(res.stats);
  emit(report, o.out_path);
  return passed ? 0 : 1;
}

int run_pcg_command(const CommonOpts& o, double tol, unsigned max_iters,
                    const std::string& precond) {
  MachineConfig cfg = machine_config(o);
  sparse::CsrMatrix m = load_matrix(o.matrix_path);
  std::vector<float> v32 = load_vector(o.vector_spec, m.n_rows);
  std::vector<double> b(v32.begin(), v32.end());

  kernels::PcgOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;
  if (precond == "none") {
    opts.precond = kernels::Precond::kNone;
  } else if (precond == "jacobi") {
    opts.precond = kernels::Precond::kJacobi;
  } else {
    throw ConfigError("--precond must be none or jacobi");
  }

  kernels::Device dev(cfg);
  kernels::PcgResult res = kernels::run_pcg(dev, m, b, opts);

  std::vector<double> exact = oracle::direct_solve_ref(oracle::dense_from_csr(m), b);
  oracle::ComparisonReport cmp =
      oracle::compare(std::span<const double>(res.x), exact);
  bool passed = res.converged && cmp.rel_inf_norm <= 1e-5;

  ordered_json audits = ordered_json::array();
  for (const kernels::LoadAudit& a : dev.audit_history()) audits.push_back(audit_json(a));

  ordered_json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = "run-pcg";
  report["config"] = config_json(o, cfg);
  report["config"]["tol"] = tol;
  report["config"]["max_iters"] = max_iters;
  report["config"]["precond"] = precond;
  report["result"] = {{"x", res.x},
                      {"converged", res.converged},
                      {"iterations", res.iterations},
                      {"residual_history", res.residual_history}};
  report["comparison"] = {{"direct_solve", comparison_json(cmp)}, {"passed", passed}};
  report["load_audit"] = audits;
  report["stats"] = stats_to_json(res.stats);
  emit(report, o.out_path);
  return passed ? 0 : 1;
}

std::vector<noc::Message> parse_load_script(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SimError("cannot open load script: " + path);
  std::vector<noc::Message> script;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream is(line);
    std::string row, col, type, addr, data;
    if (!(is >> row)) continue;  // blank
    if (!(is >> col >> type >> addr >> data)) {
      std::ostringstream os;
      os << path << ":" << lineno << ": expected 'ROW COL TYPE ADDR DATA' in hex";
      throw SimError(os.str());
    }
    auto hex = [&](const std::string& s) { return uint32_t(std::stoul(s, nullptr, 16)); };
    script.push_back({noc::pack_metadata(hex(row), hex(col), hex(type), hex(addr)),
                      hex(data)});
  }
  return script;
}

struct TileProgramArg {
  unsigned row, col;
  std::string path;
};
struct TriggerArg {
  unsigned row, col, index;
};
struct DumpArg {
  unsigned row, col;
  uint32_t addr, words;
};

int run_program_command(const CommonOpts& o, const std::vector<std::string>& programs,
                        const std::string& script_path,
                        const std::vector<std::string>& trigger_args,
                        const std::vector<std::string>& dump_args) {
  MachineConfig cfg = machine_config(o);
  Machine machine(cfg);

  auto split_fields = [](const std::string& s, size_t n, const char* what) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    if (parts.size() != n) {
      std::ostringstream os;
      os << what << " expects " << n << " comma-separated fields, got '" << s << "'";
      throw ConfigError(os.str());
    }
    return parts;
  };

  std::vector<noc::Message> script;
  for (const std::string& p : programs) {
    auto parts = split_fields(p, 3, "--program");
    unsigned row = unsigned(std::stoul(parts[0]));
    unsigned col = unsigned(std::stoul(parts[1]));
    std::ifstream f(parts[2]);
    if (!f) throw SimError("cannot open program: " + parts[2]);
    std::ostringstream text;
    text << f.rdbuf();
    auto segs = assembler::assemble(text.str());
    for (const auto& seg : segs) {
      for (size_t k = 0; k < seg.words.size(); ++k) {
        script.push_back({noc::pack_metadata(row, col, noc::kWriteInstr,
                                             unsigned(seg.base + 4 * k)),
                          seg.words[k]});
      }
    }
    // The task entry is the first segment's base, registered at LUT 0.
    uint32_t entry = segs.empty() ? 0 : segs.front().base;
    script.push_back({noc::pack_metadata(row, col, noc::kWriteLut, 0), entry});
  }
  if (!script_path.empty()) {
    auto extra = parse_load_script(script_path);
    script.insert(script.end(), extra.begin(), extra.end());
  }

  std::vector<Trigger> triggers;
  for (const std::string& t : trigger_args) {
    auto parts = split_fields(t, 3, "--trigger");
    triggers.push_back({{unsigned(std::stoul(parts[0])), unsigned(std::stoul(parts[1]))},
                        unsigned(std::stoul(parts[2]))});
  }

  ordered_json report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = "run-program";
  report["config"] = {{"grid_rows", cfg.grid_rows},
                      {"grid_cols", cfg.grid_cols},
                      {"fifo_depth", cfg.fifo_depth},
                      {"max_cycles", cfg.max_cycles}};

  std::string status = "ok";
  std::string diagnostic;
  uint64_t load_cycles = 0;
  try {
    load_cycles = machine.load_phase(script);
    machine.start_tasks(triggers);
    machine.run_until_quiescent();
  } catch (const DeadlockSuspectedError& e) {
    status = "deadlock-suspected";
    diagnostic = e.what();
  } catch (const TileFaultError& e) {
    status = "tile-fault";
    diagnostic = e.what();
  }

  ordered_json mailbox = ordered_json::array();
  for (const noc::Message& m : machine.read_host_mailbox()) {
    noc::Metadata md = noc::unpack_metadata(m.metadata);
    mailbox.push_back({{"row", md.row},
                       {"col", md.col},
                       {"task_type", md.task_type},
                       {"addr", md.addr},
                       {"data", m.data}});
  }
  ordered_json dumps = ordered_json::array();
  for (const std::string& d : dump_args) {
    auto parts = split_fields(d, 4, "--dump");
    unsigned row = unsigned(std::stoul(parts[0]));
    unsigned col = unsigned(std::stoul(parts[1]));
    uint32_t addr = uint32_t(std::stoul(parts[2], nullptr, 0));
    uint32_t words = uint32_t(std::stoul(parts[3], nullptr, 0));
    if (row >= cfg.grid_rows || col >= cfg.grid_cols)
      throw ConfigError("--dump tile outside the grid: " + d);
    if ((addr & 3) || uint64_t(addr) + 4ull * words > kDmemSize)
      throw ConfigError("--dump range must be word-aligned inside the 64 KB data "
                        "region: " + d);
    ordered_json values = ordered_json::array();
    for (uint32_t k = 0; k < words; ++k) {
      values.push_back(machine.tile({row, col}).dmem_word(addr + 4 * k));
    }
    dumps.push_back({{"row", row}, {"col", col}, {"addr", addr}, {"words", values}});
  }

  report["result"] = {{"status", status},
                      {"diagnostic", diagnostic},
                      {"load_cycles", load_cycles},
                      {"mailbox", mailbox},
                      {"dumps", dumps}};
  report["stats"] = stats_to_json(machine.stats());
  emit(report, o.out_path);
  return status == "ok" ? 0 : 1;
}

int stats_command(const std::string& report_path, double clock_ghz) {
  std::ifstream f(report_path);
  if (!f) throw SimError("cannot open report: " + report_path);
  ordered_json report = ordered_json::parse(f, nullptr, true);
  if (!report.contains("stats")) throw SimError("report has no stats section");
  const auto& s = report["stats"];

  uint64_t load = s["phases"]["load_cycles"];
  uint64_t exec = s["phases"]["exec_cycles"];
  uint64_t total = s["phases"]["total_cycles"];
  std::cout << "phases: load=" << load << " exec=" << exec << " total=" << total << "\n";
  const auto& net = s["network"];
  std::cout << "network: injected=" << net["messages_injected"]
            << " delivered=" << net["messages_delivered"]
            << " mailbox=" << net["host_mailbox_delivered"]
            << " hops=" << net["total_hops"]
            << " max_link_utilization=" << net["max_link_utilization"] << "\n";

  uint64_t busy = 0, stall = 0, idle = 0;
  size_t active = 0;
  for (const auto& t : s["per_tile"]) {
    uint64_t tb = t["busy"];
    if (tb > 0) {
      busy += tb;
      stall += uint64_t(t["stall_send"]) + uint64_t(t["stall_recv"]);
      active++;
    }
    idle += uint64_t(t["idle"]);
  }
  double ratio = (busy + stall) == 0 ? 0.0 : double(busy) / double(busy + stall);
  std::cout << "tiles: " << s["per_tile"].size() << " (" << active << " active)\n";
  std::cout << "aggregate: busy=" << busy << " stalled=" << stall << " idle=" << idle
            << "\n";
  std::cout << "compute_bound_ratio: " << ratio << "\n";
  double reported = s["compute_bound_ratio"];
  if (std::fabs(reported - ratio) > 1e-12) {
    std::cerr << "warning: report carries ratio " << reported << "\n";
  }
  if (s["per_tile"].size() <= 64) {
    for (const auto& t : s["per_tile"]) {
      std::cout << "  tile(" << t["row"] << "," << t["col"] << ") busy=" << t["busy"]
                << " stall_send=" << t["stall_send"] << " stall_recv=" << t["stall_recv"]
                << " idle=" << t["idle"] << "\n";
    }
  }
  if (clock_ghz > 0.0) {
    std::cout << "at " << clock_ghz << " GHz: exec=" << double(exec) / (clock_ghz * 1e9)
              << " s, total=" << double(total) / (clock_ghz * 1e9) << " s\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cycle-level simulator of a tiled SRAM spatial accelerator"};
  app.require_subcommand(1);

  CommonOpts spmv_opts, sptrsv_opts, pcg_opts, prog_opts;
  double tol = 1e-6;
  unsigned max_iters = 1000;
  std::string precond = "jacobi";
  std::vector<std::string> programs, trigger_args, dump_args;
  std::string script_path;
  std::string report_path;
  double clock_ghz = 0.0;

  CLI::App* spmv = app.add_subcommand("run-spmv", "Sparse matrix-vector product");
  add_common(spmv, spmv_opts);

  CLI::App* sptrsv = app.add_subcommand("run-sptrsv", "Lower-triangular solve");
  add_common(sptrsv, sptrsv_opts);

  CLI::App* pcg = app.add_subcommand("run-pcg", "Conjugate gradient solve");
  add_common(pcg, pcg_opts);
  pcg->add_option("--tol", tol, "Relative residual target (default 1e-6)");
  pcg->add_option("--max-iters", max_iters, "Iteration cap (default 1000)");
  pcg->add_option("--precond", precond, "none | jacobi (default jacobi)");

  CLI::App* prog = app.add_subcommand("run-program", "Run hand-written tile programs");
  add_common(prog, prog_opts, false);
  prog->add_option("--program", programs, "ROW,COL,PATH assembly placement (repeatable)");
  prog->add_option("--load-script", script_path, "Extra messages: 'ROW COL TYPE ADDR DATA' hex lines");
  prog->add_option("--trigger", trigger_args, "ROW,COL,LUTIDX task trigger (repeatable)");
  prog->add_option("--dump", dump_args, "ROW,COL,ADDR,NWORDS data dump (repeatable)");

  CLI::App* stats = app.add_subcommand("stats", "Summarize a JSON report");
  stats->add_option("report", report_path, "Report file")->required();
  stats->add_option("--clock-ghz", clock_ghz, "Also print wall-clock at this frequency");

  CLI11_PARSE(app, argc, argv);

  try {
    if (spmv->parsed()) return run_kernel_command(spmv_opts, false);
    if (sptrsv->parsed()) return run_kernel_command(sptrsv_opts, true);
    if (pcg->parsed()) return run_pcg_command(pcg_opts, tol, max_iters, precond);
    if (prog->parsed())
      return run_program_command(prog_opts, programs, script_path, trigger_args,
                                 dump_args);
    if (stats->parsed()) return stats_command(report_path, clock_ghz);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
