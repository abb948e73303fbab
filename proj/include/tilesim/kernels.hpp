#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilesim/assembler.hpp"
#include "tilesim/machine.hpp"
#include "tilesim/oracle.hpp"
#include "tilesim/sparse.hpp"

namespace tilesim::kernels {

// Where a host-side vector block lives on a tile.
struct BlockMap {
  noc::Coord coord;
  uint32_t dmem_off = 0;  // byte offset in the tile's data region
  uint32_t begin = 0;     // global element range [begin, end)
  uint32_t end = 0;
};

struct TileProgram {
  noc::Coord coord;
  std::string asm_text;
  std::vector<assembler::Segment> segments;
  uint16_t entry = 0;
};

// Everything needed to place a kernel on the machine: programs and static
// matrix tables load once; the scatter map describes the per-run vector
// refresh; the gather map locates the result blocks afterwards.
struct KernelImage {
  std::vector<TileProgram> programs;
  std::vector<noc::Message> program_msgs;  // instruction + lookup-table writes
  std::vector<noc::Message> matrix_msgs;   // static data tables
  std::vector<Trigger> triggers;
  size_t expected_done = 0;
  std::vector<BlockMap> gathers;
  std::vector<BlockMap> scatters;
};

KernelImage gen_spmv(const sparse::SpmvPartition& p);
KernelImage gen_sptrsv(const sparse::SptrsvPartition& p);

std::vector<noc::Message> make_vector_messages(const KernelImage& image,
                                               std::span<const float> values);

// Load-script composition of one device call, by message class.
struct LoadAudit {
  uint64_t write_instr = 0;
  uint64_t write_lut = 0;
  uint64_t matrix_words = 0;
  uint64_t vector_words = 0;
  uint64_t total() const { return write_instr + write_lut + matrix_words + vector_words; }
};

struct KernelResult {
  std::vector<float> output;
  Stats stats;  // machine-lifetime statistics at the end of the call
  LoadAudit load_audit;
  size_t done_messages = 0;
  uint64_t load_cycles = 0;    // this call
  uint64_t exec_cycles = 0;    // this call
  uint64_t exec_messages = 0;  // messages injected while executing this call
};

// A machine plus the most recently loaded kernel. Repeat runs against the
// same matrix keep the program and matrix tables resident and ship only
// fresh vector data.
class Device {
 public:
  explicit Device(const MachineConfig& cfg) : machine_(cfg) {}

  KernelResult run_spmv(const sparse::CsrMatrix& m, std::span<const float> x);
  KernelResult run_sptrsv(const sparse::CsrMatrix& lower, std::span<const float> b);

  Machine& machine() { return machine_; }
  const std::vector<LoadAudit>& audit_history() const { return audits_; }

 private:
  enum class Kind : uint8_t { kSpmv, kSptrsv };
  struct Resident {
    Kind kind;
    uint64_t fingerprint;
    KernelImage image;
  };

  KernelResult run_common(Kind kind, const sparse::CsrMatrix& m,
                          std::span<const float> vec);

  Machine machine_;
  std::optional<Resident> resident_;
  std::vector<LoadAudit> audits_;
};

enum class Precond { kNone, kJacobi };

struct PcgOptions {
  double tol = 1e-6;
  unsigned max_iters = 1000;
  Precond precond = Precond::kJacobi;
};

struct PcgResult {
  std::vector<double> x;
  std::vector<double> residual_history;  // relative 2-norm residual per iteration
  bool converged = false;
  unsigned iterations = 0;
  Stats stats;
};

// Host-orchestrated conjugate gradient: every A*p product runs on the
// device (so the matrix loads once and stays resident); dot products, axpy
// updates and the Jacobi preconditioner run on the host in float64.
// Requires a symmetric matrix (pattern and values, tolerance 1e-6);
// definiteness is not checked.
PcgResult run_pcg(Device& dev, const sparse::CsrMatrix& a, std::span<const double> b,
                  const PcgOptions& opts);

}  // namespace tilesim::kernels
