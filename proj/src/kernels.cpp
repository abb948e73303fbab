#include "tilesim/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

namespace tilesim::kernels {

using noc::Message;
using noc::pack_metadata;
using sparse::CsrMatrix;

namespace {

constexpr uint16_t kTaskEntry = 0x10;  // address 0 is reserved for the task return
constexpr unsigned kTaskLutIndex = 0;

uint32_t fbits(float v) { return std::bit_cast<uint32_t>(v); }

// Materializes a 32-bit constant in one or two instructions.
void emit_li(std::ostringstream& os, std::string_view reg, uint32_t value) {
  int32_t v = int32_t(value);
  if (v >= -2048 && v <= 2047) {
    os << "  addi " << reg << ", x0, " << v << "\n";
    return;
  }
  uint32_t hi = (value + 0x800u) >> 12;
  int32_t lo = int32_t(value - (hi << 12));
  os << "  lui " << reg << ", 0x" << std::hex << (hi & 0xFFFFF) << std::dec << "\n";
  if (lo != 0) os << "  addi " << reg << ", " << reg << ", " << lo << "\n";
}

void emit_done_and_ret(std::ostringstream& os, uint32_t row_count) {
  emit_li(os, "x20", pack_metadata(noc::kHostCoord.row, noc::kHostCoord.col, noc::kDone, 0));
  emit_li(os, "x21", row_count);
  os << "  send x20, x21\n";
  os << "  ret\n";
}

void finish_program(KernelImage& img, noc::Coord coord, std::string asm_text) {
  TileProgram prog;
  prog.coord = coord;
  prog.entry = kTaskEntry;
  prog.asm_text = ".org 0x10\n" + std::move(asm_text);
  prog.segments = assembler::assemble(prog.asm_text);

  uint32_t words = 0;
  for (const auto& seg : prog.segments) words += uint32_t(seg.words.size());
  if (kTaskEntry + 4u * words > kImemSize) {
    std::ostringstream os;
    os << "tile (" << coord.row << "," << coord.col << "): program of " << words
       << " words exceeds the instruction region";
    throw CapacityError(os.str());
  }

  for (const auto& seg : prog.segments) {
    for (size_t k = 0; k < seg.words.size(); ++k) {
      img.program_msgs.push_back(
          {pack_metadata(coord.row, coord.col, noc::kWriteInstr,
                         unsigned(seg.base + 4 * k)),
           seg.words[k]});
    }
  }
  img.program_msgs.push_back(
      {pack_metadata(coord.row, coord.col, noc::kWriteLut, kTaskLutIndex), kTaskEntry});
  img.triggers.push_back({coord, kTaskLutIndex});
  img.programs.push_back(std::move(prog));
}

void push_data(std::vector<Message>& out, noc::Coord coord, uint32_t off, uint32_t word) {
  out.push_back({pack_metadata(coord.row, coord.col, noc::kWriteData, off), word});
}

}  // namespace

KernelImage gen_spmv(const sparse::SpmvPartition& p) {
  KernelImage img;
  for (const sparse::SpmvTilePlan& plan : p.tiles) {
    const bool has_rows = plan.owned_rows() > 0;
    const bool has_sends = !plan.sends.empty();
    if (plan.owned_x() > 0) {
      img.scatters.push_back({plan.coord, plan.layout.x_off, plan.x_begin, plan.x_end});
    }
    if (has_rows) {
      img.gathers.push_back({plan.coord, plan.layout.y_off, plan.row_begin, plan.row_end});
      img.expected_done++;
    }
    if (!has_rows && !has_sends) continue;

    // Distribute owned x entries, absorb the expected remote entries (the
    // received address says where each one lands), then accumulate row by
    // row over the local tables.
    std::ostringstream os;
    emit_li(os, "x12", kDmemBase);
    emit_li(os, "x9", kDmemBase + plan.layout.send_off);
    emit_li(os, "x10", uint32_t(plan.sends.size()));
    if (has_rows) {
      emit_li(os, "x5", kDmemBase + plan.layout.nnz_off);
      emit_li(os, "x6", plan.owned_rows());
      emit_li(os, "x7", kDmemBase + plan.layout.y_off);
      emit_li(os, "x8", kDmemBase + plan.layout.counts_off);
      emit_li(os, "x11", plan.expected_recv);
    }
    os << "send_loop:\n"
       << "  beq x10, x0, send_done\n"
       << "  lw x20, 0(x9)\n"
       << "  lw x21, 4(x9)\n"
       << "  lw x21, 0(x21)\n"
       << "  send x20, x21\n"
       << "  addi x9, x9, 8\n"
       << "  addi x10, x10, -1\n"
       << "  jal x0, send_loop\n"
       << "send_done:\n";
    if (has_rows) {
      os << "recv_loop:\n"
         << "  beq x11, x0, recv_done\n"
         << "  recv x20\n"
         << "  slli x22, x20, 16\n"
         << "  srli x22, x22, 16\n"
         << "  add x22, x22, x12\n"
         << "  sw x21, 0(x22)\n"
         << "  addi x11, x11, -1\n"
         << "  jal x0, recv_loop\n"
         << "recv_done:\n"
         << "row_loop:\n"
         << "  beq x6, x0, rows_done\n"
         << "  lw x23, 0(x8)\n"
         << "  addi x8, x8, 4\n"
         << "  addi x24, x0, 0\n"
         << "nnz_loop:\n"
         << "  beq x23, x0, row_done\n"
         << "  lw x25, 0(x5)\n"
         << "  lw x26, 4(x5)\n"
         << "  lw x26, 0(x26)\n"
         << "  fmul x25, x25, x26\n"
         << "  fadd x24, x24, x25\n"
         << "  addi x5, x5, 8\n"
         << "  addi x23, x23, -1\n"
         << "  jal x0, nnz_loop\n"
         << "row_done:\n"
         << "  sw x24, 0(x7)\n"
         << "  addi x7, x7, 4\n"
         << "  addi x6, x6, -1\n"
         << "  jal x0, row_loop\n"
         << "rows_done:\n";
      emit_done_and_ret(os, plan.owned_rows());
    } else {
      os << "  ret\n";
    }
    finish_program(img, plan.coord, os.str());

    // Static tables.
    auto& mm = img.matrix_msgs;
    for (uint32_t li = 0; li < plan.owned_rows(); ++li) {
      push_data(mm, plan.coord, plan.layout.counts_off + 4 * li,
                plan.local_row_ptr[li + 1] - plan.local_row_ptr[li]);
    }
    for (uint32_t k = 0; k < plan.local_cols.size(); ++k) {
      uint32_t c = plan.local_cols[k];
      uint32_t xaddr;
      if (p.x_owner[c] == size_t(plan.coord.row) * p.grid_cols + plan.coord.col) {
        xaddr = kDmemBase + plan.layout.x_off + 4 * (c - plan.x_begin);
      } else {
        xaddr = kDmemBase + plan.slot_addr_of_col(c);
      }
      push_data(mm, plan.coord, plan.layout.nnz_off + 8 * k, fbits(plan.local_vals[k]));
      push_data(mm, plan.coord, plan.layout.nnz_off + 8 * k + 4, xaddr);
    }
    for (uint32_t s = 0; s < plan.sends.size(); ++s) {
      const sparse::SpmvSend& e = plan.sends[s];
      uint32_t meta = pack_metadata(e.dest.row, e.dest.col, noc::kDataX, e.dest_addr);
      uint32_t xaddr = kDmemBase + plan.layout.x_off + 4 * e.local_x_index;
      push_data(mm, plan.coord, plan.layout.send_off + 8 * s, meta);
      push_data(mm, plan.coord, plan.layout.send_off + 8 * s + 4, xaddr);
    }
  }
  return img;
}

KernelImage gen_sptrsv(const sparse::SptrsvPartition& p) {
  KernelImage img;
  for (const sparse::SptrsvTilePlan& plan : p.tiles) {
    const uint32_t rows = plan.owned_rows();
    if (rows == 0) continue;
    img.scatters.push_back({plan.coord, plan.layout.b_off, plan.row_begin, plan.row_end});
    img.gathers.push_back({plan.coord, plan.layout.x_off, plan.row_begin, plan.row_end});
    img.expected_done++;

    // Counter-driven schedule: walk the owned rows in level order; while
    // the current row still has outstanding remote values, absorb whatever
    // arrives (each receipt stores its payload and decrements the counter
    // its slot maps to); once clear, finish the row, rearm its counter for
    // the next run, and fan the fresh x out to its consumers.
    const sparse::SptrsvDmemLayout& L = plan.layout;
    std::ostringstream os;
    emit_li(os, "x12", kDmemBase);
    emit_li(os, "x4", L.ctab_off - L.slots_off);
    emit_li(os, "x5", kDmemBase + L.rec_off);
    emit_li(os, "x6", rows);
    emit_li(os, "x7", kDmemBase + L.nnz_off);
    emit_li(os, "x8", kDmemBase + L.send_off);
    os << "row_loop:\n"
       << "  beq x6, x0, all_done\n"
       << "  lw x20, 0(x5)\n"
       << "wait_loop:\n"
       << "  lw x21, 0(x20)\n"
       << "  beq x21, x0, ready\n"
       << "  jal x1, recv_one\n"
       << "  jal x0, wait_loop\n"
       << "ready:\n"
       << "  lw x22, 4(x5)\n"
       << "  lw x22, 0(x22)\n"
       << "  lw x23, 16(x5)\n"
       << "nnz_loop:\n"
       << "  beq x23, x0, row_solved\n"
       << "  lw x24, 0(x7)\n"
       << "  lw x25, 4(x7)\n"
       << "  lw x25, 0(x25)\n"
       << "  fmul x24, x24, x25\n"
       << "  fsub x22, x22, x24\n"
       << "  addi x7, x7, 8\n"
       << "  addi x23, x23, -1\n"
       << "  jal x0, nnz_loop\n"
       << "row_solved:\n"
       << "  lw x24, 12(x5)\n"
       << "  lw x24, 0(x24)\n"
       << "  fmul x22, x22, x24\n"
       << "  lw x25, 8(x5)\n"
       << "  sw x22, 0(x25)\n"
       << "  lw x26, 24(x5)\n"
       << "  sw x26, 0(x20)\n"
       << "  lw x23, 20(x5)\n"
       << "send_loop:\n"
       << "  beq x23, x0, row_done\n"
       << "  lw x24, 0(x8)\n"
       << "  send x24, x22\n"
       << "  addi x8, x8, 4\n"
       << "  addi x23, x23, -1\n"
       << "  jal x0, send_loop\n"
       << "row_done:\n"
       << "  addi x5, x5, 28\n"
       << "  addi x6, x6, -1\n"
       << "  jal x0, row_loop\n"
       << "all_done:\n";
    emit_done_and_ret(os, rows);
    os << "recv_one:\n"
       << "  recv x10\n"
       << "  slli x13, x10, 16\n"
       << "  srli x13, x13, 16\n"
       << "  add x13, x13, x12\n"
       << "  sw x11, 0(x13)\n"
       << "  add x14, x13, x4\n"
       << "  lw x14, 0(x14)\n"
       << "  lw x15, 0(x14)\n"
       << "  addi x15, x15, -1\n"
       << "  sw x15, 0(x14)\n"
       << "  jalr x0, 0(x1)\n";
    finish_program(img, plan.coord, os.str());

    // Static tables.
    auto& mm = img.matrix_msgs;
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> slot_index;
    for (uint32_t s = 0; s < plan.slots.size(); ++s) {
      slot_index[{plan.slots[s].row, plan.slots[s].col}] = s;
    }

    for (uint32_t li = 0; li < rows; ++li) {
      push_data(mm, plan.coord, L.inv_off + 4 * li, fbits(p.inv_diag[plan.row_begin + li]));
      push_data(mm, plan.coord, L.counters_off + 4 * li, plan.init_counter[li]);
    }
    for (uint32_t s = 0; s < plan.slots.size(); ++s) {
      uint32_t counter_addr =
          kDmemBase + L.counters_off + 4 * (plan.slots[s].row - plan.row_begin);
      push_data(mm, plan.coord, L.ctab_off + 4 * s, counter_addr);
    }

    // Per-row records, nonzero tables and send tables all follow the
    // processing order so the program can walk them with moving pointers.
    uint32_t nnz_cursor = 0;
    for (uint32_t oi = 0; oi < plan.order.size(); ++oi) {
      const uint32_t row = plan.order[oi];
      const uint32_t li = row - plan.row_begin;
      const uint32_t rec = L.rec_off + 28 * oi;
      const uint32_t nnz_count = plan.local_row_ptr[li + 1] - plan.local_row_ptr[li];
      push_data(mm, plan.coord, rec + 0, kDmemBase + L.counters_off + 4 * li);
      push_data(mm, plan.coord, rec + 4, kDmemBase + L.b_off + 4 * li);
      push_data(mm, plan.coord, rec + 8, kDmemBase + L.x_off + 4 * li);
      push_data(mm, plan.coord, rec + 12, kDmemBase + L.inv_off + 4 * li);
      push_data(mm, plan.coord, rec + 16, nnz_count);
      push_data(mm, plan.coord, rec + 20, plan.send_counts[oi]);
      push_data(mm, plan.coord, rec + 24, plan.init_counter[li]);

      for (uint32_t k = plan.local_row_ptr[li]; k < plan.local_row_ptr[li + 1]; ++k) {
        uint32_t c = plan.local_cols[k];
        uint32_t xaddr;
        if (p.row_owner[c] == size_t(plan.coord.row) * p.grid_cols + plan.coord.col) {
          xaddr = kDmemBase + L.x_off + 4 * (c - plan.row_begin);
        } else {
          xaddr = kDmemBase + L.slots_off + 4 * slot_index.at({row, c});
        }
        push_data(mm, plan.coord, L.nnz_off + 8 * nnz_cursor, fbits(plan.local_vals[k]));
        push_data(mm, plan.coord, L.nnz_off + 8 * nnz_cursor + 4, xaddr);
        nnz_cursor++;
      }
    }
    for (uint32_t k = 0; k < plan.send_meta.size(); ++k) {
      push_data(mm, plan.coord, L.send_off + 4 * k, plan.send_meta[k]);
    }
  }
  return img;
}

std::vector<Message> make_vector_messages(const KernelImage& image,
                                          std::span<const float> values) {
  std::vector<Message> out;
  for (const BlockMap& blk : image.scatters) {
    if (blk.end > values.size())
      throw DimensionMismatchError("vector shorter than the scattered range");
    for (uint32_t i = blk.begin; i < blk.end; ++i) {
      out.push_back({pack_metadata(blk.coord.row, blk.coord.col, noc::kWriteData,
                                   blk.dmem_off + 4 * (i - blk.begin)),
                     fbits(values[i])});
    }
  }
  return out;
}

namespace {

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t matrix_fingerprint(int kind, const CsrMatrix& m, unsigned gr, unsigned gc) {
  uint64_t h = 14695981039346656037ull;
  uint32_t hdr[5] = {uint32_t(kind), m.n_rows, m.n_cols, gr, gc};
  h = fnv1a(hdr, sizeof hdr, h);
  h = fnv1a(m.row_ptr.data(), m.row_ptr.size() * 4, h);
  h = fnv1a(m.col_idx.data(), m.col_idx.size() * 4, h);
  h = fnv1a(m.values.data(), m.values.size() * 4, h);
  return h;
}

}  // namespace

KernelResult Device::run_common(Kind kind, const CsrMatrix& m, std::span<const float> vec) {
  const uint64_t fp = matrix_fingerprint(int(kind), m, machine_.grid_rows(),
                                         machine_.grid_cols());
  const bool fresh =
      !(resident_ && resident_->kind == kind && resident_->fingerprint == fp);
  if (fresh) {
    KernelImage img;
    if (kind == Kind::kSpmv) {
      img = gen_spmv(sparse::partition_spmv(m, machine_.grid_rows(), machine_.grid_cols()));
    } else {
      img = gen_sptrsv(
          sparse::partition_sptrsv(m, machine_.grid_rows(), machine_.grid_cols()));
    }
    resident_ = Resident{kind, fp, std::move(img)};
  }
  const KernelImage& img = resident_->image;

  LoadAudit audit;
  std::vector<Message> script;
  if (fresh) {
    for (const Message& msg : img.program_msgs) {
      unsigned type = noc::unpack_metadata(msg.metadata).task_type;
      if (type == noc::kWriteInstr) audit.write_instr++;
      if (type == noc::kWriteLut) audit.write_lut++;
    }
    audit.matrix_words = img.matrix_msgs.size();
    script.insert(script.end(), img.program_msgs.begin(), img.program_msgs.end());
    script.insert(script.end(), img.matrix_msgs.begin(), img.matrix_msgs.end());
  }
  std::vector<Message> vec_msgs = make_vector_messages(img, vec);
  audit.vector_words = vec_msgs.size();
  script.insert(script.end(), vec_msgs.begin(), vec_msgs.end());

  KernelResult res;
  res.load_cycles = machine_.load_phase(script);
  machine_.start_tasks(img.triggers);
  const Stats mid = machine_.stats();
  res.stats = machine_.run_until_quiescent();
  res.exec_cycles = res.stats.exec_cycles - mid.exec_cycles;
  res.exec_messages = res.stats.messages_injected - mid.messages_injected;

  for (const Message& msg : machine_.read_host_mailbox()) {
    if (noc::unpack_metadata(msg.metadata).task_type == noc::kDone) res.done_messages++;
  }
  if (res.done_messages != img.expected_done) {
    std::ostringstream os;
    os << "expected " << img.expected_done << " completion messages, saw "
       << res.done_messages;
    throw SimError(os.str());
  }

  res.output.assign(m.n_rows, 0.0f);
  for (const BlockMap& g : img.gathers) {
    const Tile& tile = machine_.tile(g.coord);
    for (uint32_t i = g.begin; i < g.end; ++i) {
      res.output[i] =
          std::bit_cast<float>(tile.dmem_word(g.dmem_off + 4 * (i - g.begin)));
    }
  }

  res.load_audit = audit;
  audits_.push_back(audit);
  return res;
}

KernelResult Device::run_spmv(const CsrMatrix& m, std::span<const float> x) {
  if (x.size() != m.n_cols)
    throw DimensionMismatchError("run_spmv: x length must equal n_cols");
  return run_common(Kind::kSpmv, m, x);
}

KernelResult Device::run_sptrsv(const CsrMatrix& lower, std::span<const float> b) {
  if (b.size() != lower.n_rows)
    throw DimensionMismatchError("run_sptrsv: b length must equal n_rows");
  return run_common(Kind::kSptrsv, lower, b);
}

namespace {

void check_symmetric(const CsrMatrix& a) {
  if (a.n_rows != a.n_cols) throw NotSymmetricError("matrix is not square");
  for (uint32_t i = 0; i < a.n_rows; ++i) {
    for (uint32_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      uint32_t j = a.col_idx[k];
      double v = a.values[k];
      auto begin = a.col_idx.begin() + a.row_ptr[j];
      auto end = a.col_idx.begin() + a.row_ptr[j + 1];
      auto it = std::lower_bound(begin, end, i);
      double vt = 0.0;
      if (it != end && *it == i) vt = a.values[it - a.col_idx.begin()];
      if (std::fabs(v - vt) > 1e-6 * std::max({std::fabs(v), std::fabs(vt), 1.0})) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") breaks symmetry: " << v << " vs " << vt;
        throw NotSymmetricError(os.str());
      }
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

PcgResult run_pcg(Device& dev, const CsrMatrix& a, std::span<const double> b,
                  const PcgOptions& opts) {
  check_symmetric(a);
  const size_t n = a.n_rows;
  if (b.size() != n) throw DimensionMismatchError("run_pcg: b length must equal n_rows");

  PcgResult out;
  out.x.assign(n, 0.0);

  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.converged = true;
    out.stats = dev.machine().stats();
    return out;
  }

  std::vector<double> inv_diag(n, 1.0);
  if (opts.precond == Precond::kJacobi) {
    for (uint32_t i = 0; i < a.n_rows; ++i) {
      double d = 0.0;
      for (uint32_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
        if (a.col_idx[k] == i) d = a.values[k];
      if (d == 0.0) {
        std::ostringstream os;
        os << "Jacobi preconditioner needs a nonzero diagonal; row " << i << " has none";
        throw SingularMatrixError(os.str());
      }
      inv_diag[i] = 1.0 / d;
    }
  }
  auto precond = [&](const std::vector<double>& r) {
    std::vector<double> z(r);
    if (opts.precond == Precond::kJacobi)
      for (size_t i = 0; i < z.size(); ++i) z[i] *= inv_diag[i];
    return z;
  };

  std::vector<double> r(b.begin(), b.end());
  std::vector<double> z = precond(r);
  std::vector<double> p = z;
  double rz = dot(r, z);
  std::vector<float> p32(n);

  for (unsigned it = 1; it <= opts.max_iters; ++it) {
    for (size_t i = 0; i < n; ++i) p32[i] = float(p[i]);
    const KernelResult spmv = dev.run_spmv(a, p32);
    std::vector<double> q(n);
    for (size_t i = 0; i < n; ++i) q[i] = double(spmv.output[i]);

    const double pq = dot(p, q);
    if (pq == 0.0) break;  // breakdown; report the best iterate so far
    const double alpha = rz / pq;
    for (size_t i = 0; i < n; ++i) out.x[i] += alpha * p[i];
    for (size_t i = 0; i < n; ++i) r[i] -= alpha * q[i];

    const double relres = norm2(r) / bnorm;
    out.residual_history.push_back(relres);
    out.iterations = it;
    if (relres <= opts.tol) {
      out.converged = true;
      break;
    }

    z = precond(r);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  out.stats = dev.machine().stats();
  return out;
}

}  // namespace tilesim::kernels
