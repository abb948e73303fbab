#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tilesim/assembler.hpp"
#include "tilesim/kernels.hpp"
#include "tilesim/machine.hpp"
#include "tilesim/oracle.hpp"
#include "tilesim/sparse.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace tilesim;

namespace {

oracle::Mode mode_of(const std::string& s) {
  if (s == "same-order") return oracle::Mode::kBinary32SameOrder;
  if (s == "f64") return oracle::Mode::kFloat64;
  throw py::value_error("mode must be 'same-order' or 'f64'");
}

MachineConfig config_of(unsigned grid_rows, unsigned grid_cols, size_t fifo_depth,
                        uint64_t max_cycles) {
  MachineConfig cfg;
  cfg.grid_rows = grid_rows;
  cfg.grid_cols = grid_cols;
  cfg.fifo_depth = fifo_depth;
  cfg.max_cycles = max_cycles;
  return cfg;
}

py::dict result_dict(const kernels::KernelResult& res) {
  return py::dict(
      "output"_a = res.output, "done_messages"_a = res.done_messages,
      "load_cycles"_a = res.load_cycles, "exec_cycles"_a = res.exec_cycles,
      "exec_messages"_a = res.exec_messages,
      "compute_bound_ratio"_a = res.stats.compute_bound_ratio,
      "load_audit"_a = py::dict("write_instr"_a = res.load_audit.write_instr,
                                "write_lut"_a = res.load_audit.write_lut,
                                "matrix_words"_a = res.load_audit.matrix_words,
                                "vector_words"_a = res.load_audit.vector_words));
}

}  // namespace

PYBIND11_MODULE(_tilesim, m) {
  m.doc() = "Cycle-level simulator of a tiled SRAM spatial accelerator for sparse "
            "iterative solvers";

  py::register_exception<SimError>(m, "SimulatorError");

  py::class_<sparse::CsrMatrix>(m, "CsrMatrix")
      .def(py::init<>())
      .def_readwrite("n_rows", &sparse::CsrMatrix::n_rows)
      .def_readwrite("n_cols", &sparse::CsrMatrix::n_cols)
      .def_readwrite("row_ptr", &sparse::CsrMatrix::row_ptr)
      .def_readwrite("col_idx", &sparse::CsrMatrix::col_idx)
      .def_readwrite("values", &sparse::CsrMatrix::values)
      .def("nnz", &sparse::CsrMatrix::nnz);

  m.def("csr_from_mm",
        [](const std::string& text) {
          return sparse::coo_to_csr(sparse::parse_matrix_market(text));
        },
        "text"_a, "Parse Matrix Market text into CSR form");

  m.def("pack_metadata", &noc::pack_metadata, "row"_a, "col"_a, "task_type"_a, "addr"_a);
  m.def("unpack_metadata", [](uint32_t word) {
    noc::Metadata md = noc::unpack_metadata(word);
    return py::make_tuple(md.row, md.col, md.task_type, md.addr);
  });

  m.def("assemble", [](const std::string& text) {
    std::vector<std::pair<uint32_t, std::vector<uint32_t>>> out;
    for (const assembler::Segment& s : assembler::assemble(text))
      out.emplace_back(s.base, s.words);
    return out;
  });
  m.def("disassemble", [](const std::vector<std::pair<uint32_t, std::vector<uint32_t>>>&
                              segments) {
    std::vector<assembler::Segment> segs;
    for (const auto& [base, words] : segments) segs.push_back({base, words});
    return assembler::disassemble(segs);
  });

  m.def("compute_levels", [](const sparse::CsrMatrix& lower) {
    sparse::LevelInfo info = sparse::compute_levels(lower);
    return py::dict("level"_a = info.level, "histogram"_a = info.histogram);
  });

  m.def("spmv_ref",
        [](const sparse::CsrMatrix& mat, const std::vector<float>& x,
           const std::string& mode) { return oracle::spmv_ref(mat, x, mode_of(mode)); },
        "matrix"_a, "x"_a, "mode"_a = "same-order");
  m.def("sptrsv_ref",
        [](const sparse::CsrMatrix& lower, const std::vector<float>& b,
           const std::string& mode) {
          return oracle::sptrsv_ref(lower, b, mode_of(mode));
        },
        "lower"_a, "b"_a, "mode"_a = "same-order");

  m.def("run_spmv",
        [](const sparse::CsrMatrix& mat, const std::vector<float>& x, unsigned grid_rows,
           unsigned grid_cols, size_t fifo_depth, uint64_t max_cycles) {
          kernels::Device dev(config_of(grid_rows, grid_cols, fifo_depth, max_cycles));
          return result_dict(dev.run_spmv(mat, x));
        },
        "matrix"_a, "x"_a, "grid_rows"_a = 2, "grid_cols"_a = 2, "fifo_depth"_a = 16,
        "max_cycles"_a = uint64_t(50'000'000),
        "Run one device sparse matrix-vector product");

  m.def("run_sptrsv",
        [](const sparse::CsrMatrix& lower, const std::vector<float>& b,
           unsigned grid_rows, unsigned grid_cols, size_t fifo_depth,
           uint64_t max_cycles) {
          kernels::Device dev(config_of(grid_rows, grid_cols, fifo_depth, max_cycles));
          return result_dict(dev.run_sptrsv(lower, b));
        },
        "lower"_a, "b"_a, "grid_rows"_a = 2, "grid_cols"_a = 2, "fifo_depth"_a = 16,
        "max_cycles"_a = uint64_t(50'000'000),
        "Run one device lower-triangular solve");

  m.def("run_pcg",
        [](const sparse::CsrMatrix& mat, const std::vector<double>& b, double tol,
           unsigned max_iters, const std::string& precond, unsigned grid_rows,
           unsigned grid_cols, size_t fifo_depth, uint64_t max_cycles) {
          kernels::PcgOptions opts;
          opts.tol = tol;
          opts.max_iters = max_iters;
          if (precond == "none") {
            opts.precond = kernels::Precond::kNone;
          } else if (precond == "jacobi") {
            opts.precond = kernels::Precond::kJacobi;
          } else {
            throw py::value_error("precond must be 'none' or 'jacobi'");
          }
          kernels::Device dev(config_of(grid_rows, grid_cols, fifo_depth, max_cycles));
          kernels::PcgResult res = kernels::run_pcg(dev, mat, b, opts);
          return py::dict("x"_a = res.x, "converged"_a = res.converged,
                          "iterations"_a = res.iterations,
                          "residual_history"_a = res.residual_history);
        },
        "matrix"_a, "b"_a, "tol"_a = 1e-6, "max_iters"_a = 1000, "precond"_a = "jacobi",
        "grid_rows"_a = 2, "grid_cols"_a = 2, "fifo_depth"_a = 16,
        "max_cycles"_a = uint64_t(50'000'000),
        "Host-orchestrated conjugate gradient with device matrix-vector products");
}
