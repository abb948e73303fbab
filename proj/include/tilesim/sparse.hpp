#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tilesim/noc.hpp"
#include "tilesim/tile.hpp"

namespace tilesim::sparse {

struct CooEntry {
  uint32_t row = 0;
  uint32_t col = 0;
  float value = 0.0f;
};

struct CooMatrix {
  uint32_t n_rows = 0;
  uint32_t n_cols = 0;
  std::vector<CooEntry> entries;
};

struct CsrMatrix {
  uint32_t n_rows = 0;
  uint32_t n_cols = 0;
  std::vector<uint32_t> row_ptr;  // length n_rows + 1, nondecreasing
  std::vector<uint32_t> col_idx;  // strictly increasing within each row
  std::vector<float> values;

  uint32_t nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }
  uint32_t row_nnz(uint32_t r) const { return row_ptr[r + 1] - row_ptr[r]; }
};

// Coordinate-format Matrix Market text: real/integer/pattern fields,
// general/symmetric storage. 1-based indices become 0-based; symmetric
// files are expanded to both triangles (diagonal entries once); pattern
// entries get value 1.0. Throws MatrixParseError with a line number.
CooMatrix parse_matrix_market(const std::string& text);
CooMatrix parse_matrix_market_file(const std::string& path);

// Duplicates are summed; per-row columns come out sorted.
CsrMatrix coo_to_csr(const CooMatrix& coo);

// Throws if row_ptr/col_idx are malformed. Partitioners call this on entry.
void validate_csr(const CsrMatrix& m);

struct LevelInfo {
  // level[i] = 0 for dependency-free rows, otherwise 1 + the deepest level
  // among the row's off-diagonal columns.
  std::vector<uint32_t> level;
  std::vector<uint64_t> histogram;  // histogram[l] = rows at level l
  uint32_t depth() const { return uint32_t(histogram.size()); }
};

// Requires a lower-triangular matrix with a nonzero diagonal in every row.
LevelInfo compute_levels(const CsrMatrix& lower);

// ---------------------------------------------------------------------------
// Partitioning. Rows are split into contiguous blocks assigned to tiles in
// row-major order, balanced greedily so no tile's nonzero count exceeds
// ceil(nnz/tiles) + max-row-nnz. For square systems the x vector is owned
// alongside the rows; rectangular systems block-partition x by columns.

// Greedy contiguous row blocks; public so tests can check the balance bound.
std::vector<std::pair<uint32_t, uint32_t>> block_rows(const CsrMatrix& m, size_t n_tiles);

struct SpmvSend {
  uint32_t local_x_index = 0;  // into the owner's x block
  noc::Coord dest;
  uint16_t dest_addr = 0;  // receive slot offset in the consumer's data region
};

// Byte offsets of each region in a tile's 64 KB data space.
struct SpmvDmemLayout {
  uint32_t x_off = 0;      // owned x block
  uint32_t y_off = 0;      // result block, one word per owned row
  uint32_t slots_off = 0;  // received x values, one word per remote column
  uint32_t counts_off = 0; // per-row nonzero counts
  uint32_t nnz_off = 0;    // (value bits, x word address) pairs in CSR order
  uint32_t send_off = 0;   // (packed metadata, x word address) pairs
  uint32_t end_off = 0;
};

struct SpmvTilePlan {
  noc::Coord coord;
  uint32_t row_begin = 0, row_end = 0;
  uint32_t x_begin = 0, x_end = 0;
  std::vector<uint32_t> local_row_ptr;  // per owned row, into local_cols/vals
  std::vector<uint32_t> local_cols;
  std::vector<float> local_vals;
  std::vector<uint32_t> remote_cols;  // sorted; slot k holds x[remote_cols[k]]
  std::vector<SpmvSend> sends;
  uint32_t expected_recv = 0;
  SpmvDmemLayout layout;

  uint32_t owned_rows() const { return row_end - row_begin; }
  uint32_t owned_x() const { return x_end - x_begin; }
  uint16_t slot_addr_of_col(uint32_t col) const;
};

struct SpmvPartition {
  unsigned grid_rows = 0, grid_cols = 0;
  uint32_t n_rows = 0, n_cols = 0;
  std::vector<SpmvTilePlan> tiles;
  std::vector<uint32_t> row_owner;  // linear tile index per row
  std::vector<uint32_t> x_owner;    // linear tile index per column
  uint64_t total_data_messages() const;
};

SpmvPartition partition_spmv(const CsrMatrix& m, unsigned grid_rows, unsigned grid_cols,
                             uint32_t dmem_budget = kDmemSize);

struct SptrsvDmemLayout {
  uint32_t x_off = 0;         // solution block, one word per owned row
  uint32_t b_off = 0;         // right-hand side block
  uint32_t inv_off = 0;       // reciprocal diagonal block
  uint32_t slots_off = 0;     // one receive slot per remote dependency nonzero
  uint32_t ctab_off = 0;      // per slot: full address of that row's counter
  uint32_t counters_off = 0;  // per owned row: outstanding remote dependencies
  uint32_t rec_off = 0;       // per-row records in processing order, 7 words each
  uint32_t nnz_off = 0;       // off-diagonal (value bits, x word address) pairs
  uint32_t send_off = 0;      // packed metadata words, grouped by producing row
  uint32_t end_off = 0;
};

struct SptrsvTilePlan {
  noc::Coord coord;
  uint32_t row_begin = 0, row_end = 0;
  std::vector<uint32_t> order;  // owned rows, ascending level (stable by index)
  std::vector<uint32_t> init_counter;  // per owned row (local index)
  std::vector<uint32_t> local_row_ptr;  // off-diagonal entries per owned row
  std::vector<uint32_t> local_cols;
  std::vector<float> local_vals;
  struct Slot {
    uint32_t row;  // consumer row (owned here)
    uint32_t col;  // producer row
  };
  std::vector<Slot> slots;
  std::vector<uint32_t> send_meta;    // grouped by producing row, in `order`
  std::vector<uint32_t> send_counts;  // parallel to `order`
  uint32_t expected_recv = 0;
  SptrsvDmemLayout layout;

  uint32_t owned_rows() const { return row_end - row_begin; }
};

struct SptrsvPartition {
  unsigned grid_rows = 0, grid_cols = 0;
  uint32_t n = 0;
  std::vector<SptrsvTilePlan> tiles;
  std::vector<uint32_t> row_owner;
  LevelInfo levels;
  std::vector<float> inv_diag;  // per row: binary32 of 1 / L_ii
  uint64_t total_cross_messages = 0;
};

SptrsvPartition partition_sptrsv(const CsrMatrix& lower, unsigned grid_rows,
                                 unsigned grid_cols, uint32_t dmem_budget = kDmemSize);

}  // namespace tilesim::sparse
