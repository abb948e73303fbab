#include "tilesim/sparse.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tilesim::sparse {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(uint8_t(c)));
  return s;
}

void chomp(std::string& line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
}

}  // namespace

CooMatrix parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  if (!std::getline(in, line)) throw MatrixParseError(1, "empty input");
  lineno = 1;
  chomp(line);
  {
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket")
      throw MatrixParseError(lineno, "missing %%MatrixMarket banner");
    if (lower(object) != "matrix")
      throw MatrixParseError(lineno, "unsupported object '" + object + "'");
    if (lower(format) != "coordinate")
      throw MatrixParseError(lineno, "only coordinate format is supported");
    field = lower(field);
    symmetry = lower(symmetry);
    if (field != "real" && field != "integer" && field != "pattern")
      throw MatrixParseError(lineno, "unsupported field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric")
      throw MatrixParseError(lineno, "unsupported symmetry '" + symmetry + "'");

    const bool pattern = field == "pattern";
    const bool symmetric = symmetry == "symmetric";

    // Skip comments, then read the size line.
    long long rows = -1, cols = -1, declared = -1;
    while (std::getline(in, line)) {
      lineno++;
      std::string t;
      std::istringstream ls(line);
      if (!(ls >> t)) continue;  // blank
      if (t[0] == '%') continue;
      std::istringstream ss(line);
      if (!(ss >> rows >> cols >> declared) || rows < 0 || cols < 0 || declared < 0) {
        throw MatrixParseError(lineno, "malformed size line '" + line + "'");
      }
      std::string extra;
      if (ss >> extra) throw MatrixParseError(lineno, "trailing tokens on size line");
      break;
    }
    if (rows < 0) throw MatrixParseError(lineno, "missing size line");

    CooMatrix coo;
    coo.n_rows = uint32_t(rows);
    coo.n_cols = uint32_t(cols);
    coo.entries.reserve(size_t(declared));

    long long seen = 0;
    while (std::getline(in, line)) {
      lineno++;
      std::istringstream ls(line);
      std::string t;
      if (!(ls >> t)) continue;
      if (t[0] == '%') continue;
      if (seen == declared)
        throw MatrixParseError(lineno, "more entries than the size line declared");

      std::istringstream es(line);
      long long r, c;
      if (!(es >> r >> c)) throw MatrixParseError(lineno, "malformed entry '" + line + "'");
      double v = 1.0;
      if (!pattern) {
        if (!(es >> v)) throw MatrixParseError(lineno, "entry is missing its value");
      }
      if (r < 1 || r > rows || c < 1 || c > cols) {
        std::ostringstream os;
        os << "index (" << r << "," << c << ") outside " << rows << "x" << cols;
        throw MatrixParseError(lineno, os.str());
      }
      uint32_t ri = uint32_t(r - 1), ci = uint32_t(c - 1);
      coo.entries.push_back({ri, ci, float(v)});
      if (symmetric && ri != ci) coo.entries.push_back({ci, ri, float(v)});
      seen++;
    }
    if (seen != declared) {
      std::ostringstream os;
      os << "expected " << declared << " entries, found " << seen;
      throw MatrixParseError(lineno, os.str());
    }
    return coo;
  }
}

CooMatrix parse_matrix_market_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SimError("cannot open matrix file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_matrix_market(ss.str());
}

CsrMatrix coo_to_csr(const CooMatrix& coo) {
  for (const CooEntry& e : coo.entries) {
    if (e.row >= coo.n_rows || e.col >= coo.n_cols)
      throw DimensionMismatchError("coo entry outside the matrix");
  }
  std::vector<CooEntry> sorted = coo.entries;
  std::sort(sorted.begin(), sorted.end(), [](const CooEntry& a, const CooEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  CsrMatrix m;
  m.n_rows = coo.n_rows;
  m.n_cols = coo.n_cols;
  m.row_ptr.assign(size_t(coo.n_rows) + 1, 0);
  size_t i = 0;
  for (uint32_t r = 0; r < coo.n_rows; ++r) {
    m.row_ptr[r] = uint32_t(m.col_idx.size());
    while (i < sorted.size() && sorted[i].row == r) {
      uint32_t c = sorted[i].col;
      float sum = 0.0f;
      while (i < sorted.size() && sorted[i].row == r && sorted[i].col == c) {
        sum += sorted[i].value;
        i++;
      }
      m.col_idx.push_back(c);
      m.values.push_back(sum);
    }
  }
  m.row_ptr[coo.n_rows] = uint32_t(m.col_idx.size());
  return m;
}

void validate_csr(const CsrMatrix& m) {
  if (m.row_ptr.size() != size_t(m.n_rows) + 1)
    throw DimensionMismatchError("row_ptr length must be n_rows + 1");
  if (m.row_ptr.front() != 0 || m.row_ptr.back() != m.col_idx.size() ||
      m.col_idx.size() != m.values.size())
    throw DimensionMismatchError("row_ptr endpoints do not match the entry arrays");
  for (uint32_t r = 0; r < m.n_rows; ++r) {
    if (m.row_ptr[r + 1] < m.row_ptr[r])
      throw DimensionMismatchError("row_ptr must be nondecreasing");
    for (uint32_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      if (m.col_idx[k] >= m.n_cols) throw DimensionMismatchError("column index out of range");
      if (k > m.row_ptr[r] && m.col_idx[k] <= m.col_idx[k - 1])
        throw DimensionMismatchError("columns must be strictly increasing within a row");
    }
  }
}

LevelInfo compute_levels(const CsrMatrix& lower) {
  validate_csr(lower);
  if (lower.n_rows != lower.n_cols)
    throw DimensionMismatchError("triangular solve needs a square matrix");

  LevelInfo info;
  info.level.assign(lower.n_rows, 0);
  uint32_t max_level = 0;
  for (uint32_t i = 0; i < lower.n_rows; ++i) {
    bool diag_seen = false;
    uint32_t lvl = 0;
    for (uint32_t k = lower.row_ptr[i]; k < lower.row_ptr[i + 1]; ++k) {
      uint32_t j = lower.col_idx[k];
      if (j > i) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") lies above the diagonal";
        throw NotLowerTriangularError(os.str());
      }
      if (j == i) {
        diag_seen = lower.values[k] != 0.0f;
      } else {
        lvl = std::max(lvl, info.level[j] + 1);
      }
    }
    if (!diag_seen) {
      std::ostringstream os;
      os << "zero or missing diagonal at row " << i;
      throw SingularMatrixError(os.str());
    }
    info.level[i] = lvl;
    max_level = std::max(max_level, lvl);
  }
  info.histogram.assign(lower.n_rows == 0 ? 0 : max_level + 1, 0);
  for (uint32_t l : info.level) info.histogram[l]++;
  return info;
}

std::vector<std::pair<uint32_t, uint32_t>> block_rows(const CsrMatrix& m, size_t n_tiles) {
  const uint32_t n = m.n_rows;
  const uint64_t nnz = m.nnz();
  const uint64_t target = n_tiles == 0 ? 0 : (nnz + n_tiles - 1) / n_tiles;

  std::vector<std::pair<uint32_t, uint32_t>> blocks(n_tiles, {n, n});
  uint32_t r = 0;
  for (size_t t = 0; t < n_tiles; ++t) {
    uint32_t begin = r;
    if (t + 1 == n_tiles) {
      r = n;  // last tile absorbs the remainder
    } else if (r < n) {
      uint64_t cum = m.row_nnz(r);
      r++;
      while (r < n && cum < target && uint64_t(n - r) > (n_tiles - 1 - t)) {
        cum += m.row_nnz(r);
        r++;
      }
    }
    blocks[t] = {begin, r};
  }
  return blocks;
}

uint16_t SpmvTilePlan::slot_addr_of_col(uint32_t col) const {
  auto it = std::lower_bound(remote_cols.begin(), remote_cols.end(), col);
  return uint16_t(layout.slots_off + 4 * uint32_t(it - remote_cols.begin()));
}

uint64_t SpmvPartition::total_data_messages() const {
  uint64_t n = 0;
  for (const SpmvTilePlan& t : tiles) n += t.sends.size();
  return n;
}

SpmvPartition partition_spmv(const CsrMatrix& m, unsigned grid_rows, unsigned grid_cols,
                             uint32_t dmem_budget) {
  validate_csr(m);
  if (m.n_rows < 1) throw ConfigError("partitioning needs at least one row");
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("grid must be at least 1x1");

  SpmvPartition p;
  p.grid_rows = grid_rows;
  p.grid_cols = grid_cols;
  p.n_rows = m.n_rows;
  p.n_cols = m.n_cols;
  const size_t n_tiles = size_t(grid_rows) * grid_cols;
  const bool square = m.n_rows == m.n_cols;

  auto blocks = block_rows(m, n_tiles);
  p.row_owner.assign(m.n_rows, 0);
  p.x_owner.assign(m.n_cols, 0);
  p.tiles.resize(n_tiles);
  for (size_t t = 0; t < n_tiles; ++t) {
    SpmvTilePlan& plan = p.tiles[t];
    plan.coord = {unsigned(t / grid_cols), unsigned(t % grid_cols)};
    plan.row_begin = blocks[t].first;
    plan.row_end = blocks[t].second;
    for (uint32_t r = plan.row_begin; r < plan.row_end; ++r) p.row_owner[r] = uint32_t(t);
    if (square) {
      plan.x_begin = plan.row_begin;
      plan.x_end = plan.row_end;
    } else {
      plan.x_begin = uint32_t(uint64_t(m.n_cols) * t / n_tiles);
      plan.x_end = uint32_t(uint64_t(m.n_cols) * (t + 1) / n_tiles);
    }
    for (uint32_t c = plan.x_begin; c < plan.x_end; ++c) p.x_owner[c] = uint32_t(t);
  }

  // Consumer side: local CSR slices and the set of columns that must
  // arrive over the network.
  for (size_t t = 0; t < n_tiles; ++t) {
    SpmvTilePlan& plan = p.tiles[t];
    plan.local_row_ptr.assign(plan.owned_rows() + 1, 0);
    for (uint32_t r = plan.row_begin; r < plan.row_end; ++r) {
      plan.local_row_ptr[r - plan.row_begin] = uint32_t(plan.local_cols.size());
      for (uint32_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
        plan.local_cols.push_back(m.col_idx[k]);
        plan.local_vals.push_back(m.values[k]);
        uint32_t c = m.col_idx[k];
        if (p.x_owner[c] != t) plan.remote_cols.push_back(c);
      }
    }
    plan.local_row_ptr[plan.owned_rows()] = uint32_t(plan.local_cols.size());
    std::sort(plan.remote_cols.begin(), plan.remote_cols.end());
    plan.remote_cols.erase(std::unique(plan.remote_cols.begin(), plan.remote_cols.end()),
                           plan.remote_cols.end());
    plan.expected_recv = uint32_t(plan.remote_cols.size());

    SpmvDmemLayout& L = plan.layout;
    L.x_off = 0;
    L.y_off = L.x_off + 4 * plan.owned_x();
    L.slots_off = L.y_off + 4 * plan.owned_rows();
    L.counts_off = L.slots_off + 4 * uint32_t(plan.remote_cols.size());
    L.nnz_off = L.counts_off + 4 * plan.owned_rows();
    L.send_off = L.nnz_off + 8 * uint32_t(plan.local_cols.size());
    // The send count is not known yet; filled in below.
  }

  // Producer side: one message per (column, consumer tile) pair.
  std::vector<std::pair<uint32_t, uint32_t>> wants;  // (col, consumer tile)
  for (uint32_t r = 0; r < m.n_rows; ++r) {
    for (uint32_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      uint32_t c = m.col_idx[k];
      if (p.x_owner[c] != p.row_owner[r]) wants.emplace_back(c, p.row_owner[r]);
    }
  }
  std::sort(wants.begin(), wants.end());
  wants.erase(std::unique(wants.begin(), wants.end()), wants.end());
  for (auto [c, consumer] : wants) {
    SpmvTilePlan& producer = p.tiles[p.x_owner[c]];
    const SpmvTilePlan& dest = p.tiles[consumer];
    producer.sends.push_back(
        {c - producer.x_begin, dest.coord, dest.slot_addr_of_col(c)});
  }

  for (size_t t = 0; t < n_tiles; ++t) {
    SpmvTilePlan& plan = p.tiles[t];
    plan.layout.end_off = plan.layout.send_off + 8 * uint32_t(plan.sends.size());
    if (plan.layout.end_off > dmem_budget) {
      std::ostringstream os;
      os << "tile (" << plan.coord.row << "," << plan.coord.col << "): data footprint "
         << plan.layout.end_off << " bytes exceeds the " << dmem_budget << "-byte budget";
      throw CapacityError(os.str());
    }
  }
  return p;
}

SptrsvPartition partition_sptrsv(const CsrMatrix& lower, unsigned grid_rows,
                                 unsigned grid_cols, uint32_t dmem_budget) {
  SptrsvPartition p;
  p.levels = compute_levels(lower);  // validates shape and diagonal
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("grid must be at least 1x1");
  p.grid_rows = grid_rows;
  p.grid_cols = grid_cols;
  p.n = lower.n_rows;

  const size_t n_tiles = size_t(grid_rows) * grid_cols;
  auto blocks = block_rows(lower, n_tiles);
  p.row_owner.assign(p.n, 0);
  p.tiles.resize(n_tiles);
  p.inv_diag.assign(p.n, 0.0f);

  for (uint32_t i = 0; i < p.n; ++i) {
    for (uint32_t k = lower.row_ptr[i]; k < lower.row_ptr[i + 1]; ++k) {
      if (lower.col_idx[k] == i) p.inv_diag[i] = 1.0f / lower.values[k];
    }
  }

  for (size_t t = 0; t < n_tiles; ++t) {
    SptrsvTilePlan& plan = p.tiles[t];
    plan.coord = {unsigned(t / grid_cols), unsigned(t % grid_cols)};
    plan.row_begin = blocks[t].first;
    plan.row_end = blocks[t].second;
    for (uint32_t r = plan.row_begin; r < plan.row_end; ++r) p.row_owner[r] = uint32_t(t);
  }

  for (size_t t = 0; t < n_tiles; ++t) {
    SptrsvTilePlan& plan = p.tiles[t];
    const uint32_t rows = plan.owned_rows();

    plan.order.resize(rows);
    for (uint32_t i = 0; i < rows; ++i) plan.order[i] = plan.row_begin + i;
    std::stable_sort(plan.order.begin(), plan.order.end(), [&](uint32_t a, uint32_t b) {
      return p.levels.level[a] < p.levels.level[b];
    });

    plan.init_counter.assign(rows, 0);
    plan.local_row_ptr.assign(rows + 1, 0);
    for (uint32_t r = plan.row_begin; r < plan.row_end; ++r) {
      plan.local_row_ptr[r - plan.row_begin] = uint32_t(plan.local_cols.size());
      for (uint32_t k = lower.row_ptr[r]; k < lower.row_ptr[r + 1]; ++k) {
        uint32_t c = lower.col_idx[k];
        if (c == r) continue;  // the diagonal lives in inv_diag
        plan.local_cols.push_back(c);
        plan.local_vals.push_back(lower.values[k]);
        if (p.row_owner[c] != t) {
          plan.slots.push_back({r, c});
          plan.init_counter[r - plan.row_begin]++;
        }
      }
    }
    plan.local_row_ptr[rows] = uint32_t(plan.local_cols.size());
    plan.expected_recv = uint32_t(plan.slots.size());

    SptrsvDmemLayout& L = plan.layout;
    L.x_off = 0;
    L.b_off = L.x_off + 4 * rows;
    L.inv_off = L.b_off + 4 * rows;
    L.slots_off = L.inv_off + 4 * rows;
    L.ctab_off = L.slots_off + 4 * uint32_t(plan.slots.size());
    L.counters_off = L.ctab_off + 4 * uint32_t(plan.slots.size());
    L.rec_off = L.counters_off + 4 * rows;
    L.nnz_off = L.rec_off + 28 * rows;
    L.send_off = L.nnz_off + 8 * uint32_t(plan.local_cols.size());
  }

  // Producer side: one message per cross-tile dependency nonzero, grouped
  // by producing row in that tile's processing order.
  std::vector<std::vector<std::pair<uint32_t, uint32_t>>> consumers_of(p.n);
  for (size_t t = 0; t < n_tiles; ++t) {
    const SptrsvTilePlan& plan = p.tiles[t];
    for (uint32_t s = 0; s < plan.slots.size(); ++s) {
      // Slot s on tile t waits for x[col], wanted by local row `row`.
      consumers_of[plan.slots[s].col].push_back({uint32_t(t), s});
    }
  }
  for (size_t t = 0; t < n_tiles; ++t) {
    SptrsvTilePlan& plan = p.tiles[t];
    plan.send_counts.assign(plan.order.size(), 0);
    for (size_t oi = 0; oi < plan.order.size(); ++oi) {
      uint32_t producing_row = plan.order[oi];
      for (auto [consumer_tile, slot_idx] : consumers_of[producing_row]) {
        const SptrsvTilePlan& dest = p.tiles[consumer_tile];
        uint16_t slot_addr = uint16_t(dest.layout.slots_off + 4 * slot_idx);
        plan.send_meta.push_back(noc::pack_metadata(dest.coord.row, dest.coord.col,
                                                    noc::kDataX, slot_addr));
        plan.send_counts[oi]++;
      }
    }
    p.total_cross_messages += plan.send_meta.size();

    plan.layout.end_off = plan.layout.send_off + 4 * uint32_t(plan.send_meta.size());
    if (plan.layout.end_off > dmem_budget) {
      std::ostringstream os;
      os << "tile (" << plan.coord.row << "," << plan.coord.col << "): data footprint "
         << plan.layout.end_off << " bytes exceeds the " << dmem_budget << "-byte budget";
      throw CapacityError(os.str());
    }
  }
  return p;
}

}  // namespace tilesim::sparse
