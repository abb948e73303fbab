#pragma once

#include <random>
#include <set>

#include "tilesim/sparse.hpp"

// Deterministic matrix/vector generators shared by the unit and
// acceptance suites. All randomness funnels through mt19937 with explicit
// seeds so every suite sees identical inputs on every run.

inline float tm_rand_val(std::mt19937& rng) {
  // Uniform in [-1, 1) on a fixed 2^-23 lattice.
  return float(int32_t(rng() & 0xFFFFFFu) - 0x800000) / float(0x800000);
}

inline tilesim::sparse::CsrMatrix tm_from_coo(uint32_t rows, uint32_t cols,
                                              std::vector<tilesim::sparse::CooEntry> es) {
  tilesim::sparse::CooMatrix coo;
  coo.n_rows = rows;
  coo.n_cols = cols;
  coo.entries = std::move(es);
  return tilesim::sparse::coo_to_csr(coo);
}

inline tilesim::sparse::CsrMatrix tm_identity(uint32_t n) {
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i) es.push_back({i, i, 1.0f});
  return tm_from_coo(n, n, std::move(es));
}

inline tilesim::sparse::CsrMatrix tm_diagonal(uint32_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i) {
    es.push_back({i, i, 1.0f + float(rng() % 1000 + 1) / 1000.0f});
  }
  return tm_from_coo(n, n, std::move(es));
}

inline tilesim::sparse::CsrMatrix tm_dense(uint32_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i)
    for (uint32_t j = 0; j < n; ++j) es.push_back({i, j, tm_rand_val(rng)});
  return tm_from_coo(n, n, std::move(es));
}

// Main diagonal plus the subdiagonal: a length-n dependency chain.
inline tilesim::sparse::CsrMatrix tm_bidiagonal(uint32_t n, uint32_t seed = 3) {
  std::mt19937 rng(seed);
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i) {
    es.push_back({i, i, 1.0f + float(rng() % 1000 + 1) / 1000.0f});
    if (i > 0) es.push_back({i, i - 1, tm_rand_val(rng)});
  }
  return tm_from_coo(n, n, std::move(es));
}

inline tilesim::sparse::CsrMatrix tm_random(uint32_t n, double density, uint32_t seed) {
  std::mt19937 rng(seed);
  const uint32_t threshold = uint32_t(density * 4294967295.0);
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i) {
    bool any = false;
    for (uint32_t j = 0; j < n; ++j) {
      if (rng() < threshold) {
        es.push_back({i, j, tm_rand_val(rng)});
        any = true;
      }
    }
    if (!any) es.push_back({i, i, 1.0f});  // keep every row populated
  }
  return tm_from_coo(n, n, std::move(es));
}

// Lower-triangular with a safely nonzero diagonal.
inline tilesim::sparse::CsrMatrix tm_random_lower(uint32_t n, double density,
                                                  uint32_t seed) {
  std::mt19937 rng(seed);
  const uint32_t threshold = uint32_t(density * 4294967295.0);
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = 0; j < i; ++j) {
      if (rng() < threshold) es.push_back({i, j, 0.25f * tm_rand_val(rng)});
    }
    es.push_back({i, i, 1.5f + float(rng() % 1000) / 1000.0f});
  }
  return tm_from_coo(n, n, std::move(es));
}

inline tilesim::sparse::CsrMatrix tm_spd_tridiagonal(uint32_t n) {
  std::vector<tilesim::sparse::CooEntry> es;
  for (uint32_t i = 0; i < n; ++i) {
    es.push_back({i, i, 4.0f});
    if (i > 0) {
      es.push_back({i, i - 1, -1.0f});
      es.push_back({i - 1, i, -1.0f});
    }
  }
  return tm_from_coo(n, n, std::move(es));
}

// Symmetric with a strictly dominant diagonal.
inline tilesim::sparse::CsrMatrix tm_spd_random(uint32_t n, double density,
                                                uint32_t seed) {
  std::mt19937 rng(seed);
  const uint32_t threshold = uint32_t(density * 4294967295.0);
  std::vector<tilesim::sparse::CooEntry> es;
  std::vector<double> row_sum(n, 0.0);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i + 1; j < n; ++j) {
      if (rng() < threshold) {
        float v = 0.5f * tm_rand_val(rng);
        es.push_back({i, j, v});
        es.push_back({j, i, v});
        row_sum[i] += std::abs(double(v));
        row_sum[j] += std::abs(double(v));
      }
    }
  }
  for (uint32_t i = 0; i < n; ++i) es.push_back({i, i, float(1.0 + row_sum[i])});
  return tm_from_coo(n, n, std::move(es));
}

inline std::vector<float> tm_vector(size_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = tm_rand_val(rng);
  return v;
}

// Independent message-count references used against the partitioners.
inline uint64_t tm_spmv_message_oracle(const tilesim::sparse::CsrMatrix& m,
                                       const tilesim::sparse::SpmvPartition& p) {
  std::set<std::pair<uint32_t, uint32_t>> pairs;
  for (uint32_t i = 0; i < m.n_rows; ++i)
    for (uint32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
      if (p.x_owner[m.col_idx[k]] != p.row_owner[i])
        pairs.insert({m.col_idx[k], p.row_owner[i]});
  return pairs.size();
}

inline uint64_t tm_sptrsv_message_oracle(const tilesim::sparse::CsrMatrix& m,
                                         const std::vector<uint32_t>& row_owner) {
  uint64_t count = 0;
  for (uint32_t i = 0; i < m.n_rows; ++i)
    for (uint32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
      if (m.col_idx[k] != i && row_owner[m.col_idx[k]] != row_owner[i]) count++;
  return count;
}
