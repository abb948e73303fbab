#include "tilesim/oracle.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace tilesim::oracle {

std::vector<float> spmv_ref(const sparse::CsrMatrix& m, std::span<const float> x,
                            Mode mode) {
  if (x.size() != m.n_cols)
    throw DimensionMismatchError("spmv_ref: x length must equal n_cols");
  std::vector<float> y(m.n_rows, 0.0f);
  for (uint32_t i = 0; i < m.n_rows; ++i) {
    if (mode == Mode::kBinary32SameOrder) {
      float acc = 0.0f;
      for (uint32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
        float t = m.values[k] * x[m.col_idx[k]];
        acc = acc + t;
      }
      y[i] = acc;
    } else {
      double acc = 0.0;
      for (uint32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
        acc += double(m.values[k]) * double(x[m.col_idx[k]]);
      }
      y[i] = float(acc);
    }
  }
  return y;
}

std::vector<float> sptrsv_ref(const sparse::CsrMatrix& lower, std::span<const float> b,
                              Mode mode) {
  if (lower.n_rows != lower.n_cols)
    throw DimensionMismatchError("sptrsv_ref: matrix must be square");
  if (b.size() != lower.n_rows)
    throw DimensionMismatchError("sptrsv_ref: b length must equal n_rows");

  std::vector<float> x(lower.n_rows, 0.0f);
  for (uint32_t i = 0; i < lower.n_rows; ++i) {
    float diag = 0.0f;
    bool diag_seen = false;
    if (mode == Mode::kBinary32SameOrder) {
      float acc = b[i];
      for (uint32_t k = lower.row_ptr[i]; k < lower.row_ptr[i + 1]; ++k) {
        uint32_t j = lower.col_idx[k];
        if (j > i) throw NotLowerTriangularError("entry above the diagonal");
        if (j == i) {
          diag = lower.values[k];
          diag_seen = true;
          continue;
        }
        float t = lower.values[k] * x[j];
        acc = acc - t;
      }
      if (!diag_seen || diag == 0.0f) {
        std::ostringstream os;
        os << "zero or missing diagonal at row " << i;
        throw SingularMatrixError(os.str());
      }
      float inv = 1.0f / diag;
      x[i] = acc * inv;
    } else {
      double acc = b[i];
      for (uint32_t k = lower.row_ptr[i]; k < lower.row_ptr[i + 1]; ++k) {
        uint32_t j = lower.col_idx[k];
        if (j > i) throw NotLowerTriangularError("entry above the diagonal");
        if (j == i) {
          diag = lower.values[k];
          diag_seen = true;
          continue;
        }
        acc -= double(lower.values[k]) * double(x[j]);
      }
      if (!diag_seen || diag == 0.0f) {
        std::ostringstream os;
        os << "zero or missing diagonal at row " << i;
        throw SingularMatrixError(os.str());
      }
      x[i] = float(acc / double(diag));
    }
  }
  return x;
}

std::vector<std::vector<double>> dense_from_csr(const sparse::CsrMatrix& m) {
  std::vector<std::vector<double>> a(m.n_rows, std::vector<double>(m.n_cols, 0.0));
  for (uint32_t i = 0; i < m.n_rows; ++i)
    for (uint32_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
      a[i][m.col_idx[k]] = double(m.values[k]);
  return a;
}

std::vector<double> direct_solve_ref(const std::vector<std::vector<double>>& a,
                                     std::span<const double> b) {
  const size_t n = a.size();
  if (b.size() != n) throw DimensionMismatchError("direct_solve_ref: b length mismatch");
  for (const auto& row : a)
    if (row.size() != n) throw DimensionMismatchError("direct_solve_ref: matrix not square");

  std::vector<std::vector<double>> u = a;
  std::vector<double> rhs(b.begin(), b.end());

  for (size_t k = 0; k < n; ++k) {
    size_t pivot = k;
    for (size_t i = k + 1; i < n; ++i)
      if (std::fabs(u[i][k]) > std::fabs(u[pivot][k])) pivot = i;
    if (u[pivot][k] == 0.0) {
      std::ostringstream os;
      os << "numerically singular at column " << k;
      throw SingularMatrixError(os.str());
    }
    std::swap(u[k], u[pivot]);
    std::swap(rhs[k], rhs[pivot]);
    for (size_t i = k + 1; i < n; ++i) {
      double f = u[i][k] / u[k][k];
      if (f == 0.0) continue;
      for (size_t j = k; j < n; ++j) u[i][j] -= f * u[k][j];
      rhs[i] -= f * rhs[k];
    }
  }
  std::vector<double> x(n, 0.0);
  for (size_t i = n; i-- > 0;) {
    double acc = rhs[i];
    for (size_t j = i + 1; j < n; ++j) acc -= u[i][j] * x[j];
    x[i] = acc / u[i][i];
  }
  return x;
}

namespace {

template <typename T>
bool same_bits(T a, T b) {
  if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<uint32_t>(a) == std::bit_cast<uint32_t>(b);
  } else {
    return std::bit_cast<uint64_t>(a) == std::bit_cast<uint64_t>(b);
  }
}

template <typename A, typename B>
ComparisonReport compare_impl(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size())
    throw DimensionMismatchError("compare: vectors have different lengths");
  ComparisonReport r;
  double b_inf = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double av = double(a[i]), bv = double(b[i]);
    b_inf = std::max(b_inf, std::fabs(bv));
    bool same;
    if constexpr (std::is_same_v<A, B>) {
      same = same_bits(a[i], b[i]);
    } else {
      same = av == bv;
    }
    if (same) continue;
    r.bitwise_equal = false;
    double abs_diff = std::fabs(av - bv);
    double denom = std::max({std::fabs(av), std::fabs(bv), 1e-30});
    double rel = abs_diff / denom;
    if (abs_diff > r.max_abs_diff) r.max_abs_diff = abs_diff;
    if (rel > r.max_rel_diff) {
      r.max_rel_diff = rel;
      r.worst_index = i;
    }
  }
  r.rel_inf_norm = r.max_abs_diff / std::max(b_inf, 1e-30);
  return r;
}

}  // namespace

ComparisonReport compare(std::span<const float> a, std::span<const float> b) {
  return compare_impl(a, b);
}
ComparisonReport compare(std::span<const double> a, std::span<const double> b) {
  return compare_impl(a, b);
}
ComparisonReport compare(std::span<const float> a, std::span<const double> b) {
  return compare_impl(a, b);
}

}  // namespace tilesim::oracle
