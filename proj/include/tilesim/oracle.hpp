#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tilesim/sparse.hpp"

namespace tilesim::oracle {

enum class Mode {
  // Accumulate left to right in CSR storage order with binary32
  // round-to-nearest-even at every step, matching the device exactly.
  kBinary32SameOrder,
  // Accumulate in float64, round once at the end.
  kFloat64,
};

// y = M x per the nonzero pattern.
std::vector<float> spmv_ref(const sparse::CsrMatrix& m, std::span<const float> x,
                            Mode mode);

// Forward substitution for L x = b. In binary32 mode each row multiplies by
// the precomputed binary32 reciprocal of its diagonal instead of dividing,
// again matching the device.
std::vector<float> sptrsv_ref(const sparse::CsrMatrix& lower, std::span<const float> b,
                              Mode mode);

// float64 Gaussian elimination with partial pivoting, for desk-scale checks.
std::vector<double> direct_solve_ref(const std::vector<std::vector<double>>& a,
                                     std::span<const double> b);

std::vector<std::vector<double>> dense_from_csr(const sparse::CsrMatrix& m);

struct ComparisonReport {
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;   // element-wise, denominator max(|a|,|b|,1e-30)
  double rel_inf_norm = 0.0;   // ||a-b||_inf / max(||b||_inf, 1e-30)
  bool bitwise_equal = true;
  size_t worst_index = 0;
  bool within(double rel_tol) const { return rel_inf_norm <= rel_tol; }
};

// Element-wise comparison; the relative denominator is
// max(|a|, |b|, 1e-30). Throws DimensionMismatchError on length mismatch.
ComparisonReport compare(std::span<const float> a, std::span<const float> b);
ComparisonReport compare(std::span<const double> a, std::span<const double> b);
ComparisonReport compare(std::span<const float> a, std::span<const double> b);

}  // namespace tilesim::oracle
