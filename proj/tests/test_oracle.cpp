#include <doctest.h>

#include <bit>
#include <cmath>

#include "test_matrices.hpp"
#include "tilesim/oracle.hpp"

using namespace tilesim;
using oracle::Mode;
using sparse::CsrMatrix;

TEST_CASE("spmv reference: identity and a hand-checked product") {
  CsrMatrix id = tm_identity(4);
  std::vector<float> x{1, 2, 3, 4};
  CHECK(oracle::spmv_ref(id, x, Mode::kBinary32SameOrder) == x);
  CHECK(oracle::spmv_ref(id, x, Mode::kFloat64) == x);

  CsrMatrix m = tm_from_coo(2, 2, {{0, 0, 2.0f}, {1, 0, 1.0f}, {1, 1, 3.0f}});
  std::vector<float> v{4, 5};
  std::vector<float> y = oracle::spmv_ref(m, v, Mode::kBinary32SameOrder);
  CHECK(y == std::vector<float>{8.0f, 19.0f});
  CHECK(oracle::spmv_ref(m, v, Mode::kFloat64) == y);

  std::vector<float> short_x{1.0f};
  CHECK_THROWS_AS(oracle::spmv_ref(m, short_x, Mode::kFloat64), DimensionMismatchError);
}

TEST_CASE("spmv reference: the two modes diverge under cancellation") {
  // (1e8 + 1) - 1e8 collapses to 0 in binary32 but survives in float64.
  CsrMatrix row = tm_from_coo(1, 3, {{0, 0, 1e8f}, {0, 1, 1.0f}, {0, 2, -1e8f}});
  std::vector<float> ones{1, 1, 1};
  std::vector<float> same = oracle::spmv_ref(row, ones, Mode::kBinary32SameOrder);
  std::vector<float> wide = oracle::spmv_ref(row, ones, Mode::kFloat64);
  CHECK(same[0] == 0.0f);
  CHECK(wide[0] == 1.0f);
}

TEST_CASE("spmv reference: modes agree when everything is exact") {
  // Small integer values and products stay exactly representable.
  CsrMatrix m = tm_from_coo(3, 3, {{0, 0, 3}, {0, 2, -2}, {1, 1, 8}, {2, 0, 5}, {2, 2, 1}});
  std::vector<float> x{2, -1, 4};
  CHECK(oracle::spmv_ref(m, x, Mode::kBinary32SameOrder) ==
        oracle::spmv_ref(m, x, Mode::kFloat64));
}

TEST_CASE("sptrsv reference: identity and hand substitution") {
  CsrMatrix id = tm_identity(3);
  std::vector<float> b{5, 6, 7};
  CHECK(oracle::sptrsv_ref(id, b, Mode::kBinary32SameOrder) == b);

  CsrMatrix L = tm_from_coo(2, 2, {{0, 0, 2.0f}, {1, 0, 1.0f}, {1, 1, 4.0f}});
  std::vector<float> rhs{2, 5};
  std::vector<float> x = oracle::sptrsv_ref(L, rhs, Mode::kBinary32SameOrder);
  CHECK(x == std::vector<float>{1.0f, 1.0f});
  CHECK(oracle::sptrsv_ref(L, rhs, Mode::kFloat64) == x);

  CsrMatrix sing = tm_from_coo(2, 2, {{0, 0, 1.0f}, {1, 0, 1.0f}});
  CHECK_THROWS_AS(oracle::sptrsv_ref(sing, rhs, Mode::kFloat64), SingularMatrixError);
}

TEST_CASE("sptrsv reference: reciprocal path stays within 2 ulp of dividing") {
  CsrMatrix L = tm_from_coo(1, 1, {{0, 0, 3.0f}});
  auto ulp_distance = [](float a, float b) {
    int32_t ia = std::bit_cast<int32_t>(a);
    int32_t ib = std::bit_cast<int32_t>(b);
    return std::abs(int64_t(ia) - int64_t(ib));
  };
  int diverged = 0;
  for (int k = 1; k <= 100; ++k) {
    std::vector<float> b{float(k)};
    float recip = oracle::sptrsv_ref(L, b, Mode::kBinary32SameOrder)[0];
    float divide = oracle::sptrsv_ref(L, b, Mode::kFloat64)[0];
    CHECK(ulp_distance(recip, divide) <= 2);
    if (recip != divide) diverged++;
  }
  CHECK(diverged > 0);  // the two routes are genuinely different
}

TEST_CASE("direct solve: identity, closed form, residual self-check") {
  std::vector<std::vector<double>> id{{1, 0}, {0, 1}};
  std::vector<double> b{3, 4};
  CHECK(oracle::direct_solve_ref(id, b) == b);

  std::vector<std::vector<double>> a{{4, 1}, {1, 3}};
  std::vector<double> rhs{1, 2};
  std::vector<double> x = oracle::direct_solve_ref(a, rhs);
  CHECK(std::fabs(x[0] - 1.0 / 11.0) < 1e-12);
  CHECK(std::fabs(x[1] - 7.0 / 11.0) < 1e-12);

  CsrMatrix spd = tm_spd_random(64, 0.2, 9);
  auto dense = oracle::dense_from_csr(spd);
  std::vector<double> rb(64);
  for (int i = 0; i < 64; ++i) rb[i] = std::cos(double(i));
  std::vector<double> sol = oracle::direct_solve_ref(dense, rb);
  double worst = 0;
  for (int i = 0; i < 64; ++i) {
    double acc = 0;
    for (int j = 0; j < 64; ++j) acc += dense[i][j] * sol[j];
    worst = std::max(worst, std::fabs(acc - rb[i]) / std::max(1.0, std::fabs(rb[i])));
  }
  CHECK(worst < 1e-9);

  std::vector<std::vector<double>> singular{{1, 1}, {1, 1}};
  CHECK_THROWS_AS(oracle::direct_solve_ref(singular, b), SingularMatrixError);
}

TEST_CASE("compare reports diffs and bitwise equality") {
  std::vector<float> a{1.0f, 2.0f};
  oracle::ComparisonReport same = oracle::compare(std::span<const float>(a), a);
  CHECK(same.bitwise_equal);
  CHECK(same.max_abs_diff == 0.0);
  CHECK(same.max_rel_diff == 0.0);

  std::vector<float> b{1.0f + 1e-7f, 2.0f};
  oracle::ComparisonReport close = oracle::compare(std::span<const float>(a), b);
  CHECK_FALSE(close.bitwise_equal);
  CHECK(close.max_rel_diff == doctest::Approx(1e-7).epsilon(0.3));
  CHECK(close.worst_index == 0);

  std::vector<float> shorter{1.0f};
  CHECK_THROWS_AS(oracle::compare(std::span<const float>(a), shorter),
                  DimensionMismatchError);

  // Signed zero differs bitwise but not numerically.
  std::vector<float> z1{0.0f}, z2{-0.0f};
  oracle::ComparisonReport z = oracle::compare(std::span<const float>(z1), z2);
  CHECK_FALSE(z.bitwise_equal);
  CHECK(z.max_abs_diff == 0.0);
}
