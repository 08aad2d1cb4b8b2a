// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "agropanel/basis.hpp"
#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"
#include "agropanel/rng.hpp"
#include "test_util.hpp"

using namespace agropanel;

namespace {

BinGrid bins_0_39() { return {0.0, 39.0, 1.0, true, true}; }

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

// Projection residual of each column of `a` onto the column space of `b`.
double max_projection_residual(const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& b) {
  Eigen::MatrixXd coef =
      (b.transpose() * b).ldlt().solve(b.transpose() * a);
  Eigen::MatrixXd resid = a - b * coef;
  return resid.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("step basis: full range collapses to one column of ones") {
  BinGrid bins{0.0, 40.0, 1.0, true, true};
  auto b = step_basis(bins, 40.0);
  CHECK(b.J() == 1);
  CHECK(b.values.minCoeff() == 1.0);
  CHECK(b.values.maxCoeff() == 1.0);
}

TEST_CASE("step basis: width equal to bin width is the identity") {
  BinGrid bins{0.0, 10.0, 1.0, true, true};
  auto b = step_basis(bins, 1.0);
  CHECK(b.values == Eigen::MatrixXd::Identity(10, 10));
}

TEST_CASE("step basis: 0-40 with 5C steps gives eight columns") {
  BinGrid bins{0.0, 40.0, 1.0, true, true};
  auto b = step_basis(bins, 5.0);
  CHECK(b.K() == 40);
  CHECK(b.J() == 8);
  CHECK_FALSE(b.truncated_last_step);
  for (int k = 0; k < 40; ++k) {
    CHECK(b.values(k, k / 5) == 1.0);
    CHECK(b.values.row(k).sum() == 1.0);
  }
}

TEST_CASE("step basis: sub-bin step width rejected") {
  BinGrid bins{0.0, 10.0, 1.0, true, true};
  CHECK_THROWS_AS(step_basis(bins, 0.5), ValidationError);
}

TEST_CASE("step basis nesting: width w lives inside the width-w/2 space") {
  BinGrid bins{0.0, 40.0, 1.0, true, true};
  auto wide = step_basis(bins, 10.0);
  auto narrow = step_basis(bins, 5.0);
  CHECK(max_projection_residual(wide.values, narrow.values) < 1e-10);
}

TEST_CASE("ncs basis: headline shapes 39x3, 39x7, 39x12") {
  for (int df : {3, 7, 12}) {
    auto b = ncs_basis(bins_0_39(), df);
    CHECK(b.K() == 39);
    CHECK(b.J() == df);
    b.validate();
  }
}

TEST_CASE("ncs basis: linear beyond the boundary knots") {
  auto b = ncs_basis(bins_0_39(), 7);
  // Natural splines extrapolate linearly: evaluate on points past each
  // boundary and difference twice.
  std::vector<double> right = {40.5, 41.5, 42.5, 43.5};
  std::vector<double> left = {-4.5, -3.5, -2.5, -1.5};
  for (const auto& pts : {right, left}) {
    Eigen::MatrixXd v = ncs_evaluate(b, pts);
    for (int j = 0; j < b.J(); ++j) {
      for (int i = 0; i + 2 < static_cast<int>(pts.size()); ++i) {
        double second_diff = v(i, j) - 2 * v(i + 1, j) + v(i + 2, j);
        CHECK(std::abs(second_diff) < 1e-8);
      }
    }
  }
}

TEST_CASE("ncs basis: spans the textbook truncated-power construction") {
  const int df = 6;
  auto b = ncs_basis(bins_0_39(), df);
  // Independent construction: full natural-spline space on the same knots,
  // built from {1, x, d_k(x) - d_{m-1}(x)} with d_k the truncated-power
  // ratios. The production basis plus a constant column must span it and
  // vice versa.
  const auto& knots = b.knots;
  const int m = static_cast<int>(knots.size());
  Eigen::MatrixXd full(b.K(), m);
  for (int k = 0; k < b.K(); ++k) {
    double x = b.eval_points[k];
    full(k, 0) = 1.0;
    full(k, 1) = x;
    auto d = [&](int idx) {
      auto plus3 = [](double v) { return v > 0 ? v * v * v : 0.0; };
      return (plus3(x - knots[idx]) - plus3(x - knots[m - 1])) /
             (knots[m - 1] - knots[idx]);
    };
    for (int j = 0; j < m - 2; ++j) full(k, 2 + j) = d(j) - d(m - 2);
  }
  Eigen::MatrixXd with_const(b.K(), b.J() + 1);
  with_const.col(0).setOnes();
  with_const.rightCols(b.J()) = b.values;
  CHECK(max_projection_residual(full, with_const) < 1e-8);
  CHECK(max_projection_residual(with_const, full) < 1e-8);
}

TEST_CASE("ncs basis: df above bin count is a rank error") {
  BinGrid small{0.0, 5.0, 1.0, true, true};
  CHECK_THROWS_AS(ncs_basis(small, 6), ValidationError);
}

TEST_CASE("chebyshev basis: degree 0, bounds, closed form for T2") {
  BinGrid bins = bins_0_39();
  SUBCASE("degree 0 is a single column of ones") {
    auto b = chebyshev_basis(bins, 0);
    CHECK(b.J() == 1);
    CHECK(b.values.minCoeff() == 1.0);
    CHECK(b.values.maxCoeff() == 1.0);
  }
  SUBCASE("all entries within [-1, 1]") {
    auto b = chebyshev_basis(bins, 8);
    CHECK(b.values.minCoeff() >= -1.0 - 1e-12);
    CHECK(b.values.maxCoeff() <= 1.0 + 1e-12);
  }
  SUBCASE("T2 equals 2x^2 - 1 at mapped midpoints") {
    auto b = chebyshev_basis(bins, 3);
    for (int k = 0; k < b.K(); ++k) {
      double x = 2.0 * (b.eval_points[k] - bins.lo) / (bins.hi - bins.lo) - 1.0;
      CHECK(b.values(k, 2) ==
            doctest::Approx(2 * x * x - 1).epsilon(1e-12));
    }
  }
  SUBCASE("degree + 1 beyond bin count is a rank error") {
    BinGrid tiny{0.0, 3.0, 1.0, true, true};
    CHECK_THROWS_AS(chebyshev_basis(tiny, 3), ValidationError);
  }
}

TEST_CASE("basis csv export holds every k,j,value triplet") {
  testutil::TempDir dir("basis_csv");
  BinGrid bins{0.0, 6.0, 1.0, true, true};
  auto b = ncs_basis(bins, 3);
  b.write_csv(dir.file("b.csv"));
  auto t = csv::read_file(dir.file("b.csv"));
  CHECK(t.header == std::vector<std::string>{"k", "j", "value"});
  REQUIRE(t.rows.size() == 18);  // 6 bins x 3 columns
  for (const auto& row : t.rows) {
    int k = static_cast<int>(csv::parse_long(row[0], "b"));
    int j = static_cast<int>(csv::parse_long(row[1], "b"));
    CHECK(csv::parse_double(row[2], "b") == b.values(k, j));
  }
}

TEST_CASE("tensor basis: identity x identity = identity") {
  BinGrid b4{0.0, 4.0, 1.0, true, true};
  BinGrid b3{0.0, 3.0, 1.0, true, true};
  auto i4 = step_basis(b4, 1.0);
  auto i3 = step_basis(b3, 1.0);
  auto t = tensor_basis(i4, i3);
  CHECK(t.values == Eigen::MatrixXd::Identity(12, 12));
}

TEST_CASE("tensor basis: 36-bin x 7-month shapes to 252 x 18") {
  BinGrid temp{0.0, 36.0, 1.0, true, true};   // K1 = 36
  BinGrid month{0.0, 7.0, 1.0, true, true};   // K2 = 7
  auto b1 = ncs_basis(temp, 6);
  auto b2 = ncs_basis(month, 3);
  auto t = tensor_basis(b1, b2);
  CHECK(t.K() == 252);
  CHECK(t.J() == 18);
}

TEST_CASE("tensor basis: flattened product equals the two-sided transform") {
  Rng rng(55);
  BasisMatrix b1, b2;
  b1.kind = BasisMatrix::Kind::ncs;
  b1.values = random_matrix(4, 2, rng);
  b2.kind = BasisMatrix::Kind::ncs;
  b2.values = random_matrix(3, 2, rng);
  auto t = tensor_basis(b1, b2);

  Eigen::RowVectorXd z(12);
  for (int i = 0; i < 12; ++i) z[i] = rng.normal();
  Eigen::RowVectorXd via_kron = z * t.values;

  // Reshape z into K1 x K2 (row k1*K2 + k2) and transform both sides.
  Eigen::MatrixXd z2d(4, 3);
  for (int k1 = 0; k1 < 4; ++k1) {
    for (int k2 = 0; k2 < 3; ++k2) z2d(k1, k2) = z[k1 * 3 + k2];
  }
  Eigen::MatrixXd x2d = b1.values.transpose() * z2d * b2.values;
  for (int j1 = 0; j1 < 2; ++j1) {
    for (int j2 = 0; j2 < 2; ++j2) {
      CHECK(via_kron[j1 * 2 + j2] ==
            doctest::Approx(x2d(j1, j2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("tensor flattening reshape is an isomorphism") {
  Rng rng(56);
  Eigen::MatrixXd m = random_matrix(5, 4, rng);
  // vec then reshape back.
  Eigen::VectorXd v(20);
  for (int a = 0; a < 5; ++a) {
    for (int c = 0; c < 4; ++c) v[a * 4 + c] = m(a, c);
  }
  Eigen::MatrixXd back(5, 4);
  for (int a = 0; a < 5; ++a) {
    for (int c = 0; c < 4; ++c) back(a, c) = v[a * 4 + c];
  }
  CHECK(back == m);
}

TEST_CASE("reduce: identity, ones column, and brute-force oracle") {
  Rng rng(60);
  BinGrid bins{0.0, 6.0, 1.0, true, true};
  Eigen::MatrixXd z = random_matrix(9, 6, rng);

  auto ident = step_basis(bins, 1.0);
  CHECK(reduce(z, ident) == z);

  auto ones = step_basis(bins, 6.0);
  Eigen::MatrixXd sums = reduce(z, ones);
  for (int i = 0; i < 9; ++i) {
    CHECK(sums(i, 0) == doctest::Approx(z.row(i).sum()).epsilon(1e-12));
  }

  auto ncs = ncs_basis(bins, 3);
  Eigen::MatrixXd x = reduce(z, ncs);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 6; ++k) acc += z(i, k) * ncs.values(k, j);
      CHECK(x(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
  }

  Eigen::MatrixXd bad = random_matrix(9, 5, rng);
  CHECK_THROWS_AS(reduce(bad, ncs), ShapeError);
}

TEST_CASE("recover_curve: identity basis, zero covariance, dense oracle") {
  Rng rng(61);
  BinGrid bins{0.0, 5.0, 1.0, true, true};
  auto ident = step_basis(bins, 1.0);
  Eigen::VectorXd gamma(5);
  for (int i = 0; i < 5; ++i) gamma[i] = rng.normal();

  SUBCASE("identity basis returns gamma and sqrt diagonal") {
    Eigen::MatrixXd half = random_matrix(5, 5, rng);
    Eigen::MatrixXd v = half * half.transpose();
    auto curve = recover_curve(gamma, v, ident);
    for (int i = 0; i < 5; ++i) {
      CHECK(curve.beta[i] == gamma[i]);
      CHECK(curve.se[i] == doctest::Approx(std::sqrt(v(i, i))).epsilon(1e-12));
    }
  }
  SUBCASE("zero covariance gives zero standard errors") {
    auto curve = recover_curve(gamma, Eigen::MatrixXd::Zero(5, 5), ident);
    for (int i = 0; i < 5; ++i) CHECK(curve.se[i] == 0.0);
  }
  SUBCASE("random case equals explicit dense products") {
    auto b = ncs_basis(bins, 3);
    Eigen::VectorXd g3(3);
    g3 << 0.5, -1.0, 0.25;
    Eigen::MatrixXd half = random_matrix(3, 3, rng);
    Eigen::MatrixXd v = half * half.transpose();
    auto curve = recover_curve(g3, v, b);
    Eigen::VectorXd expect_beta = b.values * g3;
    Eigen::MatrixXd expect_cov = b.values * v * b.values.transpose();
    CHECK((curve.beta - expect_beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((curve.cov - expect_cov).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("asymmetric covariance rejected") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(5, 5);
    v(0, 1) = 1.0;
    CHECK_THROWS_AS(recover_curve(gamma, v, ident), ValidationError);
  }
}
