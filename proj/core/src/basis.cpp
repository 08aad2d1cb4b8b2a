// SPDX-License-Identifier: Apache-2.0
#include "agropanel/basis.hpp"

#include <cmath>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"

namespace agropanel {

namespace {

std::vector<double> midpoints(const BinGrid& bins) {
  bins.validate();
  std::vector<double> m(bins.n_bins());
  for (int k = 0; k < bins.n_bins(); ++k) m[k] = bins.midpoint(k);
  return m;
}

}  // namespace

void BasisMatrix::validate() const {
  if (J() > K()) {
    throw ValidationError("basis: more columns than bins (J > K)");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(values);
  qr.setThreshold(1e-8);
  if (qr.rank() < J()) {
    throw ValidationError("basis: columns are not linearly independent");
  }
}

void BasisMatrix::write_csv(const std::string& path) const {
  csv::Table t;
  t.header = {"k", "j", "value"};
  for (int k = 0; k < K(); ++k) {
    for (int j = 0; j < J(); ++j) {
      t.rows.push_back({std::to_string(k), std::to_string(j),
                        csv::format_double(values(k, j))});
    }
  }
  csv::write_file(path, t);
}

BasisMatrix step_basis(const BinGrid& bins, double step_width) {
  auto m = midpoints(bins);
  if (step_width < bins.width - 1e-12) {
    throw ValidationError("step basis: step width below bin width");
  }
  double per = step_width / bins.width;
  if (std::abs(per - std::lround(per)) > 1e-9) {
    throw ValidationError("step basis: step width must be a multiple of bin "
                          "width");
  }
  int bins_per_step = static_cast<int>(std::lround(per));
  int k_count = static_cast<int>(m.size());
  int j_count = (k_count + bins_per_step - 1) / bins_per_step;

  BasisMatrix b;
  b.kind = BasisMatrix::Kind::step;
  b.eval_points = m;
  b.truncated_last_step = (k_count % bins_per_step) != 0;
  b.values = Eigen::MatrixXd::Zero(k_count, j_count);
  for (int k = 0; k < k_count; ++k) b.values(k, k / bins_per_step) = 1.0;
  b.validate();
  return b;
}

namespace {

// Truncated-power natural spline pieces: d_k(x) as in the usual textbook
// construction; each basis function d_k - d_{m-2} is cubic inside the knot
// span and exactly linear outside it.
double pos_cubed(double v) { return v > 0 ? v * v * v : 0.0; }

double d_term(const std::vector<double>& knots, int k, double x) {
  int last = static_cast<int>(knots.size()) - 1;
  return (pos_cubed(x - knots[k]) - pos_cubed(x - knots[last])) /
         (knots[last] - knots[k]);
}

double ncs_value(const std::vector<double>& knots, int col, double x) {
  if (col == 0) return x;
  int m = static_cast<int>(knots.size());
  return d_term(knots, col - 1, x) - d_term(knots, m - 2, x);
}

}  // namespace

BasisMatrix ncs_basis(const BinGrid& bins, int df) {
  auto m = midpoints(bins);
  int k_count = static_cast<int>(m.size());
  if (df < 2) throw ValidationError("ncs basis: df must be >= 2");
  if (df > k_count) {
    throw ValidationError("ncs basis: df exceeds bin count");
  }

  BasisMatrix b;
  b.kind = BasisMatrix::Kind::ncs;
  b.eval_points = m;
  // df + 1 knots: boundaries at the outer midpoints, df - 1 interior.
  b.knots.resize(df + 1);
  double lo = m.front(), hi = m.back();
  for (int i = 0; i <= df; ++i) {
    b.knots[i] = lo + (hi - lo) * static_cast<double>(i) / df;
  }
  b.values.resize(k_count, df);
  for (int k = 0; k < k_count; ++k) {
    for (int j = 0; j < df; ++j) {
      b.values(k, j) = ncs_value(b.knots, j, m[k]);
    }
  }
  b.validate();
  return b;
}

Eigen::MatrixXd ncs_evaluate(const BasisMatrix& basis,
                             const std::vector<double>& points) {
  if (basis.kind != BasisMatrix::Kind::ncs || basis.knots.empty()) {
    throw ValidationError("ncs_evaluate: basis is not a natural spline");
  }
  Eigen::MatrixXd out(points.size(), basis.J());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int j = 0; j < basis.J(); ++j) {
      out(static_cast<int>(i), j) = ncs_value(basis.knots, j, points[i]);
    }
  }
  return out;
}

BasisMatrix chebyshev_basis(const BinGrid& bins, int degree) {
  auto m = midpoints(bins);
  int k_count = static_cast<int>(m.size());
  if (degree < 0) throw ValidationError("chebyshev basis: degree must be >= 0");
  if (degree + 1 > k_count) {
    throw ValidationError("chebyshev basis: degree + 1 exceeds bin count");
  }

  BasisMatrix b;
  b.kind = BasisMatrix::Kind::chebyshev;
  b.eval_points = m;
  b.values.resize(k_count, degree + 1);
  for (int k = 0; k < k_count; ++k) {
    double x = 2.0 * (m[k] - bins.lo) / (bins.hi - bins.lo) - 1.0;
    b.values(k, 0) = 1.0;
    if (degree >= 1) b.values(k, 1) = x;
    for (int j = 2; j <= degree; ++j) {
      b.values(k, j) = 2.0 * x * b.values(k, j - 1) - b.values(k, j - 2);
    }
  }
  b.validate();
  return b;
}

BasisMatrix tensor_basis(const BasisMatrix& b1, const BasisMatrix& b2) {
  BasisMatrix b;
  b.kind = BasisMatrix::Kind::tensor;
  const int k1 = b1.K(), j1 = b1.J(), k2 = b2.K(), j2 = b2.J();
  b.values.resize(k1 * k2, j1 * j2);
  for (int a = 0; a < k1; ++a) {
    for (int c = 0; c < k2; ++c) {
      for (int p = 0; p < j1; ++p) {
        for (int q = 0; q < j2; ++q) {
          b.values(a * k2 + c, p * j2 + q) = b1.values(a, p) * b2.values(c, q);
        }
      }
    }
  }
  // Rows inherit the first component's evaluation point (variable level).
  b.eval_points.reserve(static_cast<std::size_t>(k1) * k2);
  for (int a = 0; a < k1; ++a) {
    double pt = a < static_cast<int>(b1.eval_points.size())
                    ? b1.eval_points[a]
                    : static_cast<double>(a);
    for (int c = 0; c < k2; ++c) b.eval_points.push_back(pt);
  }
  b.validate();
  return b;
}

Eigen::MatrixXd reduce(const Eigen::MatrixXd& z, const BasisMatrix& basis) {
  if (z.cols() != basis.K()) {
    throw ShapeError("reduce: Z has " + std::to_string(z.cols()) +
                     " columns, basis expects " + std::to_string(basis.K()));
  }
  return z * basis.values;
}

ResponseCurve recover_curve(const Eigen::VectorXd& gamma,
                            const Eigen::MatrixXd& vgamma,
                            const BasisMatrix& basis) {
  if (gamma.size() != basis.J() || vgamma.rows() != basis.J() ||
      vgamma.cols() != basis.J()) {
    throw ShapeError("recover_curve: dimension mismatch with basis");
  }
  double asym = (vgamma - vgamma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw ValidationError("recover_curve: covariance is not symmetric");
  }
  Eigen::MatrixXd v = 0.5 * (vgamma + vgamma.transpose());

  ResponseCurve out;
  out.beta = basis.values * gamma;
  out.cov = basis.values * v * basis.values.transpose();
  out.se.resize(basis.K());
  for (int k = 0; k < basis.K(); ++k) {
    double d = out.cov(k, k);
    if (d < -1e-12) {
      throw ValidationError("recover_curve: covariance is indefinite");
    }
    out.se[k] = std::sqrt(d > 0 ? d : 0.0);
  }
  return out;
}

}  // namespace agropanel
