// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "agropanel/thermal.hpp"

namespace agropanel {

/// K-bin by J-regressor basis matrix used to reduce dimensionality before
/// estimation (X = Z B) and to recover per-bin effects afterwards
/// (beta = B Gamma).
struct BasisMatrix {
  enum class Kind { step, ncs, chebyshev, tensor };

  Kind kind = Kind::step;
  Eigen::MatrixXd values;           // K x J
  std::vector<double> eval_points;  // bin midpoints (K)
  std::vector<double> knots;        // ncs only
  bool truncated_last_step = false; // step only: range not divisible

  int K() const { return static_cast<int>(values.rows()); }
  int J() const { return static_cast<int>(values.cols()); }

  /// Checks J <= K and full column rank (QR with 1e-8 threshold).
  void validate() const;

  void write_csv(const std::string& path) const;  // `k,j,value`
};

/// Indicator basis aggregating bins into steps of `step_width` degrees.
BasisMatrix step_basis(const BinGrid& bins, double step_width);

/// Natural cubic spline basis with df columns, evaluated at bin midpoints.
/// Boundary knots sit at the first and last midpoints with df-1 interior
/// knots equally spaced between them. The basis spans the natural-spline
/// space modulo constants, so it stays full rank after fixed-effect
/// demeaning of exposures that sum to a fixed season length.
BasisMatrix ncs_basis(const BinGrid& bins, int df);

/// Evaluates the same ncs basis functions at arbitrary points (linear beyond
/// the boundary knots).
Eigen::MatrixXd ncs_evaluate(const BasisMatrix& basis,
                             const std::vector<double>& points);

/// Chebyshev polynomials T_0..T_degree on [lo, hi] mapped to [-1, 1].
BasisMatrix chebyshev_basis(const BinGrid& bins, int degree);

/// Kronecker product basis: row k1*K2 + k2, column j1*J2 + j2. A flattened
/// observation row z (same ordering) satisfies
/// (z B)[j1*J2 + j2] = (B1' Z2d B2)[j1, j2] with Z2d[k1, k2] = z[k1*K2 + k2].
BasisMatrix tensor_basis(const BasisMatrix& b1, const BasisMatrix& b2);

/// X = Z B.
Eigen::MatrixXd reduce(const Eigen::MatrixXd& z, const BasisMatrix& basis);

/// Per-bin marginal effects recovered from reduced-space estimates.
struct ResponseCurve {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;
};

ResponseCurve recover_curve(const Eigen::VectorXd& gamma,
                            const Eigen::MatrixXd& vgamma,
                            const BasisMatrix& basis);

}  // namespace agropanel
