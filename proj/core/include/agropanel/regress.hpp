// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "agropanel/basis.hpp"
#include "agropanel/tables.hpp"
#include "agropanel/thermal.hpp"

namespace agropanel {

enum class TrendSpec { none, pooled_quadratic, by_region_quadratic };

/// Panel regression specification. Fixed-effect tokens: "unit", "year", a
/// panel column name (values rounded to categories), or "<col>*year" for an
/// interaction such as state-by-year effects.
struct ModelSpec {
  std::string outcome = "y";  // the key column or any regressor column
  bool log_outcome = false;
  std::vector<std::string> regressors;
  std::vector<std::string> fixed_effects;
  TrendSpec trends = TrendSpec::none;
  std::string region_col;  // by-region trends
  std::string weight_col;  // optional WLS weights
};

struct FitResult {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd vgamma;
  Eigen::VectorXd residuals;  // demeaned-scale residuals
  double dof = 0;
  double r2 = 0;         // on the raw outcome
  double r2_within = 0;  // on the demeaned outcome
  double adj_r2 = 0;     // counts absorbed dummy dimensions
  std::size_t n_obs = 0;
  std::string se_type = "iid";
  std::vector<std::string> regressor_names;  // incl. generated trend columns
  int absorbed_dims = 0;

  // Internals consumed by the sandwich estimators.
  Eigen::MatrixXd xtil;            // demeaned (and sqrt-weighted) regressors
  std::vector<std::string> row_units;
  std::vector<int> row_years;
};

/// OLS with fixed effects absorbed by alternating projections (tolerance
/// 1e-10 on the largest remaining cell mean, capped at 10,000 sweeps).
/// Collinear regressors raise a rank error naming a dropped column; with
/// fixed effects present, a regressor constant within every absorbed cell is
/// rejected. A weight column switches the solve to weighted least squares.
FitResult fit_within(const PanelTable& panel, const ModelSpec& spec);

/// Panel + spec pairs produced by the model family builders.
struct SpecBuild {
  PanelTable panel;
  ModelSpec spec;
};

/// Growing-season mean model: T, T^2, P, P^2 with unit fixed effects and the
/// requested trend. Derived columns are named <col>_sq.
SpecBuild build_spec_quadratic(const PanelTable& panel,
                               const std::string& temp_col,
                               const std::string& precip_col,
                               TrendSpec trends = TrendSpec::none,
                               const std::string& region_col = "");

/// Backward-looking climatology: mean of the `window` years before `year`.
/// The series must hold one value per year; duplicates or an incomplete
/// window raise errors.
double rolling_normal(const std::vector<std::pair<int, double>>& series,
                      int year, int window = 30);

/// Ricardian cross-section: regressors are 30-year climate normals (linear
/// and quadratic) built from a weather history panel, with year fixed
/// effects. Rows without a complete window are dropped.
SpecBuild build_spec_ricardian(const PanelTable& cross_section,
                               const PanelTable& weather_history,
                               const std::string& var, int window = 30);

/// Hybrid weather/climate model: W-bar, W-bar^2 and (W - W-bar)^2 with
/// region fixed effects and by-region trends.
SpecBuild build_spec_hybrid(const PanelTable& panel,
                            const PanelTable& weather_history,
                            const std::string& var,
                            const std::string& region_col, int window = 30);

/// Cross-section of multi-year-average changes: y and each named column
/// averaged within two disjoint year ranges and differenced (with the
/// squared column differenced as mean_b^2 - mean_a^2, column <col>_sq_diff).
struct LongDifference {
  PanelTable table;  // one row per surviving unit, year = 0
  int n_dropped = 0;
};

LongDifference long_difference(const PanelTable& panel, int a_lo, int a_hi,
                               int b_lo, int b_hi,
                               const std::vector<std::string>& weather_cols);

struct Impact {
  double estimate = 0;
  double se = 0;
};

/// Mean effect of warming the named temperature column by `delta` through
/// its polynomial terms (<col>, <col>_sq, <col>_cu where present), with a
/// delta-method standard error.
Impact warming_impact_polynomial(const FitResult& fit, const PanelTable& panel,
                                 const std::string& temp_col, double delta);

/// Mean effect of shifting exposure up by delta degrees through a basis fit.
/// delta must be a whole number of bin widths; mass clamps into the end
/// bins, so total exposure per observation is conserved. The basis columns
/// are assumed to be the first J regressors of the fit.
Impact warming_impact_binned(const FitResult& fit, const Eigen::MatrixXd& z,
                             const BasisMatrix& basis, double bin_width,
                             double delta);

/// Shifts one exposure row up by `shift` bins with end clamping.
std::vector<double> shift_exposure(const std::vector<double>& z, int shift);

/// Joins exposure rows onto panel rows by (unit_id, year), appends the
/// reduced columns X = Z B named <prefix>0..<prefix>{J-1}, and returns Z
/// aligned with the panel rows.
Eigen::MatrixXd attach_basis_columns(PanelTable& panel, const BinsTable& bins,
                                     const BasisMatrix& basis,
                                     const std::string& prefix = "xb");

}  // namespace agropanel
