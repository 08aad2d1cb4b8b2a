// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "agropanel/aggregate.hpp"
#include "agropanel/inference.hpp"
#include "agropanel/tables.hpp"
#include "agropanel/thermal.hpp"

namespace agropanel {

/// Piecewise-linear function, flat beyond its outer knots.
struct PiecewiseLinear {
  std::vector<double> xs;
  std::vector<double> ys;

  double operator()(double x) const;
};

enum class ErrorModel { iid, sar, clustered };

struct DGPConfig {
  std::uint64_t seed = 1;
  int n_units = 50;
  int n_years = 10;
  int first_year = 1995;
  int grid_nrows = 12;
  int grid_ncols = 12;
  int n_stations = 15;

  // Season and binning.
  int season_start_doy = 91;  // April 1 (day of year, 1-based, 365-day year)
  int season_days = 183;      // April-September
  BinGrid bins{0.0, 39.0, 1.0, true, true};
  SineConfig sine{};

  // Climate field: unit mean temperatures span [tmean_lo, tmean_hi] from
  // south to north, with a seasonal sinusoid and daily noise on top.
  double tmean_lo = 14.0;
  double tmean_hi = 26.0;
  double season_amplitude = 6.0;
  double diurnal_range = 9.0;
  double diurnal_sd = 2.0;  // day-to-day spread of the tmax-tmin gap
  double day_sd = 3.0;
  double year_sd = 0.8;  // common warm/cold-year shift per unit-year

  // Outcome: y = sum_k g(m_k) z_k + bp p + bp2 p^2 + alpha_i + trend t + eps.
  PiecewiseLinear g{{0.0, 30.0, 39.0}, {0.0, 0.15, -0.30}};
  double beta_precip = 0.0;
  double beta_precip_sq = 0.0;
  double sigma_unit_fe = 0.0;
  double trend_per_year = 0.0;
  double sigma_eps = 0.05;
  ErrorModel error_model = ErrorModel::iid;
  double sar_lambda = 0.0;
  double cluster_rho = 0.0;
  int n_states = 4;

  void validate() const;
};

struct SynthTruth {
  std::vector<double> g_at_midpoints;
  double beta_precip = 0;
  double beta_precip_sq = 0;
  double trend_per_year = 0;
  std::vector<double> unit_fe;
  ErrorModel error_model = ErrorModel::iid;
  double sar_lambda = 0;
};

struct SynthDailySeries {
  std::string unit_id;
  int year = 0;
  std::vector<std::string> dates;  // ISO, season window
  std::vector<double> tmin;
  std::vector<double> tmax;
};

struct SynthData {
  StationTable stations;
  GridStack stack;  // daily tmax over the first simulated month
  AdminUnits admin_units;
  ProjectionMatrix projection;
  BinsTable bins;
  PanelTable panel;    // columns: precip, tmean, state
  PanelTable weather;  // season aggregates for the specification grid
  std::vector<SynthDailySeries> daily;
  SpatialWeights w;  // rook lattice over units (row-normalized)
  std::vector<std::string> unit_order;
  SynthTruth truth;
};

/// Instantiates the data generating process behind the estimation suite.
/// Identical seeds give identical output; all draws run through per-unit,
/// per-year counter-based streams.
SynthData generate(const DGPConfig& config);

/// Reference OLS by explicit normal equations and Gauss-Jordan elimination;
/// shares no kernels with the production fitter. Throws on singular XtX.
Eigen::VectorXd oracle_dense_ols(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y);

/// Day-of-year (1-based, 365-day calendar) to ISO date.
std::string doy_to_iso(int year, int doy);

}  // namespace agropanel
