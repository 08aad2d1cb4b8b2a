// SPDX-License-Identifier: Apache-2.0
#include "agropanel/synth.hpp"

#include <algorithm>
#include <cmath>

#include "agropanel/errors.hpp"
#include "agropanel/rng.hpp"

namespace agropanel {

double PiecewiseLinear::operator()(double x) const {
  if (xs.empty() || xs.size() != ys.size()) {
    throw ValidationError("piecewise linear: empty or ragged knots");
  }
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t hi = it - xs.begin();
  double t = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
  return ys[hi - 1] + t * (ys[hi] - ys[hi - 1]);
}

void DGPConfig::validate() const {
  if (n_units < 1 || n_years < 1 || grid_nrows < 1 || grid_ncols < 1 ||
      n_stations < 1 || season_days < 1) {
    throw ValidationError("dgp: counts must be positive");
  }
  if (season_start_doy < 1 || season_start_doy + season_days - 1 > 365) {
    throw ValidationError("dgp: season must fit inside one 365-day year");
  }
  bins.validate();
  sine.validate();
  if (error_model == ErrorModel::sar &&
      !(sar_lambda > -1.0 && sar_lambda < 1.0)) {
    throw ValidationError("dgp: sar lambda must lie in (-1, 1) for a "
                          "row-normalized W");
  }
  if (error_model == ErrorModel::clustered &&
      !(cluster_rho >= 0.0 && cluster_rho < 1.0)) {
    throw ValidationError("dgp: cluster rho must lie in [0, 1)");
  }
}

std::string doy_to_iso(int year, int doy) {
  static const int days_in[12] = {31, 28, 31, 30, 31, 30,
                                  31, 31, 30, 31, 30, 31};
  int month = 0;
  while (doy > days_in[month]) {
    doy -= days_in[month];
    ++month;
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month + 1, doy);
  return buf;
}

namespace {

struct SeasonWindow {
  int start_doy;
  int days;
};

// Season mean of a 365-day series over [start, start + len).
double window_mean(const std::vector<double>& daily, int start_doy, int len) {
  double s = 0;
  for (int d = 0; d < len; ++d) s += daily[start_doy - 1 + d];
  return s / len;
}

}  // namespace

SynthData generate(const DGPConfig& config) {
  config.validate();
  Rng root(config.seed);

  SynthData out;
  const int nu = config.n_units;
  const int ny = config.n_years;

  // Unit lattice: as square as n_units allows, row-major unit ids.
  int urows = static_cast<int>(std::sqrt(static_cast<double>(nu)));
  while (nu % urows != 0) --urows;
  int ucols = nu / urows;
  out.w = SpatialWeights::rook_lattice(urows, ucols, true);

  char idbuf[16];
  for (int u = 0; u < nu; ++u) {
    std::snprintf(idbuf, sizeof(idbuf), "u%03d", u);
    out.unit_order.push_back(idbuf);
  }

  // Grid and admin units: grid cells assigned to units by proportional
  // blocks, equal membership weights within a unit.
  Grid header;
  header.ncols = config.grid_ncols;
  header.nrows = config.grid_nrows;
  header.xll = -100.0;
  header.yll = 35.0;
  header.cellsize = 0.25;
  header.nodata = -9999.0;
  header.values.assign(header.size(), 0.0);

  out.admin_units.units.resize(nu);
  for (int u = 0; u < nu; ++u) out.admin_units.units[u].unit_id = out.unit_order[u];
  std::vector<std::vector<int>> unit_cells(nu);
  for (int r = 0; r < header.nrows; ++r) {
    int ur = std::min(urows - 1, r * urows / header.nrows);
    for (int c = 0; c < header.ncols; ++c) {
      int uc = std::min(ucols - 1, c * ucols / header.ncols);
      unit_cells[ur * ucols + uc].push_back(r * header.ncols + c);
    }
  }
  for (int u = 0; u < nu; ++u) {
    double w = 1.0 / static_cast<double>(unit_cells[u].size());
    for (int cell : unit_cells[u]) {
      out.admin_units.units[u].cell_weights.emplace_back(cell, w);
    }
  }
  out.admin_units.bind_grid(header);
  Grid uniform = header;
  uniform.values.assign(header.size(), 1.0);
  out.projection = build_projection(out.admin_units, uniform);

  // Unit climates: south-north gradient in mean temperature.
  std::vector<double> unit_mean(nu);
  for (int u = 0; u < nu; ++u) {
    int ur = u / ucols;
    double frac = urows > 1 ? static_cast<double>(ur) / (urows - 1) : 0.5;
    unit_mean[u] = config.tmean_hi - frac * (config.tmean_hi - config.tmean_lo);
  }

  // Truth record.
  out.truth.g_at_midpoints.resize(config.bins.n_bins());
  for (int k = 0; k < config.bins.n_bins(); ++k) {
    out.truth.g_at_midpoints[k] = config.g(config.bins.midpoint(k));
  }
  out.truth.beta_precip = config.beta_precip;
  out.truth.beta_precip_sq = config.beta_precip_sq;
  out.truth.trend_per_year = config.trend_per_year;
  out.truth.error_model = config.error_model;
  out.truth.sar_lambda = config.sar_lambda;
  out.truth.unit_fe.resize(nu);
  Rng fe_stream = root.derive(0x0FE);
  for (int u = 0; u < nu; ++u) {
    out.truth.unit_fe[u] =
        config.sigma_unit_fe > 0 ? fe_stream.normal(0, config.sigma_unit_fe)
                                 : 0.0;
  }

  // State assignment for clustering: contiguous blocks of unit rows.
  std::vector<int> state_of(nu);
  for (int u = 0; u < nu; ++u) {
    int ur = u / ucols;
    state_of[u] = std::min(config.n_states - 1,
                           ur * config.n_states / std::max(urows, 1));
  }

  // Error terms. SAR errors need a per-year joint draw.
  std::vector<std::vector<double>> eps(ny, std::vector<double>(nu, 0.0));
  Rng eps_stream = root.derive(0xE25);
  if (config.error_model == ErrorModel::sar && config.sar_lambda != 0.0) {
    Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(nu, nu) - config.sar_lambda * out.w.dense();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd eta(nu);
    for (int t = 0; t < ny; ++t) {
      Rng ys = eps_stream.derive(t);
      for (int u = 0; u < nu; ++u) eta[u] = ys.normal(0, config.sigma_eps);
      Eigen::VectorXd e = lu.solve(eta);
      for (int u = 0; u < nu; ++u) eps[t][u] = e[u];
    }
  } else if (config.error_model == ErrorModel::clustered &&
             config.cluster_rho > 0.0) {
    for (int t = 0; t < ny; ++t) {
      Rng ys = eps_stream.derive(t);
      std::vector<double> shock(config.n_states);
      for (auto& s : shock) s = ys.normal();
      for (int u = 0; u < nu; ++u) {
        double own = ys.normal();
        eps[t][u] = config.sigma_eps * (std::sqrt(config.cluster_rho) *
                                            shock[state_of[u]] +
                                        std::sqrt(1 - config.cluster_rho) * own);
      }
    }
  } else {
    for (int t = 0; t < ny; ++t) {
      Rng ys = eps_stream.derive(t);
      for (int u = 0; u < nu; ++u) eps[t][u] = ys.normal(0, config.sigma_eps);
    }
  }

  // Panel and weather tables.
  out.panel.add_column("precip");
  out.panel.add_column("tmean");
  out.panel.add_column("state");
  const char* season_names[3] = {"mar_aug", "apr_sep", "annual"};
  const SeasonWindow windows[3] = {{60, 184}, {91, 183}, {1, 365}};
  for (const char* var : {"tmax", "tmean", "tmin", "ppt"}) {
    for (const char* season : season_names) {
      out.weather.add_column(std::string(var) + "_" + season);
    }
  }

  out.bins.n_bins = config.bins.n_bins();
  const int k_count = config.bins.n_bins();
  std::vector<double> tmean_daily(365), tmin_daily(365), tmax_daily(365);
  constexpr double two_pi = 6.283185307179586;

  for (int u = 0; u < nu; ++u) {
    for (int t = 0; t < ny; ++t) {
      Rng stream = root.derive(1 + static_cast<std::uint64_t>(u) * 100000 + t);
      int year = config.first_year + t;
      double year_shift = stream.normal(0, config.year_sd);

      for (int d = 0; d < 365; ++d) {
        double seasonal =
            -config.season_amplitude * std::cos(two_pi * (d - 15) / 365.0);
        double noise = stream.normal(0, config.day_sd);
        tmean_daily[d] = unit_mean[u] + seasonal + year_shift + noise;
        double half = 0.5 * std::max(0.5, config.diurnal_range +
                                              config.diurnal_sd *
                                                  stream.normal());
        tmin_daily[d] = tmean_daily[d] - half;
        tmax_daily[d] = tmean_daily[d] + half;
      }

      // Season exposure bins via the intra-day reconstruction.
      SynthDailySeries daily;
      daily.unit_id = out.unit_order[u];
      daily.year = year;
      daily.tmin.resize(config.season_days);
      daily.tmax.resize(config.season_days);
      daily.dates.resize(config.season_days);
      for (int d = 0; d < config.season_days; ++d) {
        int doy = config.season_start_doy + d;
        daily.tmin[d] = tmin_daily[doy - 1];
        daily.tmax[d] = tmax_daily[doy - 1];
        daily.dates[d] = doy_to_iso(year, doy);
      }
      auto series = sine_series(daily.tmin, daily.tmax, config.sine);
      ExposureBins z = bin_exposure(series, config.bins);
      z.unit_id = out.unit_order[u];
      z.period = std::to_string(year);

      double precip = 400.0 + 120.0 * stream.normal() +
                      40.0 * std::max(0.0, stream.normal());
      if (precip < 5.0) precip = 5.0;

      double signal = 0;
      for (int k = 0; k < k_count; ++k) {
        signal += out.truth.g_at_midpoints[k] * z.z[k];
      }
      double y = signal + config.beta_precip * precip +
                 config.beta_precip_sq * precip * precip +
                 out.truth.unit_fe[u] + config.trend_per_year * t + eps[t][u];

      out.panel.unit_ids.push_back(out.unit_order[u]);
      out.panel.years.push_back(year);
      out.panel.y.push_back(y);
      double season_tmean =
          window_mean(tmean_daily, config.season_start_doy, config.season_days);
      out.panel.data[0].push_back(precip);
      out.panel.data[1].push_back(season_tmean);
      out.panel.data[2].push_back(static_cast<double>(state_of[u]));

      out.weather.unit_ids.push_back(out.unit_order[u]);
      out.weather.years.push_back(year);
      out.weather.y.push_back(0.0);
      int wc = 0;
      for (const auto* series_ptr :
           {&tmax_daily, &tmean_daily, &tmin_daily}) {
        for (const auto& win : windows) {
          out.weather.data[wc++].push_back(
              window_mean(*series_ptr, win.start_doy, win.days));
        }
      }
      for (const auto& win : windows) {
        // Season precipitation scales with window length.
        out.weather.data[wc++].push_back(precip * win.days / 365.0);
      }

      out.bins.rows.push_back(std::move(z));
      out.daily.push_back(std::move(daily));
    }
  }

  // Stations: random cells, one month of daily tmax/tmin in the first year.
  Rng st_stream = root.derive(0x57A);
  for (int s = 0; s < config.n_stations; ++s) {
    std::snprintf(idbuf, sizeof(idbuf), "s%03d", s);
    int cell = static_cast<int>(st_stream.below(header.size()));
    LatLon pos = header.cell_center(cell / header.ncols, cell % header.ncols);
    for (int d = 0; d < 28; ++d) {
      std::string date = doy_to_iso(config.first_year, 182 + d);
      double base = 24.0 + 4.0 * st_stream.normal();
      StationTable::Record rec{std::string(idbuf), pos.lat, pos.lon, date,
                               WeatherVar::tmax, base + 5.0};
      out.stations.records.push_back(rec);
      rec.variable = WeatherVar::tmin;
      rec.value = base - 5.0;
      out.stations.records.push_back(rec);
    }
  }
  out.stations.validate();

  // Demo stack: first 28 days of the first year, gridded tmax built from the
  // first unit-year daily draw plus a smooth spatial field.
  out.stack.header = header;
  out.stack.header.values.clear();
  Rng gs = root.derive(0x6D1);
  std::vector<double> cell_offset(header.size());
  for (auto& v : cell_offset) v = gs.normal(0, 1.5);
  for (int d = 0; d < 28; ++d) {
    std::vector<double> layer(header.size());
    double base = 22.0 + 3.0 * std::sin(two_pi * d / 28.0);
    for (std::size_t i = 0; i < header.size(); ++i) {
      int r = static_cast<int>(i) / header.ncols;
      layer[i] = base + cell_offset[i] + 0.2 * (header.nrows - r);
    }
    out.stack.labels.push_back(doy_to_iso(config.first_year, 182 + d));
    out.stack.layers.push_back(std::move(layer));
  }

  out.panel.validate();
  out.weather.validate();
  return out;
}

Eigen::VectorXd oracle_dense_ols(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.rows());
  const int j = static_cast<int>(x.cols());
  if (y.size() != n) throw ShapeError("oracle ols: length mismatch");

  // Normal equations with explicit loops.
  std::vector<std::vector<double>> a(j, std::vector<double>(j + 1, 0.0));
  for (int p = 0; p < j; ++p) {
    for (int q = 0; q < j; ++q) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += x(i, p) * x(i, q);
      a[p][q] = s;
    }
    double s = 0;
    for (int i = 0; i < n; ++i) s += x(i, p) * y(i);
    a[p][j] = s;
  }

  // Gauss-Jordan with partial pivoting.
  for (int col = 0; col < j; ++col) {
    int pivot = col;
    for (int r = col + 1; r < j; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-12) {
      throw ValidationError("oracle ols: singular design matrix");
    }
    std::swap(a[pivot], a[col]);
    double d = a[col][col];
    for (int c = col; c <= j; ++c) a[col][c] /= d;
    for (int r = 0; r < j; ++r) {
      if (r == col) continue;
      double f = a[r][col];
      if (f == 0) continue;
      for (int c = col; c <= j; ++c) a[r][c] -= f * a[col][c];
    }
  }

  Eigen::VectorXd beta(j);
  for (int p = 0; p < j; ++p) beta[p] = a[p][j];
  return beta;
}

}  // namespace agropanel
