// SPDX-License-Identifier: Apache-2.0
#include "agropanel/thermal.hpp"

#include <algorithm>
#include <cmath>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"

namespace agropanel {

void SineConfig::validate() const {
  if (step_minutes <= 0 || 1440 % step_minutes != 0) {
    throw ValidationError("sine: step_minutes must divide 1440");
  }
  if (!(tmin_hour >= 0 && tmin_hour < 24)) {
    throw ValidationError("sine: tmin_hour must lie in [0, 24)");
  }
  if (!(tmin_hour < tmax_hour && tmax_hour < 24)) {
    throw ValidationError("sine: requires tmin_hour < tmax_hour < 24");
  }
}

int BinGrid::n_bins() const {
  return static_cast<int>(std::lround((hi - lo) / width));
}

void BinGrid::validate() const {
  if (!(hi > lo)) throw ValidationError("bins: hi must exceed lo");
  if (!(width > 0)) throw ValidationError("bins: width must be > 0");
  double k = (hi - lo) / width;
  if (std::abs(k - std::lround(k)) > 1e-9) {
    throw ValidationError("bins: (hi - lo) must be a whole number of widths");
  }
}

double ExposureBins::total() const {
  double s = 0;
  for (double v : z) s += v;
  return s;
}

void ExposureBins::validate() const {
  for (double v : z) {
    if (v < 0) throw ValidationError("bins: negative exposure");
  }
  if (std::abs(total() - season_length) > 1e-9) {
    throw ValidationError("bins: exposure does not sum to season length");
  }
}

TemperatureSeries sine_series(const std::vector<double>& tmin_seq,
                              const std::vector<double>& tmax_seq,
                              const SineConfig& config) {
  config.validate();
  if (tmin_seq.empty() || tmin_seq.size() != tmax_seq.size()) {
    throw ValidationError("sine: tmin/tmax sequences must be nonempty and "
                          "equal length");
  }
  const std::size_t n_days = tmin_seq.size();
  for (std::size_t d = 0; d < n_days; ++d) {
    if (tmax_seq[d] < tmin_seq[d]) {
      throw ValidationError("sine: tmax < tmin on day " + std::to_string(d));
    }
  }

  // Anchor sequence: day-d Tmin, day-d Tmax, day-(d+1) Tmin, ...
  std::vector<double> at, av;
  at.reserve(2 * n_days);
  av.reserve(2 * n_days);
  for (std::size_t d = 0; d < n_days; ++d) {
    at.push_back(d * 1440.0 + config.tmin_hour * 60.0);
    av.push_back(tmin_seq[d]);
    at.push_back(d * 1440.0 + config.tmax_hour * 60.0);
    av.push_back(tmax_seq[d]);
  }

  const int step = config.step_minutes;
  const std::size_t n_nodes = n_days * (1440 / step) + 1;
  TemperatureSeries out;
  out.step_minutes = step;
  out.values.resize(n_nodes);

  constexpr double pi = 3.14159265358979323846;
  std::size_t seg = 0;  // index of the anchor at or before t
  for (std::size_t i = 0; i < n_nodes; ++i) {
    double t = static_cast<double>(i) * step;
    if (t <= at.front()) {
      out.values[i] = av.front();
      continue;
    }
    if (t >= at.back()) {
      out.values[i] = av.back();
      continue;
    }
    while (at[seg + 1] < t) ++seg;
    double span = at[seg + 1] - at[seg];
    double frac = (t - at[seg]) / span;
    out.values[i] =
        av[seg] + (av[seg + 1] - av[seg]) * 0.5 * (1.0 - std::cos(pi * frac));
  }
  return out;
}

ExposureBins bin_exposure(const TemperatureSeries& series,
                          const BinGrid& bins) {
  bins.validate();
  if (series.values.size() < 2) {
    throw ValidationError("bin_exposure: series must span at least one step");
  }
  const int k_count = bins.n_bins();
  std::vector<long> counts(k_count, 0);
  const std::size_t n = series.values.size() - 1;  // last node closes the grid
  for (std::size_t i = 0; i < n; ++i) {
    double v = series.values[i];
    int k;
    if (v < bins.lo) {
      if (!bins.bottom_code) {
        throw ValidationError("bin_exposure: temperature below range with "
                              "bottom coding disabled");
      }
      k = 0;
    } else if (v >= bins.hi) {
      if (!bins.top_code) {
        throw ValidationError("bin_exposure: temperature above range with "
                              "top coding disabled");
      }
      k = k_count - 1;
    } else {
      k = static_cast<int>((v - bins.lo) / bins.width);
      if (k >= k_count) k = k_count - 1;  // v == hi after rounding
    }
    ++counts[k];
  }
  ExposureBins out;
  out.z.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    out.z[k] = static_cast<double>(counts[k] * series.step_minutes) / 1440.0;
  }
  out.season_length = static_cast<double>(n * series.step_minutes) / 1440.0;
  return out;
}

namespace {

double clamped_ramp(double h, double h_lo, double h_hi) {
  if (h > h_hi) return h_hi - h_lo;
  if (h > h_lo) return h - h_lo;
  return 0.0;
}

}  // namespace

double degree_days_exact(const TemperatureSeries& series, double h_lo,
                         double h_hi) {
  if (!(h_lo < h_hi)) {
    throw ValidationError("degree days: lower threshold must be below upper");
  }
  if (series.values.size() < 2) return 0.0;
  double acc = 0;
  double prev = clamped_ramp(series.values[0], h_lo, h_hi);
  for (std::size_t i = 1; i < series.values.size(); ++i) {
    double cur = clamped_ramp(series.values[i], h_lo, h_hi);
    acc += 0.5 * (prev + cur);
    prev = cur;
  }
  return acc * series.step_minutes / 1440.0;
}

double degree_days_from_bins(const ExposureBins& bins, const BinGrid& grid,
                             double h_lo, double h_hi) {
  grid.validate();
  if (!(h_lo < h_hi)) {
    throw ValidationError("degree days: lower threshold must be below upper");
  }
  if (static_cast<int>(bins.z.size()) != grid.n_bins()) {
    throw ShapeError("degree days: bin count does not match grid");
  }
  double acc = 0;
  for (std::size_t k = 0; k < bins.z.size(); ++k) {
    double m = std::clamp(grid.midpoint(static_cast<int>(k)), h_lo, h_hi);
    acc += bins.z[k] * (m - h_lo);
  }
  return acc;
}

BinsTable read_bins_csv(const std::string& path) {
  auto t = csv::read_file(path);
  if (t.header.size() < 3 || t.header[0] != "unit_id" ||
      t.header[1] != "year") {
    throw ParseError(path + ": header must be unit_id,year,z_0,...");
  }
  BinsTable out;
  out.n_bins = static_cast<int>(t.header.size()) - 2;
  for (int k = 0; k < out.n_bins; ++k) {
    if (t.header[k + 2] != "z_" + std::to_string(k)) {
      throw ParseError(path + ": expected column z_" + std::to_string(k));
    }
  }
  for (const auto& row : t.rows) {
    ExposureBins b;
    b.unit_id = row[0];
    b.period = row[1];
    b.z.reserve(out.n_bins);
    for (int k = 0; k < out.n_bins; ++k) {
      b.z.push_back(csv::parse_double(row[k + 2], path));
    }
    b.season_length = b.total();
    out.rows.push_back(std::move(b));
  }
  return out;
}

void write_bins_csv(const BinsTable& table, const std::string& path) {
  csv::Table t;
  t.header = {"unit_id", "year"};
  for (int k = 0; k < table.n_bins; ++k) {
    t.header.push_back("z_" + std::to_string(k));
  }
  for (const auto& b : table.rows) {
    std::vector<std::string> row = {b.unit_id, b.period};
    for (double v : b.z) row.push_back(csv::format_double(v));
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

}  // namespace agropanel
