// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace agropanel {

/// Intra-day reconstruction parameters. Daily Tmin is anchored at tmin_hour
/// and Tmax at tmax_hour, with half-cosine segments between consecutive
/// anchors.
struct SineConfig {
  int step_minutes = 15;
  double tmin_hour = 6.0;
  double tmax_hour = 15.0;

  void validate() const;
};

/// Temperature bin layout: K = (hi - lo) / width left-closed intervals.
/// With bottom/top coding, out-of-range temperatures are clamped into the
/// end bins so exposure mass is conserved.
struct BinGrid {
  double lo = 0.0;
  double hi = 40.0;
  double width = 1.0;
  bool bottom_code = true;
  bool top_code = true;

  int n_bins() const;
  double edge(int k) const { return lo + k * width; }
  double midpoint(int k) const { return lo + (k + 0.5) * width; }
  void validate() const;
};

/// Regular samples of reconstructed temperature. Nodes sit at multiples of
/// step_minutes including both endpoints, so a series covering D whole days
/// has D*1440/step + 1 nodes.
struct TemperatureSeries {
  int step_minutes = 15;
  std::vector<double> values;

  double duration_days() const {
    return (static_cast<double>(values.size()) - 1.0) * step_minutes / 1440.0;
  }
};

/// Time spent (days) in each temperature bin over one unit-period.
struct ExposureBins {
  std::string unit_id;
  std::string period;
  std::vector<double> z;
  double season_length = 0.0;  // days

  double total() const;
  void validate() const;
};

/// Reconstructs an intra-day series through daily (tmin, tmax) anchors.
/// The first pre-Tmin and last post-Tmax stretches extend the nearest anchor
/// flat. Throws when tmax < tmin on any day, naming the day.
TemperatureSeries sine_series(const std::vector<double>& tmin_seq,
                              const std::vector<double>& tmax_seq,
                              const SineConfig& config = {});

/// Histograms a series into exposure days per bin. Each node except the last
/// accounts for the following step_minutes interval, so the bins sum to the
/// series duration exactly.
ExposureBins bin_exposure(const TemperatureSeries& series, const BinGrid& bins);

/// Thermal time between two thresholds (degC*days): clamped-ramp transform of
/// the series integrated by the trapezoid rule on the sample grid. h_hi may
/// be +infinity.
double degree_days_exact(const TemperatureSeries& series, double h_lo,
                         double h_hi);

/// Degree days approximated from exposure bins with midpoint weighting.
double degree_days_from_bins(const ExposureBins& bins, const BinGrid& grid,
                             double h_lo, double h_hi);

/// Bins CSV: `unit_id,year,z_0,...,z_{K-1}`.
struct BinsTable {
  int n_bins = 0;
  std::vector<ExposureBins> rows;
};

BinsTable read_bins_csv(const std::string& path);
void write_bins_csv(const BinsTable& table, const std::string& path);

}  // namespace agropanel
