// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agropanel/geo.hpp"
#include "agropanel/grid.hpp"

namespace agropanel {

enum class WeatherVar { tmax, tmin, ppt };

WeatherVar parse_weather_var(const std::string& s);
std::string to_string(WeatherVar v);

/// Point observations from weather stations.
struct StationTable {
  struct Record {
    std::string station_id;
    double lat = 0.0;
    double lon = 0.0;
    std::string date;  // ISO yyyy-mm-dd
    WeatherVar variable = WeatherVar::tmax;
    double value = 0.0;
  };
  std::vector<Record> records;

  void validate() const;
};

StationTable read_stations_csv(const std::string& path);
void write_stations_csv(const StationTable& table, const std::string& path);

/// Administrative units defined as sparse lists of grid-cell weights.
struct AdminUnits {
  struct Unit {
    std::string unit_id;
    std::optional<LatLon> centroid;
    std::vector<std::pair<int, double>> cell_weights;  // (cell_index, weight)
  };
  std::vector<Unit> units;

  /// Checks cell bounds against `grid` and computes cell-weighted centroids
  /// for units that have coverage.
  void bind_grid(const Grid& grid);

  void validate() const;
};

/// `unit_id,cell_index,weight` triplets; rows grouped by first appearance.
AdminUnits read_admin_weights_csv(const std::string& path);
void write_admin_weights_csv(const AdminUnits& units, const std::string& path);

/// Unit-by-year panel with named real-valued regressor columns.
struct PanelTable {
  std::vector<std::string> unit_ids;  // one entry per row
  std::vector<int> years;
  std::vector<double> y;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // data[col][row]

  std::size_t n_rows() const { return unit_ids.size(); }
  int column(const std::string& name) const;
  const std::vector<double>& col(const std::string& name) const;
  std::vector<double>& add_column(const std::string& name);
  std::vector<std::string> distinct_units() const;

  void validate() const;
};

PanelTable read_panel_csv(const std::string& path);
void write_panel_csv(const PanelTable& table, const std::string& path);

}  // namespace agropanel
