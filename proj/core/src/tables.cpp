// SPDX-License-Identifier: Apache-2.0
#include "agropanel/tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"

namespace agropanel {

WeatherVar parse_weather_var(const std::string& s) {
  if (s == "tmax") return WeatherVar::tmax;
  if (s == "tmin") return WeatherVar::tmin;
  if (s == "ppt") return WeatherVar::ppt;
  throw ValidationError("unknown weather variable '" + s +
                        "' (expected tmax, tmin or ppt)");
}

std::string to_string(WeatherVar v) {
  switch (v) {
    case WeatherVar::tmax: return "tmax";
    case WeatherVar::tmin: return "tmin";
    case WeatherVar::ppt: return "ppt";
  }
  return "?";
}

void StationTable::validate() const {
  std::set<std::tuple<std::string, std::string, WeatherVar>> seen;
  // (station, date) -> (tmin, tmax) for the cross-variable check
  std::map<std::pair<std::string, std::string>, std::pair<double, double>>
      minmax;
  for (const auto& r : records) {
    if (r.lat < -90 || r.lat > 90) {
      throw ValidationError("station " + r.station_id + ": lat out of range");
    }
    if (r.lon < -180 || r.lon > 180) {
      throw ValidationError("station " + r.station_id + ": lon out of range");
    }
    if (!seen.insert({r.station_id, r.date, r.variable}).second) {
      throw ValidationError("duplicate station record (" + r.station_id + "," +
                            r.date + "," + to_string(r.variable) + ")");
    }
    if (r.variable == WeatherVar::ppt && r.value < 0) {
      throw ValidationError("station " + r.station_id + " " + r.date +
                            ": negative precipitation");
    }
    if (r.variable == WeatherVar::tmin || r.variable == WeatherVar::tmax) {
      auto& mm = minmax.try_emplace({r.station_id, r.date},
                                    std::pair<double, double>{
                                        -std::numeric_limits<double>::infinity(),
                                        std::numeric_limits<double>::infinity()})
                     .first->second;
      if (r.variable == WeatherVar::tmin) mm.first = r.value;
      else mm.second = r.value;
      if (mm.first > mm.second) {
        throw ValidationError("station " + r.station_id + " " + r.date +
                              ": tmin > tmax");
      }
    }
  }
}

StationTable read_stations_csv(const std::string& path) {
  auto t = csv::read_file(path);
  const std::vector<std::string> want = {"station_id", "lat",      "lon",
                                         "date",       "variable", "value"};
  if (t.header != want) {
    throw ParseError(path +
                     ": header must be station_id,lat,lon,date,variable,value");
  }
  StationTable st;
  st.records.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    StationTable::Record r;
    r.station_id = row[0];
    r.lat = csv::parse_double(row[1], path);
    r.lon = csv::parse_double(row[2], path);
    r.date = row[3];
    r.variable = parse_weather_var(row[4]);
    r.value = csv::parse_double(row[5], path);
    st.records.push_back(std::move(r));
  }
  st.validate();
  return st;
}

void write_stations_csv(const StationTable& table, const std::string& path) {
  csv::Table t;
  t.header = {"station_id", "lat", "lon", "date", "variable", "value"};
  for (const auto& r : table.records) {
    t.rows.push_back({r.station_id, csv::format_double(r.lat),
                      csv::format_double(r.lon), r.date, to_string(r.variable),
                      csv::format_double(r.value)});
  }
  csv::write_file(path, t);
}

void AdminUnits::bind_grid(const Grid& grid) {
  for (auto& u : units) {
    double wsum = 0, lat = 0, lon = 0;
    for (auto& [cell, w] : u.cell_weights) {
      if (cell < 0 || static_cast<std::size_t>(cell) >= grid.size()) {
        throw ValidationError("unit " + u.unit_id + ": cell index " +
                              std::to_string(cell) + " out of grid bounds");
      }
      LatLon c = grid.cell_center(cell / grid.ncols, cell % grid.ncols);
      lat += w * c.lat;
      lon += w * c.lon;
      wsum += w;
    }
    if (wsum > 0) u.centroid = LatLon{lat / wsum, lon / wsum};
  }
}

void AdminUnits::validate() const {
  std::set<std::string> ids;
  for (const auto& u : units) {
    if (!ids.insert(u.unit_id).second) {
      throw ValidationError("duplicate unit_id " + u.unit_id);
    }
    double sum = 0;
    for (const auto& [cell, w] : u.cell_weights) {
      if (w < 0) {
        throw ValidationError("unit " + u.unit_id + ": negative weight");
      }
      sum += w;
    }
    if (!u.cell_weights.empty() && std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("unit " + u.unit_id + ": weights sum to " +
                            csv::format_double(sum) + ", expected 1");
    }
  }
}

AdminUnits read_admin_weights_csv(const std::string& path) {
  auto t = csv::read_file(path);
  const std::vector<std::string> want = {"unit_id", "cell_index", "weight"};
  if (t.header != want) {
    throw ParseError(path + ": header must be unit_id,cell_index,weight");
  }
  AdminUnits au;
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    auto it = index.find(row[0]);
    if (it == index.end()) {
      it = index.emplace(row[0], au.units.size()).first;
      au.units.push_back({row[0], std::nullopt, {}});
    }
    au.units[it->second].cell_weights.emplace_back(
        static_cast<int>(csv::parse_long(row[1], path)),
        csv::parse_double(row[2], path));
  }
  au.validate();
  return au;
}

void write_admin_weights_csv(const AdminUnits& units, const std::string& path) {
  csv::Table t;
  t.header = {"unit_id", "cell_index", "weight"};
  for (const auto& u : units.units) {
    for (const auto& [cell, w] : u.cell_weights) {
      t.rows.push_back({u.unit_id, std::to_string(cell),
                        csv::format_double(w)});
    }
  }
  csv::write_file(path, t);
}

int PanelTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const std::vector<double>& PanelTable::col(const std::string& name) const {
  int i = column(name);
  if (i < 0) throw ValidationError("panel: no column named '" + name + "'");
  return data[i];
}

std::vector<double>& PanelTable::add_column(const std::string& name) {
  if (column(name) >= 0) {
    throw ValidationError("panel: column '" + name + "' already exists");
  }
  columns.push_back(name);
  data.emplace_back(n_rows(), 0.0);
  return data.back();
}

std::vector<std::string> PanelTable::distinct_units() const {
  std::vector<std::string> out = unit_ids;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void PanelTable::validate() const {
  if (years.size() != n_rows() || y.size() != n_rows()) {
    throw ValidationError("panel: ragged key columns");
  }
  for (const auto& c : data) {
    if (c.size() != n_rows()) throw ValidationError("panel: ragged column");
  }
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t i = 0; i < n_rows(); ++i) {
    if (!seen.insert({unit_ids[i], years[i]}).second) {
      throw ValidationError("duplicate panel key (" + unit_ids[i] + "," +
                            std::to_string(years[i]) + ")");
    }
  }
}

PanelTable read_panel_csv(const std::string& path) {
  auto t = csv::read_file(path);
  if (t.header.size() < 3 || t.header[0] != "unit_id" ||
      t.header[1] != "year" || t.header[2] != "y") {
    throw ParseError(path + ": header must start with unit_id,year,y");
  }
  PanelTable p;
  for (std::size_t j = 3; j < t.header.size(); ++j) {
    p.columns.push_back(t.header[j]);
    p.data.emplace_back();
  }
  for (const auto& row : t.rows) {
    p.unit_ids.push_back(row[0]);
    p.years.push_back(static_cast<int>(csv::parse_long(row[1], path)));
    p.y.push_back(csv::parse_double(row[2], path));
    for (std::size_t j = 3; j < row.size(); ++j) {
      p.data[j - 3].push_back(csv::parse_double(row[j], path));
    }
  }
  p.validate();
  return p;
}

void write_panel_csv(const PanelTable& table, const std::string& path) {
  csv::Table t;
  t.header = {"unit_id", "year", "y"};
  for (const auto& c : table.columns) t.header.push_back(c);
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    std::vector<std::string> row = {table.unit_ids[i],
                                    std::to_string(table.years[i]),
                                    csv::format_double(table.y[i])};
    for (const auto& c : table.data) row.push_back(csv::format_double(c[i]));
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

}  // namespace agropanel
