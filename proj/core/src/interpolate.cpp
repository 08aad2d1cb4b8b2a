// SPDX-License-Identifier: Apache-2.0
#include "agropanel/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "agropanel/errors.hpp"

namespace agropanel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCoincidentKm = 0.001;  // 1 m

struct Candidate {
  double dist_km;
  double value;
  const std::string* id;
};

}  // namespace

InterpMethod parse_interp_method(const std::string& s) {
  if (s == "nearest") return InterpMethod::nearest;
  if (s == "knn" || s == "knn_idw") return InterpMethod::knn_idw;
  if (s == "radius" || s == "radius_idw") return InterpMethod::radius_idw;
  throw ValidationError("unknown interpolation method '" + s + "'");
}

void InterpSpec::validate() const {
  if (k < 1) throw ValidationError("interp: k must be >= 1");
  if (!(radius > 0)) throw ValidationError("interp: radius must be > 0");
  if (!(power > 0)) throw ValidationError("interp: power must be > 0");
}

InterpResult interpolate_points(const StationTable& stations,
                                const std::vector<LatLon>& targets,
                                const std::string& date, WeatherVar variable,
                                const InterpSpec& spec) {
  spec.validate();
  std::vector<const StationTable::Record*> pool;
  for (const auto& r : stations.records) {
    if (r.date == date && r.variable == variable) pool.push_back(&r);
  }
  if (pool.empty()) {
    throw ValidationError("no station observations for " + to_string(variable) +
                          " on " + date);
  }

  const double radius_km = spec.radius * kKmPerDegree;
  InterpResult out;
  out.values.reserve(targets.size());

  std::vector<Candidate> cand;
  cand.reserve(pool.size());
  for (const auto& target : targets) {
    cand.clear();
    for (const auto* r : pool) {
      cand.push_back({haversine_km(target.lat, target.lon, r->lat, r->lon),
                      r->value, &r->station_id});
    }
    // Deterministic: distance ties broken by smallest station_id.
    auto closer = [](const Candidate& a, const Candidate& b) {
      return a.dist_km != b.dist_km ? a.dist_km < b.dist_km : *a.id < *b.id;
    };

    auto nearest = *std::min_element(cand.begin(), cand.end(), closer);
    if (nearest.dist_km < kCoincidentKm) {
      out.values.push_back(nearest.value);
      continue;
    }

    switch (spec.method) {
      case InterpMethod::nearest:
        out.values.push_back(nearest.value);
        break;
      case InterpMethod::knn_idw: {
        std::size_t k = std::min<std::size_t>(spec.k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), closer);
        double wsum = 0, acc = 0;
        for (std::size_t i = 0; i < k; ++i) {
          double w = 1.0 / std::pow(cand[i].dist_km, spec.power);
          wsum += w;
          acc += w * cand[i].value;
        }
        out.values.push_back(acc / wsum);
        break;
      }
      case InterpMethod::radius_idw: {
        double wsum = 0, acc = 0;
        for (const auto& c : cand) {
          if (c.dist_km <= radius_km) {
            double w = 1.0 / std::pow(c.dist_km, spec.power);
            wsum += w;
            acc += w * c.value;
          }
        }
        if (wsum == 0) {
          out.values.push_back(kNaN);
          ++out.n_missing;
        } else {
          out.values.push_back(acc / wsum);
        }
        break;
      }
    }
  }
  return out;
}

Grid interpolate_to_grid(const StationTable& stations, const Grid& header,
                         const std::string& date, WeatherVar variable,
                         const InterpSpec& spec) {
  std::vector<LatLon> centers;
  centers.reserve(header.size());
  for (int r = 0; r < header.nrows; ++r) {
    for (int c = 0; c < header.ncols; ++c) {
      centers.push_back(header.cell_center(r, c));
    }
  }
  auto res = interpolate_points(stations, centers, date, variable, spec);
  Grid g = header.like();
  for (std::size_t i = 0; i < res.values.size(); ++i) {
    g.values[i] = std::isnan(res.values[i]) ? g.nodata : res.values[i];
  }
  return g;
}

GridStack anomaly_infuse_temperature(const GridStack& daily,
                                     const Grid& reference_monthly) {
  daily.validate();
  reference_monthly.validate();
  if (!daily.header.same_header(reference_monthly)) {
    throw ShapeError("anomaly infusion: daily header differs from reference");
  }
  const std::size_t n = daily.header.size();
  const std::size_t t_count = daily.n_layers();
  const double nodata = daily.header.nodata;

  GridStack out = daily;
  for (std::size_t i = 0; i < n; ++i) {
    double ref = reference_monthly.values[i];
    bool missing = reference_monthly.is_nodata(ref);
    double mean = 0;
    if (!missing) {
      for (std::size_t t = 0; t < t_count; ++t) {
        double v = daily.layers[t][i];
        if (daily.header.is_nodata(v)) {
          missing = true;
          break;
        }
        mean += v;
      }
      mean /= static_cast<double>(t_count);
    }
    for (std::size_t t = 0; t < t_count; ++t) {
      out.layers[t][i] = missing ? nodata : daily.layers[t][i] - mean + ref;
    }
  }
  return out;
}

InfuseResult ratio_infuse_precipitation(const GridStack& daily,
                                        const Grid& reference_monthly_total) {
  daily.validate();
  reference_monthly_total.validate();
  if (!daily.header.same_header(reference_monthly_total)) {
    throw ShapeError("ratio infusion: daily header differs from reference");
  }
  const std::size_t n = daily.header.size();
  const std::size_t t_count = daily.n_layers();
  const double nodata = daily.header.nodata;

  InfuseResult res;
  res.stack = daily;
  for (std::size_t i = 0; i < n; ++i) {
    double ref = reference_monthly_total.values[i];
    bool missing = reference_monthly_total.is_nodata(ref);
    double total = 0;
    if (!missing) {
      for (std::size_t t = 0; t < t_count; ++t) {
        double v = daily.layers[t][i];
        if (daily.header.is_nodata(v)) {
          missing = true;
          break;
        }
        if (v < 0) {
          throw ValidationError("ratio infusion: negative precipitation at cell " +
                                std::to_string(i));
        }
        total += v;
      }
    }
    if (missing) {
      for (std::size_t t = 0; t < t_count; ++t) res.stack.layers[t][i] = nodata;
      continue;
    }
    if (total > 0) {
      double scale = ref / total;
      for (std::size_t t = 0; t < t_count; ++t) {
        res.stack.layers[t][i] = daily.layers[t][i] * scale;
      }
    } else {
      for (std::size_t t = 0; t < t_count; ++t) res.stack.layers[t][i] = 0.0;
      ++res.n_flagged_cells;
    }
  }
  return res;
}

}  // namespace agropanel
