// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "agropanel/grid.hpp"
#include "agropanel/tables.hpp"

namespace agropanel {

enum class InterpMethod { nearest, knn_idw, radius_idw };

InterpMethod parse_interp_method(const std::string& s);

struct InterpSpec {
  InterpMethod method = InterpMethod::knn_idw;
  int k = 5;            // knn_idw
  double radius = 1.0;  // radius_idw, degrees of arc
  double power = 1.0;   // inverse-distance exponent

  void validate() const;
};

struct InterpResult {
  std::vector<double> values;  // NaN where a target has no stations in range
  int n_missing = 0;
};

/// Interpolates station observations of (date, variable) at each target.
/// Distances are great-circle; a target within 1 m of a station returns that
/// station's value exactly. radius_idw yields a missing value (not an error)
/// for targets with no station in range.
InterpResult interpolate_points(const StationTable& stations,
                                const std::vector<LatLon>& targets,
                                const std::string& date, WeatherVar variable,
                                const InterpSpec& spec);

/// interpolate_points at every cell center; missing values become nodata.
Grid interpolate_to_grid(const StationTable& stations, const Grid& header,
                         const std::string& date, WeatherVar variable,
                         const InterpSpec& spec);

struct InfuseResult {
  GridStack stack;
  int n_flagged_cells = 0;  // ratio infusion: cells with zero daily total
};

/// Two-step temperature infusion: removes the stack's own monthly mean per
/// cell and adds the reference monthly mean, so the output's monthly mean
/// matches the reference while daily anomalies are preserved.
GridStack anomaly_infuse_temperature(const GridStack& daily,
                                     const Grid& reference_monthly);

/// Rescales daily precipitation so per-cell totals match the reference
/// monthly total. Cells with zero daily total stay all-zero (no invented
/// rainfall) and are counted in the result flag.
InfuseResult ratio_infuse_precipitation(const GridStack& daily,
                                        const Grid& reference_monthly_total);

}  // namespace agropanel
